use ordinal_crc_core::calibration::{
    calibrate_binary_prepared, calibrate_exact_prepared, jump_diagnostics_prepared, prepare, PreparedRow,
};
use ordinal_crc_core::losses::{divergence_loss, interval_risk_divergence, interval_risk_weighted, weighted_loss};
use ordinal_crc_core::oracles::{calibrate_grid, satisfies_constraint, verify_non_domination};
use ordinal_crc_core::sets::{chain, divergence_chain, weighted_chain, ChainStatistic};
use ordinal_crc_core::{
    build_set, point_prediction, LabeledScore, LossSpec, PredictionSet, ScoreVector, WeightScheme,
};
use proptest::prelude::*;

fn scores(max_classes: usize) -> impl Strategy<Value = ScoreVector> {
    prop::collection::vec(0.001f64..1.0, 2..=max_classes).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        ScoreVector::new(raw.into_iter().map(|v| v / total).collect()).unwrap()
    })
}

fn weights_for(classes: usize) -> impl Strategy<Value = WeightScheme> {
    prop::collection::vec(0.05f64..1.0, classes).prop_map(|w| WeightScheme::new(w).unwrap())
}

fn scores_and_loss(max_classes: usize) -> impl Strategy<Value = (ScoreVector, LossSpec)> {
    scores(max_classes).prop_flat_map(|s| {
        let k = s.classes();
        prop_oneof![
            Just(LossSpec::Divergence),
            Just(LossSpec::weighted(WeightScheme::equal(k))),
            Just(LossSpec::weighted(WeightScheme::linear(k).unwrap())),
            weights_for(k).prop_map(LossSpec::weighted),
        ]
        .prop_map(move |loss| (s.clone(), loss))
    })
}

fn all_sets(classes: usize) -> Vec<PredictionSet> {
    (0..classes)
        .flat_map(|l| (l..classes).map(move |u| PredictionSet::new(l, u).unwrap()))
        .collect()
}

fn dataset(max_classes: usize, max_rows: usize) -> impl Strategy<Value = (Vec<LabeledScore>, LossSpec)> {
    (2..=max_classes, 1..=max_rows).prop_flat_map(|(k, n)| {
        let row = (prop::collection::vec(0.001f64..1.0, k), 0..k).prop_map(|(raw, label)| {
            let total: f64 = raw.iter().sum();
            LabeledScore::new(ScoreVector::new(raw.into_iter().map(|v| v / total).collect()).unwrap(), label)
                .unwrap()
        });
        let loss = prop_oneof![
            Just(LossSpec::Divergence),
            Just(LossSpec::weighted(WeightScheme::equal(k))),
            Just(LossSpec::weighted(WeightScheme::linear(k).unwrap())),
        ];
        (prop::collection::vec(row, n), loss)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn losses_and_risks_stay_in_unit_interval((s, loss) in scores_and_loss(8)) {
        let k = s.classes();
        for set in all_sets(k) {
            for y in 0..k {
                let l = match &loss {
                    LossSpec::Weighted { weights } => weighted_loss(y, &set, weights).unwrap(),
                    LossSpec::Divergence => divergence_loss(y, &set, k).unwrap(),
                };
                prop_assert!((0.0..=1.0).contains(&l));
            }
            let r = match &loss {
                LossSpec::Weighted { weights } => interval_risk_weighted(&s, weights, &set).unwrap(),
                LossSpec::Divergence => interval_risk_divergence(&s, &set).unwrap(),
            };
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn boundary_adjustment_identities(s in scores(10)) {
        let k = s.classes();
        let p = s.as_slice();
        let scale = (k - 1) as f64;
        for set in all_sets(k) {
            let (l, u) = (set.lower(), set.upper());
            let r = interval_risk_divergence(&s, &set).unwrap();
            if l < u {
                let shrunk_low = PredictionSet::new(l + 1, u).unwrap();
                let d = scale * (interval_risk_divergence(&s, &shrunk_low).unwrap() - r);
                prop_assert!((d - p[..=l].iter().sum::<f64>()).abs() < 1e-12);
                let shrunk_high = PredictionSet::new(l, u - 1).unwrap();
                let d = scale * (interval_risk_divergence(&s, &shrunk_high).unwrap() - r);
                prop_assert!((d - p[u..].iter().sum::<f64>()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn greedy_chain_shape((s, loss) in scores_and_loss(10)) {
        let c = chain(&s, &loss).unwrap();
        let k = s.classes();
        prop_assert_eq!(c.steps().len(), k);
        prop_assert_eq!(c.steps()[0].width(), 1);
        prop_assert!(c.steps()[k - 1].is_full(k));
        prop_assert_eq!(c.point_prediction(), point_prediction(&s, &loss).unwrap());
        for w in c.steps().windows(2) {
            prop_assert!(w[0].is_subset_of(&w[1]));
            prop_assert_eq!(w[0].width() + 1, w[1].width());
        }
        for w in c.stats().windows(2) {
            match c.statistic() {
                ChainStatistic::CoveredMass => prop_assert!(w[0] <= w[1]),
                ChainStatistic::ResidualRisk => prop_assert!(w[0] >= w[1]),
            }
        }
    }

    #[test]
    fn each_greedy_step_takes_the_better_neighbor((s, loss) in scores_and_loss(10)) {
        let p = s.as_slice();
        let k = s.classes();
        match &loss {
            LossSpec::Weighted { weights } => {
                let c = weighted_chain(&s, weights).unwrap();
                let sc = |i: usize| weights.weight(i) * p[i];
                for w in c.steps().windows(2) {
                    let left = (w[0].lower() > 0).then(|| sc(w[0].lower() - 1));
                    let right = (w[0].upper() + 1 < k).then(|| sc(w[0].upper() + 1));
                    let went_lower = w[1].lower() < w[0].lower();
                    match (left, right) {
                        (Some(a), Some(b)) => prop_assert_eq!(went_lower, a > b),
                        (Some(_), None) => prop_assert!(went_lower),
                        _ => prop_assert!(!went_lower),
                    }
                }
            }
            LossSpec::Divergence => {
                let c = divergence_chain(&s);
                for w in c.steps().windows(2) {
                    let head = (w[0].lower() > 0).then(|| p[..w[0].lower()].iter().sum::<f64>());
                    let tail = (w[0].upper() + 1 < k).then(|| p[w[0].upper() + 1..].iter().sum::<f64>());
                    let went_lower = w[1].lower() < w[0].lower();
                    match (head, tail) {
                        // Prefix sums and direct sums can differ in the last ulp.
                        (Some(a), Some(b)) if (a - b).abs() > 1e-12 => prop_assert_eq!(went_lower, a > b),
                        (Some(_), None) => prop_assert!(went_lower),
                        (None, _) => prop_assert!(!went_lower),
                        _ => {}
                    }
                }
            }
        }
    }

    #[test]
    fn built_sets_are_contiguous_cover_point_prediction_and_nest(
        (s, loss) in scores_and_loss(10),
        mut lambdas in prop::collection::vec(0.0f64..=1.0, 1..16),
    ) {
        lambdas.extend([0.0, 1.0]);
        lambdas.sort_by(f64::total_cmp);
        let yhat = point_prediction(&s, &loss).unwrap();
        let sets: Vec<PredictionSet> = lambdas.iter().map(|&l| build_set(&s, &loss, l).unwrap()).collect();
        for (set, &lambda) in sets.iter().zip(&lambdas) {
            prop_assert!(set.lower() <= set.upper());
            prop_assert!(set.contains(yhat));
            let meets = satisfies_constraint(&s, &loss, set, lambda);
            prop_assert!(meets || set.is_full(s.classes()));
        }
        // Larger λ, smaller set.
        for w in sets.windows(2) {
            prop_assert!(w[1].is_subset_of(&w[0]));
        }
    }

    #[test]
    fn loss_step_functions_match_the_chain((s, loss) in scores_and_loss(10), label_seed in 0usize..100,
                                           lambdas in prop::collection::vec(0.0f64..=1.0, 8)) {
        let row = LabeledScore::new(s.clone(), label_seed % s.classes()).unwrap();
        let prepared = PreparedRow::new(&row, &loss).unwrap();
        let b = &prepared.breakpoints;
        prop_assert_eq!(b.loss_at(0.0), 0.0);
        for w in b.thresholds().windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        for w in b.losses().windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        for &t in b.thresholds() {
            prop_assert!((0.0..=1.0).contains(&t));
            prop_assert_eq!(b.loss_at(t), prepared.loss_at(t, &loss));
            if t > 0.0 {
                prop_assert_eq!(b.loss_at(t.next_down()), prepared.loss_at(t.next_down(), &loss));
            }
        }
        for l in lambdas {
            prop_assert_eq!(b.loss_at(l), prepared.loss_at(l, &loss));
        }
    }

    #[test]
    fn weight_normalization_is_idempotent(raw in prop::collection::vec(0.0f64..10.0, 1..10)) {
        prop_assume!(raw.iter().any(|&w| w > 0.0));
        let once = WeightScheme::new(raw).unwrap();
        let twice = WeightScheme::new(once.as_slice().to_vec()).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once.as_slice().iter().copied().fold(0.0, f64::max), 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn exact_and_binary_calibration_agree((rows, loss) in dataset(10, 200), alpha in 0.02f64..0.6) {
        let prepared = prepare(&rows, &loss).unwrap();
        let refs: Vec<&PreparedRow> = prepared.iter().collect();
        let n = rows.len();
        if (n as f64 + 1.0) * alpha < 1.0 {
            prop_assert!(calibrate_exact_prepared(&refs, alpha, &loss).is_err());
            return Ok(());
        }
        let exact = calibrate_exact_prepared(&refs, alpha, &loss).unwrap();
        let binary = calibrate_binary_prepared(&refs, alpha, &loss, 1e-4).unwrap();
        prop_assert!(exact.is_feasible());
        prop_assert!(binary.is_feasible());
        prop_assert!((exact.lambda_hat - binary.lambda_hat).abs() <= 1e-4);
        prop_assert!(binary.lambda_hat <= exact.lambda_hat);

        // Independent feasibility recheck, straight from the build rule.
        let recheck: f64 = rows.iter().map(|r| {
            let set = build_set(&r.scores, &loss, exact.lambda_hat).unwrap();
            match &loss {
                LossSpec::Weighted { weights } => weighted_loss(r.label, &set, weights).unwrap(),
                LossSpec::Divergence => divergence_loss(r.label, &set, r.classes()).unwrap(),
            }
        }).sum();
        prop_assert!(recheck <= (n as f64 + 1.0) * alpha - 1.0);

        // Nothing above λ̂ (short of 1) is feasible at the next breakpoint.
        if exact.lambda_hat < 1.0 {
            let above = exact.lambda_hat.next_up();
            let sum: f64 = refs.iter().map(|r| r.loss_at(above, &loss)).sum();
            prop_assert!(sum > (n as f64 + 1.0) * alpha - 1.0);
        }
    }

    #[test]
    fn grid_oracle_brackets_exact((rows, loss) in dataset(6, 60), alpha in 0.05f64..0.6) {
        let n = rows.len();
        prop_assume!((n as f64 + 1.0) * alpha >= 1.0);
        let exact = ordinal_crc_core::calibrate_exact(&rows, alpha, &loss).unwrap();
        let grid = calibrate_grid(&rows, alpha, &loss, 1e-3).unwrap();
        prop_assert!(exact.lambda_hat >= grid - 1e-3 && exact.lambda_hat <= grid + 1e-3);
    }

    #[test]
    fn empirical_jumps_respect_the_collision_bound((rows, loss) in dataset(10, 200)) {
        let prepared = prepare(&rows, &loss).unwrap();
        let refs: Vec<&PreparedRow> = prepared.iter().collect();
        let d = jump_diagnostics_prepared(&refs);
        prop_assert!(d.max_empirical_jump <= d.max_collision as f64 / rows.len() as f64 + 1e-12);
        prop_assert!(d.satisfies_jump_bound(1.0));
    }

    #[test]
    fn greedy_chains_are_not_dominated((s, loss) in scores_and_loss(8)) {
        prop_assert!(verify_non_domination(&s, &loss).unwrap());
    }
}
