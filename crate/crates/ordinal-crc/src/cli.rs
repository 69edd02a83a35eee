//! `ordinal-crc` command-line interface.
//!
//! Exit codes: 0 success, 1 usage/config/data error, 2 infeasible
//! calibration, 3 I/O error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ordinal_crc_core::calibration::{
    calibrate_binary_prepared, calibrate_exact_prepared, jump_diagnostics_prepared, prepare,
};
use ordinal_crc_core::sets::chain;
use ordinal_crc_core::{validate_dataset, LossSpec};

use crate::error::{Error, Result};
use crate::eval::{
    alpha_for_target_size_prepared, detect_saturation, sweep_alpha_prepared, PreparedDataset, TrialConfig,
};
use crate::io::{
    centroid_csv, curve_csv, predictions_csv, read_labeled_scores, read_scores, write_atomic, write_scores,
    CalibrationFile, PredictionRow, ReportFile, WeightSource, SCHEMA_VERSION,
};
use crate::simgen::{simulate, SimConfig};

/// Tolerance on the mean set size when `--target-size` is used.
const TARGET_SIZE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(name = "ordinal-crc", version, about = "Contiguous prediction sets with conformal risk control for ordinal labels")]
pub struct Cli {
    /// Worker threads for parallel evaluation (default: all cores).
    #[arg(long, global = true, env = "ORDINAL_CRC_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample 2-D Gaussian classes and write their Bayes-posterior scores.
    Simulate(SimulateArgs),
    /// Calibrate the set threshold λ̂ on labeled scores.
    Calibrate(CalibrateArgs),
    /// Build a prediction set for every row of a scores file.
    Predict(PredictArgs),
    /// Repeated split calibration: risk and set-size statistics.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    Weighted,
    Divergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodKind {
    Exact,
    Binary,
}

#[derive(Debug, Clone, Args)]
pub struct LossArgs {
    #[arg(long, value_enum, default_value = "weighted")]
    pub loss: LossKind,
    /// `equal`, `linear` or `file:<path>` (one weight per line).
    #[arg(long, default_value = "equal")]
    pub weights: WeightSource,
}

impl LossArgs {
    fn build(&self, classes: usize) -> Result<LossSpec> {
        Ok(match self.loss {
            LossKind::Weighted => LossSpec::weighted(self.weights.load(classes)?),
            LossKind::Divergence => LossSpec::Divergence,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 2000)]
    pub per_class: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Softmax temperature applied to the Bayes log-posteriors.
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[command(flatten)]
    pub loss: LossArgs,
    #[arg(long, value_enum, default_value = "exact")]
    pub method: MethodKind,
    /// Bisection tolerance for `--method binary`.
    #[arg(long, default_value_t = 1e-4)]
    pub delta: f64,
    /// Output JSON (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// Threshold in [0, 1].
    #[arg(long, required_unless_present = "calibration", conflicts_with = "calibration")]
    pub lambda: Option<f64>,
    /// Calibration JSON; supplies λ̂ and the loss.
    #[arg(long, conflicts_with_all = ["loss", "weights"])]
    pub calibration: Option<PathBuf>,
    #[command(flatten)]
    pub loss: LossArgs,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// Comma-separated risk levels.
    #[arg(long, value_delimiter = ',', required_unless_present = "target_size", conflicts_with = "target_size")]
    pub alpha: Vec<f64>,
    /// Pick α so the mean test set size matches this value instead.
    #[arg(long)]
    pub target_size: Option<f64>,
    #[command(flatten)]
    pub loss: LossArgs,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Fraction of rows used for calibration.
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// `alpha,mean_risk,risk_std_error,mean_size` CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// `alpha,centroid,count` CSV.
    #[arg(long)]
    pub centroids: Option<PathBuf>,
}

fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be in (0, 1), got {value}")))
    }
}

/// Writes `bytes` to `out`, or hands them back for stdout.
fn emit(out: Option<&Path>, bytes: Vec<u8>) -> Result<Option<Vec<u8>>> {
    match out {
        Some(path) => write_atomic(path, &bytes).map(|()| None),
        None => Ok(Some(bytes)),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Option<Vec<u8>>> {
    if args.classes < 2 {
        return Err(Error::Config(format!("--classes must be at least 2, got {}", args.classes)));
    }
    let rows = simulate(&SimConfig {
        classes: args.classes,
        per_class: args.per_class,
        seed: args.seed,
        temperature: args.temperature,
    })?;
    write_scores(&args.out, &rows)?;
    Ok(None)
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<Option<Vec<u8>>> {
    check_open_unit("alpha", args.alpha)?;
    if args.method == MethodKind::Binary && !(args.delta > 0.0 && args.delta.is_finite()) {
        return Err(Error::Config(format!("delta must be positive, got {}", args.delta)));
    }
    let rows = read_labeled_scores(&args.scores)?;
    let classes = validate_dataset(&rows)?;
    let loss = args.loss.build(classes)?;
    let prepared = prepare(&rows, &loss)?;
    let refs: Vec<_> = prepared.iter().collect();
    let result = match args.method {
        MethodKind::Exact => calibrate_exact_prepared(&refs, args.alpha, &loss)?,
        MethodKind::Binary => calibrate_binary_prepared(&refs, args.alpha, &loss, args.delta)?,
    };
    let file = CalibrationFile::new(&result, classes, &jump_diagnostics_prepared(&refs));
    let mut bytes = serde_json::to_vec_pretty(&file).expect("calibration file serializes");
    bytes.push(b'\n');
    emit(args.out.as_deref(), bytes)
}

fn cmd_predict(args: &PredictArgs) -> Result<Option<Vec<u8>>> {
    let table = read_scores(&args.scores)?;
    let classes = table.classes();
    let (lambda, loss) = match &args.calibration {
        Some(path) => {
            let cal = CalibrationFile::read(path)?;
            if cal.classes != classes {
                return Err(ordinal_crc_core::Error::DimensionMismatch { expected: cal.classes, found: classes }.into());
            }
            (cal.lambda_hat, cal.loss)
        }
        None => (args.lambda.expect("clap requires --lambda"), args.loss.build(classes)?),
    };
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda must be in [0, 1], got {lambda}")));
    }
    let rows = table
        .scores
        .iter()
        .map(|s| {
            let c = chain(s, &loss)?;
            Ok(PredictionRow { set: c.select(lambda), point_prediction: c.point_prediction() })
        })
        .collect::<Result<Vec<_>>>()?;
    emit(args.out.as_deref(), predictions_csv(&rows))
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<Option<Vec<u8>>> {
    for &alpha in &args.alpha {
        check_open_unit("alpha", alpha)?;
    }
    check_open_unit("split", args.split)?;
    if args.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let rows = read_labeled_scores(&args.scores)?;
    let classes = validate_dataset(&rows)?;
    let loss = args.loss.build(classes)?;
    let data = PreparedDataset::new(&rows, &loss)?;
    let config = TrialConfig { trials: args.trials, split: args.split, seed: args.seed };

    let alphas = match args.target_size {
        Some(target) => vec![alpha_for_target_size_prepared(&data, target, &config, TARGET_SIZE_TOLERANCE)?],
        None => args.alpha.clone(),
    };
    let reports = sweep_alpha_prepared(&data, &alphas, &config)?;
    let saturation_index = detect_saturation(&reports);
    let report = ReportFile {
        schema_version: SCHEMA_VERSION,
        loss,
        classes,
        trials: args.trials,
        split: args.split,
        seed: args.seed,
        saturation_index,
        saturated: saturation_index.is_some(),
        target_size: args.target_size,
        reports,
    };
    report.write(&args.out)?;
    if let Some(path) = &args.curve {
        write_atomic(path, &curve_csv(&report.reports))?;
    }
    if let Some(path) = &args.centroids {
        write_atomic(path, &centroid_csv(&report.reports))?;
    }
    Ok(None)
}

/// Runs a parsed command, writing stdout output to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        pool = pool.num_threads(threads);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let output = pool.install(|| match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    })?;
    if let Some(bytes) = output {
        stdout.write_all(&bytes).map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
/// Errors are reported on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
