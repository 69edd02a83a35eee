use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    EmptyDataset,
    /// A row's score vector length differs from the first row's.
    InconsistentClassCount { row: usize, expected: usize, found: usize },
    InvalidScore { row: Option<usize>, reason: &'static str },
    LabelOutOfRange { label: usize, classes: usize },
    DimensionMismatch { expected: usize, found: usize },
    /// Divergence normalization needs at least two classes.
    TooFewClasses { classes: usize },
    TooManyClasses { classes: usize, max: usize },
    InvalidWeights(&'static str),
    /// Every weighted score `h(i) * p(i)` is zero.
    NoPointPrediction,
    InvalidParameter { name: &'static str, value: f64 },
    /// `(n + 1) * alpha - B` is not met even at the full-coverage end.
    Infeasible { alpha: f64, n: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyDataset => f.write_str("empty dataset"),
            Error::InconsistentClassCount { row, expected, found } => write!(
                f,
                "inconsistent class count: row {row} has {found} scores, expected {expected}"
            ),
            Error::InvalidScore { row: Some(row), reason } => {
                write!(f, "invalid score in row {row}: {reason}")
            }
            Error::InvalidScore { row: None, reason } => write!(f, "invalid score: {reason}"),
            Error::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected} classes, found {found}")
            }
            Error::TooFewClasses { classes } => {
                write!(f, "need at least 2 classes, found {classes}")
            }
            Error::TooManyClasses { classes, max } => {
                write!(f, "{classes} classes exceeds the limit of {max}")
            }
            Error::InvalidWeights(reason) => write!(f, "invalid weights: {reason}"),
            Error::NoPointPrediction => {
                f.write_str("no admissible point prediction: all weighted scores are zero")
            }
            Error::InvalidParameter { name, value } => write!(f, "invalid {name}: {value}"),
            Error::Infeasible { alpha, n } => {
                if *alpha * (*n as f64 + 1.0) < crate::LOSS_BOUND {
                    write!(f, "infeasible: alpha below B/(n+1) (alpha={alpha}, n={n})")
                } else {
                    write!(
                        f,
                        "infeasible: calibration loss at full coverage exceeds (n+1)*alpha - B \
                         (alpha={alpha}, n={n})"
                    )
                }
            }
        }
    }
}

impl core::error::Error for Error {}
