//! Evaluation statistics: patient aggregation, AUROC with bootstrap
//! intervals, paired hypothesis tests, Benjamini-Hochberg adjustment and
//! integrated-gradients attribution.

mod attribution;
mod fdr;
mod hypothesis;
mod report;
mod roc;
mod table;

use std::path::PathBuf;

pub use attribution::{integrated_gradients, GradOracle};
pub use fdr::{bh_adjust, BhResult};
pub use hypothesis::{paired_t_test, permutation_test, TestMethod, TestResult};
pub use report::{evaluate, Aggregation, ComparisonReport, EvalOptions, EvalReport, ExtraPValue, IntervalReport, SummaryReport};
pub use roc::{auroc, bootstrap_ci, delong_test, ConfidenceInterval};
pub use table::{aggregate_patient, ScoreRow, ScoreTable};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("scores contain a single class; both labels are required")]
    SingleClass,
    #[error("patient {0} has tiles with different labels")]
    InconsistentLabel(String),
    #[error("score table is empty")]
    EmptyTable,
    #[error("score {0} is not a finite value in [0, 1]")]
    BadScore(f64),
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("tables do not describe the same rows: {0}")]
    MismatchedRows(String),
    #[error("variance of the statistic is zero but the compared values differ")]
    DegenerateVariance,
    #[error("bootstrap could not draw {0} two-class resamples within the redraw budget")]
    NonConvergent(usize),
    #[error("input lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("at least {0} values are required")]
    TooFewValues(usize),
    #[error("p-value {0} outside [0, 1]")]
    OutOfRangeP(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("gradient has length {actual}, expected {expected}")]
    GradientLength { expected: usize, actual: usize },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
