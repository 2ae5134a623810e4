use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("unbalanced panel, missing region-year pairs: {}", format_pairs(.missing))]
    UnbalancedPanel { missing: Vec<(String, i32)> },
    #[error("non-positive denominator `{field}` for {key}")]
    NonPositiveDenominator { field: String, key: String },
    #[error("invalid value: {0}")]
    InvalidInput(String),
    #[error("at least two regions are required")]
    SingleRegion,
    #[error("regions `{0}` and `{1}` share coordinates")]
    CoincidentCoordinates(String, String),
    #[error("unknown region `{0}`")]
    UnknownRegion(String),
    #[error("self pair for region `{0}`")]
    SelfPair(String),
    #[error("rank-deficient regressors, dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error(
        "optimizer stopped at boundary: estimate {estimate} within tolerance of ({lower}, {upper})"
    )]
    OptimizerAtBoundary {
        estimate: f64,
        lower: f64,
        upper: f64,
    },
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("infeasible back-solve: {0}")]
    InfeasibleBackSolve(String),
    #[error("scenario key `{key}`: {message}")]
    Scenario { key: String, message: String },
}

fn format_pairs(pairs: &[(String, i32)]) -> String {
    pairs
        .iter()
        .map(|(r, y)| format!("({r}, {y})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// True for failures of the numerical routines, false for bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::DegenerateSample(_)
                | Error::DegenerateWeights(_)
                | Error::NumericalBreakdown(_)
                | Error::OptimizerAtBoundary { .. }
                | Error::SingularSystem(_)
                | Error::InfeasibleBackSolve(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
