use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: column `{0}` not found in input")]
    MissingColumn(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        /// 1-based data row (header excluded).
        row: usize,
        column: String,
        message: String,
    },

    #[error("insufficient data: {n} observations for {m} predictors (need at least {})", m + 3)]
    InsufficientData { n: usize, m: usize },

    #[error("transform error: {transform} of `{variable}` undefined at rows {rows:?}")]
    Transform {
        variable: String,
        transform: String,
        rows: Vec<usize>,
    },

    #[error("degenerate column `{0}`: zero variance")]
    DegenerateColumn(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("bandwidth error: {0}")]
    Bandwidth(String),

    #[error(
        "singular neighbourhood at location {location}: {nonzero} nonzero weights, need {required}"
    )]
    SingularNeighbourhood {
        location: usize,
        nonzero: usize,
        required: usize,
    },

    #[error("collinearity: design matrix is rank deficient; dependent columns: {}", columns.join(", "))]
    Collinearity { columns: Vec<String> },

    #[error("local singularity at {} location(s): {locations:?}", locations.len())]
    LocalSingularity { locations: Vec<usize> },

    #[error("saturated model: n - 2 - tr(S) = {0} is not positive (bandwidth too small)")]
    Saturated(f64),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("REML search did not converge: {message}")]
    NonConvergence {
        message: String,
        /// Evaluated (range, nugget proportion, restricted log-likelihood).
        trace: Vec<(f64, f64, f64)>,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("route map aborted at {stage}: {source}")]
    RouteMap {
        stage: String,
        source: Box<Error>,
        /// Completed steps, one line each.
        partial: Vec<String>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Numerical failures as opposed to bad input or usage.
    pub fn is_numerical(&self) -> bool {
        if let Error::RouteMap { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::SingularNeighbourhood { .. }
                | Error::Collinearity { .. }
                | Error::LocalSingularity { .. }
                | Error::Saturated(_)
                | Error::Optimization(_)
                | Error::NonConvergence { .. }
        )
    }
}
