use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("mass-sum violation in {context}: total {total:.17} deviates from 1")]
    MassSum { context: String, total: f64 },

    #[error("atom `{atom}` is not centered (|mean| = {deviation:e}); call center() first")]
    NotCentered { atom: String, deviation: f64 },

    #[error("transport solver exceeded the pivot limit of {0}")]
    PivotLimit(usize),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("atom `{atom}` would hold {cells} refined cells (limit {limit})")]
    SupportGrowth {
        atom: String,
        cells: usize,
        limit: usize,
    },
}

impl Error {
    /// True for errors caused by the caller's data rather than by a computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Input(_) | Error::Dimension { .. } | Error::MassSum { .. } | Error::NotCentered { .. }
        )
    }
}
