use thiserror::Error;

pub type Result<T> = std::result::Result<T, VitError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VitError {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear system is singular: {0}")]
    Singular(String),

    /// An iterative or extrapolated computation did not settle.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    /// The Jacobian has (numerically) dependent columns; `parameter` is the
    /// one carrying the null direction.
    #[error("rank-deficient fit: parameter `{parameter}` is not identifiable from the data")]
    RankDeficient { parameter: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("sampling grid error: {0}")]
    Grid(String),

    /// The propagated spectrum reaches the edge of the sampled band.
    #[error("band coverage: {0}")]
    BandCoverage(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl VitError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        VitError::Domain(msg.into())
    }

    /// True for errors caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            VitError::NonConvergence(_)
                | VitError::RankDeficient { .. }
                | VitError::Singular(_)
                | VitError::BandCoverage(_)
        )
    }
}

impl From<std::io::Error> for VitError {
    fn from(e: std::io::Error) -> Self {
        VitError::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(VitError::domain(format!("{name} must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(VitError::domain(format!("{name} must be > 0, got {value}")))
    }
}

pub(crate) fn ensure_nonnegative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(VitError::domain(format!("{name} must be >= 0, got {value}")))
    }
}
