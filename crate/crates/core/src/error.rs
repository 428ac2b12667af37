use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Hilbert space dimension {dim} exceeds the cap of {cap}")]
    DimensionTooLarge { dim: u128, cap: usize },

    #[error("site index {site} out of range 1..={sites}")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("link ({from}, {to}) does not exist on a {boundary} lattice of {sites} sites")]
    InvalidLink {
        from: usize,
        to: usize,
        sites: usize,
        boundary: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max |A - A^dagger| = {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("momentum modes {alpha1} and {alpha2} are not degenerate at theta = {theta}")]
    NotDegenerate { alpha1: i64, alpha2: i64, theta: f64 },

    #[error("dark state annihilation residual {residual:e} exceeds tolerance")]
    DarkResidual { residual: f64 },

    #[error("numerical abort at t = {time}: {reason}")]
    NumericalAbort { time: f64, reason: String },

    #[error("fixed point did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("signal window [{start}, {end}) lies outside the record [0, {duration})")]
    WindowOutOfRange { start: f64, end: f64, duration: f64 },

    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
