use thiserror::Error;

/// Errors surfaced by the oscillator toolkit.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid Fock dimension {0}: must be at least 2")]
    InvalidDimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("operator dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("state not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("Fock truncation inadequate: {0}")]
    TruncationInadequate(String),

    #[error("hypergeometric series did not converge after {terms} terms (last |t/S| = {ratio:.3e})")]
    SeriesDivergence { terms: usize, ratio: f64 },

    #[error("hypergeometric parameter {0} is a nonpositive integer (pole)")]
    SeriesPole(num_complex::Complex64),

    #[error("formula valid only for γφ = γ₂ = ξ₂ = n_T = 0 and U ≠ 0: {0}")]
    UnsupportedConfiguration(String),

    #[error("linear system singular: {0}")]
    SingularSystem(String),

    #[error("eigensolver failed: {0}")]
    EigenFailure(String),

    #[error("iterative spectrum did not converge: residual {residual:.3e} after {iterations} iterations")]
    IterativeNonConvergence { residual: f64, iterations: usize },

    #[error("spectrum numerically defective (eigenvector condition {0:.3e}); decomposition refused")]
    DefectiveSpectrum(f64),

    #[error("integrator step size underflow at t = {t:.6e}; the problem looks stiff, consider eigen-stepping")]
    StepSizeUnderflow { t: f64 },

    #[error("exponential fit refused: {0}")]
    FitRefused(String),

    #[error("second-order correlation undefined: photon number {0:.3e} below threshold")]
    UndefinedCorrelation(f64),

    #[error("state moments outside the Gaussian-state domain (|ratio| = {0:.6} >= 1)")]
    NonGaussianState(f64),

    #[error("phase-space grid extent insufficient: {0}")]
    ExtentInsufficient(String),

    #[error("calibration drift: required trim {0:.3} dB exceeds the ±{1:.1} dB bound")]
    CalibrationDrift(f64, f64),

    #[error("degenerate fit design: {0}")]
    DegenerateDesign(String),

    #[error("fit residual {residual:.3e} exceeds {threshold:.3e}; tomography unreliable")]
    PoorFit { residual: f64, threshold: f64 },

    #[error("missing moment order ({0}, {1}) in table")]
    MissingMomentOrder(usize, usize),

    #[error("{0}")]
    Lapack(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Lapack(e.to_string())
    }
}
