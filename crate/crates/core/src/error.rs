use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("truncation not converged at n_fock={n_fock}: low-lying eigenvalue {index} shifted by {shift:e}")]
    TruncationNotConverged { n_fock: usize, index: usize, shift: f64 },

    #[error("eigenstate tracking lost at lambda={lambda}: best overlap {overlap:.3} with previous grid point")]
    EigenstateTrackingLost { lambda: f64, overlap: f64 },

    #[error("coefficient C[{state},{photons}] = {value:e} is too small to form the pulse ratio")]
    DegenerateCoefficient { state: usize, photons: usize, value: f64 },

    #[error("carrier frequency for field {field} is not positive ({omega})")]
    NegativeCarrier { field: usize, omega: f64 },

    #[error("effective Lambda system is degenerate at t={t} (both couplings vanish)")]
    DegeneratePoint { t: f64 },

    #[error("analytic g2 undefined: sin(theta) = {0:e}")]
    UndefinedAtZeroAngle(f64),

    #[error("step size underflow at t={t} (h={h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("density matrix lost positivity at t={t}: min eigenvalue {min_eigenvalue:e}")]
    PositivityViolation { t: f64, min_eigenvalue: f64 },

    #[error("correlator denominator {which} vanishes ({value:e})")]
    ZeroDenominator { which: &'static str, value: f64 },

    #[error("trajectory norm underflow at t={t} without a detected jump")]
    NormUnderflow { t: f64 },

    #[error("no samples inside window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
