use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("array length {got} does not match the grid ({expected} sites or modes)")]
    Shape { expected: usize, got: usize },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("mode index {index} out of range for {count} modes")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("mode vector does not describe a real field (imaginary part up to {max_imag:e})")]
    NotReal { max_imag: f64 },

    #[error("non-finite value in field data")]
    NonFinite,

    #[error("grid with {modes} modes is too large for polynomial functionals (at most {max})")]
    GridTooLarge { modes: usize, max: usize },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("coefficient magnitude {magnitude:e} exceeds the bound {bound:e} at hbar^{power}")]
    Overflow {
        magnitude: f64,
        bound: f64,
        power: i64,
    },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("not invertible at linear order")]
    NotInvertible,

    #[error("round trip through the linearizing map leaves a residual {residual:e} (tolerance {tolerance:e})")]
    RoundTrip { residual: f64, tolerance: f64 },

    #[error(
        "resonant denominator {denominator:e} at degree {degree}: output {out}, inputs {inputs:?} (right-hand side {rhs:e})"
    )]
    ResonantDenominator {
        degree: usize,
        out: usize,
        inputs: Vec<usize>,
        denominator: f64,
        rhs: f64,
    },

    #[error("time-translation generator is not diagonal in the mode basis (off-diagonal {0:e})")]
    NotDiagonal(f64),

    #[error("blow-up suspected at t = {time}")]
    BlowUp { time: f64 },

    #[error("no convergence at horizon {horizon}: drift {drift:e} did not decrease (previous {previous:e})")]
    NoConvergence {
        horizon: f64,
        drift: f64,
        previous: f64,
    },

    #[error("degree cap {cap} is below the degree {needed} the interaction requires")]
    DegreeCap { cap: usize, needed: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
