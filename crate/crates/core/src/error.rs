use thiserror::Error;

/// Errors raised by the numerical pipeline. Numeric payloads are reported as
/// `f64` regardless of the scalar type used for the computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "quadrature did not converge on [{lower}, {upper}]: partial sum {partial}, error estimate {error_estimate}"
    )]
    Quadrature {
        lower: f64,
        upper: f64,
        partial: f64,
        error_estimate: f64,
    },

    #[error("characteristic function not negligible at s_max = {s_max} (C = {value:e}); raise s_max")]
    CutoffTooSmall { s_max: f64, value: f64 },

    #[error("density inversion failed: negative lobe {min_value:e} at x = {x} exceeds clip tolerance {clip_tol:e}")]
    InversionFailure { x: f64, min_value: f64, clip_tol: f64 },

    #[error("retained domain has {points} points, at least {required} required")]
    RetainedDomainTooShort { points: usize, required: usize },

    #[error("eigen-iteration failed: {0}")]
    EigenFailure(String),

    #[error("parity alternation violated at state {state}: expected {expected}, found {found}")]
    ParityViolation { state: usize, expected: i8, found: i8 },

    #[error("near-degenerate levels {lower} and {upper}: E = {energy_lower}, {energy_upper}")]
    Degeneracy {
        lower: usize,
        upper: usize,
        energy_lower: f64,
        energy_upper: f64,
    },

    #[error("excited-state energy E_{state} = {energy} is not strictly positive")]
    NonPositiveEnergy { state: usize, energy: f64 },

    #[error("closed form lost precision: relative error estimate {estimate:e} for nodes {nodes:?}")]
    Cancellation { estimate: f64, nodes: Vec<f64> },

    #[error("closed form `{what}` is not available for model {model}")]
    Capability { model: String, what: &'static str },

    #[error("special function domain error: {0}")]
    Domain(String),

    #[error("stiffness guard violated: dt * max|b| = {product} >= 0.5; reduce dt below {suggested_dt:e}")]
    Stiffness { product: f64, suggested_dt: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
