use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("integrand is not finite at r = {at}")]
    IntegrandDomain { at: f64 },

    #[error("quadrature did not converge within {panels} panels (estimate {estimate}, error {abs_error})")]
    Convergence {
        estimate: f64,
        abs_error: f64,
        panels: usize,
    },

    #[error("unsupported medium: {0}")]
    UnsupportedMedium(String),

    #[error("evanescent regime: K^2 = {k_squared} must be > 0")]
    Evanescent { k_squared: f64 },

    #[error("degenerate mode (j={j}, l={l}): cross-integral vanishes")]
    DegenerateMode { j: u8, l: u32 },

    #[error("incomplete source specification: no coefficient for mode (j={j}, l={l}, m={m})")]
    IncompleteSpec { j: u8, l: u32, m: i32 },

    #[error("constraint evaluation failed at chi = {chi}")]
    ConstraintEvaluation { chi: f64 },

    #[error("no tuned solution: the tuning set is empty on the searched interval")]
    NoTunedSolution,

    #[error("ill-conditioned expansion: Lommel denominator {denominator} is not positive")]
    IllConditionedExpansion { denominator: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
