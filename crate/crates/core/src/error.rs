use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid `{field}` = {value}: must be {requirement}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("message alphabet size must be at least 1")]
    EmptyAlphabet,
    #[error("message {message} is outside 1..={n}")]
    MessageOutOfRange { message: usize, n: usize },
    #[error("interval ({lo}, {hi}) carries no prior mass")]
    ZeroMassInterval { lo: f64, hi: f64 },
    #[error("weights must be strictly increasing (w[{index}] = {value})")]
    WeightsNotIncreasing { index: usize, value: f64 },
    #[error("thresholds must be strictly increasing from 0 to 1 (θ[{index}] = {value})")]
    InvalidThresholds { index: usize, value: f64 },
    #[error("derivative kernels are singular at w = {0}; need 0 < w < 1")]
    DerivativeAtEndpoint(f64),
    #[error("kernel plateau between w = {lo} and w = {hi}: indifference threshold undefined")]
    KernelPlateau { lo: f64, hi: f64 },
    #[error(
        "exhaustive grid supports n <= 3 (got n = {0}); use the stationarity residual instead"
    )]
    GridTooLarge(usize),
    #[error("grid needs at least 2 points per dimension (got {0})")]
    GridTooCoarse(usize),
    #[error("need at least {need} rounds (got {got})")]
    TooFewRounds { got: u64, need: u64 },
    #[error("value {value} outside [0, 1] in `{field}`")]
    OutsideUnitInterval { field: &'static str, value: f64 },
}
