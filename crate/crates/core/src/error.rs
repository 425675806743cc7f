use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid model class: {0}")]
    InvalidModel(String),
    #[error("invalid loss specification: {0}")]
    InvalidLoss(String),
    #[error("non-finite loss at row {row}, hypothesis {col}")]
    NonFiniteLoss { row: usize, col: usize },
    #[error("negative loss {value} at row {row}, hypothesis {col}")]
    NegativeLoss { row: usize, col: usize, value: f64 },
    #[error("loss {value} at row {row}, hypothesis {col} exceeds envelope {envelope}")]
    EnvelopeViolated {
        row: usize,
        col: usize,
        value: f64,
        envelope: f64,
    },
    #[error("index set is empty")]
    EmptyIndexSet,
    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("hypothesis index {index} out of range for class of size {len}")]
    HypothesisOutOfRange { index: usize, len: usize },
    #[error("fold count K = {k} must satisfy 2 <= K <= n = {n}")]
    BadK { k: usize, n: usize },
    #[error("length {len} is not divisible by {divisor}")]
    IndivisibleBlocks { len: usize, divisor: usize },
    #[error("block-pair count mu = {mu} must exceed 1")]
    MuTooSmall { mu: usize },
    #[error("population risk requested but no oracle is attached")]
    MissingOracle,
    #[error("no finite Orlicz-psi_{nu} norm below the cap {cap}")]
    NoFiniteNorm { nu: f64, cap: f64 },
    #[error("no tail branch applies")]
    NoBranch,
    #[error("failure mass varpi = 1 makes log(1/varpi) vanish")]
    UndefinedAtVarpiOne,
    #[error("mixing correction leaves varpi' = {varpi_prime} <= 0")]
    InfeasibleMixing { varpi_prime: f64 },
    #[error("varpi' = {varpi_prime} outside the feasibility window (0, {upper}]")]
    InfeasibleWindow { varpi_prime: f64, upper: f64 },
    #[error("bound requires a finite loss envelope M")]
    UnboundedClass,
    #[error("Orlicz-psi_1 norm of rho is zero")]
    ZeroNorm,
    #[error("block length {a} beyond mixing table of length {len}")]
    OutOfTableRange { a: usize, len: usize },
    #[error("no feasible K in range: {}", format_reasons(.0))]
    NoFeasibleK(Vec<(usize, String)>),
    #[error("{trials} trials give a Wilson interval of width {width:.4} above the cap {cap}")]
    InsufficientTrials { trials: usize, width: f64, cap: f64 },
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("{0}")]
    Domain(String),
}

fn format_reasons(reasons: &[(usize, String)]) -> String {
    reasons
        .iter()
        .map(|(k, r)| format!("K={k}: {r}"))
        .collect::<Vec<_>>()
        .join("; ")
}
