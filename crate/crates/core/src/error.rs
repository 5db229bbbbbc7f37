use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("grid mismatch: {left} nodes vs {right} nodes")]
    GridMismatch { left: usize, right: usize },

    #[error("Hölder exponent must lie in (0, 2], got {0}")]
    InvalidExponent(f64),

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("step rule and difference regularizer require a > 1, got a = {0}")]
    ExponentTooSmall(f64),

    #[error("step {h} is not a multiple of the grid spacing {spacing}")]
    OffLattice { h: f64, spacing: f64 },

    #[error("step {0} exceeds 1/2")]
    StepTooLarge(f64),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("no feasible point found: {0}")]
    NoFeasiblePoint(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("pair budget exceeded: {pairs} pairs > limit {limit}")]
    PairBudgetExceeded { pairs: u128, limit: u128 },

    #[error("lattice too large to enumerate: {members} members > limit {limit}")]
    LatticeTooLarge { members: u128, limit: u128 },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
