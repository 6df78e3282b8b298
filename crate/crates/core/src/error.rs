use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("demand value {value} is negative")]
    NegativeValue { value: f64 },
    #[error("value {value} is not a multiple of the lattice step {step}")]
    OffLattice { value: f64, step: f64 },
    #[error("probability {value} is negative or not finite")]
    BadProbability { value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    ProbSum { sum: f64 },
    #[error("all demand mass is at zero; P(D > 0) must be positive")]
    AllMassAtZero,
    #[error("cdf samples are not nondecreasing at position {index}")]
    NonMonotoneCdf { index: usize },
    #[error("support of size {size} exceeds the cap {cap}")]
    SupportTooLarge { size: usize, cap: usize },
    #[error("invalid holding cost: {0}")]
    InvalidHolding(&'static str),
    #[error("invalid cost model: {0}")]
    InvalidCost(&'static str),
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
    #[error("grid too narrow: state {state}, action {action} pushes mass {mass} past the boundary")]
    GridTooNarrow { state: f64, action: f64, mass: f64 },
    #[error("grid too narrow: minimizer touches the grid edge at {level}")]
    ArgminAtEdge { level: f64 },
    #[error("state {state} has no action with finite cost")]
    NoFiniteAction { state: f64 },
    #[error("transition row for state {state}, action {action} sums to {sum}")]
    BadRow { state: usize, action: usize, sum: f64 },
    #[error("value iteration did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("action {action} is infeasible for a state carrying belief mass")]
    InfeasibleAction { action: usize },
    #[error("observation {observation} has zero probability")]
    ImpossibleObservation { observation: f64 },
    #[error("belief tree exceeds {cap} nodes")]
    TreeTooLarge { cap: usize },
    #[error("invalid container partition: {0}")]
    InvalidPartition(String),
    #[error("invalid belief: {0}")]
    InvalidBelief(&'static str),
}
