use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("variable {var} out of range (network has {num_vars} variables)")]
    VariableOutOfRange { var: usize, num_vars: usize },

    #[error("variable {0} must have at least 2 states")]
    Cardinality(usize),

    #[error("factor {factor}: duplicate variable {var} in scope")]
    DuplicateScopeVariable { factor: usize, var: usize },

    #[error("factor {factor}: table has {actual} entries, scope requires {expected}")]
    TableLength {
        factor: usize,
        expected: usize,
        actual: usize,
    },

    #[error("factor {factor}: entry {index} is {value}, weights must be finite and non-negative")]
    InvalidWeight {
        factor: usize,
        index: usize,
        value: f64,
    },

    #[error("state {state} out of range for variable {var} with {cardinality} states")]
    StateOutOfRange {
        var: usize,
        state: usize,
        cardinality: usize,
    },

    #[error("variable {0} assigned more than once")]
    DuplicateAssignment(usize),

    #[error("assignment does not cover variable set: {0}")]
    AssignmentMismatch(String),

    #[error("state space {size} exceeds cap {cap}")]
    StateSpaceExceeded { size: u128, cap: u128 },

    #[error("partition function is zero (inconsistent evidence or all-zero potentials)")]
    ZeroPartition,

    #[error("no marginal tasks to bound")]
    NoTasks,

    #[error("linear program infeasible beyond tolerance (residual {residual:e}); stored bounds are inconsistent")]
    Infeasible { residual: f64 },

    #[error("linear program unbounded")]
    Unbounded,

    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),

    #[error("insufficient convergence history: need {needed} points, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("generator failed: {0}")]
    Generator(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("soundness violation: {0}")]
    Soundness(String),
}

pub type Result<T> = std::result::Result<T, Error>;
