//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: String,
        line: usize,
        message: String,
    },

    #[error("propensity must be in (0,1], got {value}{context}")]
    InvalidPropensity { value: f64, context: String },

    #[error("episode {episode_id}: step indices must be consecutive from 0, found t={found} at position {position}")]
    NonConsecutiveSteps {
        episode_id: String,
        found: u32,
        position: usize,
    },

    #[error("episode {episode_id} t={t}: done={done} but next_state is {next}")]
    DoneNextStateMismatch {
        episode_id: String,
        t: u32,
        done: bool,
        next: String,
    },

    #[error("{what} id {id} out of range (must be < {bound})")]
    IdOutOfRange {
        what: &'static str,
        id: usize,
        bound: usize,
    },

    #[error("episode {episode_id} has {len} steps, exceeding horizon {horizon}")]
    EpisodeTooLong {
        episode_id: String,
        len: usize,
        horizon: usize,
    },

    #[error("need at least {need} episodes, dataset has {got}")]
    TooFewEpisodes { need: usize, got: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("lambda must be >= 0, got {0}")]
    NegativeLambda(f64),

    #[error("value iteration did not converge: {0}")]
    NonConvergent(String),

    #[error("Q table contains NaN at state {state}, action {action}")]
    NanQValue { state: usize, action: usize },

    #[error("policy row for state {state} sums to {sum}, not 1")]
    PolicyNotNormalized { state: usize, sum: f64 },

    #[error("planning depth must be >= 1")]
    ZeroPlanDepth,

    #[error("plan truncated: expanded {expanded} nodes, budget {budget}")]
    NodeBudgetExceeded { expanded: usize, budget: usize },

    #[error("lambda grid must be non-empty and sorted ascending")]
    BadLambdaGrid,

    #[error("no overlap between target policy and logged actions (total importance weight is 0)")]
    NoOverlap,

    #[error("logged state {state} not covered by the policy ({n_states} states)")]
    StateNotCovered { state: usize, n_states: usize },

    #[error("degenerate cost ordering: actions {a} and {b} have equal mean cost {cost}")]
    DegenerateCostOrdering { a: usize, b: usize, cost: f64 },

    #[error("upper bound for lambda needs at least 2 distinct actions, found {0}")]
    SingleAction(usize),

    #[error("invalid lambda bracket: lower {lower} must satisfy 0 <= lower < upper {upper}")]
    InvalidBracket { lower: f64, upper: f64 },

    #[error("bracket infeasible at entry: cost {cost} at lambda {lambda} exceeds budget {budget}; the cheapest reachable policy violates the constraint")]
    BracketInfeasible { lambda: f64, cost: f64, budget: f64 },

    #[error("unsupported artifact version {found}, expected {expected}")]
    FormatVersion { found: u32, expected: u32 },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CoreError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}
