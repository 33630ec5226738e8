use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("competence of agent {index} must lie in (0.5, 1), got {value}")]
    InvalidCompetence { index: usize, value: f64 },

    #[error("belief of agent {index} must lie in (0, 1), got {value}")]
    InvalidBelief { index: usize, value: f64 },

    #[error("value {0} is outside [0, 1]")]
    OutOfUnitInterval(f64),

    #[error("price must lie in (0, 1), got {0}")]
    InvalidPrice(f64),

    #[error("investment of agent {index} is invalid: {reason}")]
    InvalidInvestment { index: usize, reason: String },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("profile must contain at least one agent")]
    EmptyProfile,

    #[error("{n} agents exceeds the cap of {cap} for this operation")]
    TooManyAgents { n: usize, cap: usize },

    #[error("weight of agent {index} must be finite and nonnegative, got {value}")]
    InvalidWeight { index: usize, value: f64 },

    #[error("weight profile has no positive weight")]
    ZeroWeights,

    #[error("a belief of exactly 0.5 (agent {index}) has no sincere vote")]
    UndecidedBelief { index: usize },

    #[error("clearing price is undefined: one side of the market has no investment")]
    UndefinedPrice,

    #[error("taxation parameter k must be finite and strictly positive, got {0}")]
    InvalidTax(f64),

    #[error("prior must be exactly 0.5, got {0}")]
    InvalidPrior(f64),

    #[error("endowment must be exactly 1, got {0}")]
    InvalidEndowment(f64),

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    BracketingFailure {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("state-conditional accuracies differ: P(correct | A) = {given_a}, P(correct | B) = {given_b}")]
    AsymmetricAccuracy { given_a: f64, given_b: f64 },

    #[error("weights {label} beat log-odds weights: {other} > {log_odds}")]
    OptimalityViolated {
        label: String,
        other: f64,
        log_odds: f64,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("trial count must be at least 1")]
    NoTrials,
}
