use thiserror::Error;

/// Everything that can go wrong while building or checking a response solution.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("lattice ball of radius {radius} in dimension {dim} holds {points} points, budget is {budget}")]
    BudgetExceeded {
        dim: usize,
        radius: u64,
        points: u128,
        budget: u64,
    },

    #[error("exact resonance: omega . nu = 0 for nu = {0:?}")]
    ExactResonance(Vec<i32>),

    #[error("g - f0 has a zero of even order {0} at c0; no response solution exists")]
    EvenOrderZero(usize),

    #[error("g - f0 vanishes identically to the supplied degree at c0 (leading coefficient a is zero)")]
    ZeroLeadingCoefficient,

    #[error("g(c0) = {g_c0} does not match the forcing average f0 = {f0}")]
    AverageMismatch { g_c0: f64, f0: f64 },

    #[error("resonant divisor |D| = {magnitude:e} at nu = {mode:?}")]
    ResonantDivisor { mode: Vec<i32>, magnitude: f64 },

    #[error("the averaged bifurcation polynomial has no real root in [{lo}, {hi}]")]
    NoRealRoot { lo: f64, hi: f64 },

    #[error("outer zeta iteration diverged: {0}")]
    OuterIterationDivergence(String),

    #[error("decay envelope violated: {0}")]
    EnvelopeViolation(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("tree enumeration budget exceeded: {0}")]
    TreeBudgetExceeded(String),

    #[error("combinatorial lemma violated: {0}")]
    LemmaViolation(String),

    #[error("integration step too large: {0}")]
    StepTooLarge(String),

    #[error("non-finite state at t = {0}")]
    NonfiniteState(f64),

    #[error("unknown solver '{0}'")]
    UnknownSolver(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
