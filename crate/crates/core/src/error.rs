use thiserror::Error;

/// Error variants shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Two atom sets (or an atom within one set) disagree on ambient dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A measure ended up with no positively weighted atom.
    #[error("measure has no atom with positive weight")]
    EmptyMeasure,

    /// A weight was more negative than the clamp tolerance (1e-12).
    #[error("weight {value} at index {index} is negative beyond the clamp tolerance")]
    NegativeWeight { index: usize, value: f64 },

    /// An atom coordinate, weight, or cost entry was NaN or infinite.
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    /// Matrix shape does not match the marginals it is paired with.
    #[error("shape mismatch: matrix is {rows}x{cols}, marginals are {r_len}x{c_len}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        r_len: usize,
        c_len: usize,
    },

    /// A weight vector does not lie on the probability simplex.
    #[error("weights must sum to 1 (got {sum})")]
    NotOnSimplex { sum: f64 },

    /// A transport plan violates its prescribed marginals or mass.
    #[error("transport plan is infeasible: {reason} (violation {violation})")]
    InfeasiblePlan {
        reason: &'static str,
        violation: f64,
    },

    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    /// Sinkhorn hit its iteration cap before reaching the marginal tolerance.
    #[error(
        "Sinkhorn did not converge in {iterations} iterations (marginal violation {violation:.3e})"
    )]
    SinkhornNotConverged { iterations: usize, violation: f64 },

    /// Sinkhorn stalled inside a bracket-search iteration; the bracket
    /// trajectory up to the failure is attached.
    #[error("Sinkhorn stalled during the bracket search after {iterations} iterations (marginal violation {violation:.3e})")]
    SolveStalled {
        iterations: usize,
        violation: f64,
        trace: Vec<crate::ow_solver::BracketState>,
    },

    /// Instance exceeds the exact solver's size cap.
    #[error("instance has {size} cost cells, exceeding the exact-solver limit of {limit}")]
    SizeExceeded { size: usize, limit: usize },

    /// The exact transportation solver exhausted its pivot budget.
    #[error("transportation simplex exceeded {0} pivots")]
    PivotLimit(usize),

    /// A phi specifier string could not be parsed.
    #[error("invalid phi spec `{input}`: {reason}")]
    PhiSpec { input: String, reason: String },

    /// JSON (de)serialization failure.
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// Plan CSV parse failure.
    #[error("plan CSV parse error at line {line}: {reason}")]
    PlanCsv { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
