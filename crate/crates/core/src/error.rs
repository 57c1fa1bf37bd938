use thiserror::Error;

#[derive(Debug, Error)]
pub enum TubalError {
    #[error("invalid shape {dims:?}: {reason}")]
    InvalidShape { dims: Vec<usize>, reason: String },

    #[error("shape mismatch in {context}: {left:?} vs {right:?}")]
    ShapeMismatch {
        context: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("conjugate symmetry violated: imaginary residual {residual:e} exceeds {tolerance:e}")]
    SymmetryViolation { residual: f64, tolerance: f64 },

    #[error("explicit matrix would hold {entries} entries, limit is {limit}")]
    SizeGuard { entries: usize, limit: usize },

    #[error("rank {rank} outside admissible range {min}..={max}")]
    RankOutOfRange { rank: usize, min: usize, max: usize },

    #[error("radius must be nonnegative, got {0}")]
    NegativeRadius(f64),

    #[error("spectrum holds {available} values per slice, {required} required")]
    InsufficientSpectrum { available: usize, required: usize },

    #[error("starting point infeasible: tnn {tnn} exceeds radius {tau}")]
    InfeasibleStart { tnn: f64, tau: f64 },

    #[error("point infeasible: tnn {tnn} exceeds radius {tau}")]
    InfeasiblePoint { tnn: f64, tau: f64 },

    #[error("dual point lies {distance:e} outside its feasible set")]
    InfeasibleDual { distance: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error{}: field `{field}`: {reason}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        field: String,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl TubalError {
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            TubalError::Config { .. }
                | TubalError::InvalidParameter { .. }
                | TubalError::Parse { .. }
                | TubalError::NegativeRadius(_)
                | TubalError::RankOutOfRange { .. }
        )
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            TubalError::SymmetryViolation { .. }
                | TubalError::InfeasibleStart { .. }
                | TubalError::InfeasiblePoint { .. }
                | TubalError::InfeasibleDual { .. }
        )
    }
}

pub type Result<T, E = TubalError> = std::result::Result<T, E>;
