use thiserror::Error;

/// Errors raised anywhere in the engine.
///
/// Variants carry enough context (indices, field paths, diagnostic values) to point at the
/// offending input without a debugger.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdtError {
    #[error("sample {index} is not positive ({value})")]
    NonPositiveSample { index: usize, value: f64 },

    #[error("insufficient data: {got} samples, at least {needed} required")]
    InsufficientData { got: usize, needed: usize },

    #[error("degenerate data: log standard deviation is zero")]
    DegenerateData,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("inconsistent priors: acceptance rate {rate:.2e} after {attempts} attempts")]
    InconsistentPriors { attempts: u64, rate: f64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("stress range exceeded{}: final stress {stress:.3} kPa above limit pressure {limit:.3} kPa", layer.map(|l| format!(" in layer {l}")).unwrap_or_default())]
    StressRangeExceeded {
        stress: f64,
        limit: f64,
        layer: Option<usize>,
    },

    #[error("settlement continuity cannot be solved at t_add = {t_add} weeks")]
    ContinuityUnsolvable { t_add: f64 },

    #[error("at week {week}: {source}")]
    AtWeek {
        week: u32,
        #[source]
        source: Box<PdtError>,
    },

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("degenerate update: all likelihoods underflow (max log-likelihood {max_log_likelihood:.3})")]
    DegenerateUpdate { max_log_likelihood: f64 },

    #[error("out-of-order measurement: t = {got} before current week {current}")]
    OutOfOrder { got: u32, current: u32 },

    #[error("unsupported action: {0}")]
    UnsupportedAction(String),

    #[error("session is {status}; {message}")]
    InvalidState { status: String, message: String },

    #[error("session is closed")]
    Closed,

    #[error("coefficient of variation undefined for mean {mean:e}")]
    UndefinedCov { mean: f64 },

    #[error("trajectory covers {covered} weeks, {needed} required")]
    TrajectoryTooShort { covered: u32, needed: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("rollout {k}: {source}")]
    Rollout {
        k: usize,
        #[source]
        source: Box<PdtError>,
    },

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("session log: {0}")]
    Log(String),

    #[error("scenario hash mismatch: log {log} vs scenario {scenario}")]
    Tamper { log: String, scenario: String },

    #[error("replay mismatch at event {index}")]
    ReplayMismatch { index: usize },

    #[error("io: {0}")]
    Io(String),
}

impl PdtError {
    pub(crate) fn at_week(self, week: u32) -> Self {
        PdtError::AtWeek {
            week,
            source: Box::new(self),
        }
    }

    /// Whether the error originates from the input configuration rather than a numeric failure.
    pub fn is_config_error(&self) -> bool {
        match self {
            PdtError::Config(_)
            | PdtError::Schema { .. }
            | PdtError::InvalidGeometry(_)
            | PdtError::Io(_)
            | PdtError::Tamper { .. }
            | PdtError::Log(_)
            | PdtError::NonPositiveSample { .. }
            | PdtError::InsufficientData { .. }
            | PdtError::DegenerateData
            | PdtError::InconsistentPriors { .. } => true,
            PdtError::AtWeek { source, .. } | PdtError::Rollout { source, .. } => {
                source.is_config_error()
            }
            _ => false,
        }
    }
}

impl From<std::io::Error> for PdtError {
    fn from(e: std::io::Error) -> Self {
        PdtError::Io(e.to_string())
    }
}

pub type Result<T, E = PdtError> = std::result::Result<T, E>;
