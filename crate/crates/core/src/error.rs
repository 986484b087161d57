use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {value} lies outside the domain {domain}")]
    Domain { value: f64, domain: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("point {point:?} lies outside the region")]
    OutsideRegion { point: Vec<f64> },

    #[error("need at least 3 scale pairs spanning two decades, got {0}")]
    InsufficientScales(usize),

    #[error("chart violation at anchor {anchor:?}: {detail}")]
    ChartViolation { anchor: Vec<f64>, detail: String },

    #[error("chart parameters rejected: {0}")]
    Chart(String),

    #[error("tail integral does not converge: {0}")]
    DivergentTail(String),

    #[error("integral diverges near the origin: {0}")]
    DivergentIntegral(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("convexity upgrade unavailable: {0}")]
    UpgradeUnavailable(String),

    #[error("limit L = -inf regime: {0}")]
    LimitDiverges(String),

    #[error("kernel calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("barrier violation ({kind}) at {witness:?}: {detail}")]
    BarrierViolation {
        kind: String,
        witness: Vec<f64>,
        detail: String,
    },

    #[error("no convergence after {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("scenario `{scenario}`: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn in_scenario(self, scenario: &str) -> Self {
        Error::Scenario {
            scenario: scenario.to_string(),
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::Argument(_) => "argument",
            Error::OutsideRegion { .. } => "outside_region",
            Error::InsufficientScales(_) => "insufficient_scales",
            Error::ChartViolation { .. } => "chart_violation",
            Error::Chart(_) => "chart",
            Error::DivergentTail(_) => "divergent_tail",
            Error::DivergentIntegral(_) => "divergent_integral",
            Error::InvalidProfile(_) => "invalid_profile",
            Error::UpgradeUnavailable(_) => "upgrade_unavailable",
            Error::LimitDiverges(_) => "limit_diverges",
            Error::CalibrationFailed(_) => "calibration_failed",
            Error::BarrierViolation { .. } => "barrier_violation",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Config { .. } => "config",
            Error::Scenario { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
