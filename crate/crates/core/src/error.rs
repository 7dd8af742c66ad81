use std::path::PathBuf;

/// Errors produced anywhere in the balance-function pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix exponential out of range: 1-norm {norm:.3e} exceeds {limit:.1e}")]
    Range { norm: f64, limit: f64 },

    #[error("state {state:?} outside the domain of {flow} at t = {t}")]
    Domain { flow: String, t: f64, state: Vec<f64> },

    #[error("step size underflow at t = {t} (h = {h:.3e}); problem may be stiff")]
    Stiff { t: f64, h: f64 },

    #[error("integrator exceeded {0} steps")]
    MaxSteps(usize),

    #[error("unsupported manifold kind for {0}")]
    UnsupportedManifold(&'static str),

    #[error("eigenvalue iteration failed to converge at {failed} of {total} samples")]
    DegradedQuality { failed: usize, total: usize },

    #[error("no in-gate samples: the region gate never contains the trajectory")]
    NoSignal,

    #[error("no data in {0}")]
    NoData(PathBuf),

    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },

    #[error("unknown flow '{0}' (expected one of: solid-body, km)")]
    UnknownFlow(String),

    #[error("unknown parameter '{name}' for flow {flow}")]
    UnknownParam { flow: String, name: String },

    #[error("method {method} is not available for flow {flow}")]
    MethodUnavailable { method: String, flow: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
