use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unbounded body")]
    UnboundedBody,
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("cap exceeds semi-axis: h = {height} > a_n = {semi_axis}")]
    CapExceedsSemiAxis { height: f64, semi_axis: f64 },
    #[error("floating body empty at delta = {delta}")]
    FloatingBodyEmpty { delta: f64 },
    #[error("delta too large: {delta} exceeds total mass {total}")]
    DeltaTooLarge { delta: f64, total: f64 },
    #[error("delta unreachable for slope: supremum of cut mass is {sup}")]
    DeltaUnreachable { sup: f64 },
    #[error("infinite cut mass")]
    InfiniteCutMass,
    #[error("tolerance not achieved: error {achieved:e} exceeds {requested:e}")]
    ToleranceNotAchieved { achieved: f64, requested: f64 },
    #[error("root finder did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("no data")]
    NoData,
    #[error("weight kind incompatible with experiment: {0}")]
    IncompatibleWeight(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sweep aborted at delta = {delta}: {source}")]
    SweepAborted {
        delta: f64,
        completed: usize,
        partial: Vec<crate::convergence::SweepPoint>,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
