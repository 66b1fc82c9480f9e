//! Error type shared by the reconstruction crates.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Input contained NaN or infinite values.
    NonFinite(&'static str),
    /// A parameter was outside its documented range.
    InvalidParameter(String),
    /// Passband selection kept fewer than the minimum number of bins.
    BandTooNarrow { bins: usize },
    /// Covariance estimate is the zero matrix and no diagonal loading was
    /// applied; the weight solve cannot proceed.
    SingularCovariance,
    /// Covariance matrix is singular to working precision. Raise the
    /// diagonal loading factor.
    SingularMatrix { condition: f64 },
    /// Largest eigenvalue is not positive; there is no signal subspace.
    NoSignal,
    /// Envelope never falls below half maximum on one side of the peak.
    UnboundedMainlobe,
    /// A metric is undefined for this input (e.g. all-zero data).
    UndefinedMetric(&'static str),
    /// A per-sample reconstruction failure, tagged with the output sample.
    AtSample { sample: f64, source: Box<Error> },
    /// Too many per-sample failures inside one A-scan.
    TooManyFailures { failed: usize, total: usize },
    /// Malformed volume file or run configuration.
    Format(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFinite(what) => write!(f, "non-finite values in {what}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::BandTooNarrow { bins } => {
                write!(f, "passband too narrow: {bins} bins selected, need at least 4")
            }
            Error::SingularCovariance => {
                write!(f, "covariance estimate is zero; enable diagonal loading")
            }
            Error::SingularMatrix { condition } => write!(
                f,
                "covariance matrix singular to working precision (condition estimate {condition:.3e}); raise the loading factor"
            ),
            Error::NoSignal => write!(f, "no positive eigenvalue; signal subspace is empty"),
            Error::UnboundedMainlobe => {
                write!(f, "envelope never falls below half maximum on one side of the peak")
            }
            Error::UndefinedMetric(what) => write!(f, "metric undefined: {what}"),
            Error::AtSample { sample, source } => {
                write!(f, "reconstruction failed at output sample {sample}: {source}")
            }
            Error::TooManyFailures { failed, total } => {
                write!(f, "{failed} of {total} samples failed to reconstruct (limit 1%)")
            }
            Error::Format(msg) => write!(f, "{msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::AtSample { source, .. } => Some(source),
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
