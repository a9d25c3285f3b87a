//! Error type shared by all driftlens modules.

use std::fmt;
use std::io;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the linear algebra kernels, dataset ingestion, model
/// fitting, and the experiment harness.
#[derive(Debug)]
pub enum Error {
    /// Operand shapes are incompatible.
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// Cholesky hit a non-positive pivot; the matrix is not positive-definite
    /// (usually a sign of insufficient ridge regularization upstream).
    NotPositiveDefinite { pivot: usize },
    /// A triangular solve met a zero (or effectively zero) diagonal entry.
    SingularDiagonal { index: usize },
    /// The Jacobi eigensolver did not converge within the sweep budget.
    NoConvergence { sweeps: usize },
    /// An operation that needs at least one sample received none.
    EmptyDataset,
    /// A supervised operation received a dataset without labels.
    MissingLabels,
    /// A class id in 1..=c has no samples.
    EmptyClass { class: usize },
    /// A label value outside 1..=c was found at construction.
    InvalidLabel { position: usize, value: i64 },
    /// Second-moment scale factor must be positive.
    NonPositiveScale,
    /// A hyperparameter violates its domain (negative trade-off, zero ridge).
    InvalidHyperParam { name: &'static str, value: f64 },
    /// Requested subspace dimension exceeds what the data can provide.
    RankDeficient { requested: usize, available: usize },
    /// LDA subspace dimension is bounded by c - 1.
    DimensionTooLarge { requested: usize, max: usize },
    /// Nearest-neighbour search against an empty reference set.
    EmptyReference,
    /// Two sequences that must align have different lengths.
    LengthMismatch { left: usize, right: usize },
    /// A scoring operation received no samples.
    EmptyInput,
    /// A line of an svmlight file could not be parsed.
    MalformedLine { line: usize, text: String },
    /// A feature index fell outside the declared dimension.
    IndexOutOfRange { line: usize, index: usize, max: usize },
    /// A NaN or infinite value was encountered.
    NonFiniteValue { location: String },
    /// A heatmap slice referenced a parameter the sweep did not cover.
    AxisNotInSurface { axis: String },
    /// Batch validation against the registry failed.
    DataInvalid { report: String },
    /// A module error, annotated with the task that triggered it.
    TaskFailed { task: String, source: Box<Error> },
    Io(io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => write!(
                f,
                "dimension mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::NotPositiveDefinite { pivot } => {
                write!(f, "matrix is not positive-definite (pivot {} <= 0)", pivot)
            }
            Error::SingularDiagonal { index } => {
                write!(f, "triangular solve: zero diagonal at index {}", index)
            }
            Error::NoConvergence { sweeps } => {
                write!(f, "eigensolver did not converge after {} sweeps", sweeps)
            }
            Error::EmptyDataset => write!(f, "dataset contains no samples"),
            Error::MissingLabels => write!(f, "dataset has no labels"),
            Error::EmptyClass { class } => write!(f, "class {} has no samples", class),
            Error::InvalidLabel { position, value } => {
                write!(f, "invalid label {} at sample {}", value, position)
            }
            Error::NonPositiveScale => write!(f, "scale factor must be positive"),
            Error::InvalidHyperParam { name, value } => {
                write!(f, "invalid hyperparameter {} = {}", name, value)
            }
            Error::RankDeficient {
                requested,
                available,
            } => write!(
                f,
                "requested {} dimensions but only {} are available",
                requested, available
            ),
            Error::DimensionTooLarge { requested, max } => write!(
                f,
                "subspace dimension {} exceeds maximum {} for this method",
                requested, max
            ),
            Error::EmptyReference => write!(f, "reference set is empty"),
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {} vs {}", left, right)
            }
            Error::EmptyInput => write!(f, "input is empty"),
            Error::MalformedLine { line, text } => {
                write!(f, "malformed line {}: {:?}", line, text)
            }
            Error::IndexOutOfRange { line, index, max } => write!(
                f,
                "line {}: feature index {} out of range 1..={}",
                line, index, max
            ),
            Error::NonFiniteValue { location } => {
                write!(f, "non-finite value at {}", location)
            }
            Error::AxisNotInSurface { axis } => {
                write!(f, "parameter {:?} is not an axis of this surface", axis)
            }
            Error::DataInvalid { report } => write!(f, "dataset validation failed:\n{}", report),
            Error::TaskFailed { task, source } => write!(f, "task {} failed: {}", task, source),
            Error::Io(e) => write!(f, "io error: {}", e),
            Error::Json(e) => write!(f, "json error: {}", e),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::TaskFailed { source, .. } => Some(source.as_ref()),
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

impl Error {
    /// Wrap an error with the identity of the experiment task that hit it.
    pub fn in_task(self, task: impl Into<String>) -> Error {
        Error::TaskFailed {
            task: task.into(),
            source: Box::new(self),
        }
    }
}
