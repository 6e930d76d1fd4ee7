use thiserror::Error;

/// Errors raised by the group and e-value machinery.
#[derive(Debug, Error)]
pub enum Error {
    /// Two group elements (or an element and a spec) do not belong together.
    #[error("group mismatch: {0}")]
    GroupMismatch(String),

    /// A group action was attempted on a point of incompatible shape.
    #[error("dimension mismatch: group acts on dimension {expected}, point has {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Enumeration was requested for a group without a finite element list.
    #[error("group is not enumerable: {0}")]
    NotEnumerable(String),

    /// Enumeration would exceed the configured bound.
    #[error("enumeration capacity exceeded: cardinality {cardinality} > limit {limit}")]
    CapacityExceeded { cardinality: u128, limit: u128 },

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The orbit average required by an optimal e-value is not finite.
    #[error("orbit average is not finite: {0}")]
    NonfiniteOrbitAverage(String),

    /// The normalization solver could not bracket or reach the target residual.
    #[error("normalization solver failed: {message} (f({lo:e}) = {f_lo:e}, f({hi:e}) = {f_hi:e})")]
    Convergence {
        message: String,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// A Doob construction was handed a target that is not an exact e-value.
    #[error("target is not an exact e-value: orbit of {orbit_label} has mean {audit}")]
    InvalidTarget { orbit_label: String, audit: f64 },

    /// An operation needed an enumerated orbit but none was available.
    #[error("orbit points are not enumerated")]
    MissingEnumeration,

    /// A data file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
