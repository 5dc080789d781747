use thiserror::Error;

/// Crate-wide error type. Variants map one-to-one onto the failure classes
/// surfaced by the codec, so callers can branch on them without string matching.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("truncated input: {0}")]
    TruncatedInput(String),
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("unknown file extension for auto-detection: {0}")]
    UnknownExtension(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("occupancy code 0 is not representable")]
    InvalidOccupancy,
    #[error("octree is internally inconsistent: {0}")]
    CorruptTree(String),
    #[error("coordinates are not strictly Morton-sorted")]
    UnsortedCoords,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("feature maps are not coordinate-aligned")]
    MisalignedMaps,
    #[error("non-finite value in {0}")]
    NumericalFault(&'static str),
    #[error("zero probability at a coded symbol")]
    ProbabilityUnderflow,
    #[error("accumulator width guard violated: {0}")]
    AccumulatorRisk(String),
    #[error("integer-op contract violated: {0}")]
    ContractViolation(&'static str),
    #[error("requantizer ratio out of representable range")]
    CalibrationOverflow,
    #[error("missing activation statistics for layer {0}")]
    MissingLayerStats(String),
    #[error("probability masses do not total 2^16 with a floor of 1")]
    InvalidMass,
    #[error("entropy-coded stream exhausted early")]
    TruncatedStream,
    #[error("bitstream was produced with a different model (hash mismatch)")]
    ModelMismatch,
    #[error("corrupt bitstream: {0}")]
    CorruptStream(String),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("rate-distortion curves do not overlap")]
    NoOverlap,
    #[error("need at least {0} rate-distortion points")]
    Insufficient(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
