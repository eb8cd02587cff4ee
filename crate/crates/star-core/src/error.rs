//! Error type shared by every module in the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building, querying or persisting a
/// semantic index.
#[derive(Debug, Error)]
pub enum Error {
    /// A corpus-level operation was given zero documents.
    #[error("corpus contains no documents")]
    EmptyCorpus,

    /// A configuration value violates a structural constraint.
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    /// Corpus input could not be parsed (malformed JSONL, duplicate ids, ...).
    #[error("invalid corpus input: {0}")]
    InvalidCorpus(String),

    /// Two vectors that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The term is not part of the semantic space (unknown or not significant).
    #[error("unknown term: {0:?}")]
    UnknownTerm(String),

    /// A vector that must be non-zero has zero norm.
    #[error("zero vector: {0}")]
    ZeroVector(String),

    /// No significant term survived filtering, so no vector can be composed.
    #[error("no significant terms in input")]
    NoSignificantTerms,

    /// A document id collides with one already indexed.
    #[error("duplicate document id: {0:?}")]
    DuplicateDocumentId(String),

    /// A similarity value lies outside [-1, 1].
    #[error("similarity {0} out of range [-1, 1]")]
    OutOfRange(f64),

    /// A vector expected to be unit-normalized is not (within 1e-6).
    #[error("vector is not unit-normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    /// An operation needs more documents than it was given.
    #[error("too few documents: got {found}, need at least {needed}")]
    TooFewDocuments { found: usize, needed: usize },

    /// Underlying I/O failure while reading or writing an index.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    /// A stored file does not match the checksum recorded in the manifest.
    #[error("checksum mismatch in {file}")]
    ChecksumMismatch { file: String },

    /// The on-disk format version is not one this build can read.
    #[error("unsupported index format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    /// The index was built with a different term-hashing scheme.
    #[error("hash function mismatch: index uses {found:?}, this build uses {expected:?}")]
    HashFunctionMismatch { found: String, expected: String },

    /// The files of an index bundle disagree with each other or the manifest.
    #[error("inconsistent index bundle: {0}")]
    InconsistentBundle(String),
}
