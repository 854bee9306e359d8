//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "invalid trapezoid ({a}, {b}, {c}, {d}): knots must satisfy a <= b <= c <= d and be finite"
    )]
    InvalidTrapezoid { a: f64, b: f64, c: f64, d: f64 },

    #[error("variable '{variable}': {reason}")]
    InvalidVariable { variable: String, reason: String },

    #[error("degree vector has {got} entries but variable '{variable}' has {want} terms")]
    DegreeArity {
        variable: String,
        want: usize,
        got: usize,
    },

    #[error("no activation: every degree is zero")]
    NoActivation,

    #[error("empty audio: {0}")]
    EmptyAudio(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("empty input sequence")]
    EmptyInput,

    #[error("empty segment")]
    EmptySegment,

    #[error("brute-force alignment limited to n*m <= {limit} cells, got {got}")]
    BruteForceTooLarge { limit: usize, got: usize },

    #[error("enrollment requires one isolated word: '{clip}' produced {segments} segments")]
    EnrollmentNotIsolated { clip: String, segments: usize },

    #[error("no templates enrolled")]
    NoTemplates,

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid spec '{label}': {reason}")]
    InvalidSpec { label: String, reason: String },

    #[error("template store: {0}")]
    StoreFormat(String),

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("segment {segment}: {source}")]
    InSegment {
        segment: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
}
