use thiserror::Error;

use crate::poly::Domain;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid modulus {0}: {1}")]
    InvalidModulus(u64, &'static str),
    #[error("{0} has no inverse modulo {1}")]
    NotInvertible(u64, u64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("domain mismatch: expected {expected:?}, found {found:?}")]
    DomainMismatch { expected: Domain, found: Domain },
    #[error("limb layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("level mismatch: {0} vs {1}")]
    LevelMismatch(usize, usize),
    #[error("insufficient level: need at least {needed}, have {have}")]
    InsufficientLevel { needed: usize, have: usize },
    #[error("cannot rescale a single-limb value")]
    NothingToDrop,
    #[error("evaluation keys do not share the evk1 component")]
    EvkNotShared,
    #[error("evaluation key has power {found}, expected {expected}")]
    WrongKeyPower { expected: u8, found: u8 },
    #[error("message coefficient {index} exceeds encoding headroom ({value} >= {limit})")]
    EncodingOverflow { index: usize, value: f64, limit: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { expected: u32, found: u32 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
