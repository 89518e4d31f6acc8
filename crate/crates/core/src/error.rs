use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Validation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("raster dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },

    #[error("a {width}x{height} raster needs {expected} values, found {found}")]
    DimensionMismatch {
        width: usize,
        height: usize,
        expected: usize,
        found: usize,
    },

    #[error("label {label} at pixel {index} exceeds the maximum class id {max}")]
    LabelOutOfRange { index: usize, label: u16, max: u16 },

    #[error("locality scale must be an odd positive integer, got {0}")]
    InvalidScale(u32),

    #[error("raster sizes differ: {left_width}x{left_height} vs {right_width}x{right_height}")]
    SizeMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("invalid count pair {same}/{total} at pixel {index}")]
    InvalidCounts { index: usize, same: u32, total: u32 },

    #[error("probability {value} at pixel {index} is not positive")]
    NonPositiveProbability { index: usize, value: f64 },

    #[error("weight {value} at pixel {index} is negative or not finite")]
    InvalidWeight { index: usize, value: f32 },

    #[error("loss {value} at pixel {index} is not finite")]
    NonFiniteLoss { index: usize, value: f64 },

    #[error("no class has a non-empty union")]
    EmptyUnion,

    #[error("no pixel survives exclusion")]
    NoPixels,

    #[error("bin edges must be non-empty, finite and strictly ascending")]
    InvalidBinEdges,

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("truncated input: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),

    #[error("unknown transform code {0}")]
    UnknownTransform(u8),

    #[error("unknown border policy code {0}")]
    UnknownBorder(u8),

    #[error("unsupported bit depth {0}, label images must be 8-bit or less")]
    UnsupportedBitDepth(u8),

    #[error("unsupported color type {0}, expected grayscale or paletted")]
    UnsupportedColorType(String),

    #[error("corrupt image: {0}")]
    CorruptImage(String),

    #[error("cannot store {0}")]
    Unrepresentable(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }
}
