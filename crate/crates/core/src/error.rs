use std::path::PathBuf;

use crate::sdf::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("fine cell cap of {cap} exceeded ({attempted} cells requested)")]
    FineCellCap { cap: usize, attempted: usize },

    #[error("octree depth {level} exceeds the lattice limit of {max}")]
    LatticeDepth { level: u32, max: u32 },

    #[error("cell {cell} is incident to a sign-change edge but has no vertex")]
    MissingVertex { cell: String },

    #[error("image size mismatch: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: malformed file: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
