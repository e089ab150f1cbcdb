use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("non-finite coordinate ({x}, {y})")]
    NonFinite { x: f64, y: f64 },

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("range {range} exceeds domain edge {edge}")]
    RangeExceedsDomain { range: f64, edge: f64 },

    #[error("cannot infect {requested} of {available} nodes")]
    TooManySeeds { requested: usize, available: usize },

    #[error("{0}")]
    InvalidParameter(String),

    #[error("config: {0}")]
    Config(String),

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
