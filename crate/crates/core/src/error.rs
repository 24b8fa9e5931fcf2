use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid parameters: {0}")]
    InvalidGrid(String),

    #[error("field has {found} nodes but the grid has {expected}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("wave vector k = 0 is excluded (1/|k| singularity)")]
    ZeroWaveVector,

    #[error("velocity magnitude {0} is not strictly below the speed of light")]
    Superluminal(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hermitian symmetry violated: imaginary part {imaginary:.3e} vs magnitude {magnitude:.3e}")]
    SymmetryViolation { imaginary: f64, magnitude: f64 },

    #[error("relative energy drift {drift:.3e} exceeds the configured bound {bound:.3e} at t = {time}")]
    EnergyDrift { drift: f64, bound: f64, time: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed file {file}: {message}")]
    Format { file: String, message: String },

    #[error("missing artifact {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
