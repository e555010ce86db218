use std::path::PathBuf;

/// Errors surfaced by the simulator. Configuration and input problems are
/// reported eagerly; numerical failures (CFL) are recoverable by the caller.
#[derive(Debug, thiserror::Error)]
pub enum SurgeError {
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("bathymetry does not cover cell center at lon={lon}, lat={lat}")]
    UncoveredCell { lon: f64, lat: f64 },

    #[error("raster {path}: {msg}")]
    Raster { path: String, msg: String },

    #[error("negative water depth {h} passed to the Riemann solver")]
    NegativeDepth { h: f64 },

    #[error("friction requires a positive depth, got {h}")]
    NonPositiveDepth { h: f64 },

    #[error("CFL violation: Courant number {courant:.4} exceeds 1")]
    CflViolation { courant: f64 },

    #[error("storm track: {0}")]
    Track(String),

    #[error("time {t} s precedes the first storm sample at {first} s")]
    BeforeTrack { t: f64, first: f64 },

    #[error("central pressure {central} Pa must be below background pressure {background} Pa")]
    PressureDeficit { central: f64, background: f64 },

    #[error("nesting violation: ghost cell ({i}, {j}) on level {level} has no data source")]
    Nesting { level: usize, i: i64, j: i64 },

    #[error("unknown plot variable `{0}` (expected eta, speed or level)")]
    UnknownVariable(String),

    #[error("frame index {index} out of range (valid: 0..={max})")]
    FrameIndex { index: usize, max: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl SurgeError {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        SurgeError::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SurgeError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, SurgeError>;
