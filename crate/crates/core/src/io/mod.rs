//! File formats: meshes, features, LP, logs, solutions, hierarchies.

mod features;
mod lp;
mod manifest;
mod mesh_io;
mod report;

use std::path::PathBuf;

pub use features::{read_features, read_features_from, write_features, write_features_csv, FEATURE_MAGIC};
pub use lp::{parse_lp, read_lp, render_lp, write_lp};
pub use manifest::{read_manifest, read_projection, write_manifest, write_projection, LevelPaths, Manifest};
pub use mesh_io::{parse_off, parse_ply, read_mesh, render_off, render_ply, write_mesh};
pub use report::{
    render_convergence_log, write_convergence_log, IlpSolutionFile, MatchSolutionFile, CONVERGENCE_HEADER,
};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Unsupported(String),
}

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        IoError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn read_text(path: &std::path::Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

pub(crate) fn write_text(path: &std::path::Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|e| IoError::io(path, e))
}
