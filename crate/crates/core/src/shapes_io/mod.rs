//! Synthetic datasets, point-cloud files, dataset splits and bundle persistence.

mod bundle;
mod ply;
mod split;
mod synthetic;
mod xyz;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::transport::{CloudError, PointCloud};

pub use bundle::{decode_bundle, encode_bundle, load_bundle, save_bundle, MAGIC};
pub use ply::{format_ply, parse_ply, read_ply, write_ply};
pub use split::{read_id_list, split_dataset, write_id_list, DatasetSplit, DEFAULT_RATIOS};
pub use synthetic::{generate_dataset, LabeledCloud, Range, ShapeClass, ShapeRanges, SyntheticSpec};
pub use xyz::{format_xyz, parse_xyz, read_xyz, write_xyz};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<IoError>,
    },
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("not a model bundle (bad magic bytes)")]
    BadMagic,
    #[error("bundle format version {found}, this build reads version {expected}")]
    Version { found: u32, expected: u32 },
    #[error("bundle checksum mismatch")]
    Checksum,
    #[error("bundle truncated: {0}")]
    Truncated(String),
    #[error("bundle descriptor: {0}")]
    Descriptor(String),
    #[error("bundle shape inconsistency: {0}")]
    ShapeInconsistency(String),
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("split ratios sum to {0}, expected 1")]
    RatioSum(f64),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn in_file(self, path: &Path) -> Self {
        IoError::InFile { path: path.to_path_buf(), source: Box::new(self) }
    }
}

/// Reads `.xyz` or `.ply` by extension.
pub fn read_cloud(path: &Path) -> Result<PointCloud, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => read_ply(path),
        _ => read_xyz(path),
    }
}
