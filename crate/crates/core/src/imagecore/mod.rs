//! Image tiles with their dataset manifests, and the seeded random
//! generator shared by the rest of the crate.

mod geometry;
mod manifest;
mod rng;
mod tile;

use std::path::PathBuf;

pub use geometry::{crop, random_flip, random_resized_crop, resize, CropParams};
pub use manifest::{load_manifest, Manifest, ManifestEntry, MANIFEST_COLUMNS};
pub use rng::{derive_seed, Rng};
pub use tile::{ImageTile, Split, TileMeta};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("output dimensions must be at least 1x1")]
    ZeroDimension,
    #[error("pixel buffer holds {actual} values, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite pixel value at index {0}")]
    NonFinitePixel(usize),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("crop range ({0}, {1}) must satisfy 0 < lo <= hi")]
    InvalidRange(f64, f64),
    #[error("manifest is missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate tile id `{0}`")]
    DuplicateTileId(String),
    #[error("tile path `{}` does not resolve to a file", .0.display())]
    UnresolvablePath(PathBuf),
    #[error("line {line}: label `{value}` is not 0 or 1")]
    BadLabel { line: u64, value: String },
    #[error("line {line}: split `{value}` is not train, valid or test")]
    BadSplit { line: u64, value: String },
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: png decode: {message}", path.display())]
    PngDecode { path: PathBuf, message: String },
    #[error("{}: png encode: {message}", path.display())]
    PngEncode { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
