//! Stain normalization (Macenko) and HED stain augmentation, both built on
//! the Beer-Lambert optical-density transform.

mod hed;
mod macenko;
mod od;

use std::path::PathBuf;

pub use hed::{
    apply_hed_jitter, hed_decompose, hed_inverse_matrix, hed_recompose, stain_augment, ConcentrationMap, HedAugmentParams,
    HedChannel, RGB_FROM_HED,
};
pub use macenko::{estimate_stain_profile, macenko_normalize, nnls, MacenkoParams, StainProfile};
pub use od::{od_to_rgb, rgb_to_od, OdMap, OD_OFFSET};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("only {found} tissue pixels, need at least {required}")]
    InsufficientTissue { found: usize, required: usize },
    #[error("optical density cloud has rank below 2")]
    DegenerateSpectrum,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid stain profile: {0}")]
    InvalidProfile(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Json { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
