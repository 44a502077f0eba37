//! Forward-only stylization network: a VGG-style encoder truncated at
//! `relu4_1`, adaptive instance normalization of feature statistics,
//! content/style blending and a mirrored decoder.

mod align;
mod network;
mod weights;

use std::path::PathBuf;

pub use align::{adain_align, blend, channel_stats, stylize, FeatureStats, StylizeConfig};
pub use network::{conv2d, decode, encode, encode_with, max_pool2, relu, run_layers, upsample2, FeatureMap, Preprocess};
pub use weights::{load_weights, Architecture, Conv2d, Layer, LayerKind, LayerPlan, NetworkWeights, Role, WEIGHTS_MAGIC};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("weight file format: {0}")]
    FormatError(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in weights of layer {0}")]
    NonFiniteWeight(usize),
    #[error("input {width}x{height} is not divisible by the encoder downsampling factor {factor}")]
    IndivisibleInput { width: usize, height: usize, factor: usize },
    #[error("expected {expected} channels, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("invalid stylization config: {0}")]
    InvalidConfig(String),
    #[error("non-finite feature value")]
    NonFiniteFeature,
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] crate::imagecore::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
