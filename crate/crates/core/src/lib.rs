//! Image transformations and evaluation statistics for style-transfer
//! augmentation experiments on histopathology tiles.
//!
//! The crate is organised by subsystem:
//!
//! * [`imagecore`]: tiles and manifests, plus the seeded random generator
//!   every stochastic operation draws from.
//! * [`adain`]: a forward-only VGG-style encoder/decoder with adaptive
//!   instance normalization for stylization.
//! * [`stain`]: Macenko stain normalization and HED stain augmentation.
//! * [`freq`]: centered-FFT circular low-pass filtering and radius sweeps.
//! * [`evalstats`]: AUROC with bootstrap intervals, paired significance
//!   tests with Benjamini-Hochberg adjustment, and integrated gradients.

pub mod adain;
pub mod evalstats;
pub mod freq;
pub mod imagecore;
pub mod stain;

mod numeric;

pub use imagecore::{ImageTile, Manifest, Rng, TileMeta};
