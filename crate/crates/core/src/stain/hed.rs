use std::sync::OnceLock;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::od::{od_of, rgb_of};
use super::{Error, Result};
use crate::imagecore::{ImageTile, Rng, TileMeta};

/// Ruifrok-Johnson absorbance directions for hematoxylin, eosin and DAB,
/// one per row, each normalized to unit length and rounded to 6 decimals.
/// `od = conc * RGB_FROM_HED` with `od` and `conc` as row vectors.
pub const RGB_FROM_HED: [[f64; 3]; 3] = [
    [0.651108, 0.701193, 0.290494],
    [0.070102, 0.991439, 0.110160],
    [0.269167, 0.568241, 0.777593],
];

/// Inverse of [`RGB_FROM_HED`].
pub fn hed_inverse_matrix() -> &'static [[f64; 3]; 3] {
    static INV: OnceLock<[[f64; 3]; 3]> = OnceLock::new();
    INV.get_or_init(|| {
        let m = Matrix3::from_fn(|r, c| RGB_FROM_HED[r][c]);
        let inv = m.try_inverse().expect("HED matrix is invertible");
        std::array::from_fn(|r| std::array::from_fn(|c| inv[(r, c)]))
    })
}

/// Per-pixel H, E, D concentrations, interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HedChannel {
    H,
    E,
    D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedAugmentParams {
    /// Half-width of the multiplicative jitter `a ~ U(1 - s, 1 + s)`.
    pub sigma_scale: f64,
    /// Half-width of the additive jitter `b ~ U(-s, s)`.
    pub sigma_shift: f64,
    pub channels: Vec<HedChannel>,
}

impl Default for HedAugmentParams {
    fn default() -> Self {
        Self {
            sigma_scale: 0.05,
            sigma_shift: 0.05,
            channels: vec![HedChannel::H, HedChannel::E, HedChannel::D],
        }
    }
}

impl HedAugmentParams {
    pub fn validate(&self) -> Result<()> {
        for s in [self.sigma_scale, self.sigma_shift] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidParams(format!("sigma {s} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

/// Color deconvolution: `conc = od(tile) * RGB_FROM_HED^-1` with `io = 1`.
pub fn hed_decompose(tile: &ImageTile) -> ConcentrationMap {
    let inv = hed_inverse_matrix();
    let mut data = Vec::with_capacity(tile.pixels().len());
    for px in tile.pixels().chunks_exact(3) {
        let od = [od_of(px[0] as f64, 1.0), od_of(px[1] as f64, 1.0), od_of(px[2] as f64, 1.0)];
        data.extend(mul_row(&od, inv));
    }
    ConcentrationMap {
        width: tile.width(),
        height: tile.height(),
        data,
    }
}

/// Inverse of [`hed_decompose`]; pixels are clamped to `[0, 1]`.
pub fn hed_recompose(conc: &ConcentrationMap, meta: TileMeta) -> ImageTile {
    let pixels = conc
        .data
        .chunks_exact(3)
        .flat_map(|c| mul_row(&[c[0], c[1], c[2]], &RGB_FROM_HED).map(|od| rgb_of(od, 1.0) as f32))
        .collect();
    ImageTile::new(conc.width, conc.height, pixels)
        .expect("dimensions carried over")
        .with_meta(meta)
}

/// Applies `conc'_i = scales[i] * conc_i + shifts[i]` per HED channel and recomposes.
pub fn apply_hed_jitter(tile: &ImageTile, scales: [f64; 3], shifts: [f64; 3]) -> ImageTile {
    let mut conc = hed_decompose(tile);
    for px in conc.data.chunks_exact_mut(3) {
        for i in 0..3 {
            px[i] = scales[i] * px[i] + shifts[i];
        }
    }
    hed_recompose(&conc, tile.meta().clone())
}

/// Random HED jitter. For each selected channel in H, E, D order a scale
/// `a ~ U(1 - sigma_scale, 1 + sigma_scale)` is drawn, then a shift
/// `b ~ U(-sigma_shift, sigma_shift)`; unselected channels consume no draws.
pub fn stain_augment(tile: &ImageTile, params: &HedAugmentParams, rng: &mut Rng) -> Result<ImageTile> {
    params.validate()?;
    let mut scales = [1.0; 3];
    let mut shifts = [0.0; 3];
    for (i, ch) in [HedChannel::H, HedChannel::E, HedChannel::D].into_iter().enumerate() {
        if params.channels.contains(&ch) {
            scales[i] = rng.uniform_range(1.0 - params.sigma_scale, 1.0 + params.sigma_scale);
            shifts[i] = rng.uniform_range(-params.sigma_shift, params.sigma_shift);
        }
    }
    Ok(apply_hed_jitter(tile, scales, shifts))
}

#[inline]
fn mul_row(v: &[f64; 3], m: &[[f64; 3]; 3]) -> [f64; 3] {
    std::array::from_fn(|c| v[0] * m[0][c] + v[1] * m[1][c] + v[2] * m[2][c])
}
