use crate::imagecore::{ImageTile, TileMeta};

/// Offset added to intensities before taking the logarithm.
pub const OD_OFFSET: f64 = 1.0 / 255.0;

/// Per-pixel optical densities, interleaved like [`ImageTile`] pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct OdMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl OdMap {
    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }
}

/// `od = -log10((v + OD_OFFSET) / io)` per channel.
pub fn rgb_to_od(tile: &ImageTile, io: f64) -> OdMap {
    assert!(io > 0.0, "white point must be positive");
    OdMap {
        width: tile.width(),
        height: tile.height(),
        data: tile.pixels().iter().map(|&v| od_of(v as f64, io)).collect(),
    }
}

/// Inverse of [`rgb_to_od`], clamped to `[0, 1]`.
pub fn od_to_rgb(od: &OdMap, io: f64, meta: TileMeta) -> ImageTile {
    ImageTile::new(od.width, od.height, od.data.iter().map(|&d| rgb_of(d, io) as f32).collect())
        .expect("od map dimensions are consistent")
        .with_meta(meta)
}

#[inline]
pub(crate) fn od_of(v: f64, io: f64) -> f64 {
    -((v + OD_OFFSET) / io).log10()
}

#[inline]
pub(crate) fn rgb_of(od: f64, io: f64) -> f64 {
    (io * 10f64.powf(-od) - OD_OFFSET).clamp(0.0, 1.0)
}
