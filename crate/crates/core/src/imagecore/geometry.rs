use serde::{Deserialize, Serialize};

use super::{Error, ImageTile, Result, Rng};

/// Bilinear resize using half-pixel centers: output pixel `i` samples the
/// input at `(i + 0.5) * in / out - 0.5`, clamped to the valid range.
pub fn resize(tile: &ImageTile, out_w: usize, out_h: usize) -> Result<ImageTile> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::ZeroDimension);
    }
    let (in_w, in_h) = (tile.width(), tile.height());
    if in_w == out_w && in_h == out_h {
        return Ok(tile.clone());
    }
    let xs = sample_positions(in_w, out_w);
    let ys = sample_positions(in_h, out_h);
    let src = tile.pixels();
    let mut out = Vec::with_capacity(out_w * out_h * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let p = |x: usize, y: usize| src[(y * in_w + x) * 3 + c] as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Ok(tile.with_values(out_w, out_h, out))
}

fn sample_positions(n_in: usize, n_out: usize) -> Vec<(usize, usize, f64)> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(n_in - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Horizontal flip with probability `p_h`, then vertical with `p_v`.
/// Both decisions are always drawn, horizontal first.
pub fn random_flip(tile: &ImageTile, p_h: f64, p_v: f64, rng: &mut Rng) -> Result<ImageTile> {
    for p in [p_h, p_v] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
    }
    let flip_h = rng.bernoulli(p_h);
    let flip_v = rng.bernoulli(p_v);
    if !flip_h && !flip_v {
        return Ok(tile.clone());
    }
    let (w, h) = (tile.width(), tile.height());
    let src = tile.pixels();
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        let sy = if flip_v { h - 1 - y } else { y };
        for x in 0..w {
            let sx = if flip_h { w - 1 - x } else { x };
            let i = (sy * w + sx) * 3;
            out.extend_from_slice(&src[i..i + 3]);
        }
    }
    Ok(ImageTile::from_clamped(w, h, out, tile.meta().clone()))
}

/// Axis-aligned sub-image.
pub fn crop(tile: &ImageTile, x0: usize, y0: usize, w: usize, h: usize) -> Result<ImageTile> {
    if w == 0 || h == 0 {
        return Err(Error::ZeroDimension);
    }
    assert!(x0 + w <= tile.width() && y0 + h <= tile.height(), "crop window out of bounds");
    let src = tile.pixels();
    let mut out = Vec::with_capacity(w * h * 3);
    for y in y0..y0 + h {
        let start = (y * tile.width() + x0) * 3;
        out.extend_from_slice(&src[start..start + w * 3]);
    }
    Ok(ImageTile::from_clamped(w, h, out, tile.meta().clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropParams {
    /// Range of the crop area as a fraction of the tile area.
    pub scale: (f64, f64),
    /// Range of the crop width/height ratio.
    pub ratio: (f64, f64),
}

impl Default for CropParams {
    fn default() -> Self {
        Self {
            scale: (0.08, 1.0),
            ratio: (3.0 / 4.0, 4.0 / 3.0),
        }
    }
}

/// Crops a random region and resizes it to `out_size x out_size`.
///
/// Draw order: area fraction ~ U(scale), aspect ratio ~ U(ratio), left offset,
/// top offset. The crop size is `round(sqrt(area * ratio))` by
/// `round(sqrt(area / ratio))`, clipped to the tile.
pub fn random_resized_crop(tile: &ImageTile, out_size: usize, params: &CropParams, rng: &mut Rng) -> Result<ImageTile> {
    if out_size == 0 {
        return Err(Error::ZeroDimension);
    }
    let (lo, hi) = params.scale;
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidRange(lo, hi));
    }
    let (rlo, rhi) = params.ratio;
    if !(rlo > 0.0 && rlo <= rhi) {
        return Err(Error::InvalidRange(rlo, rhi));
    }
    let (w, h) = (tile.width(), tile.height());
    let area = rng.uniform_range(lo, hi) * (w * h) as f64;
    let ratio = rng.uniform_range(rlo, rhi);
    let cw = ((area * ratio).sqrt().round() as usize).clamp(1, w);
    let ch = ((area / ratio).sqrt().round() as usize).clamp(1, h);
    let x0 = rng.below(w - cw + 1);
    let y0 = rng.below(h - ch + 1);
    let region = crop(tile, x0, y0, cw, ch)?;
    resize(&region, out_size, out_size)
}
