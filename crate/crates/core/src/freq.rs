//! Low-frequency decomposition with a circular mask on the centered 2-D
//! spectrum, and dataset-wide radius sweeps.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::imagecore::{self, ImageTile, Manifest};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("radius {0} must be positive and finite")]
    InvalidRadius(f64),
    #[error("sweep radii must be strictly increasing")]
    NotIncreasing,
    #[error("tile {tile_id}: {source}")]
    Tile {
        tile_id: String,
        #[source]
        source: imagecore::Error,
    },
    #[error(transparent)]
    Image(#[from] imagecore::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    radius: f64,
}

impl FilterSpec {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidRadius(radius));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    radii: Vec<f64>,
}

impl SweepSpec {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        for &r in &radii {
            FilterSpec::new(r)?;
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NotIncreasing);
        }
        Ok(Self { radii })
    }

    /// `start, start + step, ...` up to and including `stop`.
    pub fn range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidRadius(step));
        }
        let n = ((stop - start) / step + 1e-9).floor();
        if !(n >= 0.0) {
            return Self::new(vec![]);
        }
        Self::new((0..=n as usize).map(|i| start + step * i as f64).collect())
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

impl Default for SweepSpec {
    /// Radii 14, 28, ..., 154.
    fn default() -> Self {
        Self::range(14.0, 154.0, 14.0).expect("default sweep is valid")
    }
}

/// Which side of the circle to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Low,
    /// Complement of the low-pass mask. Not used by the batch tools.
    High,
}

/// Boolean mask over the centered spectrum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.data[u * self.width + v]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// `mask[u, v]` is set iff `(u, v)` lies within `radius` (inclusive) of the
/// centered origin `(h / 2, w / 2)`.
pub fn build_mask(h: usize, w: usize, spec: &FilterSpec) -> Mask {
    let (cu, cv) = ((h / 2) as f64, (w / 2) as f64);
    let mut data = Vec::with_capacity(h * w);
    for u in 0..h {
        for v in 0..w {
            let (du, dv) = (u as f64 - cu, v as f64 - cv);
            data.push((du * du + dv * dv).sqrt() <= spec.radius);
        }
    }
    Mask {
        height: h,
        width: w,
        data,
    }
}

/// Unclamped filter output per RGB channel, plus the largest imaginary
/// magnitude left by the inverse transform relative to the largest real one.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredChannels {
    pub width: usize,
    pub height: usize,
    pub channels: [Vec<f64>; 3],
    pub imag_residue: f64,
}

/// Per channel: FFT, keep the bins selected by `band` on the centered
/// spectrum, inverse FFT, real part. Bins are masked in place: unshifted bin
/// `k` sits at centered position `(k + n / 2) mod n`, which is equivalent to
/// shifting, masking and shifting back.
pub fn frequency_filter(tile: &ImageTile, spec: &FilterSpec, band: Band) -> FilteredChannels {
    let (h, w) = (tile.height(), tile.width());
    let mask = build_mask(h, w, spec);
    let keep = |k: usize, l: usize| {
        let inside = mask.get((k + h / 2) % h, (l + w / 2) % w);
        match band {
            Band::Low => inside,
            Band::High => !inside,
        }
    };
    let mut fft = Fft2::new(h, w);
    let mut imag_residue = 0.0f64;
    let channels = std::array::from_fn(|c| {
        let mut buf: Vec<Complex<f64>> = (0..h * w)
            .map(|i| Complex::new(tile.pixels()[i * 3 + c] as f64, 0.0))
            .collect();
        fft.forward(&mut buf);
        for k in 0..h {
            for l in 0..w {
                if !keep(k, l) {
                    buf[k * w + l] = Complex::new(0.0, 0.0);
                }
            }
        }
        fft.inverse(&mut buf);
        let max_re = buf.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let max_im = buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        imag_residue = imag_residue.max(if max_re > 0.0 { max_im / max_re } else { max_im });
        buf.into_iter().map(|z| z.re).collect()
    });
    FilteredChannels {
        width: w,
        height: h,
        channels,
        imag_residue,
    }
}

/// Low-frequency component of `tile`, clamped to `[0, 1]`.
pub fn lowpass(tile: &ImageTile, spec: &FilterSpec) -> ImageTile {
    let f = frequency_filter(tile, spec, Band::Low);
    let n = f.width * f.height;
    tile.with_values(f.width, f.height, (0..n * 3).map(|i| f.channels[i % 3][i / 3]))
}

/// Fraction of total spectral energy (all channels) inside the mask.
pub fn retained_energy_fraction(tile: &ImageTile, spec: &FilterSpec) -> f64 {
    let (h, w) = (tile.height(), tile.width());
    let mask = build_mask(h, w, spec);
    let mut fft = Fft2::new(h, w);
    let (mut kept, mut total) = (0.0, 0.0);
    for c in 0..3 {
        let mut buf: Vec<Complex<f64>> = (0..h * w)
            .map(|i| Complex::new(tile.pixels()[i * 3 + c] as f64, 0.0))
            .collect();
        fft.forward(&mut buf);
        for k in 0..h {
            for l in 0..w {
                let e = buf[k * w + l].norm_sqr();
                total += e;
                if mask.get((k + h / 2) % h, (l + w / 2) % w) {
                    kept += e;
                }
            }
        }
    }
    if total == 0.0 {
        1.0
    } else {
        kept / total
    }
}

struct Fft2 {
    h: usize,
    w: usize,
    planner: FftPlanner<f64>,
    column: Vec<Complex<f64>>,
}

impl Fft2 {
    fn new(h: usize, w: usize) -> Self {
        Self {
            h,
            w,
            planner: FftPlanner::new(),
            column: vec![Complex::new(0.0, 0.0); h],
        }
    }

    fn forward(&mut self, buf: &mut [Complex<f64>]) {
        self.run(buf, false);
    }

    /// Inverse transform including the `1 / (h * w)` normalization.
    fn inverse(&mut self, buf: &mut [Complex<f64>]) {
        self.run(buf, true);
        let scale = 1.0 / (self.h * self.w) as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }

    fn run(&mut self, buf: &mut [Complex<f64>], inverse: bool) {
        let (h, w) = (self.h, self.w);
        let (row_fft, col_fft) = if inverse {
            (self.planner.plan_fft_inverse(w), self.planner.plan_fft_inverse(h))
        } else {
            (self.planner.plan_fft_forward(w), self.planner.plan_fft_forward(h))
        };
        row_fft.process(buf);
        for l in 0..w {
            for k in 0..h {
                self.column[k] = buf[k * w + l];
            }
            col_fft.process(&mut self.column);
            for k in 0..h {
                buf[k * w + l] = self.column[k];
            }
        }
    }
}

/// Directory name for one radius: `r14`, `r12.5`.
pub fn radius_dir_name(radius: f64) -> String {
    format!("r{radius}")
}

/// Writes one low-passed copy of the dataset per radius under
/// `out_dir/r{radius}/`. Each radius gets a `manifest.csv` sorted by tile id
/// with an extra `lowpass_radius` column. On error the radius directories
/// created by this call are removed.
pub fn sweep_lowpass(manifest: &Manifest, sweep: &SweepSpec, out_dir: &Path) -> Result<Vec<(f64, Manifest)>> {
    let mut created: Vec<PathBuf> = Vec::new();
    let result = sweep_inner(manifest, sweep, out_dir, &mut created);
    if result.is_err() {
        for dir in created {
            let _ = fs::remove_dir_all(dir);
        }
    }
    result
}

fn sweep_inner(
    manifest: &Manifest,
    sweep: &SweepSpec,
    out_dir: &Path,
    created: &mut Vec<PathBuf>,
) -> Result<Vec<(f64, Manifest)>> {
    let specs: Vec<FilterSpec> = sweep.radii().iter().map(|&r| FilterSpec::new(r)).collect::<Result<_>>()?;
    let mut dirs = Vec::with_capacity(specs.len());
    for spec in &specs {
        let dir = out_dir.join(radius_dir_name(spec.radius()));
        if !dir.exists() {
            fs::create_dir_all(&dir).map_err(|source| Error::Io {
                path: dir.clone(),
                source,
            })?;
            created.push(dir.clone());
        }
        dirs.push(dir);
    }

    let mut entries: Vec<_> = manifest.entries().iter().collect();
    entries.sort_by(|a, b| a.meta.tile_id.cmp(&b.meta.tile_id));
    entries.par_iter().try_for_each(|entry| -> Result<()> {
        let tile_err = |source| Error::Tile {
            tile_id: entry.meta.tile_id.clone(),
            source,
        };
        let tile = manifest.load_tile(entry).map_err(tile_err)?;
        for (spec, dir) in specs.iter().zip(&dirs) {
            lowpass(&tile, spec)
                .save_png(dir.join(format!("{}.png", entry.meta.tile_id)))
                .map_err(tile_err)?;
        }
        Ok(())
    })?;

    let mut columns = manifest.extra_columns().to_vec();
    columns.push("lowpass_radius".into());
    let mut outputs = Vec::with_capacity(specs.len());
    for (spec, dir) in specs.iter().zip(&dirs) {
        let mut out = Manifest::new(dir, columns.clone());
        for entry in &entries {
            let mut extra = entry.extra.clone();
            extra.push(format!("{}", spec.radius()));
            out.push(format!("{}.png", entry.meta.tile_id), entry.meta.clone(), extra)?;
        }
        out.write(dir.join("manifest.csv"))?;
        outputs.push((spec.radius(), out));
    }
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_examples() {
        let m = build_mask(8, 8, &FilterSpec::new(0.5).unwrap());
        assert_eq!(m.count(), 1);
        assert!(m.get(4, 4));
        assert_eq!(build_mask(8, 8, &FilterSpec::new(32f64.sqrt()).unwrap()).count(), 64);
        let m = build_mask(8, 8, &FilterSpec::new(1.0).unwrap());
        assert_eq!(m.count(), 5);
        for (u, v) in [(4, 4), (3, 4), (5, 4), (4, 3), (4, 5)] {
            assert!(m.get(u, v));
        }
        // odd sizes center on floor(n / 2)
        assert!(build_mask(5, 7, &FilterSpec::new(0.5).unwrap()).get(2, 3));
    }

    #[test]
    fn spec_validation() {
        assert!(FilterSpec::new(0.0).is_err());
        assert!(FilterSpec::new(f64::NAN).is_err());
        assert!(matches!(SweepSpec::new(vec![14.0, 14.0]), Err(Error::NotIncreasing)));
        let d = SweepSpec::default();
        assert_eq!(d.radii(), &[14., 28., 42., 56., 70., 84., 98., 112., 126., 140., 154.]);
        assert_eq!(radius_dir_name(84.0), "r84");
        assert_eq!(radius_dir_name(12.5), "r12.5");
    }

    #[test]
    fn constant_tile_is_fixed() {
        let t = ImageTile::filled(17, 12, 0.37).unwrap();
        for r in [0.1, 1.0, 5.0, 100.0] {
            let out = lowpass(&t, &FilterSpec::new(r).unwrap());
            assert!(out.mean_abs_diff(&t) < 1e-6);
        }
    }

    #[test]
    fn high_band_is_the_complement() {
        let t = ImageTile::from_fn(16, 12, |x, y, c| ((x * 5 + y * 3 + c) % 11) as f32 / 10.0).unwrap();
        let spec = FilterSpec::new(3.0).unwrap();
        let lo = frequency_filter(&t, &spec, Band::Low);
        let hi = frequency_filter(&t, &spec, Band::High);
        for c in 0..3 {
            for i in 0..16 * 12 {
                let sum = lo.channels[c][i] + hi.channels[c][i];
                assert!((sum - t.pixels()[i * 3 + c] as f64).abs() < 1e-9);
            }
        }
    }
}
