use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::od::{od_of, rgb_of};
use super::{Error, Result};
use crate::imagecore::ImageTile;
use crate::numeric::percentile;

/// Second eigenvalue of the OD second-moment matrix below this fraction of
/// the first means the tissue holds fewer than two stains.
const RANK_TOLERANCE: f64 = 1e-4;
const NNLS_TOLERANCE: f64 = 1e-8;
const NNLS_MAX_ITER: usize = 1000;

const REFERENCE_PROFILE_JSON: &str = include_str!("../../data/reference_stain_profile.json");

/// Hematoxylin and eosin optical-density directions (columns) and the robust
/// maximum concentration of each stain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StainProfile {
    /// Rows are R, G, B; column 0 is hematoxylin, column 1 eosin.
    pub stain_matrix: [[f64; 2]; 3],
    pub max_conc: [f64; 2],
}

impl StainProfile {
    /// Normalizes columns to unit length after checking they are non-negative
    /// and non-zero, and that the concentration scales are positive.
    pub fn new(stain_matrix: [[f64; 2]; 3], max_conc: [f64; 2]) -> Result<Self> {
        let mut m = stain_matrix;
        for col in 0..2 {
            if m.iter().any(|r| !(r[col] >= 0.0 && r[col].is_finite())) {
                return Err(Error::InvalidProfile(format!("column {col} has a negative or non-finite entry")));
            }
            let norm = m.iter().map(|r| r[col] * r[col]).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidProfile(format!("column {col} is zero")));
            }
            for r in &mut m {
                r[col] /= norm;
            }
        }
        if max_conc.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidProfile("max_conc must be positive".into()));
        }
        Ok(Self {
            stain_matrix: m,
            max_conc,
        })
    }

    /// The bundled reference profile (`data/reference_stain_profile.json`).
    pub fn reference() -> Self {
        let raw: StainProfile = serde_json::from_str(REFERENCE_PROFILE_JSON).expect("bundled profile parses");
        Self::new(raw.stain_matrix, raw.max_conc).expect("bundled profile is valid")
    }

    pub fn column(&self, k: usize) -> [f64; 3] {
        [self.stain_matrix[0][k], self.stain_matrix[1][k], self.stain_matrix[2][k]]
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })?;
        let raw: StainProfile = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.into(),
            message: e.to_string(),
        })?;
        Self::new(raw.stain_matrix, raw.max_conc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("profile serializes") + "\n";
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })
    }

    fn gram(&self) -> [[f64; 2]; 2] {
        let (h, e) = (self.column(0), self.column(1));
        let d = dot(&h, &e);
        [[dot(&h, &h), d], [d, dot(&e, &e)]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacenkoParams {
    /// Pixels whose OD vector norm exceeds this count as tissue.
    pub od_threshold: f64,
    /// Lower percentile of the plane angles; the upper one is `100 - angle_percentile`.
    pub angle_percentile: f64,
    /// Percentile of per-stain concentrations used as the stain's scale.
    pub conc_percentile: f64,
    /// Intensity of unattenuated light.
    pub io: f64,
    /// Minimum fraction of tissue pixels for an estimate.
    pub min_tissue_fraction: f64,
}

impl Default for MacenkoParams {
    fn default() -> Self {
        Self {
            od_threshold: 0.15,
            angle_percentile: 1.0,
            conc_percentile: 99.0,
            io: 1.0,
            min_tissue_fraction: 0.05,
        }
    }
}

impl MacenkoParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if !(self.angle_percentile > 0.0 && self.angle_percentile < 50.0) {
            return bad("angle_percentile must lie in (0, 50)");
        }
        if !(self.conc_percentile > 0.0 && self.conc_percentile <= 100.0) {
            return bad("conc_percentile must lie in (0, 100]");
        }
        if !(self.io > 0.0 && self.io.is_finite()) {
            return bad("io must be positive");
        }
        if !(self.od_threshold >= 0.0 && self.od_threshold.is_finite()) {
            return bad("od_threshold must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.min_tissue_fraction) {
            return bad("min_tissue_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Non-negative least squares `min ||A c - b||, c >= 0` given the normal
/// equations `gram = A^T A` and `rhs = A^T b`, by projected coordinate
/// descent started from the clamped unconstrained solution. Stops when no
/// coordinate moves more than 1e-8 or after 1000 sweeps.
pub fn nnls<const N: usize>(gram: &[[f64; N]; N], rhs: &[f64; N]) -> [f64; N] {
    let mut c = solve(gram, rhs).map_or([0.0; N], |x| x.map(|v| v.max(0.0)));
    for _ in 0..NNLS_MAX_ITER {
        let mut max_step = 0.0f64;
        for j in 0..N {
            if gram[j][j] <= 0.0 {
                continue;
            }
            let mut residual = rhs[j];
            for i in 0..N {
                if i != j {
                    residual -= gram[j][i] * c[i];
                }
            }
            let next = (residual / gram[j][j]).max(0.0);
            max_step = max_step.max((next - c[j]).abs());
            c[j] = next;
        }
        if max_step < NNLS_TOLERANCE {
            break;
        }
    }
    c
}

/// Gaussian elimination with partial pivoting; `None` for (near) singular systems.
fn solve<const N: usize>(a: &[[f64; N]; N], b: &[f64; N]) -> Option<[f64; N]> {
    let (mut a, mut b) = (*a, *b);
    for col in 0..N {
        let pivot = (col..N).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Estimates hematoxylin/eosin directions and concentration scales.
///
/// Tissue pixels are projected onto the plane of the two leading singular
/// vectors of their OD values; the stain directions are the
/// `angle_percentile` and `100 - angle_percentile` extremes of the projected
/// angles. The column with the larger red-channel OD is hematoxylin.
pub fn estimate_stain_profile(tile: &ImageTile, params: &MacenkoParams) -> Result<StainProfile> {
    params.validate()?;
    let tissue = tissue_od(tile, params)?;
    let n = tissue.len() as f64;

    let mut moment = Matrix3::<f64>::zeros();
    for od in &tissue {
        let v = Vector3::from(*od);
        moment += v * v.transpose();
    }
    moment /= n;
    let eig = SymmetricEigen::new(moment);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if !(l1 > 0.0) || l2 <= RANK_TOLERANCE * l1 {
        return Err(Error::DegenerateSpectrum);
    }
    let mut e1: [f64; 3] = eig.eigenvectors.column(order[0]).into_owned().into();
    let e2: [f64; 3] = eig.eigenvectors.column(order[1]).into_owned().into();
    if e1.iter().sum::<f64>() < 0.0 {
        e1.iter_mut().for_each(|v| *v = -*v);
    }

    let mut angles: Vec<f64> = tissue.iter().map(|od| dot(od, &e2).atan2(dot(od, &e1))).collect();
    let lo = percentile(&mut angles, params.angle_percentile);
    let hi = percentile(&mut angles, 100.0 - params.angle_percentile);
    let direction = |phi: f64| -> Result<[f64; 3]> {
        let mut v = [0.0; 3];
        for i in 0..3 {
            v[i] = (phi.cos() * e1[i] + phi.sin() * e2[i]).max(0.0);
        }
        let norm = dot(&v, &v).sqrt();
        if norm < 1e-12 {
            return Err(Error::DegenerateSpectrum);
        }
        Ok(v.map(|x| x / norm))
    };
    let (a, b) = (direction(lo)?, direction(hi)?);
    let (h, e) = if a[0] >= b[0] { (a, b) } else { (b, a) };
    let matrix = [[h[0], e[0]], [h[1], e[1]], [h[2], e[2]]];

    let mut profile = StainProfile {
        stain_matrix: matrix,
        max_conc: [1.0, 1.0],
    };
    let gram = profile.gram();
    if gram[0][1] / (gram[0][0] * gram[1][1]).sqrt() > 1.0 - 1e-9 {
        return Err(Error::DegenerateSpectrum);
    }
    let (mut ch, mut ce): (Vec<f64>, Vec<f64>) = tissue
        .iter()
        .map(|od| {
            let c = nnls(&gram, &[dot(&h, od), dot(&e, od)]);
            (c[0], c[1])
        })
        .unzip();
    profile.max_conc = [
        percentile(&mut ch, params.conc_percentile),
        percentile(&mut ce, params.conc_percentile),
    ];
    if profile.max_conc.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::DegenerateSpectrum);
    }
    Ok(profile)
}

/// Maps the tile's stains onto `reference`: concentrations are solved under
/// the tile's own profile, rescaled per stain by `reference.max_conc /
/// source.max_conc` and recomposed with the reference directions.
pub fn macenko_normalize(tile: &ImageTile, reference: &StainProfile, params: &MacenkoParams) -> Result<ImageTile> {
    let source = estimate_stain_profile(tile, params)?;
    let gram = source.gram();
    let (sh, se) = (source.column(0), source.column(1));
    let (rh, re) = (reference.column(0), reference.column(1));
    let scale = [
        reference.max_conc[0] / source.max_conc[0],
        reference.max_conc[1] / source.max_conc[1],
    ];
    let io = params.io;
    let mut out = Vec::with_capacity(tile.pixels().len());
    for px in tile.pixels().chunks_exact(3) {
        let od = [od_of(px[0] as f64, io), od_of(px[1] as f64, io), od_of(px[2] as f64, io)];
        let c = nnls(&gram, &[dot(&sh, &od), dot(&se, &od)]);
        let (ch, ce) = (c[0] * scale[0], c[1] * scale[1]);
        for k in 0..3 {
            out.push(rgb_of(rh[k] * ch + re[k] * ce, io) as f32);
        }
    }
    Ok(ImageTile::new(tile.width(), tile.height(), out)
        .expect("same dimensions as input")
        .with_meta(tile.meta().clone()))
}

fn tissue_od(tile: &ImageTile, params: &MacenkoParams) -> Result<Vec<[f64; 3]>> {
    let total = tile.width() * tile.height();
    let threshold_sq = params.od_threshold * params.od_threshold;
    let tissue: Vec<[f64; 3]> = tile
        .pixels()
        .chunks_exact(3)
        .map(|p| [od_of(p[0] as f64, params.io), od_of(p[1] as f64, params.io), od_of(p[2] as f64, params.io)])
        .filter(|od| dot(od, od) > threshold_sq)
        .collect();
    let required = ((params.min_tissue_fraction * total as f64).ceil() as usize).max(2);
    if tissue.len() < required {
        return Err(Error::InsufficientTissue {
            found: tissue.len(),
            required,
        });
    }
    Ok(tissue)
}

#[inline]
fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
