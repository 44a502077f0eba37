#![allow(dead_code)]

use std::path::{Path, PathBuf};

use strapkit::adain::{Conv2d, FeatureMap};
use strapkit::imagecore::{Manifest, Split, TileMeta};
use strapkit::stain::{StainProfile, OD_OFFSET};
use strapkit::{ImageTile, Rng};

pub fn fixture_weights() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny.strapw")
}

/// H&E-like tile drawn from the bundled reference stains.
pub fn he_tile(size: usize, seed: u64) -> ImageTile {
    let p = StainProfile::reference();
    let (h, e) = (p.column(0), p.column(1));
    let mut rng = Rng::new(seed);
    let px: Vec<f32> = (0..size * size)
        .flat_map(|_| {
            let (ch, ce) = (rng.uniform() * p.max_conc[0], rng.uniform() * p.max_conc[1]);
            [0, 1, 2].map(|k| (10f64.powf(-(ch * h[k] + ce * e[k])) - OD_OFFSET).clamp(0.0, 1.0) as f32)
        })
        .collect();
    ImageTile::new(size, size, px).unwrap()
}

/// Writes `tiles` as PNGs under `dir` and a manifest listing them in
/// reverse order (so commands must sort).
pub fn write_dataset(dir: &Path, prefix: &str, tiles: &[ImageTile]) -> PathBuf {
    std::fs::create_dir_all(dir.join("img")).unwrap();
    let mut m = Manifest::new(dir, vec!["note".into()]);
    for (i, t) in tiles.iter().enumerate().rev() {
        let id = format!("{prefix}{i:02}");
        t.save_png(dir.join("img").join(format!("{id}.png"))).unwrap();
        let meta = TileMeta {
            tile_id: id.clone(),
            patient_id: format!("P{}", i / 2),
            slide_id: format!("S{i}"),
            domain_id: "site1".into(),
            label: (i % 2) as u8,
            split: Split::Train,
        };
        m.push(format!("img/{id}.png"), meta, vec![format!("n{i}")]).unwrap();
    }
    let path = dir.join(format!("{prefix}manifest.csv"));
    m.write(&path).unwrap();
    path
}

pub fn write_scores(path: &Path, scores: &[f64], labels: &[u8], folds: Option<&[&str]>) {
    let mut s = String::from(if folds.is_some() { "tile_id,patient_id,score,label,fold\n" } else { "tile_id,patient_id,score,label\n" });
    for i in 0..scores.len() {
        s.push_str(&format!("t{i},p{i},{},{}", scores[i], labels[i]));
        if let Some(f) = folds {
            s.push_str(&format!(",{}", f[i]));
        }
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

/// Direct reflection-padded convolution in f64.
pub fn brute_conv(input: &FeatureMap, conv: &Conv2d) -> Vec<f64> {
    let (cin, h, w) = input.shape();
    let k = conv.kernel as isize;
    let reflect = |i: isize, n: usize| -> usize {
        let n = n as isize;
        if n == 1 {
            return 0;
        }
        let mut i = i;
        while i < 0 || i >= n {
            i = if i < 0 { -i } else { 2 * (n - 1) - i };
        }
        i as usize
    };
    let mut out = vec![0.0; conv.out_channels * h * w];
    for o in 0..conv.out_channels {
        for y in 0..h {
            for x in 0..w {
                let mut acc = conv.bias[o] as f64;
                for c in 0..cin {
                    for ky in 0..k {
                        for kx in 0..k {
                            let sy = reflect(y as isize + ky - k / 2, h);
                            let sx = reflect(x as isize + kx - k / 2, w);
                            let wt = conv.weight[((o * cin + c) * conv.kernel + ky as usize) * conv.kernel + kx as usize];
                            acc += wt as f64 * input.data()[(c * h + sy) * w + sx] as f64;
                        }
                    }
                }
                out[(o * h + y) * w + x] = acc;
            }
        }
    }
    out
}

/// AUROC by explicit enumeration of positive/negative pairs.
pub fn brute_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

/// Every regular file under `dir`, relative path and bytes, sorted.
pub fn snapshot(dir: &Path, skip: &[&str]) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>, skip: &[&str]) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            if skip.iter().any(|s| rel == *s) {
                continue;
            }
            if p.is_dir() {
                walk(root, &p, out, skip);
            } else {
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out, skip);
    out.sort();
    out
}
