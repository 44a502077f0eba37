use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;
use strapkit::imagecore::Manifest;
use strapkit::stain::{
    estimate_stain_profile, macenko_normalize, stain_augment, Error as StainError, HedAugmentParams, MacenkoParams,
    StainProfile,
};
use strapkit::{ImageTile, Rng};

use crate::args::{AugmentArgs, EstimateReferenceArgs, MacenkoArgs, NormalizeArgs};
use crate::job::{load_sorted_manifest, prepare_out_dir, thread_pool, tiles_dir, write_tile_messages, JobConfig, Outcome};

impl From<&MacenkoArgs> for MacenkoParams {
    fn from(a: &MacenkoArgs) -> Self {
        MacenkoParams {
            od_threshold: a.od_threshold,
            angle_percentile: a.angle_percentile,
            conc_percentile: a.conc_percentile,
            io: a.io,
            min_tissue_fraction: a.min_tissue_fraction,
        }
    }
}

#[derive(Debug, Serialize)]
struct NormalizeParams<'a> {
    manifest: &'a Path,
    reference: StainProfile,
    reference_file: Option<&'a Path>,
    macenko: MacenkoParams,
}

enum TileResult {
    Written,
    Skipped(String),
    Failed(String),
}

pub fn cmd_stain_normalize(args: &NormalizeArgs, workers: usize) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let params = MacenkoParams::from(&args.macenko);
    params.validate()?;
    let reference = match &args.reference {
        Some(p) => StainProfile::load(p).with_context(|| format!("loading reference profile {}", p.display()))?,
        None => StainProfile::reference(),
    };
    let config = NormalizeParams {
        manifest: &args.manifest,
        reference: reference.clone(),
        reference_file: args.reference.as_deref(),
        macenko: params,
    };
    prepare_out_dir(&args.out, &JobConfig::new("stain normalize", workers, &config))?;
    let source = load_sorted_manifest(&args.manifest)?;
    let tiles = tiles_dir(&args.out)?;

    let results: Vec<TileResult> = thread_pool(workers)?.install(|| {
        source
            .entries()
            .par_iter()
            .map(|entry| {
                let tile = match source.load_tile(entry) {
                    Ok(t) => t,
                    Err(e) => return TileResult::Failed(e.to_string()),
                };
                match macenko_normalize(&tile, &reference, &params) {
                    Ok(out) => match out.save_png(tiles.join(format!("{}.png", entry.meta.tile_id))) {
                        Ok(()) => TileResult::Written,
                        Err(e) => TileResult::Failed(e.to_string()),
                    },
                    Err(e @ (StainError::InsufficientTissue { .. } | StainError::DegenerateSpectrum)) => {
                        TileResult::Skipped(e.to_string())
                    }
                    Err(e) => TileResult::Failed(e.to_string()),
                }
            })
            .collect()
    });

    let mut manifest = Manifest::new(&args.out, source.extra_columns().to_vec());
    let (mut skipped, mut errors) = (Vec::new(), Vec::new());
    for (entry, res) in source.entries().iter().zip(results) {
        match res {
            TileResult::Written => {
                manifest.push(format!("tiles/{}.png", entry.meta.tile_id), entry.meta.clone(), entry.extra.clone())?
            }
            TileResult::Skipped(why) => skipped.push((entry.meta.tile_id.clone(), why)),
            TileResult::Failed(why) => errors.push((entry.meta.tile_id.clone(), why)),
        }
    }
    manifest.write(args.out.join("manifest.csv"))?;
    write_tile_messages(&args.out.join("skipped.csv"), "reason", &skipped)?;
    if !errors.is_empty() {
        write_tile_messages(&args.out.join("errors.csv"), "error", &errors)?;
    }
    if !skipped.is_empty() {
        eprintln!("warning: {} tile(s) skipped, see skipped.csv", skipped.len());
    }
    Ok(Outcome {
        processed: source.len(),
        written: manifest.len(),
        warnings: skipped.len(),
        hard_errors: errors.len(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Serialize)]
struct AugmentParams<'a> {
    manifest: &'a Path,
    copies: usize,
    seed: u64,
    hed: &'a HedAugmentParams,
}

/// Random stream for copy `copy` of `tile_id`.
pub fn augment_rng(seed: u64, tile_id: &str, copy: usize) -> Rng {
    Rng::derive(seed, &format!("{tile_id}#{copy}"))
}

pub fn cmd_stain_augment(args: &AugmentArgs, workers: usize) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let mut channels: Vec<_> = args.channels.iter().map(|&c| c.into()).collect();
    channels.dedup();
    let hed = HedAugmentParams {
        sigma_scale: args.sigma_scale,
        sigma_shift: args.sigma_shift,
        channels,
    };
    hed.validate()?;
    if args.copies == 0 {
        return Err(crate::job::CliError::InvalidArgument("--copies must be at least 1".into()).into());
    }
    let config = AugmentParams {
        manifest: &args.manifest,
        copies: args.copies,
        seed: args.seed,
        hed: &hed,
    };
    prepare_out_dir(&args.out, &JobConfig::new("stain augment", workers, &config))?;
    let source = load_sorted_manifest(&args.manifest)?;
    let tiles = tiles_dir(&args.out)?;

    let results: Vec<Result<(), String>> = thread_pool(workers)?.install(|| {
        source
            .entries()
            .par_iter()
            .map(|entry| {
                let tile = source.load_tile(entry).map_err(|e| e.to_string())?;
                for k in 0..args.copies {
                    let id = &entry.meta.tile_id;
                    let out = stain_augment(&tile, &hed, &mut augment_rng(args.seed, id, k)).map_err(|e| e.to_string())?;
                    out.save_png(tiles.join(format!("{id}_aug{k}.png"))).map_err(|e| e.to_string())?;
                }
                Ok(())
            })
            .collect()
    });

    let mut extra = source.extra_columns().to_vec();
    extra.extend(["source_tile_id".to_string(), "copy".to_string()]);
    let mut manifest = Manifest::new(&args.out, extra);
    let mut errors = Vec::new();
    for (entry, res) in source.entries().iter().zip(results) {
        match res {
            Ok(()) => {
                for k in 0..args.copies {
                    let id = format!("{}_aug{k}", entry.meta.tile_id);
                    let mut meta = entry.meta.clone();
                    meta.tile_id = id.clone();
                    let mut values = entry.extra.clone();
                    values.extend([entry.meta.tile_id.clone(), k.to_string()]);
                    manifest.push(format!("tiles/{id}.png"), meta, values)?;
                }
            }
            Err(msg) => errors.push((entry.meta.tile_id.clone(), msg)),
        }
    }
    manifest.sort_by_tile_id();
    manifest.write(args.out.join("manifest.csv"))?;
    if !errors.is_empty() {
        write_tile_messages(&args.out.join("errors.csv"), "error", &errors)?;
    }
    Ok(Outcome {
        processed: source.len(),
        written: manifest.len(),
        warnings: 0,
        hard_errors: errors.len(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Serialize)]
struct EstimateParams<'a> {
    tile: &'a Path,
    macenko: MacenkoParams,
}

pub fn cmd_estimate_reference(args: &EstimateReferenceArgs, workers: usize) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let params = MacenkoParams::from(&args.macenko);
    params.validate()?;
    let config = EstimateParams {
        tile: &args.tile,
        macenko: params,
    };
    prepare_out_dir(&args.out, &JobConfig::new("stain estimate-reference", workers, &config))?;
    let tile = ImageTile::load_png(&args.tile)?;
    let profile = estimate_stain_profile(&tile, &params)
        .with_context(|| format!("estimating a stain profile from {}", args.tile.display()))?;
    profile.save(args.out.join("reference_profile.json"))?;
    Ok(Outcome {
        processed: 1,
        written: 1,
        wall_seconds: start.elapsed().as_secs_f64(),
        ..Default::default()
    })
}
