use std::time::Instant;

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;
use strapkit::adain::{load_weights, stylize, Preprocess, StylizeConfig};
use strapkit::imagecore::{Manifest, ManifestEntry};
use strapkit::Rng;

use crate::args::StylizeArgs;
use crate::job::{load_sorted_manifest, prepare_out_dir, thread_pool, tiles_dir, write_tile_messages, CliError, JobConfig, Outcome};

#[derive(Debug, Serialize)]
struct Params<'a> {
    manifest: &'a std::path::Path,
    styles: &'a std::path::Path,
    weights: &'a std::path::Path,
    seed: u64,
    stylize: StylizeConfig,
}

/// Index into the sorted style manifest used for `tile_id`.
pub fn style_index(seed: u64, tile_id: &str, n_styles: usize) -> usize {
    Rng::derive(seed, tile_id).below(n_styles)
}

pub fn cmd_stylize(args: &StylizeArgs, workers: usize) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let cfg = StylizeConfig {
        alpha: args.alpha,
        content_size: args.content_size,
        style_size: args.style_size,
        eps: args.eps,
        preprocess: if args.imagenet { Preprocess::Imagenet } else { Preprocess::Raw },
    };
    cfg.validate()?;
    let params = Params {
        manifest: &args.manifest,
        styles: &args.styles,
        weights: &args.weights,
        seed: args.seed,
        stylize: cfg,
    };
    prepare_out_dir(&args.out, &JobConfig::new("stylize", workers, &params))?;

    let net = load_weights(&args.weights).with_context(|| format!("loading weights {}", args.weights.display()))?;
    net.feature_shape(cfg.content_size, cfg.content_size)?;
    net.feature_shape(cfg.style_size, cfg.style_size)?;
    let content = load_sorted_manifest(&args.manifest)?;
    let styles = load_sorted_manifest(&args.styles)?;
    if styles.is_empty() {
        return Err(CliError::EmptyStyleSource.into());
    }
    let tiles = tiles_dir(&args.out)?;

    // Per-tile I/O failures are reported; network errors abort the run.
    let run = |entry: &ManifestEntry| -> anyhow::Result<Result<String, String>> {
        let id = &entry.meta.tile_id;
        let style_entry = &styles.entries()[style_index(args.seed, id, styles.len())];
        let content_tile = match content.load_tile(entry) {
            Ok(t) => t,
            Err(e) => return Ok(Err(e.to_string())),
        };
        let style_tile = match styles.load_tile(style_entry) {
            Ok(t) => t,
            Err(e) => return Ok(Err(format!("style {}: {e}", style_entry.meta.tile_id))),
        };
        let out = stylize(&net, &content_tile, &style_tile, &cfg)?;
        if let Err(e) = out.save_png(tiles.join(format!("{id}.png"))) {
            return Ok(Err(e.to_string()));
        }
        Ok(Ok(style_entry.meta.tile_id.clone()))
    };
    let results: Vec<anyhow::Result<Result<String, String>>> =
        thread_pool(workers)?.install(|| content.entries().par_iter().map(run).collect());

    let mut extra = content.extra_columns().to_vec();
    extra.push("style_id".into());
    let mut manifest = Manifest::new(&args.out, extra);
    let mut errors = Vec::new();
    for (entry, res) in content.entries().iter().zip(results) {
        match res? {
            Ok(style_id) => {
                let mut values = entry.extra.clone();
                values.push(style_id);
                manifest.push(format!("tiles/{}.png", entry.meta.tile_id), entry.meta.clone(), values)?;
            }
            Err(msg) => errors.push((entry.meta.tile_id.clone(), msg)),
        }
    }
    manifest.write(args.out.join("manifest.csv"))?;
    if !errors.is_empty() {
        write_tile_messages(&args.out.join("errors.csv"), "error", &errors)?;
    }
    Ok(Outcome {
        processed: content.len(),
        written: manifest.len(),
        warnings: 0,
        hard_errors: errors.len(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
