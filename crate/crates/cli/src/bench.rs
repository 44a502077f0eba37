use std::time::Instant;

use serde::Serialize;
use strapkit::adain::{load_weights, stylize, Architecture, StylizeConfig};
use strapkit::stain::{macenko_normalize, stain_augment, HedAugmentParams, MacenkoParams, StainProfile, OD_OFFSET};
use strapkit::{ImageTile, Rng};

use crate::args::BenchArgs;
use crate::job::{prepare_out_dir, thread_pool, write_atomic, JobConfig, Outcome};

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub operation: String,
    pub size: usize,
    pub repeats: usize,
    pub median_ms: f64,
    pub min_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub threads: usize,
    pub timings: Vec<Timing>,
}

/// Tile drawn from the bundled reference stains with random concentrations.
pub fn synthetic_he_tile(size: usize, seed: u64) -> ImageTile {
    let p = StainProfile::reference();
    let (h, e) = (p.column(0), p.column(1));
    let mut rng = Rng::new(seed);
    let mut px = Vec::with_capacity(size * size * 3);
    for _ in 0..size * size {
        let ch = rng.uniform() * p.max_conc[0];
        let ce = rng.uniform() * p.max_conc[1];
        for k in 0..3 {
            px.push((10f64.powf(-(ch * h[k] + ce * e[k])) - OD_OFFSET).clamp(0.0, 1.0) as f32);
        }
    }
    ImageTile::new(size, size, px).expect("positive size")
}

fn time<T>(operation: &str, size: usize, repeats: usize, mut f: impl FnMut() -> anyhow::Result<T>) -> anyhow::Result<Timing> {
    let mut ms = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        std::hint::black_box(f()?);
        ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    ms.sort_by(f64::total_cmp);
    Ok(Timing {
        operation: operation.into(),
        size,
        repeats,
        median_ms: ms[ms.len() / 2],
        min_ms: ms[0],
    })
}

/// Stain timings run on one thread; stylization uses `workers`.
pub fn cmd_bench(args: &BenchArgs, workers: usize) -> anyhow::Result<(BenchReport, Outcome)> {
    let start = Instant::now();
    if args.repeats == 0 || args.size == 0 {
        return Err(crate::job::CliError::InvalidArgument("--size and --repeats must be positive".into()).into());
    }
    #[derive(Serialize)]
    struct Params<'a> {
        size: usize,
        stylize_size: usize,
        weights: Option<&'a std::path::Path>,
        repeats: usize,
        seed: u64,
    }
    let params = Params {
        size: args.size,
        stylize_size: args.stylize_size,
        weights: args.weights.as_deref(),
        repeats: args.repeats,
        seed: args.seed,
    };
    prepare_out_dir(&args.out, &JobConfig::new("bench", workers, &params))?;

    let tile = synthetic_he_tile(args.size, args.seed);
    let hed = HedAugmentParams::default();
    let macenko = MacenkoParams::default();
    let reference = StainProfile::reference();
    let mut rng = Rng::new(args.seed);
    let single = thread_pool(1)?;
    let mut timings = single.install(|| -> anyhow::Result<Vec<Timing>> {
        Ok(vec![
            time("stain_augment", args.size, args.repeats, || Ok(stain_augment(&tile, &hed, &mut rng)?))?,
            time("stain_normalize", args.size, args.repeats, || Ok(macenko_normalize(&tile, &reference, &macenko)?))?,
        ])
    })?;

    let net = match &args.weights {
        Some(p) => load_weights(p)?,
        None => Architecture::adain_vgg(16).random_weights(args.seed)?,
    };
    let cfg = StylizeConfig {
        content_size: args.stylize_size,
        style_size: args.stylize_size.min(256),
        ..Default::default()
    };
    let style = synthetic_he_tile(args.stylize_size.min(256), args.seed ^ 1);
    let content = synthetic_he_tile(args.stylize_size, args.seed);
    timings.push(thread_pool(workers)?.install(|| {
        time("stylize", args.stylize_size, args.repeats, || Ok(stylize(&net, &content, &style, &cfg)?))
    })?);

    let report = BenchReport { threads: 1, timings };
    write_atomic(&args.out.join("bench.json"), (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    Ok((
        report,
        Outcome {
            processed: 3,
            written: 1,
            wall_seconds: start.elapsed().as_secs_f64(),
            ..Default::default()
        },
    ))
}
