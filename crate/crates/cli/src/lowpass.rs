use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use strapkit::freq::sweep_lowpass;

use crate::args::LowpassArgs;
use crate::job::{load_sorted_manifest, parse_radii, prepare_out_dir, thread_pool, JobConfig, Outcome};

#[derive(Debug, Serialize)]
struct Params<'a> {
    manifest: &'a Path,
    radii: &'a [f64],
}

pub fn cmd_lowpass(args: &LowpassArgs, workers: usize) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let sweep = parse_radii(&args.radii)?;
    let params = Params {
        manifest: &args.manifest,
        radii: sweep.radii(),
    };
    prepare_out_dir(&args.out, &JobConfig::new("lowpass", workers, &params))?;
    let source = load_sorted_manifest(&args.manifest)?;
    let datasets = thread_pool(workers)?.install(|| sweep_lowpass(&source, &sweep, &args.out))?;
    Ok(Outcome {
        processed: source.len(),
        written: datasets.iter().map(|(_, m)| m.len()).sum(),
        wall_seconds: start.elapsed().as_secs_f64(),
        ..Default::default()
    })
}
