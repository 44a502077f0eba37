use std::time::Instant;

use serde::Serialize;
use strapkit::adain::Architecture;

use crate::args::{ArchArg, WeightsInitArgs};
use crate::job::{prepare_out_dir, JobConfig, Outcome};

#[derive(Debug, Serialize)]
struct Params<'a> {
    arch: &'a str,
    seed: u64,
    name: &'a str,
}

pub fn cmd_weights_init(args: &WeightsInitArgs, workers: usize) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let (arch_name, net) = match args.arch {
        ArchArg::Vgg => ("vgg", Architecture::adain_vgg(1).random_weights(args.seed)?),
        ArchArg::Tiny => ("tiny", Architecture::adain_vgg(16).random_weights(args.seed)?),
        ArchArg::Identity => ("identity", Architecture::identity().identity_weights()?),
    };
    let params = Params {
        arch: arch_name,
        seed: args.seed,
        name: &args.name,
    };
    prepare_out_dir(&args.out, &JobConfig::new("weights init", workers, &params))?;
    net.save(args.out.join(format!("{}.strapw", args.name)))?;
    Ok(Outcome {
        written: 1,
        wall_seconds: start.elapsed().as_secs_f64(),
        ..Default::default()
    })
}
