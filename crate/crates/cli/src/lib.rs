//! Command implementations behind the `strapkit` binary. Each `cmd_*`
//! function writes its effective configuration to `<out>/config.json`
//! before doing any work and returns an [`Outcome`].

pub mod args;
pub mod bench;
pub mod eval;
pub mod job;
pub mod lowpass;
pub mod stain;
pub mod stylize;
pub mod weights;

pub use args::Cli;
pub use bench::cmd_bench;
pub use eval::cmd_eval;
pub use job::{parse_radii, CliError, Outcome};
pub use lowpass::cmd_lowpass;
pub use stain::{cmd_estimate_reference, cmd_stain_augment, cmd_stain_normalize};
pub use stylize::cmd_stylize;
pub use weights::cmd_weights_init;

use args::{Command, StainCommand, WeightsCommand};

/// Runs one parsed command line. Reports go to stdout, progress to stderr.
pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let w = cli.workers;
    let outcome = match &cli.command {
        Command::Stylize(a) => cmd_stylize(a, w)?,
        Command::Stain(StainCommand::Normalize(a)) => cmd_stain_normalize(a, w)?,
        Command::Stain(StainCommand::Augment(a)) => cmd_stain_augment(a, w)?,
        Command::Stain(StainCommand::EstimateReference(a)) => cmd_estimate_reference(a, w)?,
        Command::Lowpass(a) => cmd_lowpass(a, w)?,
        Command::Eval(a) => {
            let (report, outcome) = cmd_eval(a, w)?;
            print!("{}", eval::report_json(&report)?);
            outcome
        }
        Command::Bench(a) => {
            let (report, outcome) = cmd_bench(a, w)?;
            for t in &report.timings {
                println!("{:<16} {:>5}px  median {:>9.2} ms  min {:>9.2} ms", t.operation, t.size, t.median_ms, t.min_ms);
            }
            outcome
        }
        Command::Weights(WeightsCommand::Init(a)) => cmd_weights_init(a, w)?,
    };
    eprintln!(
        "processed {} written {} warnings {} errors {} in {:.2}s",
        outcome.processed, outcome.written, outcome.warnings, outcome.hard_errors, outcome.wall_seconds
    );
    Ok(outcome)
}
