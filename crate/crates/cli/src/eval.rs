use std::path::Path;
use std::time::Instant;

use strapkit::evalstats::{evaluate, EvalOptions, EvalReport, ScoreTable};

use crate::args::EvalArgs;
use crate::job::{prepare_out_dir, write_atomic, JobConfig, Outcome};

pub fn eval_options(args: &EvalArgs) -> EvalOptions {
    EvalOptions {
        aggregate: args.aggregate.into(),
        bootstrap_resamples: args.bootstrap,
        level: args.level,
        test: args.test.map(Into::into),
        permutation_resamples: args.permutation,
        threshold: args.threshold,
        bh_q: Some(args.bh_q),
        extra_p_values: args.p_values.clone(),
        seed: args.seed,
    }
}

fn display_name(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Computes the report, writes `report.json` and returns it with the outcome.
pub fn cmd_eval(args: &EvalArgs, workers: usize) -> anyhow::Result<(EvalReport, Outcome)> {
    let start = Instant::now();
    let opts = eval_options(args);
    prepare_out_dir(&args.out, &JobConfig::new("eval", workers, &opts))?;
    if args.scores.is_none() && !args.compare.is_empty() {
        return Err(crate::job::CliError::InvalidArgument("--compare needs --scores".into()).into());
    }
    let primary = args.scores.as_ref().map(|p| ScoreTable::load_csv(p).map(|t| (display_name(p), t))).transpose()?;
    let others = args
        .compare
        .iter()
        .map(|p| ScoreTable::load_csv(p).map(|t| (display_name(p), t)))
        .collect::<Result<Vec<_>, _>>()?;
    let others_ref: Vec<(&str, &ScoreTable)> = others.iter().map(|(n, t)| (n.as_str(), t)).collect();
    let report = crate::job::thread_pool(workers)?.install(|| {
        evaluate(primary.as_ref().map(|(n, t)| (n.as_str(), t)), &others_ref, &opts)
    })?;
    let json = report_json(&report)?;
    write_atomic(&args.out.join("report.json"), json.as_bytes())?;
    Ok((
        report,
        Outcome {
            processed: primary.iter().count() + others.len(),
            written: 1,
            wall_seconds: start.elapsed().as_secs_f64(),
            ..Default::default()
        },
    ))
}

pub fn report_json(report: &EvalReport) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}
