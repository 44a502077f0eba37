use serde::{Deserialize, Serialize};

use super::hypothesis::{paired_t_test, permutation_test, TestMethod, TestResult};
use super::roc::{align_pair, auroc, bootstrap_ci, delong_test};
use super::{aggregate_patient, bh_adjust, Error, Result, ScoreTable};
use crate::imagecore::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Evaluate and resample individual tiles.
    #[default]
    Tile,
    /// Average tile scores per patient, then evaluate and resample patients.
    Patient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub aggregate: Aggregation,
    pub bootstrap_resamples: usize,
    pub level: f64,
    pub test: Option<TestMethod>,
    pub permutation_resamples: usize,
    /// Score threshold turning scores into predictions for the permutation test.
    pub threshold: f64,
    pub bh_q: Option<f64>,
    /// Further p-values adjusted together with the comparison p-values.
    pub extra_p_values: Vec<f64>,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            aggregate: Aggregation::Tile,
            bootstrap_resamples: 2000,
            level: 0.95,
            test: None,
            permutation_resamples: 2000,
            threshold: 0.5,
            bh_q: None,
            extra_p_values: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub method: String,
    pub level: f64,
    pub n_resamples: usize,
    pub seed: u64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub name: String,
    pub unit: Aggregation,
    pub n_rows: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub auroc: f64,
    pub ci: Option<IntervalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub summary: SummaryReport,
    pub test: Option<TestResult>,
    pub test_seed: Option<u64>,
    pub p_adjusted: Option<f64>,
    pub reject: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraPValue {
    pub p_value: f64,
    pub p_adjusted: Option<f64>,
    pub reject: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub parameters: EvalOptions,
    pub primary: Option<SummaryReport>,
    pub comparisons: Vec<ComparisonReport>,
    pub extra_p_values: Vec<ExtraPValue>,
}

fn summarize(name: &str, table: &ScoreTable, opts: &EvalOptions) -> Result<SummaryReport> {
    let (n_positive, n_negative) = table.class_counts();
    let auc = auroc(table)?;
    let ci = if opts.bootstrap_resamples > 0 {
        let seed = crate::imagecore::derive_seed(opts.seed, &format!("bootstrap:{name}"));
        let ci = bootstrap_ci(table, opts.bootstrap_resamples, opts.level, &mut Rng::new(seed))?;
        Some(IntervalReport {
            method: "percentile".into(),
            level: opts.level,
            n_resamples: opts.bootstrap_resamples,
            seed,
            lo: ci.lo,
            hi: ci.hi,
        })
    } else {
        None
    };
    Ok(SummaryReport {
        name: name.to_string(),
        unit: opts.aggregate,
        n_rows: table.len(),
        n_positive,
        n_negative,
        auroc: auc,
        ci,
    })
}

fn per_fold_aurocs(a: &ScoreTable, b: &ScoreTable) -> Result<(Vec<f64>, Vec<f64>)> {
    let folds = a.folds();
    if folds.is_empty() || folds != b.folds() {
        return Err(Error::InvalidParameter(
            "paired t-test needs matching `fold` columns in both score tables".into(),
        ));
    }
    let mut va = Vec::new();
    let mut vb = Vec::new();
    for f in &folds {
        va.push(auroc(&a.filter_fold(f))?);
        vb.push(auroc(&b.filter_fold(f))?);
    }
    Ok((va, vb))
}

/// Full evaluation: AUROC and bootstrap interval of the primary table and of
/// every comparison table, the selected paired test of each comparison
/// against the primary, and Benjamini-Hochberg adjustment over the
/// comparison p-values followed by `extra_p_values`.
///
/// Every random stream is derived from `opts.seed` and the table name, so
/// the report is a pure function of its inputs.
pub fn evaluate(primary: Option<(&str, &ScoreTable)>, comparisons: &[(&str, &ScoreTable)], opts: &EvalOptions) -> Result<EvalReport> {
    let prepare = |t: &ScoreTable| -> Result<ScoreTable> {
        match opts.aggregate {
            Aggregation::Tile => Ok(t.clone()),
            Aggregation::Patient => aggregate_patient(t),
        }
    };
    if !comparisons.is_empty() && primary.is_none() {
        return Err(Error::InvalidParameter("comparisons need a primary score table".into()));
    }
    let primary_table = primary.map(|(_, t)| prepare(t)).transpose()?;
    let primary_summary = match (primary, &primary_table) {
        (Some((name, _)), Some(t)) => Some(summarize(name, t, opts)?),
        _ => None,
    };

    let mut reports = Vec::with_capacity(comparisons.len());
    for (name, table) in comparisons {
        let table_b = prepare(table)?;
        let a = primary_table.as_ref().expect("checked above");
        let summary = summarize(name, &table_b, opts)?;
        let (test, test_seed) = match opts.test {
            None => (None, None),
            Some(TestMethod::Delong) => (Some(delong_test(a, &table_b)?), None),
            Some(TestMethod::Permutation) => {
                let (labels, sa, sb) = align_pair(a, &table_b)?;
                let pa: Vec<u8> = sa.iter().map(|&s| (s >= opts.threshold) as u8).collect();
                let pb: Vec<u8> = sb.iter().map(|&s| (s >= opts.threshold) as u8).collect();
                let seed = crate::imagecore::derive_seed(opts.seed, &format!("permutation:{name}"));
                let r = permutation_test(&pa, &pb, &labels, opts.permutation_resamples, &mut Rng::new(seed))?;
                (Some(r), Some(seed))
            }
            Some(TestMethod::PairedT) => {
                let (va, vb) = per_fold_aurocs(a, &table_b)?;
                (Some(paired_t_test(&va, &vb)?), None)
            }
        };
        reports.push(ComparisonReport {
            summary,
            test,
            test_seed,
            p_adjusted: None,
            reject: None,
        });
    }

    let mut extras: Vec<ExtraPValue> = opts
        .extra_p_values
        .iter()
        .map(|&p| ExtraPValue {
            p_value: p,
            p_adjusted: None,
            reject: None,
        })
        .collect();

    if let Some(q) = opts.bh_q {
        let pvals: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.test.map(|t| t.p_value))
            .chain(opts.extra_p_values.iter().copied())
            .collect();
        let bh = bh_adjust(&pvals, q)?;
        let mut it = bh.adjusted.iter().zip(&bh.reject);
        for r in reports.iter_mut().filter(|r| r.test.is_some()) {
            let (adj, rej) = it.next().expect("one adjusted value per test");
            r.p_adjusted = Some(*adj);
            r.reject = Some(*rej);
        }
        for e in extras.iter_mut() {
            let (adj, rej) = it.next().expect("one adjusted value per extra p-value");
            e.p_adjusted = Some(*adj);
            e.reject = Some(*rej);
        }
    } else if let Some(&p) = opts.extra_p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::OutOfRangeP(p));
    }

    Ok(EvalReport {
        parameters: opts.clone(),
        primary: primary_summary,
        comparisons: reports,
        extra_p_values: extras,
    })
}
