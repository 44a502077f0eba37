use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hypothesis::{TestMethod, TestResult};
use super::{Error, Result, ScoreTable};
use crate::imagecore::Rng;
use crate::numeric::percentile;

/// Mann-Whitney AUROC of `scores` against binary `labels`: the fraction of
/// (positive, negative) pairs in which the positive scores higher, ties
/// counting one half.
pub(crate) fn auroc_of(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let mut pairs: Vec<(f64, u8)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_pos = pairs.iter().filter(|p| p.1 == 1).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    // Twice the win count keeps the half-counted ties in integers.
    let mut twice_wins: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            if pairs[j].1 == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_wins += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok(twice_wins as f64 / 2.0 / (n_pos as f64 * n_neg as f64))
}

pub fn auroc(table: &ScoreTable) -> Result<f64> {
    auroc_of(&table.scores(), &table.labels())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Percentile bootstrap interval for the AUROC.
///
/// Rows are resampled with replacement; pass a patient-aggregated table to
/// resample patients. Resample `i` draws from `Rng::derive_indexed(base, i)`
/// where `base` is the next value of `rng`, so the result does not depend on
/// thread scheduling. Resamples lacking a class are redrawn from the same
/// stream; more than `10 * n_resamples` draws in total is an error.
pub fn bootstrap_ci(table: &ScoreTable, n_resamples: usize, level: f64, rng: &mut Rng) -> Result<ConfidenceInterval> {
    if n_resamples == 0 {
        return Err(Error::InvalidParameter("n_resamples must be at least 1".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level {level} outside (0, 1)")));
    }
    let scores = table.scores();
    let labels = table.labels();
    auroc_of(&scores, &labels)?;
    let base = rng.next_u64();
    let budget = 10 * n_resamples;
    let n = scores.len();

    let draws: Vec<(Option<f64>, usize)> = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut r = Rng::derive_indexed(base, i as u64);
            let mut s = vec![0.0; n];
            let mut l = vec![0u8; n];
            for attempt in 1..=budget {
                for k in 0..n {
                    let j = r.below(n);
                    s[k] = scores[j];
                    l[k] = labels[j];
                }
                if let Ok(a) = auroc_of(&s, &l) {
                    return (Some(a), attempt);
                }
            }
            (None, budget)
        })
        .collect();

    let attempts: usize = draws.iter().map(|d| d.1).sum();
    if attempts > budget || draws.iter().any(|d| d.0.is_none()) {
        return Err(Error::NonConvergent(n_resamples));
    }
    let mut values: Vec<f64> = draws.into_iter().filter_map(|d| d.0).collect();
    let tail = (1.0 - level) / 2.0 * 100.0;
    Ok(ConfidenceInterval {
        lo: percentile(&mut values, tail),
        hi: percentile(&mut values, 100.0 - tail),
    })
}

/// Paired DeLong test of two AUROCs computed on the same cases.
///
/// Rows of `b` are matched to `a` by tile id and must carry the same labels.
/// The statistic is `z = (AUC_a - AUC_b) / sqrt(var)` with the variance built
/// from the structural-component (placement value) covariances; the p-value
/// is two-sided under the standard normal. When the variance is below 1e-12
/// and the AUROCs are equal the result is `z = 0, p = 1`.
pub fn delong_test(a: &ScoreTable, b: &ScoreTable) -> Result<TestResult> {
    let (labels, sa, sb) = align_pair(a, b)?;
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let (v10a, v01a) = placements(&sa, &pos, &neg);
    let (v10b, v01b) = placements(&sb, &pos, &neg);
    let auc_a = mean(&v10a);
    let auc_b = mean(&v10b);
    let (m, n) = (pos.len() as f64, neg.len() as f64);
    let var = (cov(&v10a, &v10a) + cov(&v10b, &v10b) - 2.0 * cov(&v10a, &v10b)) / m
        + (cov(&v01a, &v01a) + cov(&v01b, &v01b) - 2.0 * cov(&v01a, &v01b)) / n;
    let diff = auc_a - auc_b;
    if var < 1e-12 {
        if diff.abs() < 1e-12 {
            return Ok(TestResult {
                statistic: 0.0,
                p_value: 1.0,
                method: TestMethod::Delong,
            });
        }
        return Err(Error::DegenerateVariance);
    }
    let z = diff / var.sqrt();
    Ok(TestResult {
        statistic: z,
        p_value: two_sided_normal_p(z),
        method: TestMethod::Delong,
    })
}

pub(crate) fn two_sided_normal_p(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Labels and the two score vectors, in `a`'s row order.
pub(crate) fn align_pair(a: &ScoreTable, b: &ScoreTable) -> Result<(Vec<u8>, Vec<f64>, Vec<f64>)> {
    if a.len() != b.len() {
        return Err(Error::MismatchedRows(format!("{} rows vs {} rows", a.len(), b.len())));
    }
    let by_id: HashMap<&str, (f64, u8)> = b.rows().iter().map(|r| (r.tile_id.as_str(), (r.score, r.label))).collect();
    if by_id.len() != b.len() {
        return Err(Error::MismatchedRows("duplicate tile ids".into()));
    }
    let mut labels = Vec::with_capacity(a.len());
    let mut sa = Vec::with_capacity(a.len());
    let mut sb = Vec::with_capacity(a.len());
    for row in a.rows() {
        let &(score, label) = by_id
            .get(row.tile_id.as_str())
            .ok_or_else(|| Error::MismatchedRows(format!("tile `{}` missing from second table", row.tile_id)))?;
        if label != row.label {
            return Err(Error::MismatchedRows(format!("tile `{}` has different labels", row.tile_id)));
        }
        labels.push(row.label);
        sa.push(row.score);
        sb.push(score);
    }
    Ok((labels, sa, sb))
}

/// Placement values: for each positive the fraction of negatives it beats,
/// for each negative the fraction of positives that beat it (ties count 1/2).
fn placements(scores: &[f64], pos: &[usize], neg: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut neg_sorted: Vec<f64> = neg.iter().map(|&i| scores[i]).collect();
    let mut pos_sorted: Vec<f64> = pos.iter().map(|&i| scores[i]).collect();
    neg_sorted.sort_by(f64::total_cmp);
    pos_sorted.sort_by(f64::total_cmp);
    let below = |sorted: &[f64], x: f64| -> (usize, usize) {
        let lt = sorted.partition_point(|&v| v < x);
        let le = sorted.partition_point(|&v| v <= x);
        (lt, le - lt)
    };
    let v10 = pos
        .iter()
        .map(|&i| {
            let (lt, eq) = below(&neg_sorted, scores[i]);
            (lt as f64 + 0.5 * eq as f64) / neg.len() as f64
        })
        .collect();
    let v01 = neg
        .iter()
        .map(|&j| {
            let (lt, eq) = below(&pos_sorted, scores[j]);
            let above = pos.len() - lt - eq;
            (above as f64 + 0.5 * eq as f64) / pos.len() as f64
        })
        .collect();
    (v10, v01)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample covariance; zero for fewer than two values.
fn cov(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(scores: &[f64], labels: &[u8]) -> ScoreTable {
        ScoreTable::from_scores(scores, labels).unwrap()
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&table(&[0.9, 0.9, 0.1, 0.1], &[1, 1, 0, 0])).unwrap(), 1.0);
        assert_eq!(auroc(&table(&[0.4; 6], &[1, 0, 1, 0, 1, 0])).unwrap(), 0.5);
        assert_eq!(auroc(&table(&[0.8, 0.4, 0.6, 0.3], &[1, 1, 0, 0])).unwrap(), 0.75);
        assert!(matches!(auroc(&table(&[0.1, 0.2], &[1, 1])), Err(Error::SingleClass)));
    }

    #[test]
    fn bootstrap_examples() {
        let perfect = table(&[0.9, 0.8, 0.95, 0.1, 0.2, 0.05], &[1, 1, 1, 0, 0, 0]);
        let ci = bootstrap_ci(&perfect, 500, 0.95, &mut Rng::new(1)).unwrap();
        assert_eq!((ci.lo, ci.hi), (1.0, 1.0));

        let mixed = table(&[0.9, 0.3, 0.6, 0.5, 0.2, 0.7, 0.4, 0.1], &[1, 1, 1, 1, 0, 0, 0, 0]);
        let a = bootstrap_ci(&mixed, 300, 0.9, &mut Rng::new(5)).unwrap();
        let b = bootstrap_ci(&mixed, 300, 0.9, &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.lo <= a.hi);
        assert!(bootstrap_ci(&mixed, 0, 0.9, &mut Rng::new(5)).is_err());
        assert!(bootstrap_ci(&mixed, 10, 1.0, &mut Rng::new(5)).is_err());
    }

    #[test]
    fn bootstrap_single_positive_redraws() {
        let mut scores = vec![0.1; 200];
        scores[0] = 0.9;
        let mut labels = vec![0u8; 200];
        labels[0] = 1;
        let t = table(&scores, &labels);
        let ci = bootstrap_ci(&t, 50, 0.95, &mut Rng::new(2)).unwrap();
        assert_eq!((ci.lo, ci.hi), (1.0, 1.0));
    }

    #[test]
    fn delong_self_and_antisymmetry() {
        let a = table(&[0.9, 0.3, 0.6, 0.5, 0.2, 0.7, 0.4, 0.1, 0.55, 0.35], &[1, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
        let b = table(&[0.8, 0.6, 0.2, 0.7, 0.3, 0.5, 0.1, 0.4, 0.65, 0.15], &[1, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
        let same = delong_test(&a, &a).unwrap();
        assert_eq!((same.statistic, same.p_value), (0.0, 1.0));
        let ab = delong_test(&a, &b).unwrap();
        let ba = delong_test(&b, &a).unwrap();
        assert_eq!(ab.p_value, ba.p_value);
        assert_eq!(ab.statistic, -ba.statistic);
        assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn delong_mismatched_rows() {
        let a = table(&[0.9, 0.1], &[1, 0]);
        let b = table(&[0.9, 0.1, 0.5], &[1, 0, 1]);
        assert!(matches!(delong_test(&a, &b), Err(Error::MismatchedRows(_))));
        let c = table(&[0.9, 0.1], &[0, 1]);
        assert!(matches!(delong_test(&a, &c), Err(Error::MismatchedRows(_))));
    }
}
