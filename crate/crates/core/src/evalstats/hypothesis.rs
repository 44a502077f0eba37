use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{Error, Result};
use crate::imagecore::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Delong,
    Permutation,
    PairedT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
}

fn check_binary(values: &[u8]) -> Result<()> {
    match values.iter().find(|&&v| v > 1) {
        Some(&v) => Err(Error::BadLabel(v)),
        None => Ok(()),
    }
}

/// Paired permutation test for a difference in accuracy.
///
/// The statistic is `acc(A) - acc(B)`. Each null resample swaps the two
/// predictions of every case with probability 1/2; resample `i` draws from
/// `Rng::derive_indexed(base, i)` with `base` taken from `rng`. The p-value is
/// `(1 + #{|T*| >= |T|}) / (1 + n)`.
pub fn permutation_test(preds_a: &[u8], preds_b: &[u8], labels: &[u8], n: usize, rng: &mut Rng) -> Result<TestResult> {
    if preds_a.len() != labels.len() {
        return Err(Error::LengthMismatch(preds_a.len(), labels.len()));
    }
    if preds_b.len() != labels.len() {
        return Err(Error::LengthMismatch(preds_b.len(), labels.len()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    for v in [preds_a, preds_b, labels] {
        check_binary(v)?;
    }
    if labels.is_empty() {
        return Err(Error::TooFewValues(1));
    }
    // Per-case contribution to (correct_A - correct_B); swapping negates it.
    let diffs: Vec<i64> = (0..labels.len())
        .map(|k| (preds_a[k] == labels[k]) as i64 - (preds_b[k] == labels[k]) as i64)
        .collect();
    let observed: i64 = diffs.iter().sum();
    let base = rng.next_u64();
    let extreme: usize = (0..n)
        .into_par_iter()
        .filter(|&i| {
            let mut r = Rng::derive_indexed(base, i as u64);
            let t: i64 = diffs.iter().map(|&d| if r.bernoulli(0.5) { -d } else { d }).sum();
            t.abs() >= observed.abs()
        })
        .count();
    Ok(TestResult {
        statistic: observed as f64 / labels.len() as f64,
        p_value: (1 + extreme) as f64 / (1 + n) as f64,
        method: TestMethod::Permutation,
    })
}

/// Two-sided paired t-test on `a - b` with `n - 1` degrees of freedom.
/// Identical zero differences give `t = 0, p = 1`; identical non-zero
/// differences have no defined statistic and are an error.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::TooFewValues(2));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite value".into()));
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        if mean == 0.0 {
            return Ok(TestResult {
                statistic: 0.0,
                p_value: 1.0,
                method: TestMethod::PairedT,
            });
        }
        return Err(Error::DegenerateVariance);
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("positive degrees of freedom");
    Ok(TestResult {
        statistic: t,
        p_value: (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0),
        method: TestMethod::PairedT,
    })
}
