use serde::{Deserialize, Serialize};

use super::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BhResult {
    pub adjusted: Vec<f64>,
    pub reject: Vec<bool>,
}

/// Benjamini-Hochberg step-up adjustment. With `p_(1) <= ... <= p_(m)` the
/// adjusted value of rank `k` is `min_{j >= k} p_(j) * m / j`, capped at 1;
/// values are returned in input order and `reject_i = adjusted_i <= q`.
pub fn bh_adjust(pvals: &[f64], q: f64) -> Result<BhResult> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("q {q} outside (0, 1)")));
    }
    if let Some(&p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::OutOfRangeP(p));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        running = running.min((pvals[i] * m as f64 / (rank + 1) as f64).max(pvals[i]));
        adjusted[i] = running;
    }
    let reject = adjusted.iter().map(|&a| a <= q).collect();
    Ok(BhResult { adjusted, reject })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let r = bh_adjust(&[0.03], 0.10).unwrap();
        assert_eq!(r.adjusted, [0.03]);
        assert_eq!(r.reject, [true]);
        let r = bh_adjust(&[], 0.10).unwrap();
        assert!(r.adjusted.is_empty() && r.reject.is_empty());
        let r = bh_adjust(&[0.01, 0.02, 0.03, 0.04], 0.10).unwrap();
        for a in &r.adjusted {
            assert!((a - 0.04).abs() < 1e-15);
        }
        assert!(r.reject.iter().all(|&x| x));
        assert!(matches!(bh_adjust(&[1.2], 0.1), Err(Error::OutOfRangeP(_))));
        assert!(bh_adjust(&[0.2], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_dominating(p in proptest::collection::vec(0.0f64..=1.0, 0..30)) {
            let r = bh_adjust(&p, 0.1).unwrap();
            let mut idx: Vec<usize> = (0..p.len()).collect();
            idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
            for w in idx.windows(2) {
                prop_assert!(r.adjusted[w[0]] <= r.adjusted[w[1]]);
            }
            for i in 0..p.len() {
                prop_assert!(r.adjusted[i] >= p[i]);
                prop_assert!(r.adjusted[i] <= 1.0);
            }
        }
    }
}
