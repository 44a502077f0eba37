use proptest::prelude::*;
use strapkit::evalstats::{
    aggregate_patient, auroc, bh_adjust, bootstrap_ci, delong_test, integrated_gradients, paired_t_test,
    permutation_test, ScoreRow, ScoreTable,
};
use strapkit::Rng;

fn table(scores: &[f64], labels: &[u8]) -> ScoreTable {
    ScoreTable::from_scores(scores, labels).unwrap()
}

/// Mann-Whitney AUROC by explicit pair enumeration.
fn brute_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn random_table(rng: &mut Rng, n: usize, grid: Option<u32>) -> (Vec<f64>, Vec<u8>) {
    let mut labels: Vec<u8> = (0..n).map(|_| rng.bernoulli(0.5) as u8).collect();
    labels[0] = 1;
    labels[1] = 0;
    let scores = labels
        .iter()
        .map(|&l| {
            let s = (rng.uniform() + 0.3 * l as f64).min(1.0);
            match grid {
                Some(g) => (s * g as f64).round() / g as f64,
                None => s,
            }
        })
        .collect();
    (scores, labels)
}

#[test]
fn auroc_matches_pair_counting() {
    let mut rng = Rng::new(1);
    for k in 0..1000 {
        let n = 2 + rng.below(49);
        let (s, l) = random_table(&mut rng, n, (k % 2 == 0).then_some(10));
        assert_eq!(auroc(&table(&s, &l)).unwrap(), brute_auroc(&s, &l));
    }
}

#[test]
fn auroc_spec_examples() {
    assert_eq!(auroc(&table(&[0.8, 0.4, 0.6, 0.3], &[1, 1, 0, 0])).unwrap(), 0.75);
    assert_eq!(auroc(&table(&[0.5; 6], &[1, 0, 1, 0, 1, 0])).unwrap(), 0.5);
    assert!(auroc(&table(&[0.2, 0.3], &[1, 1])).is_err());
}

proptest! {
    #[test]
    fn auroc_invariant_under_monotone_maps(seed in any::<u64>(), a in 0.1f64..5.0, b in -1.0f64..1.0) {
        let mut rng = Rng::new(seed);
        let (s, l) = random_table(&mut rng, 30, None);
        let mapped: Vec<f64> = s.iter().map(|x| 1.0 / (1.0 + (-(a * x + b) * 3.0).exp())).collect();
        prop_assert_eq!(auroc(&table(&s, &l)).unwrap(), auroc(&table(&mapped, &l)).unwrap());
    }

    #[test]
    fn auroc_complements_under_label_flip(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let (s, l) = random_table(&mut rng, 25, None);
        let flipped: Vec<u8> = l.iter().map(|v| 1 - v).collect();
        let sum = auroc(&table(&s, &l)).unwrap() + auroc(&table(&s, &flipped)).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }
}

/// Independent sequential bootstrap following the documented seed protocol.
fn brute_bootstrap(scores: &[f64], labels: &[u8], n_resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    let base = Rng::new(seed).next_u64();
    let n = scores.len();
    let mut values = Vec::new();
    for i in 0..n_resamples {
        let mut r = Rng::derive_indexed(base, i as u64);
        loop {
            let idx: Vec<usize> = (0..n).map(|_| r.below(n)).collect();
            let s: Vec<f64> = idx.iter().map(|&j| scores[j]).collect();
            let l: Vec<u8> = idx.iter().map(|&j| labels[j]).collect();
            if l.contains(&0) && l.contains(&1) {
                values.push(brute_auroc(&s, &l));
                break;
            }
        }
    }
    values.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (values.len() - 1) as f64 * p;
        let (f, c) = (h.floor() as usize, h.ceil() as usize);
        values[f] + (h - f as f64) * (values[c] - values[f])
    };
    let tail = (1.0 - level) / 2.0;
    (q(tail), q(1.0 - tail))
}

#[test]
fn bootstrap_matches_independent_implementation() {
    let mut rng = Rng::new(4);
    let (s, l) = random_table(&mut rng, 20, Some(20));
    let ci = bootstrap_ci(&table(&s, &l), 2000, 0.95, &mut Rng::new(42)).unwrap();
    let (lo, hi) = brute_bootstrap(&s, &l, 2000, 0.95, 42);
    assert!((ci.lo - lo).abs() <= 0.02 && (ci.hi - hi).abs() <= 0.02, "{ci:?} vs ({lo}, {hi})");
    let point = auroc(&table(&s, &l)).unwrap();
    assert!(ci.lo <= point && point <= ci.hi);
}

#[test]
fn bootstrap_interval_covers_point_estimate() {
    let mut rng = Rng::new(8);
    let mut covered = 0;
    for k in 0..100 {
        let n = 40 + rng.below(30);
        let (s, l) = random_table(&mut rng, n, None);
        let t = table(&s, &l);
        let ci = bootstrap_ci(&t, 500, 0.95, &mut Rng::new(k)).unwrap();
        let point = auroc(&t).unwrap();
        covered += (ci.lo <= point && point <= ci.hi) as usize;
    }
    assert!(covered >= 99, "{covered}/100");
}

/// DeLong variance written directly from the pairwise kernel, O(n^2).
fn brute_delong(a: &[f64], b: &[f64], labels: &[u8]) -> (f64, f64) {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let psi = |x: f64, y: f64| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 };
    let (m, n) = (pos.len() as f64, neg.len() as f64);
    let comps = |s: &[f64]| {
        let v10: Vec<f64> = pos.iter().map(|&i| neg.iter().map(|&j| psi(s[i], s[j])).sum::<f64>() / n).collect();
        let v01: Vec<f64> = neg.iter().map(|&j| pos.iter().map(|&i| psi(s[i], s[j])).sum::<f64>() / m).collect();
        (v10.iter().sum::<f64>() / m, v10, v01)
    };
    let (aa, a10, a01) = comps(a);
    let (ab, b10, b01) = comps(b);
    let cov = |x: &[f64], y: &[f64], mx: f64, my: f64| {
        x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / (x.len() as f64 - 1.0)
    };
    let s10 = cov(&a10, &a10, aa, aa) + cov(&b10, &b10, ab, ab) - 2.0 * cov(&a10, &b10, aa, ab);
    let s01 = cov(&a01, &a01, aa, aa) + cov(&b01, &b01, ab, ab) - 2.0 * cov(&a01, &b01, aa, ab);
    let z = (aa - ab) / (s10 / m + s01 / n).sqrt();
    (z, erfc_quadrature(z.abs() / std::f64::consts::SQRT_2))
}

/// Complementary error function by Simpson quadrature of exp(-t^2).
fn erfc_quadrature(x: f64) -> f64 {
    let n = 100_000;
    let h = x / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(0.0) + f(x);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 / std::f64::consts::PI.sqrt() * s * h / 3.0
}

#[test]
fn delong_matches_direct_formula() {
    let labels = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
    let a = [0.9, 0.8, 0.35, 0.7, 0.6, 0.4, 0.3, 0.5, 0.2, 0.1];
    let b = [0.6, 0.3, 0.55, 0.4, 0.7, 0.65, 0.35, 0.45, 0.5, 0.2];
    let r = delong_test(&table(&a, &labels), &table(&b, &labels)).unwrap();
    let (z, p) = brute_delong(&a, &b, &labels);
    assert!((r.statistic - z).abs() < 1e-9, "{} vs {z}", r.statistic);
    assert!((r.p_value - p).abs() < 1e-9, "{} vs {p}", r.p_value);

    let mut rng = Rng::new(31);
    for _ in 0..20 {
        let (s, l) = random_table(&mut rng, 30, Some(8));
        let s2: Vec<f64> = s.iter().map(|v| (v + rng.uniform_range(-0.3, 0.3)).clamp(0.0, 1.0)).collect();
        let r = delong_test(&table(&s, &l), &table(&s2, &l)).unwrap();
        let (z, p) = brute_delong(&s, &s2, &l);
        assert!((r.statistic - z).abs() < 1e-9 && (r.p_value - p).abs() < 1e-9);
    }
}

#[test]
fn delong_self_comparison_and_antisymmetry() {
    let mut rng = Rng::new(12);
    let (s, l) = random_table(&mut rng, 40, None);
    let (s2, _) = random_table(&mut Rng::new(13), 40, None);
    let (a, b) = (table(&s, &l), table(&s2, &l));
    assert_eq!(delong_test(&a, &a).unwrap().p_value, 1.0);
    let (ab, ba) = (delong_test(&a, &b).unwrap(), delong_test(&b, &a).unwrap());
    assert_eq!(ab.p_value, ba.p_value);
    assert_eq!(ab.statistic, -ba.statistic);
}

#[test]
fn permutation_against_discordant_enumeration() {
    // 12 cases; A and B disagree on cases 3 and 7, where A is right
    let labels = [1, 0, 1, 1, 0, 0, 1, 0, 1, 0, 1, 0];
    let a = labels;
    let mut b = labels;
    b[3] = 0;
    b[7] = 1;
    // concordant cases contribute zero, so only the 2^2 swap patterns of
    // the discordant cases matter
    let observed: i32 = 2;
    let count = (0..4)
        .filter(|m: &i32| {
            let t: i32 = (0..2).map(|k| if m >> k & 1 == 1 { -1 } else { 1 }).sum();
            t.abs() >= observed
        })
        .count();
    let exact = count as f64 / 4.0;
    let r = permutation_test(&a, &b, &labels, 2000, &mut Rng::new(5)).unwrap();
    assert!((r.p_value - exact).abs() <= 0.05, "{} vs {exact}", r.p_value);
    assert!((r.statistic - 2.0 / 12.0).abs() < 1e-15);
    let again = permutation_test(&a, &b, &labels, 2000, &mut Rng::new(5)).unwrap();
    assert_eq!(r, again);
}

/// Student-t density integrated by composite Simpson's rule.
fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let lg = |x: f64| lanczos_ln_gamma(x);
    let c = (lg((df + 1.0) / 2.0) - lg(df / 2.0)).exp() / (df * std::f64::consts::PI).sqrt();
    let pdf = |x: f64| c * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    let n = 200_000;
    let h = t.abs() / n as f64;
    let mut s = pdf(0.0) + pdf(t.abs());
    for i in 1..n {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * s * h / 3.0
}

/// Lanczos approximation (g = 7, n = 9).
fn lanczos_ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

#[test]
fn paired_t_against_quadrature() {
    let a = [0.9, 0.8, 0.75, 0.6];
    let b = [0.8, 0.6, 0.6, 0.55];
    let r = paired_t_test(&a, &b).unwrap();
    // differences {0.1, 0.2, 0.15, 0.05}: mean 0.125, sd 0.0645497
    let t = 0.125 / (0.064_549_722_436_790_3 / 2.0);
    assert!((r.statistic - t).abs() < 1e-3);
    assert!((r.p_value - t_two_sided_p(t, 3.0)).abs() < 1e-3, "{}", r.p_value);
    assert_eq!(paired_t_test(&[0.3, 0.7], &[0.3, 0.7]).unwrap().p_value, 1.0);
    let zero_mean = paired_t_test(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
    assert_eq!((zero_mean.statistic, zero_mean.p_value), (0.0, 1.0));
    assert!(paired_t_test(&[0.5, 0.6], &[0.4, 0.5]).is_err());
}

/// Step-up rule applied literally: reject the k smallest p-values for the
/// largest k with p_(k) <= k q / m.
fn literal_step_up(p: &[f64], q: f64) -> Vec<bool> {
    let m = p.len();
    let mut sorted: Vec<usize> = (0..m).collect();
    sorted.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let k = (1..=m).rev().find(|&k| p[sorted[k - 1]] <= k as f64 * q / m as f64).unwrap_or(0);
    let mut reject = vec![false; m];
    for &i in &sorted[..k] {
        reject[i] = true;
    }
    reject
}

#[test]
fn bh_matches_step_up_on_all_subsets() {
    let fixture = [0.001, 0.012, 0.021, 0.039, 0.041, 0.6];
    for q in [0.05, 0.10, 0.25] {
        for mask in 0u32..64 {
            let p: Vec<f64> = (0..6).filter(|k| mask >> k & 1 == 1).map(|k| fixture[k]).collect();
            let r = bh_adjust(&p, q).unwrap();
            assert_eq!(r.reject, literal_step_up(&p, q), "subset {p:?} q {q}");
        }
    }
}

#[test]
fn integrated_gradients_linear_and_quadratic() {
    let w = [0.7, -1.3, 2.0, 0.1];
    let linear = |x: &[f64]| (x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>(), w.to_vec());
    let x = [0.5, 1.5, -0.25, 3.0];
    for steps in [1, 3, 7, 50, 512] {
        let attr = integrated_gradients(&linear, &x, &[0.0; 4], steps).unwrap();
        for i in 0..4 {
            assert!((attr[i] - w[i] * x[i]).abs() <= 1e-12 * (w[i] * x[i]).abs().max(1.0));
        }
    }
    let quad = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>(), x.iter().map(|v| 2.0 * v).collect());
    let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let x = [1.2, -0.7, 2.5];
    let mut last = f64::INFINITY;
    for steps in [8, 64, 512] {
        let attr = integrated_gradients(&quad, &x, &[0.0; 3], steps).unwrap();
        let gap = (attr.iter().sum::<f64>() - f(&x)).abs();
        assert!(gap < last);
        last = gap;
        if steps == 512 {
            assert!(gap <= 0.01 * f(&x));
        }
    }
    assert!(integrated_gradients(&quad, &x, &x, 10).unwrap().iter().all(|&a| a == 0.0));
}

#[test]
fn patient_aggregation_is_order_invariant_and_idempotent() {
    let rows: Vec<ScoreRow> = (0..30)
        .map(|i| ScoreRow {
            tile_id: format!("t{i}"),
            patient_id: format!("p{}", i % 7),
            score: (i as f64 * 0.37) % 1.0,
            label: ((i % 7) % 2) as u8,
            fold: None,
        })
        .collect();
    let mut shuffled = rows.clone();
    shuffled.reverse();
    shuffled.swap(3, 17);
    let a = aggregate_patient(&ScoreTable::new(rows).unwrap()).unwrap();
    let b = aggregate_patient(&ScoreTable::new(shuffled).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(aggregate_patient(&a).unwrap(), a);
    assert_eq!(a.len(), 7);
}
