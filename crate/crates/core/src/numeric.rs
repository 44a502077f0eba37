/// Linear-interpolation percentile (`q` in `[0, 100]`, the "type 7"
/// definition used by numpy). Reorders `values`, which must be non-empty.
pub(crate) fn percentile(values: &mut [f64], q: f64) -> f64 {
    let n = values.len();
    let pos = (q / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let (_, &mut v_lo, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || upper.is_empty() {
        return v_lo;
    }
    let v_hi = upper.iter().copied().fold(f64::INFINITY, f64::min);
    v_lo + frac * (v_hi - v_lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_sorted_interpolation() {
        let mut v = vec![5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(percentile(&mut v, 0.0), 1.0);
        assert_eq!(percentile(&mut v, 100.0), 5.0);
        assert_eq!(percentile(&mut v, 50.0), 3.0);
        assert!((percentile(&mut v, 10.0) - 1.4).abs() < 1e-12);
        assert_eq!(percentile(&mut [7.0], 97.5), 7.0);
    }
}
