use super::{Error, Result};

/// A differentiable scalar function: returns the value and gradient at `x`.
pub trait GradOracle {
    fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>);
}

impl<F> GradOracle for F
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self(x)
    }
}

/// Integrated gradients along the straight path from `baseline` to `input`,
/// approximated with a right Riemann sum over `steps` points:
/// `attr_i = (x_i - x'_i) / steps * sum_{k=1..steps} grad_i(x' + k/steps (x - x'))`.
pub fn integrated_gradients(
    oracle: &impl GradOracle,
    input: &[f64],
    baseline: &[f64],
    steps: usize,
) -> Result<Vec<f64>> {
    if input.len() != baseline.len() {
        return Err(Error::LengthMismatch(input.len(), baseline.len()));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    let delta: Vec<f64> = input.iter().zip(baseline).map(|(x, b)| x - b).collect();
    let mut grad_sum = vec![0.0; input.len()];
    let mut point = vec![0.0; input.len()];
    for k in 1..=steps {
        let t = k as f64 / steps as f64;
        for i in 0..input.len() {
            point[i] = baseline[i] + t * delta[i];
        }
        let (_, grad) = oracle.value_and_grad(&point);
        if grad.len() != input.len() {
            return Err(Error::GradientLength {
                expected: input.len(),
                actual: grad.len(),
            });
        }
        for (s, g) in grad_sum.iter_mut().zip(&grad) {
            *s += g;
        }
    }
    Ok(delta
        .iter()
        .zip(&grad_sum)
        .map(|(d, s)| d * s / steps as f64)
        .collect())
}
