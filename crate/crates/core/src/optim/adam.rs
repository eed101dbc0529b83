use crate::{Error, Result};

/// Bias-corrected Adam with full-batch gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        AdamState {
            step_count: 0,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Applies one Adam update to `params` in place.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grad.len() || params.len() != state.first_moment.len() {
        return Err(Error::input(format!(
            "adam: {} parameters, {} gradient entries, {} moment entries",
            params.len(),
            grad.len(),
            state.first_moment.len()
        )));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::numerical(None, format!("non-finite gradient entry {i}")));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grad)
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut x = vec![1.0, -2.0, 3.0];
        let mut s = AdamState::new(3, 1e-3);
        adam_step(&mut x, &[0.0; 3], &mut s).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.0]);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m̂ = g, v̂ = g², so the step is -lr g / (|g| + ε)
        let lr = 1e-3;
        let mut x = vec![0.0, 0.0];
        let mut s = AdamState::new(2, lr);
        adam_step(&mut x, &[1.0, -2.0], &mut s).unwrap();
        assert_relative_eq!(x[0], -lr / (1.0 + 1e-8), max_relative = 1e-12);
        assert_relative_eq!(x[1], lr * 2.0 / (2.0 + 1e-8), max_relative = 1e-12);
    }

    #[test]
    fn rejects_non_finite_and_mismatched() {
        let mut s = AdamState::new(2, 1e-3);
        assert!(matches!(
            adam_step(&mut [0.0, 0.0], &[f64::NAN, 0.0], &mut s),
            Err(Error::NumericalFailure { .. })
        ));
        assert!(adam_step(&mut [0.0], &[0.0, 0.0], &mut s).is_err());
        assert_eq!(s.step_count, 0);
    }

    #[test]
    fn sign_pattern_invariant_under_loss_scaling() {
        let g = [3e-3, -0.4, 1.7, -2e-3];
        for alpha in [1e-2, 1.0, 250.0] {
            let mut x = vec![0.0; 4];
            let mut s = AdamState::new(4, 1e-3);
            let scaled: Vec<f64> = g.iter().map(|v| v * alpha).collect();
            adam_step(&mut x, &scaled, &mut s).unwrap();
            for (xi, gi) in x.iter().zip(&g) {
                assert_eq!(xi.signum(), -gi.signum());
            }
        }
    }
}
