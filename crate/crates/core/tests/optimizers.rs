use std::ops::ControlFlow;

use burgers_pinn::optim::{
    adam_step, lbfgs_minimize, AdamState, Evaluation, LbfgsConfig, LbfgsState, Termination,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rosenbrock(x: &[f64]) -> burgers_pinn::Result<Evaluation<()>> {
    let (a, b) = (x[0], x[1]);
    Ok(Evaluation {
        loss: (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2),
        grad: vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ],
        aux: (),
    })
}

/// `½ (x - m)ᵀ A (x - m)` with `A = Qᵀ Q + I`. Centering at the minimiser keeps
/// the optimal value at exactly zero, so loss differences near the optimum are
/// not swamped by rounding.
struct Quadratic {
    a: Vec<Vec<f64>>,
    m: Vec<f64>,
}

impl Quadratic {
    fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let a = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| q[k][i] * q[k][j]).sum::<f64>() + f64::from(u8::from(i == j)))
                    .collect()
            })
            .collect();
        let m = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Quadratic { a, m }
    }

    fn eval(&self, x: &[f64]) -> Evaluation<()> {
        let e: Vec<f64> = x.iter().zip(&self.m).map(|(a, b)| a - b).collect();
        let grad: Vec<f64> = self
            .a
            .iter()
            .map(|row| row.iter().zip(&e).map(|(r, v)| r * v).sum())
            .collect();
        let loss = 0.5 * grad.iter().zip(&e).map(|(g, v)| g * v).sum::<f64>();
        Evaluation { loss, grad, aux: () }
    }
}

#[test]
fn rosenbrock_reaches_the_minimiser() {
    let mut state = LbfgsState::new(LbfgsConfig::default());
    let out = lbfgs_minimize(rosenbrock, vec![-1.2, 1.0], &mut state, 200, |_| ControlFlow::Continue(())).unwrap();
    let dist = ((out.x[0] - 1.0).powi(2) + (out.x[1] - 1.0).powi(2)).sqrt();
    assert!(dist < 1e-6, "distance {dist:e} after {} iterations", out.iterations);
    assert!(out.iterations <= 200);
    assert!(!state.pairs.is_empty());
    for pair in &state.pairs {
        let sy: f64 = pair.s.iter().zip(&pair.y).map(|(a, b)| a * b).sum();
        assert!(sy > 0.0);
    }
}

fn solve_quadratic(seed: u64, max_iters: usize) -> burgers_pinn::optim::LbfgsOutcome<()> {
    let q = Quadratic::random(10, seed);
    let cfg = LbfgsConfig {
        grad_tol: 1e-8,
        ..LbfgsConfig::default()
    };
    let mut state = LbfgsState::new(cfg);
    lbfgs_minimize(|x| Ok(q.eval(x)), vec![0.0; 10], &mut state, max_iters, |_| {
        ControlFlow::Continue(())
    })
    .unwrap()
}

#[test]
fn strongly_convex_quadratic_in_few_iterations() {
    let out = solve_quadratic(0, 30);
    assert!(out.grad_norm < 1e-8, "|g| = {:e}", out.grad_norm);
    assert_eq!(out.termination, Termination::GradientTolerance);
}

#[test]
fn quadratic_convergence_across_instances() {
    // unit steps make BFGS superlinear rather than finite; 20-35 iterations is
    // the usual range at this conditioning
    for seed in 0..10 {
        let out = solve_quadratic(seed, 40);
        assert!(out.grad_norm < 1e-8, "seed {seed}: |g| = {:e}", out.grad_norm);
    }
}

#[test]
fn accepted_steps_satisfy_sufficient_decrease() {
    let mut state = LbfgsState::new(LbfgsConfig::default());
    let out = lbfgs_minimize(rosenbrock, vec![-1.2, 1.0], &mut state, 200, |_| ControlFlow::Continue(())).unwrap();
    assert!(!out.steps.is_empty());
    for s in &out.steps {
        assert!(s.slope < 0.0);
        assert!(s.loss_after <= s.loss_before + 1e-4 * s.step * s.slope);
    }
}

#[test]
fn adam_on_a_quadratic() {
    let target = [0.7, -1.3, 2.1, 0.05];
    let scales = [1.0, 4.0, 0.5, 10.0];
    let mut x = vec![0.0; 4];
    let mut state = AdamState::new(4, 1e-2);
    let err = |x: &[f64]| {
        x.iter()
            .zip(&target)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut steps = 0;
    while err(&x) >= 1e-3 && steps < 5000 {
        let g: Vec<f64> = (0..4).map(|i| scales[i] * (x[i] - target[i])).collect();
        adam_step(&mut x, &g, &mut state).unwrap();
        steps += 1;
    }
    assert!(err(&x) < 1e-3, "error {:e} after {steps} steps", err(&x));
}
