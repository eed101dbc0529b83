use burgers_pinn::net::{derivatives, Layer};
use burgers_pinn::pde::{
    composite_loss, nonstationary_benchmark, pde_residual, stationary_benchmark, LossAssembly,
};
use burgers_pinn::sample::sample_set;
use burgers_pinn::{Activation, CollocationSet, DerivativeBundle, InputLayout, LossWeights, MlpParams};
use ndarray::{concatenate, s, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn activation(tanh: bool) -> Activation {
    if tanh {
        Activation::Tanh
    } else {
        Activation::Sigmoid
    }
}

fn scaled(b: &DerivativeBundle, a: f64) -> DerivativeBundle {
    DerivativeBundle {
        value: a * b.value,
        grad_x: b.grad_x.iter().map(|g| a * g).collect(),
        laplacian: a * b.laplacian,
        du_dt: b.du_dt.map(|v| a * v),
    }
}

fn close(a: &DerivativeBundle, b: &DerivativeBundle, rel: f64, abs: f64) -> bool {
    let near = |x: f64, y: f64| (x - y).abs() <= rel * x.abs().max(y.abs()) + abs;
    near(a.value, b.value)
        && near(a.laplacian, b.laplacian)
        && a.grad_x.iter().zip(&b.grad_x).all(|(x, y)| near(*x, *y))
        && match (a.du_dt, b.du_dt) {
            (Some(x), Some(y)) => near(x, y),
            (None, None) => true,
            _ => false,
        }
}

fn scale_output(p: &MlpParams, alpha: f64) -> MlpParams {
    let mut q = p.clone();
    let last = q.layers_mut().last_mut().unwrap();
    last.weight.mapv_inplace(|w| alpha * w);
    last.bias.mapv_inplace(|b| alpha * b);
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_layer_is_linear(seed in 0u64..1000, k in -6i32..6, negative: bool, tanh: bool, x in prop::array::uniform3(0.0f64..1.0)) {
        // powers of two scale without rounding, so the identity is exact
        let alpha = if negative { -1.0 } else { 1.0 } * 2f64.powi(k);
        let layout = InputLayout::time_dependent(2);
        let p = MlpParams::init(&[3, 12, 9, 1], activation(tanh), seed).unwrap();
        let base = derivatives(&p, &layout, &x).unwrap();
        let got = derivatives(&scale_output(&p, alpha), &layout, &x).unwrap();
        prop_assert_eq!(got, scaled(&base, alpha));
    }

    #[test]
    fn output_layer_scaling_with_rounding(seed in 0u64..1000, alpha in -5.0f64..5.0, tanh: bool, x in prop::array::uniform3(0.0f64..1.0)) {
        let layout = InputLayout::time_dependent(2);
        let p = MlpParams::init(&[3, 12, 9, 1], activation(tanh), seed).unwrap();
        let base = derivatives(&p, &layout, &x).unwrap();
        let got = derivatives(&scale_output(&p, alpha), &layout, &x).unwrap();
        prop_assert!(close(&got, &scaled(&base, alpha), 1e-12, 1e-14));
    }

    #[test]
    fn negated_output_layer_negates_bundle(seed in 0u64..1000, tanh: bool, x in prop::array::uniform2(0.0f64..1.0)) {
        let layout = InputLayout::stationary(2);
        let mut p = MlpParams::init(&[2, 16, 1], activation(tanh), seed).unwrap();
        p.layers_mut()[1].bias[0] = 0.3;
        let base = derivatives(&p, &layout, &x).unwrap();
        let got = derivatives(&scale_output(&p, -1.0), &layout, &x).unwrap();
        prop_assert_eq!(got, scaled(&base, -1.0));
    }

    #[test]
    fn bundles_are_deterministic(seed in 0u64..1000, tanh: bool, x in prop::array::uniform3(0.0f64..1.0)) {
        let layout = InputLayout::time_dependent(2);
        let p = MlpParams::init(&[3, 32, 32, 1], activation(tanh), seed).unwrap();
        let a = derivatives(&p, &layout, &x).unwrap();
        let b = derivatives(&p, &layout, &x).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert_eq!(a.laplacian.to_bits(), b.laplacian.to_bits());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn time_constant_network_matches_stationary_residual(
        seed in 0u64..1000,
        x in prop::array::uniform2(0.0f64..1.0),
        t in 0.0f64..1.0,
        f in -3.0f64..3.0,
        nu in 0.001f64..1.0,
    ) {
        let stationary = MlpParams::init(&[2, 10, 1], Activation::Tanh, seed).unwrap();
        // same network with an extra time input whose weights are zero
        let first = &stationary.layers()[0];
        let mut widened = Layer::zeros(3, first.out_dim());
        widened.weight.slice_mut(s![.., ..2]).assign(&first.weight);
        widened.bias.assign(&first.bias);
        let timed = MlpParams::new(
            vec![widened, stationary.layers()[1].clone()],
            Activation::Tanh,
        )
        .unwrap();
        let bs = derivatives(&stationary, &InputLayout::stationary(2), &x).unwrap();
        let bt = derivatives(&timed, &InputLayout::time_dependent(2), &[x[0], x[1], t]).unwrap();
        prop_assert_eq!(bt.du_dt, Some(0.0));
        let rs = pde_residual(&bs, f, nu, false).unwrap();
        let rt = pde_residual(&bt, f, nu, true).unwrap();
        prop_assert!((rs - rt).abs() <= 1e-14 * rs.abs().max(1.0));
    }

    #[test]
    fn loss_terms_are_non_negative(seed in 0u64..500, tanh: bool, nonstationary: bool) {
        let problem = if nonstationary { nonstationary_benchmark() } else { stationary_benchmark() };
        let layout = problem.layout();
        let n_0 = if nonstationary { 20 } else { 0 };
        let set = sample_set(&problem, 40, 20, n_0, seed).unwrap();
        let p = MlpParams::init(&[layout.feature_dim(), 8, 1], activation(tanh), seed).unwrap();
        let l = composite_loss(&p, &layout, &problem, &set).unwrap();
        prop_assert!(l.residual_term >= 0.0 && l.boundary_term >= 0.0 && l.initial_term >= 0.0);
        prop_assert!(l.total > 0.0);
        prop_assert_eq!(l.total, l.residual_term + l.boundary_term + l.initial_term);
    }

    #[test]
    fn weights_scale_only_their_terms(seed in 0u64..500, wb in 0.0f64..200.0, wi in 0.0f64..200.0) {
        let problem = nonstationary_benchmark();
        let layout = problem.layout();
        let set = sample_set(&problem, 40, 20, 20, seed).unwrap();
        let p = MlpParams::init(&[3, 8, 1], Activation::Tanh, seed).unwrap();
        let plain = composite_loss(&p, &layout, &problem, &set).unwrap();
        let weights = LossWeights { boundary: wb, initial: wi };
        let w = LossAssembly::new(&problem, &layout, &set).unwrap().with_weights(weights).unwrap().breakdown(&p).unwrap();
        prop_assert_eq!(
            (w.residual_term, w.boundary_term, w.initial_term),
            (plain.residual_term, plain.boundary_term, plain.initial_term)
        );
        prop_assert_eq!(w.total, plain.residual_term + wb * plain.boundary_term + wi * plain.initial_term);
    }

    #[test]
    fn duplicating_points_keeps_every_term(seed in 0u64..500, nonstationary: bool) {
        let problem = if nonstationary { nonstationary_benchmark() } else { stationary_benchmark() };
        let layout = problem.layout();
        let n_0 = if nonstationary { 16 } else { 0 };
        let set = sample_set(&problem, 32, 16, n_0, seed).unwrap();
        let twice = |a: &ndarray::Array2<f64>| concatenate(Axis(0), &[a.view(), a.view()]).unwrap();
        let doubled = CollocationSet {
            interior: twice(&set.interior),
            boundary: twice(&set.boundary),
            initial: twice(&set.initial),
        };
        let p = MlpParams::init(&[layout.feature_dim(), 8, 8, 1], Activation::Tanh, seed).unwrap();
        let a = composite_loss(&p, &layout, &problem, &set).unwrap();
        let b = composite_loss(&p, &layout, &problem, &doubled).unwrap();
        let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(1e-300);
        prop_assert!(rel(a.residual_term, b.residual_term) < 1e-12);
        prop_assert!(rel(a.boundary_term, b.boundary_term) < 1e-12);
        if nonstationary {
            prop_assert!(rel(a.initial_term, b.initial_term) < 1e-12);
        }
    }
}

/// Forcings derived by hand from the exact solutions.
fn hand_forcing(nonstationary: bool, nu: f64, x: &[f64], t: f64) -> f64 {
    let tau = 2.0 * PI;
    if nonstationary {
        let e = (-2.0 * tau * PI * nu * t).exp();
        let (s1, c1) = (tau * (x[0] - t)).sin_cos();
        let (s2, c2) = (tau * (x[1] - t)).sin_cos();
        let u = e * s1 * s2;
        let mixed = tau * e * (c1 * s2 + s1 * c2);
        // u_t - νΔu = 4π²ν u - mixed, u Σ u_x = u · mixed
        tau * tau * nu * u - mixed + u * mixed
    } else {
        let (s1, c1) = (tau * x[0]).sin_cos();
        let (s2, c2) = (tau * x[1]).sin_cos();
        2.0 * tau * tau * nu * s1 * s2 + s1 * s2 * tau * (c1 * s2 + s1 * c2)
    }
}

#[test]
fn exact_solutions_have_zero_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for problem in [stationary_benchmark(), nonstationary_benchmark()] {
        let exact = problem.exact().unwrap();
        let td = problem.time_dependent;
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let t = if td { rng.gen_range(0.0..1.0) } else { 0.0 };
            let f = hand_forcing(td, problem.nu, &x, t);
            let stored = (problem.forcing)(&x, t);
            assert!((f - stored).abs() < 1e-10 * f.abs().max(1.0), "{}: {f} vs {stored}", problem.name);
            let bundle = exact.bundle(&x, t, td);
            worst = worst.max(pde_residual(&bundle, f, problem.nu, td).unwrap().abs());
        }
        assert!(worst < 1e-8, "{}: {worst:e}", problem.name);
    }
}

#[test]
fn exact_derivatives_match_finite_differences() {
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for problem in [stationary_benchmark(), nonstationary_benchmark()] {
        let exact = problem.exact().unwrap();
        for _ in 0..50 {
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let t = rng.gen_range(0.0..1.0);
            let u = |dx: [f64; 2], dt: f64| exact.value(&[x[0] + dx[0], x[1] + dx[1]], t + dt);
            let grad = exact.gradient(&x, t);
            let mut lap = 0.0;
            for i in 0..2 {
                let mut e = [0.0; 2];
                e[i] = h;
                let m = [-e[0], -e[1]];
                let fd = (u(e, 0.0) - u(m, 0.0)) / (2.0 * h);
                assert!((fd - grad[i]).abs() < 1e-5, "{}", problem.name);
                lap += (u(e, 0.0) - 2.0 * u([0.0; 2], 0.0) + u(m, 0.0)) / (h * h);
            }
            assert!((lap - exact.laplacian(&x, t)).abs() < 1e-3, "{}", problem.name);
            let dt = (u([0.0; 2], h) - u([0.0; 2], -h)) / (2.0 * h);
            assert!((dt - exact.time_derivative(&x, t)).abs() < 1e-5, "{}", problem.name);
        }
    }
}

#[test]
fn printed_stationary_forcing_is_the_negated_one() {
    // -2π sin sin [cos₁ sin₂ + cos₂ sin₁ + 4πν] as printed for the stationary case
    let problem = stationary_benchmark();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let tau = 2.0 * PI;
        let (s1, c1) = (tau * x[0]).sin_cos();
        let (s2, c2) = (tau * x[1]).sin_cos();
        let printed = -tau * s1 * s2 * (c1 * s2 + c2 * s1 + 2.0 * tau * problem.nu);
        let f = (problem.forcing)(&x, 0.0);
        assert!((printed + f).abs() < 1e-12 * f.abs().max(1.0));
    }
}

#[test]
fn stationary_forcing_at_the_peak() {
    let f = (stationary_benchmark().forcing)(&[0.25, 0.25], 0.0);
    assert!((f - 2.0 * PI.powi(3)).abs() < 1e-12);
}

#[test]
fn loss_vanishes_only_when_every_term_does() {
    // the zero network satisfies homogeneous Dirichlet data exactly, and the
    // stationary forcing is nonzero almost everywhere
    let problem = stationary_benchmark();
    let set = sample_set(&problem, 64, 32, 0, 1).unwrap();
    let p = MlpParams::new(vec![Layer::zeros(2, 4), Layer::zeros(4, 1)], Activation::Tanh).unwrap();
    let l = composite_loss(&p, &problem.layout(), &problem, &set).unwrap();
    assert_eq!(l.boundary_term, 0.0);
    assert!(l.residual_term > 0.0);
    assert!(l.total > 0.0);
}
