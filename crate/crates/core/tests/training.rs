use std::cell::RefCell;

use burgers_pinn::optim::{train_pipeline, Phase, Schedule, Termination};
use burgers_pinn::pde::{nonstationary_benchmark, stationary_benchmark};
use burgers_pinn::sample::{rar_refine, residuals, sample_interior, sample_set};
use burgers_pinn::{derive_seed, Activation, MlpParams, RarConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_net(input: usize, seed: u64) -> MlpParams {
    MlpParams::init(&[input, 8, 8, 1], Activation::Tanh, seed).unwrap()
}

#[test]
fn empty_schedule_changes_nothing() {
    let problem = stationary_benchmark();
    let layout = problem.layout();
    let set = sample_set(&problem, 50, 20, 0, 1).unwrap();
    let p = small_net(2, 1);
    let out = train_pipeline(&p, &layout, &problem, &set, &Schedule::new(0, 0)).unwrap();
    assert_eq!(out.params, p);
    assert!(out.trace.is_empty());
    assert_eq!(out.lbfgs_termination, None);
}

#[test]
fn lbfgs_phase_descends_and_is_reproducible() {
    for problem in [stationary_benchmark(), nonstationary_benchmark()] {
        let layout = problem.layout();
        let n_0 = if problem.time_dependent { 40 } else { 0 };
        let set = sample_set(&problem, 200, 40, n_0, 2).unwrap();
        let p = small_net(layout.feature_dim(), 2);
        let schedule = Schedule::new(30, 40);
        let a = train_pipeline(&p, &layout, &problem, &set, &schedule).unwrap();
        let b = train_pipeline(&p, &layout, &problem, &set, &schedule).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.params, b.params);

        let adam: Vec<_> = a.trace.iter().filter(|r| r.phase == Phase::Adam).collect();
        let lbfgs: Vec<_> = a.trace.iter().filter(|r| r.phase == Phase::Lbfgs).collect();
        assert_eq!(adam.len(), 30);
        assert!(!lbfgs.is_empty() && lbfgs.len() <= 41);
        assert_eq!(lbfgs[0].iteration, 0);
        for w in lbfgs.windows(2) {
            assert!(w[1].loss.total <= w[0].loss.total, "{}: L-BFGS loss went up", problem.name);
        }
        assert!(lbfgs.last().unwrap().loss.total < adam[0].loss.total);
        for s in &a.lbfgs_steps {
            assert!(s.loss_after <= s.loss_before + 1e-4 * s.step * s.slope);
        }
        assert!(matches!(
            a.lbfgs_termination,
            Some(Termination::MaxIterations | Termination::GradientTolerance | Termination::LineSearchFailed)
        ));
    }
}

#[test]
fn infinite_threshold_needs_no_rounds() {
    let problem = stationary_benchmark();
    let layout = problem.layout();
    let set = sample_set(&problem, 30, 10, 0, 3).unwrap();
    let cfg = RarConfig {
        pool_size: 500,
        mean_residual_threshold: f64::INFINITY,
        ..RarConfig::default()
    };
    let p = small_net(2, 3);
    let out = rar_refine(
        |_: &MlpParams, _: &_, _| panic!("trainer must not run"),
        p.clone(),
        &layout,
        &problem,
        set.clone(),
        &cfg,
    )
    .unwrap();
    assert_eq!(out.rounds_used, 0);
    assert!(out.converged);
    assert_eq!(out.points, set);
    assert_eq!(out.params, p);
    assert_eq!(out.trace.len(), 1);
}

#[test]
fn refinement_appends_the_worst_points() {
    for problem in [stationary_benchmark(), nonstationary_benchmark()] {
        let layout = problem.layout();
        let n_0 = if problem.time_dependent { 10 } else { 0 };
        let set = sample_set(&problem, 30, 10, n_0, 4).unwrap();
        let cfg = RarConfig {
            pool_size: 400,
            mean_residual_threshold: 1e-12,
            add_per_round: 25,
            max_rounds: 3,
            seed: 17,
        };
        let p = small_net(layout.feature_dim(), 4);
        let calls = RefCell::new(0);
        let trainer = |params: &MlpParams, points: &burgers_pinn::CollocationSet, round: usize| {
            *calls.borrow_mut() += 1;
            let n = points.interior.nrows();
            assert_eq!(n, 30 + round * cfg.add_per_round);
            // regenerate the pool this round selected from
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, (round - 1) as u64));
            let pool = sample_interior(&problem, cfg.pool_size, &mut rng);
            let r: Vec<f64> = residuals(params, &layout, &problem, pool.view())
                .unwrap()
                .iter()
                .map(|v| v.abs())
                .collect();
            let added = points.interior.slice(ndarray::s![n - cfg.add_per_round.., ..]);
            let mut chosen = vec![false; pool.nrows()];
            for row in added.outer_iter() {
                let k = pool
                    .outer_iter()
                    .position(|q| q == row)
                    .expect("appended point comes from the pool");
                chosen[k] = true;
                let x: Vec<f64> = row.iter().take(problem.spatial_dim).copied().collect();
                assert!(problem.domain.contains_strictly(&x));
            }
            let min_chosen = (0..r.len()).filter(|&k| chosen[k]).map(|k| r[k]).fold(f64::INFINITY, f64::min);
            let max_rest = (0..r.len()).filter(|&k| !chosen[k]).map(|k| r[k]).fold(0.0, f64::max);
            assert!(min_chosen >= max_rest);
            // perturb the network so later rounds see new residuals
            let mut next = params.clone();
            next.layers_mut()[2].bias[0] += 0.05;
            Ok(next)
        };
        let out = rar_refine(trainer, p, &layout, &problem, set, &cfg).unwrap();
        assert_eq!(*calls.borrow(), 3);
        assert_eq!(out.rounds_used, 3);
        assert!(!out.converged);
        let sizes: Vec<usize> = out.trace.iter().map(|r| r.interior_size).collect();
        assert_eq!(sizes, vec![30, 55, 80, 105]);
        assert_eq!(out.points.interior.nrows(), 105);
        assert_eq!(out.final_mean_residual, out.trace.last().unwrap().mean_residual);
    }
}

#[test]
fn trainer_errors_propagate() {
    let problem = stationary_benchmark();
    let set = sample_set(&problem, 30, 10, 0, 5).unwrap();
    let cfg = RarConfig {
        pool_size: 200,
        mean_residual_threshold: 1e-12,
        ..RarConfig::default()
    };
    let out = rar_refine(
        |_: &MlpParams, _: &_, _| Err(burgers_pinn::Error::InvalidInput("boom".into())),
        small_net(2, 5),
        &problem.layout(),
        &problem,
        set,
        &cfg,
    );
    assert!(matches!(out, Err(burgers_pinn::Error::InvalidInput(_))));
}
