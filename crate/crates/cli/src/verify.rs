//! Checks that each benchmark's exact solution satisfies its equation, using
//! forcings written out by hand, and compares them with the sign conventions of
//! the commonly printed closed forms.

use std::f64::consts::PI;

use burgers_pinn::pde::pde_residual;
use burgers_pinn::ProblemSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};

pub const SAMPLE_POINTS: usize = 10_000;

/// Spatial points (and time, for the time-dependent case) of the comparison table.
const TABLE_POINTS: [[f64; 3]; 5] = [
    [0.25, 0.25, 0.0],
    [0.1, 0.7, 0.25],
    [0.5, 0.3, 0.5],
    [0.8, 0.6, 0.75],
    [0.33, 0.9, 1.0],
];

#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSample {
    pub x: Vec<f64>,
    pub t: Option<f64>,
    pub manufactured: f64,
    pub printed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForcingCheck {
    /// Largest `|u_t - νΔu + u Σ u_{x_i} - f|` of the exact solution.
    pub max_residual: f64,
    pub samples: Vec<ForcingSample>,
}

/// Hand-derived forcing for `u = sin(2πx₁) sin(2πx₂)`.
fn stationary_forcing(x: &[f64], nu: f64) -> f64 {
    let k = 2.0 * PI;
    let (s1, c1) = (k * x[0]).sin_cos();
    let (s2, c2) = (k * x[1]).sin_cos();
    2.0 * k * k * nu * s1 * s2 + k * s1 * s2 * (c1 * s2 + s1 * c2)
}

/// The stationary forcing as usually printed: `-2π s₁s₂ (c₁s₂ + c₂s₁ + 4πν)`.
fn stationary_printed(x: &[f64], nu: f64) -> f64 {
    let k = 2.0 * PI;
    let (s1, c1) = (k * x[0]).sin_cos();
    let (s2, c2) = (k * x[1]).sin_cos();
    -k * s1 * s2 * (c1 * s2 + c2 * s1 + 2.0 * k * nu)
}

/// Hand-derived forcing for `u = e^{-4π²νt} sin(2π(x₁-t)) sin(2π(x₂-t))`.
fn nonstationary_forcing(x: &[f64], t: f64, nu: f64) -> f64 {
    let k = 2.0 * PI;
    let e = (-k * k * nu * t).exp();
    let (s1, c1) = (k * (x[0] - t)).sin_cos();
    let (s2, c2) = (k * (x[1] - t)).sin_cos();
    let u = e * s1 * s2;
    let mixed = k * e * (c1 * s2 + s1 * c2);
    // u_t = -4π²ν u - mixed, -νΔu = 8π²ν u, u Σ u_{x_i} = u · mixed
    k * k * nu * u - mixed + u * mixed
}

/// The time-dependent forcing as usually printed:
/// `-2π e [(C₁ + C₂)(1 - e(S₁ + S₂))]`.
fn nonstationary_printed(x: &[f64], t: f64, nu: f64) -> f64 {
    let k = 2.0 * PI;
    let e = (-k * k * nu * t).exp();
    let (s1, c1) = (k * (x[0] - t)).sin_cos();
    let (s2, c2) = (k * (x[1] - t)).sin_cos();
    -k * e * ((c1 + c2) * (1.0 - e * (s1 + s2)))
}

/// `f(x, t, ν)`.
type Forcing = fn(&[f64], f64, f64) -> f64;

fn hand_forcings(problem: &ProblemSpec) -> CliResult<(Forcing, Forcing)> {
    match problem.name.as_str() {
        "stationary" => Ok((|x, _, nu| stationary_forcing(x, nu), |x, _, nu| stationary_printed(x, nu))),
        "nonstationary" => Ok((nonstationary_forcing, nonstationary_printed)),
        other => Err(CliError::Config(format!("no hand-derived forcing for `{other}`"))),
    }
}

pub fn verify_forcing(problem: &ProblemSpec, seed: u64) -> CliResult<ForcingCheck> {
    let exact = problem.exact()?;
    if problem.spatial_dim != 2 {
        return Err(CliError::Config("forcing verification covers the two-dimensional benchmarks".into()));
    }
    let (hand, printed) = hand_forcings(problem)?;
    let residual = |x: &[f64], t: f64| -> CliResult<f64> {
        let bundle = exact.bundle(x, t, problem.time_dependent);
        Ok(pde_residual(&bundle, hand(x, t, problem.nu), problem.nu, problem.time_dependent)?)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_end = problem.final_time.unwrap_or(0.0);
    let mut max_residual: f64 = 0.0;
    for _ in 0..SAMPLE_POINTS {
        let x: Vec<f64> = (0..2)
            .map(|i| rng.gen_range(problem.domain.lo[i]..problem.domain.hi[i]))
            .collect();
        let t = if problem.time_dependent { rng.gen_range(0.0..=t_end) } else { 0.0 };
        max_residual = max_residual.max(residual(&x, t)?.abs());
    }

    let samples = TABLE_POINTS
        .iter()
        .map(|p| {
            let x = p[..2].to_vec();
            let t = problem.time_dependent.then_some(p[2] * t_end);
            let tt = t.unwrap_or(0.0);
            ForcingSample {
                manufactured: (problem.forcing)(&x, tt),
                printed: printed(&x, tt, problem.nu),
                x,
                t,
            }
        })
        .collect();
    Ok(ForcingCheck { max_residual, samples })
}

pub fn report(check: &ForcingCheck) -> String {
    let mut s = format!("max |residual of exact solution| over {SAMPLE_POINTS} points = {:.3e}\n", check.max_residual);
    s.push_str("x1,x2,t,manufactured,printed\n");
    for p in &check.samples {
        s.push_str(&format!(
            "{},{},{},{:.10e},{:.10e}\n",
            p.x[0],
            p.x[1],
            p.t.map_or(String::new(), |t| t.to_string()),
            p.manufactured,
            p.printed
        ));
    }
    s
}
