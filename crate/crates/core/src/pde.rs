//! Burgers residuals, benchmark problems and the composite collocation loss.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{concatenate, Array2, ArrayView1, Axis};

use crate::net::{evaluate, loss_gradient, BundleBatch, BundleSeeds, DerivativeBundle};
use crate::net::{InputLayout, MlpParams, ParamGradient};
use crate::sample::CollocationSet;
use crate::{Error, Result};

/// Scalar field of a spatial point and a time (0 for stationary problems).
pub type ScalarField = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Closed-form solution with the derivatives a Burgers residual needs.
pub trait ExactSolution: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64], t: f64) -> f64;
    fn gradient(&self, x: &[f64], t: f64) -> Vec<f64>;
    fn laplacian(&self, x: &[f64], t: f64) -> f64;
    fn time_derivative(&self, x: &[f64], t: f64) -> f64;

    fn bundle(&self, x: &[f64], t: f64, time_dependent: bool) -> DerivativeBundle {
        DerivativeBundle {
            value: self.value(x, t),
            grad_x: self.gradient(x, t),
            laplacian: self.laplacian(x, t),
            du_dt: time_dependent.then(|| self.time_derivative(x, t)),
        }
    }
}

/// `u(x, t) = exp(-decay · t) · Π_i sin(2π (x_i - speed · t))`.
///
/// With `decay = speed = 0` this is the steady product of sines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineProductSolution {
    pub decay: f64,
    pub speed: f64,
}

impl SineProductSolution {
    pub fn steady() -> Self {
        SineProductSolution {
            decay: 0.0,
            speed: 0.0,
        }
    }

    /// Heat-kernel decay `4π²ν` with unit drift along the diagonal.
    pub fn traveling(nu: f64) -> Self {
        SineProductSolution {
            decay: 4.0 * PI * PI * nu,
            speed: 1.0,
        }
    }

    fn parts(&self, x: &[f64], t: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let k = 2.0 * PI;
        let amp = (-self.decay * t).exp();
        let (s, c) = x
            .iter()
            .map(|xi| (k * (xi - self.speed * t)).sin_cos())
            .unzip();
        (amp, s, c)
    }
}

impl ExactSolution for SineProductSolution {
    fn value(&self, x: &[f64], t: f64) -> f64 {
        let (amp, s, _) = self.parts(x, t);
        amp * s.iter().product::<f64>()
    }

    fn gradient(&self, x: &[f64], t: f64) -> Vec<f64> {
        let k = 2.0 * PI;
        let (amp, s, c) = self.parts(x, t);
        (0..x.len())
            .map(|i| {
                let others: f64 = s
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, v)| v)
                    .product();
                amp * k * c[i] * others
            })
            .collect()
    }

    fn laplacian(&self, x: &[f64], t: f64) -> f64 {
        let k = 2.0 * PI;
        -(x.len() as f64) * k * k * self.value(x, t)
    }

    fn time_derivative(&self, x: &[f64], t: f64) -> f64 {
        let grad_sum: f64 = self.gradient(x, t).iter().sum();
        -self.decay * self.value(x, t) - self.speed * grad_sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    /// `u = 0` on the boundary.
    DirichletZero,
    /// `u` equals the trace of the exact solution.
    DirichletExact,
    /// Values match on opposite faces.
    Periodic,
}

impl BoundaryKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::DirichletZero => "dirichlet_zero",
            BoundaryKind::DirichletExact => "dirichlet_exact",
            BoundaryKind::Periodic => "periodic",
        }
    }
}

/// Axis-aligned spatial box.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn unit(d: usize) -> Self {
        Domain {
            lo: vec![0.0; d],
            hi: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn contains_strictly(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| v > l && v < h)
    }
}

/// A Burgers problem: data, domain and optional closed-form solution.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub spatial_dim: usize,
    pub time_dependent: bool,
    pub domain: Domain,
    /// Final time `T`; `None` for stationary problems.
    pub final_time: Option<f64>,
    pub nu: f64,
    pub forcing: ScalarField,
    pub bc: BoundaryKind,
    /// Initial condition `u₀(x)` (time argument ignored).
    pub initial: Option<ScalarField>,
    pub exact: Option<Arc<dyn ExactSolution>>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("spatial_dim", &self.spatial_dim)
            .field("time_dependent", &self.time_dependent)
            .field("domain", &self.domain)
            .field("final_time", &self.final_time)
            .field("nu", &self.nu)
            .field("bc", &self.bc)
            .field("exact", &self.exact)
            .finish_non_exhaustive()
    }
}

/// Optional overrides applied when building a named benchmark.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProblemOverrides {
    pub nu: Option<f64>,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub final_time: Option<f64>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::UnsupportedProblem(m));
        if !(2..=3).contains(&self.spatial_dim) {
            return bad(format!("spatial dimension {} not in {{2, 3}}", self.spatial_dim));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return bad(format!("viscosity must be positive, got {}", self.nu));
        }
        if self.domain.dim() != self.spatial_dim
            || self.domain.hi.len() != self.spatial_dim
            || self.domain.widths().iter().any(|w| !(*w > 0.0))
        {
            return bad(format!("degenerate domain {:?}", self.domain));
        }
        if self.time_dependent {
            match self.final_time {
                Some(t) if t > 0.0 => {}
                _ => return bad("time-dependent problem needs a positive final time".into()),
            }
            if self.initial.is_none() {
                return bad("time-dependent problem needs an initial condition".into());
            }
        }
        if self.bc == BoundaryKind::DirichletExact && self.exact.is_none() {
            return bad("dirichlet_exact boundary requires an exact solution".into());
        }
        Ok(())
    }

    /// Named benchmark with overrides.
    pub fn by_name(name: &str, overrides: &ProblemOverrides) -> Result<Self> {
        let mut p = match name {
            "stationary" => stationary_benchmark(),
            "nonstationary" => nonstationary_benchmark(),
            other => return Err(Error::UnsupportedProblem(format!("unknown problem `{other}`"))),
        };
        if let Some(lo) = &overrides.lo {
            p.domain.lo = lo.clone();
        }
        if let Some(hi) = &overrides.hi {
            p.domain.hi = hi.clone();
        }
        if let Some(t) = overrides.final_time {
            if p.time_dependent {
                p.final_time = Some(t);
            }
        }
        if let Some(nu) = overrides.nu {
            p = p.with_nu(nu);
        }
        p.validate()?;
        Ok(p)
    }

    /// Changes the viscosity. For the traveling benchmark the exact solution
    /// depends on `ν`, so it and the manufactured forcing are rebuilt.
    fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        if self.name == "nonstationary" {
            self.exact = Some(Arc::new(SineProductSolution::traveling(nu)));
        }
        if let Some(exact) = self.exact.clone() {
            self.forcing = manufactured_field(exact, nu, self.time_dependent);
        }
        self
    }

    /// Adds `offset` to the forcing. The perturbed problem has no known solution.
    pub fn with_forcing_offset(&self, offset: ScalarField) -> Result<Self> {
        self.perturbable()?;
        let mut p = self.clone();
        let base = self.forcing.clone();
        p.forcing = Arc::new(move |x, t| base(x, t) + offset(x, t));
        p.exact = None;
        Ok(p)
    }

    /// Adds `offset` to the initial condition.
    pub fn with_initial_offset(&self, offset: ScalarField) -> Result<Self> {
        self.perturbable()?;
        let base = self.initial.clone().ok_or_else(|| {
            Error::UnsupportedProblem("stationary problem has no initial condition".into())
        })?;
        let mut p = self.clone();
        p.initial = Some(Arc::new(move |x, t| base(x, t) + offset(x, t)));
        p.exact = None;
        Ok(p)
    }

    fn perturbable(&self) -> Result<()> {
        if self.bc == BoundaryKind::DirichletExact {
            return Err(Error::UnsupportedProblem(
                "cannot perturb a problem whose boundary data is its exact solution".into(),
            ));
        }
        Ok(())
    }

    pub fn layout(&self) -> InputLayout {
        InputLayout::new(self.spatial_dim, self.time_dependent)
    }

    /// Splits a raw point into spatial part and time.
    pub fn split<'a>(&self, point: &'a [f64]) -> (&'a [f64], f64) {
        if self.time_dependent {
            (&point[..self.spatial_dim], point[self.spatial_dim])
        } else {
            (point, 0.0)
        }
    }

    pub fn exact(&self) -> Result<&dyn ExactSolution> {
        self.exact
            .as_deref()
            .ok_or_else(|| Error::UnsupportedProblem(format!("`{}` has no exact solution", self.name)))
    }

    fn check_layout(&self, layout: &InputLayout) -> Result<()> {
        if layout.spatial_dim() != self.spatial_dim || layout.has_time() != self.time_dependent {
            return Err(Error::input(format!(
                "layout ({} spatial, time: {}) does not fit problem `{}`",
                layout.spatial_dim(),
                layout.has_time(),
                self.name
            )));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn burgers_residual(
    value: f64,
    grad_sum: f64,
    laplacian: f64,
    du_dt: f64,
    f_val: f64,
    nu: f64,
) -> f64 {
    du_dt - nu * laplacian + value * grad_sum - f_val
}

/// `u_t - ν Δu + u Σ_i u_{x_i} - f` from a derivative bundle.
pub fn pde_residual(
    bundle: &DerivativeBundle,
    f_val: f64,
    nu: f64,
    time_dependent: bool,
) -> Result<f64> {
    let du_dt = match (time_dependent, bundle.du_dt) {
        (true, Some(v)) => v,
        (true, None) => return Err(Error::input("time derivative missing for time-dependent residual")),
        (false, _) => 0.0,
    };
    Ok(burgers_residual(
        bundle.value,
        bundle.grad_x.iter().sum(),
        bundle.laplacian,
        du_dt,
        f_val,
        nu,
    ))
}

/// Forcing that makes `exact` a solution: `f = u_t - ν Δu + u Σ_i u_{x_i}`.
pub fn manufactured_forcing(
    exact: Option<&dyn ExactSolution>,
    nu: f64,
    x: &[f64],
    t: Option<f64>,
) -> Result<f64> {
    let exact =
        exact.ok_or_else(|| Error::UnsupportedProblem("manufactured forcing needs an exact solution".into()))?;
    let time = t.unwrap_or(0.0);
    let bundle = exact.bundle(x, time, t.is_some());
    pde_residual(&bundle, 0.0, nu, t.is_some())
}

fn manufactured_field(exact: Arc<dyn ExactSolution>, nu: f64, time_dependent: bool) -> ScalarField {
    Arc::new(move |x, t| {
        manufactured_forcing(Some(exact.as_ref()), nu, x, time_dependent.then_some(t))
            .expect("exact solution present")
    })
}

/// `Ω = [0,1]²`, `ν = π/4`, `u = sin(2πx₁) sin(2πx₂)`, homogeneous Dirichlet data.
pub fn stationary_benchmark() -> ProblemSpec {
    let nu = PI / 4.0;
    let exact: Arc<dyn ExactSolution> = Arc::new(SineProductSolution::steady());
    ProblemSpec {
        name: "stationary".into(),
        spatial_dim: 2,
        time_dependent: false,
        domain: Domain::unit(2),
        final_time: None,
        nu,
        forcing: manufactured_field(exact.clone(), nu, false),
        bc: BoundaryKind::DirichletZero,
        initial: None,
        exact: Some(exact),
    }
}

/// `Ω = [0,1]²`, `T = 1`, `ν = 0.01`, periodic, with the decaying traveling wave
/// `u = exp(-4π²νt) sin(2π(x₁-t)) sin(2π(x₂-t))` as solution.
pub fn nonstationary_benchmark() -> ProblemSpec {
    let nu = 0.01;
    let exact: Arc<dyn ExactSolution> = Arc::new(SineProductSolution::traveling(nu));
    ProblemSpec {
        name: "nonstationary".into(),
        spatial_dim: 2,
        time_dependent: true,
        domain: Domain::unit(2),
        final_time: Some(1.0),
        nu,
        forcing: manufactured_field(exact.clone(), nu, true),
        bc: BoundaryKind::Periodic,
        initial: Some(Arc::new(|x: &[f64], _t| {
            x.iter().map(|v| (2.0 * PI * v).sin()).product()
        })),
        exact: Some(exact),
    }
}

/// The three loss terms and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub residual_term: f64,
    pub boundary_term: f64,
    pub initial_term: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn new(residual_term: f64, boundary_term: f64, initial_term: f64, w: LossWeights) -> Self {
        LossBreakdown {
            residual_term,
            boundary_term,
            initial_term,
            total: residual_term + w.boundary * boundary_term + w.initial * initial_term,
        }
    }
}

/// Multipliers of the boundary and initial terms in the total; the residual
/// term always has weight 1. Each term itself stays a plain mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub boundary: f64,
    pub initial: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            boundary: 1.0,
            initial: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.boundary, self.initial].iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::input(format!("loss weights must be finite and non-negative, got {self:?}")))
        }
    }
}

/// Precomputed targets for the composite loss over a fixed collocation set.
pub struct LossAssembly<'a> {
    problem: &'a ProblemSpec,
    layout: InputLayout,
    points: Array2<f64>,
    n_interior: usize,
    n_boundary: usize,
    forcing: Vec<f64>,
    boundary_target: Vec<f64>,
    initial_target: Vec<f64>,
    weights: LossWeights,
}

impl<'a> LossAssembly<'a> {
    pub fn new(problem: &'a ProblemSpec, layout: &InputLayout, set: &CollocationSet) -> Result<Self> {
        problem.check_layout(layout)?;
        let raw = layout.raw_dim();
        for (name, pts) in [
            ("interior", &set.interior),
            ("boundary", &set.boundary),
            ("initial", &set.initial),
        ] {
            if pts.ncols() != raw {
                return Err(Error::input(format!(
                    "{name} points have {} coordinates, expected {raw}",
                    pts.ncols()
                )));
            }
        }
        if set.interior.nrows() == 0 {
            return Err(Error::input("interior point set is empty"));
        }
        if problem.time_dependent == (set.initial.nrows() == 0) {
            return Err(Error::input(
                "initial points must be present exactly when the problem is time-dependent",
            ));
        }
        if problem.bc == BoundaryKind::Periodic && !set.boundary.nrows().is_multiple_of(2) {
            return Err(Error::input("periodic boundary points must come in pairs"));
        }

        let eval = |rows: &Array2<f64>, field: &dyn Fn(&[f64], f64) -> f64| -> Vec<f64> {
            rows.outer_iter()
                .map(|r: ArrayView1<f64>| {
                    let r = r.to_vec();
                    let (x, t) = problem.split(&r);
                    field(x, t)
                })
                .collect()
        };
        let forcing = eval(&set.interior, problem.forcing.as_ref());
        let boundary_target = match problem.bc {
            BoundaryKind::DirichletExact => {
                let exact = problem.exact()?;
                eval(&set.boundary, &|x, t| exact.value(x, t))
            }
            _ => vec![0.0; set.boundary.nrows()],
        };
        let initial_target = match &problem.initial {
            Some(u0) => eval(&set.initial, u0.as_ref()),
            None => Vec::new(),
        };
        let points = concatenate(
            Axis(0),
            &[set.interior.view(), set.boundary.view(), set.initial.view()],
        )
        .map_err(|e| Error::input(e.to_string()))?;
        Ok(LossAssembly {
            problem,
            layout: layout.clone(),
            points,
            n_interior: set.interior.nrows(),
            n_boundary: set.boundary.nrows(),
            forcing,
            boundary_target,
            initial_target,
            weights: LossWeights::default(),
        })
    }

    /// Replaces the default unit weights.
    pub fn with_weights(mut self, weights: LossWeights) -> Result<Self> {
        weights.validate()?;
        self.weights = weights;
        Ok(self)
    }

    pub fn weights(&self) -> LossWeights {
        self.weights
    }

    pub fn layout(&self) -> &InputLayout {
        &self.layout
    }

    pub fn num_points(&self) -> usize {
        self.points.nrows()
    }

    pub fn breakdown(&self, params: &MlpParams) -> Result<LossBreakdown> {
        let bundles = evaluate(params, &self.layout, self.points.view())?;
        Ok(self.assemble(&bundles, None))
    }

    pub fn value_and_gradient(&self, params: &MlpParams) -> Result<(LossBreakdown, ParamGradient)> {
        let mut breakdown = LossBreakdown::default();
        let (_, grad) = loss_gradient(params, &self.layout, self.points.view(), |b| {
            let mut seeds = b.zero_seeds();
            breakdown = self.assemble(b, Some(&mut seeds));
            (breakdown.total, seeds)
        })?;
        Ok((breakdown, grad))
    }

    fn assemble(&self, b: &BundleBatch, mut seeds: Option<&mut BundleSeeds>) -> LossBreakdown {
        let nu = self.problem.nu;
        let time = self.problem.time_dependent;

        let n_r = self.n_interior;
        let mut residual_sum = 0.0;
        for i in 0..n_r {
            let grad = b.grad(i);
            let grad_sum: f64 = grad.iter().sum();
            let du_dt = if time { b.du_dt[i] } else { 0.0 };
            let r = burgers_residual(b.value[i], grad_sum, b.laplacian[i], du_dt, self.forcing[i], nu);
            residual_sum += r * r;
            if let Some(s) = seeds.as_deref_mut() {
                let w = 2.0 * r / n_r as f64;
                s.value[i] = w * grad_sum;
                s.grad_mut(i).iter_mut().for_each(|g| *g = w * b.value[i]);
                s.laplacian[i] = -w * nu;
                if time {
                    s.du_dt[i] = w;
                }
            }
        }
        let residual_term = residual_sum / n_r as f64;

        let off = n_r;
        let n_b = self.n_boundary;
        let boundary_term = if n_b == 0 {
            0.0
        } else if self.problem.bc == BoundaryKind::Periodic {
            let pairs = n_b / 2;
            let mut sum = 0.0;
            for k in 0..pairs {
                let (lo, hi) = (off + 2 * k, off + 2 * k + 1);
                let e = b.value[lo] - b.value[hi];
                sum += e * e;
                if let Some(s) = seeds.as_deref_mut() {
                    let w = self.weights.boundary * 2.0 * e / pairs as f64;
                    s.value[lo] = w;
                    s.value[hi] = -w;
                }
            }
            sum / pairs as f64
        } else {
            let mut sum = 0.0;
            for k in 0..n_b {
                let e = b.value[off + k] - self.boundary_target[k];
                sum += e * e;
                if let Some(s) = seeds.as_deref_mut() {
                    s.value[off + k] = self.weights.boundary * 2.0 * e / n_b as f64;
                }
            }
            sum / n_b as f64
        };

        let off = n_r + n_b;
        let n_0 = self.initial_target.len();
        let initial_term = if n_0 == 0 {
            0.0
        } else {
            let mut sum = 0.0;
            for k in 0..n_0 {
                let e = b.value[off + k] - self.initial_target[k];
                sum += e * e;
                if let Some(s) = seeds.as_deref_mut() {
                    s.value[off + k] = self.weights.initial * 2.0 * e / n_0 as f64;
                }
            }
            sum / n_0 as f64
        };

        LossBreakdown::new(residual_term, boundary_term, initial_term, self.weights)
    }
}

/// Composite PINN loss of `params` on a collocation set.
pub fn composite_loss(
    params: &MlpParams,
    layout: &InputLayout,
    problem: &ProblemSpec,
    points: &CollocationSet,
) -> Result<LossBreakdown> {
    LossAssembly::new(problem, layout, points)?.breakdown(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn residual_of_trivial_bundles() {
        let zero = DerivativeBundle {
            value: 0.0,
            grad_x: vec![0.0, 0.0],
            laplacian: 0.0,
            du_dt: None,
        };
        assert_eq!(pde_residual(&zero, 0.0, 0.3, false).unwrap(), 0.0);
        let c = DerivativeBundle { value: 4.2, ..zero.clone() };
        assert_eq!(pde_residual(&c, 0.0, 0.3, false).unwrap(), 0.0);
        assert!(matches!(pde_residual(&c, 0.0, 0.3, true), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn stationary_forcing_at_peak() {
        let p = stationary_benchmark();
        let f = (p.forcing)(&[0.25, 0.25], 0.0);
        assert_relative_eq!(f, 2.0 * PI.powi(3), epsilon = 1e-12);
        let exact = p.exact().unwrap();
        assert_relative_eq!(exact.value(&[0.25, 0.25], 0.0), 1.0, epsilon = 1e-15);
        assert_eq!(exact.value(&[0.0, 0.37], 0.0), 0.0);
        assert_eq!(manufactured_forcing(Some(exact), p.nu, &[0.0, 0.0], None).unwrap(), 0.0);
        let r = pde_residual(&exact.bundle(&[0.25, 0.25], 0.0, false), f, p.nu, false).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn manufactured_forcing_requires_exact() {
        assert!(matches!(
            manufactured_forcing(None, 1.0, &[0.1, 0.2], None),
            Err(Error::UnsupportedProblem(_))
        ));
    }

    #[test]
    fn nonstationary_exact_matches_initial_and_is_periodic() {
        let p = nonstationary_benchmark();
        let exact = p.exact().unwrap();
        let u0 = p.initial.as_ref().unwrap();
        for k in 0..100 {
            let x = [(k as f64 * 0.6180339).fract(), (k as f64 * 0.4142135).fract()];
            assert_relative_eq!(exact.value(&x, 0.0), u0(&x, 0.0), epsilon = 1e-15);
            let t = (k as f64 * 0.7548776).fract();
            assert_relative_eq!(
                exact.value(&x, t),
                exact.value(&[x[0] + 1.0, x[1]], t),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn problem_validation_and_overrides() {
        let p = ProblemSpec::by_name(
            "nonstationary",
            &ProblemOverrides {
                nu: Some(0.05),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(p.nu, 0.05);
        let exact = p.exact().unwrap();
        let x = [0.3, 0.8];
        let r = pde_residual(&exact.bundle(&x, 0.4, true), (p.forcing)(&x, 0.4), p.nu, true).unwrap();
        assert!(r.abs() < 1e-10);
        assert!(ProblemSpec::by_name("heat", &Default::default()).is_err());
        let neg = ProblemOverrides {
            nu: Some(-1.0),
            ..Default::default()
        };
        assert!(ProblemSpec::by_name("stationary", &neg).is_err());
        let flat = ProblemOverrides {
            hi: Some(vec![0.0, 1.0]),
            ..Default::default()
        };
        assert!(ProblemSpec::by_name("stationary", &flat).is_err());
    }
}
