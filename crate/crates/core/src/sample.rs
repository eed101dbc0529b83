//! Collocation sets and residual-based adaptive refinement (RAR).

use ndarray::{Array2, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::{evaluate, InputLayout, MlpParams};
use crate::pde::{burgers_residual, BoundaryKind, ProblemSpec};
use crate::{derive_seed, Error, Result};

/// Interior, boundary and initial collocation points.
///
/// Rows are raw points `(x_1, ..., x_d[, t])`. For periodic problems the boundary
/// rows come in consecutive pairs `(low face, opposite high face)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub interior: Array2<f64>,
    pub boundary: Array2<f64>,
    pub initial: Array2<f64>,
}

impl CollocationSet {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.interior.nrows(), self.boundary.nrows(), self.initial.nrows())
    }

    /// Appends interior rows.
    pub fn extend_interior(&mut self, rows: ArrayView2<f64>) -> Result<()> {
        self.interior
            .append(Axis(0), rows)
            .map_err(|e| Error::input(e.to_string()))
    }
}

fn raw_dim(problem: &ProblemSpec) -> usize {
    problem.spatial_dim + usize::from(problem.time_dependent)
}

fn open_uniform(lo: f64, hi: f64) -> impl Fn(&mut ChaCha8Rng) -> f64 {
    let dist = Uniform::new(lo, hi);
    move |rng| loop {
        let v = dist.sample(rng);
        if v > lo {
            return v;
        }
    }
}

/// Uniform i.i.d. points strictly inside the box (and uniform in `[0, T]`).
pub fn sample_interior<R: Rng>(problem: &ProblemSpec, n: usize, rng: &mut R) -> Array2<f64> {
    let d = problem.spatial_dim;
    let axes: Vec<Uniform<f64>> = (0..d)
        .map(|i| Uniform::new(problem.domain.lo[i], problem.domain.hi[i]))
        .collect();
    let time = problem
        .final_time
        .filter(|_| problem.time_dependent)
        .map(|t| Uniform::new_inclusive(0.0, t));
    let mut out = Array2::zeros((n, raw_dim(problem)));
    for mut row in out.outer_iter_mut() {
        for i in 0..d {
            // reject the closed lower face so points stay strictly inside
            row[i] = loop {
                let v = axes[i].sample(rng);
                if v > problem.domain.lo[i] {
                    break v;
                }
            };
        }
        if let Some(t) = &time {
            row[d] = t.sample(rng);
        }
    }
    out
}

/// Seeded collocation set.
pub fn sample_set(
    problem: &ProblemSpec,
    n_interior: usize,
    n_boundary: usize,
    n_initial: usize,
    seed: u64,
) -> Result<CollocationSet> {
    if n_interior == 0 {
        return Err(Error::input("at least one interior point is required"));
    }
    if problem.time_dependent == (n_initial == 0) {
        return Err(Error::input(
            "initial points are required exactly when the problem is time-dependent",
        ));
    }
    let d = problem.spatial_dim;
    let raw = raw_dim(problem);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interior = sample_interior(problem, n_interior, &mut rng);

    // faces normal to axis i have area Π_{j≠i} width_j
    let widths = problem.domain.widths();
    let areas: Vec<f64> = (0..d)
        .map(|i| (0..d).filter(|&j| j != i).map(|j| widths[j]).product())
        .collect();
    let axis_dist = WeightedIndex::new(&areas).map_err(|e| Error::input(e.to_string()))?;
    let coord = |rng: &mut ChaCha8Rng, j: usize| {
        open_uniform(problem.domain.lo[j], problem.domain.hi[j])(rng)
    };
    let time = |rng: &mut ChaCha8Rng| match problem.final_time.filter(|_| problem.time_dependent) {
        Some(t) => open_uniform(0.0, t)(rng),
        None => 0.0,
    };

    let periodic = problem.bc == BoundaryKind::Periodic;
    let n_b = if periodic { n_boundary / 2 * 2 } else { n_boundary };
    let mut boundary = Array2::zeros((n_b, raw));
    let mut k = 0;
    while k < n_b {
        let axis = axis_dist.sample(&mut rng);
        let mut p = vec![0.0; raw];
        for (j, v) in p.iter_mut().enumerate().take(d) {
            if j != axis {
                *v = coord(&mut rng, j);
            }
        }
        if problem.time_dependent {
            p[d] = time(&mut rng);
        }
        if periodic {
            p[axis] = problem.domain.lo[axis];
            boundary.row_mut(k).assign(&ndarray::aview1(&p));
            p[axis] = problem.domain.hi[axis];
            boundary.row_mut(k + 1).assign(&ndarray::aview1(&p));
            k += 2;
        } else {
            p[axis] = if rng.gen_bool(0.5) {
                problem.domain.lo[axis]
            } else {
                problem.domain.hi[axis]
            };
            boundary.row_mut(k).assign(&ndarray::aview1(&p));
            k += 1;
        }
    }

    let mut initial = Array2::zeros((n_initial, raw));
    for mut row in initial.outer_iter_mut() {
        for j in 0..d {
            row[j] = coord(&mut rng, j);
        }
    }

    Ok(CollocationSet {
        interior,
        boundary,
        initial,
    })
}

/// Pointwise Burgers residuals of the network at `pool`.
pub fn residuals(
    params: &MlpParams,
    layout: &InputLayout,
    problem: &ProblemSpec,
    pool: ArrayView2<f64>,
) -> Result<Vec<f64>> {
    let b = evaluate(params, layout, pool)?;
    Ok(pool
        .outer_iter()
        .enumerate()
        .map(|(i, row)| {
            let row = row.to_vec();
            let (x, t) = problem.split(&row);
            let du_dt = b.du_dt(i).unwrap_or(0.0);
            let grad_sum: f64 = b.grad(i).iter().sum();
            burgers_residual(b.value[i], grad_sum, b.laplacian[i], du_dt, (problem.forcing)(x, t), problem.nu)
        })
        .collect())
}

/// Mean absolute residual over `pool`.
pub fn mean_residual(
    params: &MlpParams,
    layout: &InputLayout,
    problem: &ProblemSpec,
    pool: ArrayView2<f64>,
) -> Result<f64> {
    if pool.nrows() == 0 {
        return Err(Error::input("residual pool is empty"));
    }
    let r = residuals(params, layout, problem, pool)?;
    Ok(r.iter().map(|v| v.abs()).sum::<f64>() / r.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RarConfig {
    pub pool_size: usize,
    pub mean_residual_threshold: f64,
    pub add_per_round: usize,
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for RarConfig {
    fn default() -> Self {
        RarConfig {
            pool_size: 100_000,
            mean_residual_threshold: 5e-3,
            add_per_round: 100,
            max_rounds: 20,
            seed: 0,
        }
    }
}

impl RarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.add_per_round == 0 || self.pool_size < self.add_per_round {
            return Err(Error::input(format!(
                "need pool_size ({}) >= add_per_round ({}) >= 1",
                self.pool_size, self.add_per_round
            )));
        }
        if !(self.mean_residual_threshold > 0.0) {
            return Err(Error::input("mean residual threshold must be positive"));
        }
        Ok(())
    }
}

/// One evaluated RAR pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RarRound {
    pub round: usize,
    pub interior_size: usize,
    pub mean_residual: f64,
}

#[derive(Debug, Clone)]
pub struct RarOutcome {
    pub params: MlpParams,
    pub points: CollocationSet,
    /// Number of refine-and-retrain rounds performed.
    pub rounds_used: usize,
    pub final_mean_residual: f64,
    pub converged: bool,
    pub trace: Vec<RarRound>,
}

/// Adds the worst-resolved points of a fresh pool and retrains until the mean
/// absolute residual drops below the threshold or `max_rounds` is exhausted.
pub fn rar_refine<T>(
    mut trainer: T,
    params: MlpParams,
    layout: &InputLayout,
    problem: &ProblemSpec,
    points: CollocationSet,
    cfg: &RarConfig,
) -> Result<RarOutcome>
where
    T: FnMut(&MlpParams, &CollocationSet, usize) -> Result<MlpParams>,
{
    cfg.validate()?;
    let mut params = params;
    let mut points = points;
    let mut trace = Vec::new();
    let mut round = 0;
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, round as u64));
        let pool = sample_interior(problem, cfg.pool_size, &mut rng);
        let r = residuals(&params, layout, problem, pool.view())?;
        let mean = r.iter().map(|v| v.abs()).sum::<f64>() / r.len() as f64;
        if !mean.is_finite() {
            return Err(Error::numerical(None, "mean residual is not finite"));
        }
        trace.push(RarRound {
            round,
            interior_size: points.interior.nrows(),
            mean_residual: mean,
        });
        let converged = mean < cfg.mean_residual_threshold;
        if converged || round == cfg.max_rounds {
            return Ok(RarOutcome {
                params,
                points,
                rounds_used: round,
                final_mean_residual: mean,
                converged,
                trace,
            });
        }
        let worst = largest_indices(&r, cfg.add_per_round);
        points.extend_interior(pool.select(Axis(0), &worst).view())?;
        round += 1;
        params = trainer(&params, &points, round)?;
    }
}

/// Indices of the `k` entries with largest magnitude, in ascending index order.
pub fn largest_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let k = k.min(values.len());
    if k == 0 {
        return Vec::new();
    }
    idx.select_nth_unstable_by(k - 1, |&a, &b| {
        values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b))
    });
    let mut top = idx[..k].to_vec();
    top.sort_unstable();
    top
}
