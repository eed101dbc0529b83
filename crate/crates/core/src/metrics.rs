//! Midpoint quadrature and error norms against closed-form solutions.

use ndarray::{Array2, ArrayView2};

use crate::net::{evaluate, BundleBatch, InputLayout, MlpParams};
use crate::pde::{burgers_residual, BoundaryKind, Domain, ExactSolution, ProblemSpec};
use crate::{Error, Result};

/// Tensor grid of cell midpoints over the spatial box, optionally at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    points: Array2<f64>,
    spatial_dim: usize,
    weight: f64,
    time: Option<f64>,
}

impl QuadratureGrid {
    pub fn midpoint(domain: &Domain, n_per_axis: usize, time: Option<f64>) -> Self {
        assert!(n_per_axis > 0, "grid needs at least one cell per axis");
        let d = domain.dim();
        let m = n_per_axis.pow(d as u32);
        let raw = d + usize::from(time.is_some());
        let widths = domain.widths();
        let mut points = Array2::zeros((m, raw));
        for (k, mut row) in points.outer_iter_mut().enumerate() {
            let mut rest = k;
            // first axis varies slowest
            for i in (0..d).rev() {
                let idx = rest % n_per_axis;
                rest /= n_per_axis;
                row[i] = domain.lo[i] + (idx as f64 + 0.5) * widths[i] / n_per_axis as f64;
            }
            if let Some(t) = time {
                row[d] = t;
            }
        }
        QuadratureGrid {
            points,
            spatial_dim: d,
            weight: domain.volume() / m as f64,
            time,
        }
    }

    /// Grid over the problem's domain; `time` must lie in `[0, T]` for
    /// time-dependent problems and is ignored otherwise.
    pub fn for_problem(problem: &ProblemSpec, n_per_axis: usize, time: Option<f64>) -> Result<Self> {
        let time = if problem.time_dependent {
            let t = time.ok_or_else(|| Error::input("time-dependent grid needs a time"))?;
            let end = problem.final_time.unwrap_or(0.0);
            if !(0.0..=end).contains(&t) {
                return Err(Error::input(format!("time {t} outside [0, {end}]")));
            }
            Some(t)
        } else {
            None
        };
        if n_per_axis == 0 {
            return Err(Error::input("grid needs at least one cell per axis"));
        }
        Ok(Self::midpoint(&problem.domain, n_per_axis, time))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn spatial(&self, k: usize) -> Vec<f64> {
        self.points.row(k).iter().take(self.spatial_dim).copied().collect()
    }

    fn t(&self) -> f64 {
        self.time.unwrap_or(0.0)
    }

    fn eval(&self, params: &MlpParams, layout: &InputLayout) -> Result<BundleBatch> {
        if layout.has_time() != self.time.is_some() {
            return Err(Error::input("grid time slice does not match the network layout"));
        }
        evaluate(params, layout, self.points.view())
    }
}

/// `‖u_θ - u‖_{L²(Ω)}` on the grid.
pub fn l2_error(
    params: &MlpParams,
    layout: &InputLayout,
    exact: &dyn ExactSolution,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let b = grid.eval(params, layout)?;
    let sum: f64 = (0..grid.len())
        .map(|k| {
            let e = b.value[k] - exact.value(&grid.spatial(k), grid.t());
            e * e
        })
        .sum();
    Ok((grid.weight * sum).sqrt())
}

/// `(|u_θ - u|_{H¹}, ‖u_θ - u‖_{H¹})` on the grid.
pub fn h1_error(
    params: &MlpParams,
    layout: &InputLayout,
    exact: &dyn ExactSolution,
    grid: &QuadratureGrid,
) -> Result<(f64, f64)> {
    let b = grid.eval(params, layout)?;
    let (mut l2, mut semi) = (0.0, 0.0);
    for k in 0..grid.len() {
        let x = grid.spatial(k);
        let e = b.value[k] - exact.value(&x, grid.t());
        l2 += e * e;
        semi += b
            .grad(k)
            .iter()
            .zip(exact.gradient(&x, grid.t()))
            .map(|(a, g)| (a - g) * (a - g))
            .sum::<f64>();
    }
    let w = grid.weight;
    Ok(((w * semi).sqrt(), (w * (l2 + semi)).sqrt()))
}

/// L² norm of the strong-form Burgers residual on the grid.
pub fn residual_norm(
    params: &MlpParams,
    layout: &InputLayout,
    problem: &ProblemSpec,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let b = grid.eval(params, layout)?;
    let sum: f64 = (0..grid.len())
        .map(|k| {
            let r = pointwise_residual(&b, k, problem, &grid.spatial(k), grid.t());
            r * r
        })
        .sum();
    Ok((grid.weight * sum).sqrt())
}

fn pointwise_residual(b: &BundleBatch, k: usize, problem: &ProblemSpec, x: &[f64], t: f64) -> f64 {
    let grad_sum: f64 = b.grad(k).iter().sum();
    let du_dt = b.du_dt(k).unwrap_or(0.0);
    burgers_residual(b.value[k], grad_sum, b.laplacian[k], du_dt, (problem.forcing)(x, t), problem.nu)
}

/// Errors on one grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRow {
    pub t: f64,
    pub l2_error: f64,
    pub h1_seminorm_error: f64,
    pub h1_error: f64,
    pub residual_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub l2_error: f64,
    pub h1_seminorm_error: f64,
    pub h1_error: f64,
    pub residual_l2: f64,
    /// One row per time slice (time-dependent problems only). The scalar fields
    /// then hold the maximum over the rows.
    pub rows: Vec<TimeRow>,
    /// Grid `H¹(Γ)`-type trace norm of the boundary mismatch, a computable
    /// upper surrogate for the `H^{1/2}(Γ)` norm.
    pub boundary_surrogate: Option<f64>,
}

impl ErrorReport {
    pub fn is_consistent(&self) -> bool {
        let check = |l2: f64, semi: f64, h1: f64| {
            let lhs = h1 * h1;
            let rhs = l2 * l2 + semi * semi;
            (lhs - rhs).abs() <= 1e-12 * rhs.max(f64::MIN_POSITIVE)
        };
        self.rows
            .iter()
            .all(|r| check(r.l2_error, r.h1_seminorm_error, r.h1_error))
            && (!self.rows.is_empty() || check(self.l2_error, self.h1_seminorm_error, self.h1_error))
    }
}

/// All norms on one grid from a single network evaluation.
pub fn grid_errors(
    params: &MlpParams,
    layout: &InputLayout,
    problem: &ProblemSpec,
    grid: &QuadratureGrid,
) -> Result<(TimeRow, FieldDump)> {
    let exact = problem.exact()?;
    let b = grid.eval(params, layout)?;
    let t = grid.t();
    let (mut l2, mut semi, mut res) = (0.0, 0.0, 0.0);
    let mut field = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let x = grid.spatial(k);
        let u = exact.value(&x, t);
        let e = b.value[k] - u;
        l2 += e * e;
        semi += b
            .grad(k)
            .iter()
            .zip(exact.gradient(&x, t))
            .map(|(a, g)| (a - g) * (a - g))
            .sum::<f64>();
        let r = pointwise_residual(&b, k, problem, &x, t);
        res += r * r;
        field.push(FieldRow {
            x,
            u_exact: u,
            u_pred: b.value[k],
            abs_error: e.abs(),
        });
    }
    let w = grid.weight;
    let row = TimeRow {
        t,
        l2_error: (w * l2).sqrt(),
        h1_seminorm_error: (w * semi).sqrt(),
        h1_error: (w * (l2 + semi)).sqrt(),
        residual_l2: (w * res).sqrt(),
    };
    Ok((
        row,
        FieldDump {
            t: grid.time,
            rows: field,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldRow {
    pub x: Vec<f64>,
    pub u_exact: f64,
    pub u_pred: f64,
    pub abs_error: f64,
}

/// Pointwise exact, predicted and absolute-error values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub t: Option<f64>,
    pub rows: Vec<FieldRow>,
}

/// Report for a stationary problem.
pub fn stationary_report(
    params: &MlpParams,
    layout: &InputLayout,
    problem: &ProblemSpec,
    n_per_axis: usize,
) -> Result<(ErrorReport, FieldDump)> {
    if problem.time_dependent {
        return Err(Error::input("use time_slice_report for time-dependent problems"));
    }
    let grid = QuadratureGrid::for_problem(problem, n_per_axis, None)?;
    let (row, field) = grid_errors(params, layout, problem, &grid)?;
    Ok((
        ErrorReport {
            l2_error: row.l2_error,
            h1_seminorm_error: row.h1_seminorm_error,
            h1_error: row.h1_error,
            residual_l2: row.residual_l2,
            rows: Vec::new(),
            boundary_surrogate: None,
        },
        field,
    ))
}

/// Errors at each requested time slice, plus the error fields.
pub fn time_slice_report(
    params: &MlpParams,
    layout: &InputLayout,
    problem: &ProblemSpec,
    times: &[f64],
    n_per_axis: usize,
) -> Result<(ErrorReport, Vec<FieldDump>)> {
    if !problem.time_dependent {
        return Err(Error::input("time slices need a time-dependent problem"));
    }
    let mut rows = Vec::with_capacity(times.len());
    let mut fields = Vec::with_capacity(times.len());
    for &t in times {
        let grid = QuadratureGrid::for_problem(problem, n_per_axis, Some(t))?;
        let (row, field) = grid_errors(params, layout, problem, &grid)?;
        rows.push(row);
        fields.push(field);
    }
    let max = |f: fn(&TimeRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    Ok((
        ErrorReport {
            l2_error: max(|r| r.l2_error),
            h1_seminorm_error: max(|r| r.h1_seminorm_error),
            h1_error: max(|r| r.h1_error),
            residual_l2: max(|r| r.residual_l2),
            rows,
            boundary_surrogate: None,
        },
        fields,
    ))
}

/// `(‖u_a - u_b‖_{L²}, |u_a - u_b|_{H¹})` between two networks on a grid.
pub fn network_distance(
    a: &MlpParams,
    b: &MlpParams,
    layout: &InputLayout,
    grid: &QuadratureGrid,
) -> Result<(f64, f64)> {
    let ba = grid.eval(a, layout)?;
    let bb = grid.eval(b, layout)?;
    let (mut l2, mut semi) = (0.0, 0.0);
    for k in 0..grid.len() {
        let e = ba.value[k] - bb.value[k];
        l2 += e * e;
        semi += ba
            .grad(k)
            .iter()
            .zip(bb.grad(k))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>();
    }
    Ok(((grid.weight * l2).sqrt(), (grid.weight * semi).sqrt()))
}

/// Boundary-mismatch norm `(∫_Γ e² + |∇_τ e|²)^{1/2}` on face midpoint grids,
/// where `e` is the Dirichlet mismatch or, for periodic problems, the jump
/// between opposite faces. Used only as a reported surrogate.
pub fn boundary_trace_surrogate(
    params: &MlpParams,
    layout: &InputLayout,
    problem: &ProblemSpec,
    n_per_face: usize,
    time: Option<f64>,
) -> Result<f64> {
    let d = problem.spatial_dim;
    let mut total = 0.0;
    for axis in 0..d {
        let face = Domain {
            lo: (0..d).filter(|&j| j != axis).map(|j| problem.domain.lo[j]).collect(),
            hi: (0..d).filter(|&j| j != axis).map(|j| problem.domain.hi[j]).collect(),
        };
        let face_grid = QuadratureGrid::midpoint(&face, n_per_face, None);
        let lift = |value: f64| -> Array2<f64> {
            let mut pts = Array2::zeros((face_grid.len(), layout.raw_dim()));
            for (k, mut row) in pts.outer_iter_mut().enumerate() {
                let tangential = face_grid.spatial(k);
                let mut it = tangential.iter();
                for j in 0..d {
                    row[j] = if j == axis { value } else { *it.next().unwrap() };
                }
                if let Some(t) = time {
                    row[d] = t;
                }
            }
            pts
        };
        let lo_pts = lift(problem.domain.lo[axis]);
        let hi_pts = lift(problem.domain.hi[axis]);
        let lo = evaluate(params, layout, lo_pts.view())?;
        let hi = evaluate(params, layout, hi_pts.view())?;
        let t = time.unwrap_or(0.0);
        let w = face_grid.weight();
        let trace = |b: &BundleBatch, pts: &Array2<f64>, k: usize| -> Result<(f64, Vec<f64>)> {
            let x: Vec<f64> = pts.row(k).iter().take(d).copied().collect();
            let (g, dg) = match problem.bc {
                BoundaryKind::DirichletExact => {
                    let ex = problem.exact()?;
                    (ex.value(&x, t), ex.gradient(&x, t))
                }
                _ => (0.0, vec![0.0; d]),
            };
            let de = b.grad(k).iter().zip(&dg).map(|(a, c)| a - c).collect();
            Ok((b.value[k] - g, de))
        };
        for k in 0..face_grid.len() {
            let faces: Vec<(f64, Vec<f64>)> = if problem.bc == BoundaryKind::Periodic {
                let (a, ga) = trace(&lo, &lo_pts, k)?;
                let (b, gb) = trace(&hi, &hi_pts, k)?;
                vec![(a - b, ga.iter().zip(&gb).map(|(x, y)| x - y).collect())]
            } else {
                vec![trace(&lo, &lo_pts, k)?, trace(&hi, &hi_pts, k)?]
            };
            for (e, de) in faces {
                let tangential: f64 = (0..d).filter(|&j| j != axis).map(|j| de[j] * de[j]).sum();
                total += w * (e * e + tangential);
            }
        }
    }
    Ok(total.sqrt())
}
