//! Error-versus-loss and stability studies.

use std::f64::consts::PI;
use std::ops::ControlFlow;
use std::sync::Arc;

use burgers_pinn::metrics::network_distance;
use burgers_pinn::optim::{train_observed, Phase};
use burgers_pinn::pde::LossAssembly;
use burgers_pinn::{MlpParams, ProblemSpec, QuadratureGrid};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{num, Table};
use crate::run::{self, Log};

/// Network state the first time the training loss reached a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub checkpoint: f64,
    /// `None` when training never reached the checkpoint.
    pub reached: Option<Snapshot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub phase: Phase,
    pub iteration: usize,
    pub total_loss: f64,
    pub l2_error: f64,
    pub h1_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundStudy {
    /// Sorted by decreasing checkpoint, so by decreasing loss.
    pub rows: Vec<BoundRow>,
    /// Least-squares slope of `ln h1_error` against `ln √loss` over reached rows.
    pub slope: Option<f64>,
    /// Rank correlation of `√loss` and `h1_error` over reached rows.
    pub spearman: Option<f64>,
}

impl BoundStudy {
    pub fn reached(&self) -> impl Iterator<Item = &Snapshot> {
        self.rows.iter().filter_map(|r| r.reached.as_ref())
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "checkpoint",
            "reached",
            "phase",
            "iteration",
            "total_loss",
            "l2_error",
            "h1_error",
        ]);
        for r in &self.rows {
            match &r.reached {
                Some(s) => t.row([
                    num(r.checkpoint),
                    "true".into(),
                    s.phase.name().into(),
                    s.iteration.to_string(),
                    num(s.total_loss),
                    num(s.l2_error),
                    num(s.h1_error),
                ]),
                None => t.row([num(r.checkpoint), "false".into(), String::new(), String::new(), String::new(), String::new(), String::new()]),
            }
        }
        t
    }
}

/// Trains once with the configured schedule and snapshots the network the first
/// time the total loss is at or below each checkpoint.
pub fn bound_study(cfg: &RunConfig, checkpoints: &[f64], log: Log<'_>) -> CliResult<BoundStudy> {
    cfg.validate()?;
    if checkpoints.len() < 3 && checkpoints.len() != 1 {
        return Err(CliError::Config("bound study needs at least 3 checkpoints".into()));
    }
    if checkpoints.windows(2).any(|w| !(w[1] < w[0])) || checkpoints.iter().any(|c| !c.is_finite()) {
        return Err(CliError::Config("bound study checkpoints must be finite and strictly decreasing".into()));
    }
    let problem = cfg.problem_spec()?;
    let layout = cfg.layout(&problem)?;
    let points = run::collocation(cfg, &problem)?;
    let init = run::initial_network(cfg, &layout)?;
    let assembly = LossAssembly::new(&problem, &layout, &points)?
        .with_weights(cfg.loss_weights())?;

    let mut snapshots: Vec<(Phase, usize, f64, Vec<f64>)> = Vec::new();
    train_observed(&init, &assembly, &cfg.schedule(), |p| {
        while snapshots.len() < checkpoints.len() && p.loss.total <= checkpoints[snapshots.len()] {
            log(&format!(
                "checkpoint {:.1e} reached at {} {} (loss {:.4e})",
                checkpoints[snapshots.len()],
                p.phase.name(),
                p.iteration,
                p.loss.total
            ));
            snapshots.push((p.phase, p.iteration, p.loss.total, p.params.to_vec()));
        }
        if snapshots.len() == checkpoints.len() {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;

    let mut rows = Vec::with_capacity(checkpoints.len());
    for (k, &checkpoint) in checkpoints.iter().enumerate() {
        let reached = match snapshots.get(k) {
            Some((phase, iteration, total_loss, flat)) => {
                let params = init.with_flat(flat)?;
                let (report, _) = run::evaluate(cfg, &problem, &layout, &params)?;
                Some(Snapshot {
                    phase: *phase,
                    iteration: *iteration,
                    total_loss: *total_loss,
                    l2_error: report.l2_error,
                    h1_error: report.h1_error,
                })
            }
            None => {
                log(&format!("checkpoint {checkpoint:.1e} not reached"));
                None
            }
        };
        rows.push(BoundRow { checkpoint, reached });
    }
    let xs: Vec<f64> = rows.iter().filter_map(|r| r.reached.as_ref()).map(|s| s.total_loss.sqrt()).collect();
    let ys: Vec<f64> = rows.iter().filter_map(|r| r.reached.as_ref()).map(|s| s.h1_error).collect();
    let slope = log_log_slope(&xs, &ys);
    let spearman = spearman(&xs, &ys);
    Ok(BoundStudy { rows, slope, spearman })
}

/// Least-squares slope of `ln y` against `ln x`. Needs two distinct positive abscissae.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation: Pearson correlation of the ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub delta: f64,
    /// Largest L² distance between the two networks over the time slices.
    pub sup_l2_distance: f64,
    /// `(∫ |u₁ - u₂|²_{H¹} dt)^{1/2}` by the trapezoid rule over the slices
    /// (the seminorm itself for stationary problems).
    pub integrated_h1_distance: f64,
    /// Squared distance over the data term `ε² + δ²‖φ‖²`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityStudy {
    /// Sorted by increasing δ.
    pub rows: Vec<StabilityRow>,
    /// Smallest `C` with `sup_l2 ≤ C δ` on every row with `δ > 0`.
    pub fitted_c: f64,
    /// Smallest `C` with `sup_l2² ≤ C (ε² + δ²‖φ‖²)` on every row.
    pub data_c: f64,
    /// Final training loss of the unperturbed run.
    pub base_loss: f64,
}

impl StabilityStudy {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["delta", "sup_l2_distance", "integrated_h1_distance", "ratio"]);
        for r in &self.rows {
            t.row([num(r.delta), num(r.sup_l2_distance), num(r.integrated_h1_distance), num(r.ratio)]);
        }
        t
    }
}

/// Which data the perturbation `δ·φ` is added to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Perturbation {
    /// `φ = sin(2πx₁)` added to the forcing.
    pub forcing: bool,
    /// `φ = sin(2πx₁) sin(2πx₂)` added to the initial condition.
    pub initial: bool,
}

fn perturbed(problem: &ProblemSpec, delta: f64, kind: Perturbation) -> CliResult<ProblemSpec> {
    let mut p = problem.clone();
    if kind.forcing {
        p = p.with_forcing_offset(Arc::new(move |x: &[f64], _t: f64| delta * (2.0 * PI * x[0]).sin()))?;
    }
    if kind.initial {
        p = p.with_initial_offset(Arc::new(move |x: &[f64], _t: f64| {
            delta * x.iter().map(|xi| (2.0 * PI * xi).sin()).product::<f64>()
        }))?;
    }
    Ok(p)
}

/// Squared norm of the perturbation data for unit δ: the forcing part in
/// `L²(0,T; L²(Ω))`, the initial part in `L²(Ω)`.
fn perturbation_norm_sq(problem: &ProblemSpec, kind: Perturbation) -> f64 {
    let volume = problem.domain.volume();
    let mut total = 0.0;
    if kind.forcing {
        // sin² averages to 1/2 over whole periods of a unit box
        total += volume / 2.0 * problem.final_time.unwrap_or(1.0);
    }
    if kind.initial {
        total += volume / 2f64.powi(problem.spatial_dim as i32);
    }
    total
}

/// L² and H¹-seminorm distances between two networks at the slice times.
fn slice_distances(
    a: &MlpParams,
    b: &MlpParams,
    cfg: &RunConfig,
    problem: &ProblemSpec,
    layout: &burgers_pinn::InputLayout,
) -> CliResult<(f64, f64)> {
    if !problem.time_dependent {
        let grid = QuadratureGrid::for_problem(problem, cfg.eval.grid, None)?;
        return Ok(network_distance(a, b, layout, &grid)?);
    }
    let t_end = problem.final_time.unwrap_or(1.0);
    let n = cfg.stability_study.slices.max(1);
    let mut sup: f64 = 0.0;
    let mut integral = 0.0;
    for k in 0..=n {
        let t = t_end * k as f64 / n as f64;
        let grid = QuadratureGrid::for_problem(problem, cfg.eval.grid, Some(t))?;
        let (l2, semi) = network_distance(a, b, layout, &grid)?;
        sup = sup.max(l2);
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        integral += w * semi * semi * t_end / n as f64;
    }
    Ok((sup, integral.sqrt()))
}

/// Trains the base problem and one perturbed copy per δ with identical seeds and
/// schedules, and compares the resulting networks.
pub fn stability_study(
    cfg: &RunConfig,
    deltas: &[f64],
    kind: Perturbation,
    log: Log<'_>,
) -> CliResult<StabilityStudy> {
    cfg.validate()?;
    if deltas.is_empty() || deltas.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(CliError::Config("stability deltas must be finite and non-negative".into()));
    }
    if !kind.forcing && !kind.initial {
        return Err(CliError::Config("choose a forcing and/or initial perturbation".into()));
    }
    let problem = cfg.problem_spec()?;
    if kind.initial && !problem.time_dependent {
        return Err(CliError::Config("initial perturbations need a time-dependent problem".into()));
    }
    let mut deltas = deltas.to_vec();
    deltas.sort_by(f64::total_cmp);

    log("[stability] base run");
    let base = run::train(cfg, &problem, log)?;
    let norm_sq = perturbation_norm_sq(&problem, kind);
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in &deltas {
        log(&format!("[stability] delta={delta:e}"));
        // a zero perturbation is the unperturbed problem, retrained from scratch
        let target = if delta == 0.0 { problem.clone() } else { perturbed(&problem, delta, kind)? };
        let other = run::train(cfg, &target, log)?;
        let (sup_l2, integrated_h1) = slice_distances(&base.params, &other.params, cfg, &problem, &base.layout)?;
        let eps_sq = base.final_loss.total.max(other.final_loss.total);
        rows.push(StabilityRow {
            delta,
            sup_l2_distance: sup_l2,
            integrated_h1_distance: integrated_h1,
            ratio: sup_l2 * sup_l2 / (eps_sq + delta * delta * norm_sq),
        });
    }
    let fitted_c = rows
        .iter()
        .filter(|r| r.delta > 0.0)
        .map(|r| r.sup_l2_distance / r.delta)
        .fold(0.0, f64::max);
    let data_c = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(StabilityStudy {
        rows,
        fitted_c,
        data_c,
        base_loss: base.final_loss.total,
    })
}

/// Runs the bound study and writes `bound_study.csv`.
pub fn run_bound_study(cfg: &RunConfig, log: Log<'_>) -> CliResult<BoundStudy> {
    let study = bound_study(cfg, &cfg.bound_study.checkpoints, log)?;
    let dir = run::prepare_run_dir(cfg)?;
    study.table().write(&dir.join("bound_study.csv"))?;
    Ok(study)
}

/// Runs the stability study and writes `stability_study.csv`.
pub fn run_stability_study(cfg: &RunConfig, log: Log<'_>) -> CliResult<StabilityStudy> {
    let s = &cfg.stability_study;
    let kind = Perturbation {
        forcing: s.perturb_forcing,
        initial: s.perturb_initial,
    };
    let study = stability_study(cfg, &s.deltas, kind, log)?;
    let dir = run::prepare_run_dir(cfg)?;
    study.table().write(&dir.join("stability_study.csv"))?;
    Ok(study)
}

pub fn bound_summary(study: &BoundStudy) -> String {
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    format!(
        "reached {}/{} checkpoints, log-log slope of h1_error vs sqrt(loss) = {}, spearman = {}",
        study.reached().count(),
        study.rows.len(),
        fmt(study.slope),
        fmt(study.spearman)
    )
}

pub fn stability_summary(study: &StabilityStudy) -> String {
    format!(
        "fitted C (sup_l2 <= C delta) = {:.4e}, C against eps^2 + delta^2 |phi|^2 = {:.4e}, base loss = {:.4e}",
        study.fitted_c, study.data_c, study.base_loss
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let xs = [1e-1, 1e-2, 1e-3, 1e-4];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.7)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(log_log_slope(&[1.0], &[1.0]), None);
        assert_eq!(log_log_slope(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn spearman_matches_hand_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        // ranks (1,2,3,4) vs (1,3,2,4): 1 - 6·2/(4·15) = 0.8
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn perturbation_norms() {
        let p = burgers_pinn::pde::nonstationary_benchmark();
        let both = Perturbation { forcing: true, initial: true };
        assert!((perturbation_norm_sq(&p, both) - 0.75).abs() < 1e-15);
    }
}
