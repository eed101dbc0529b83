//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The search direction comes from the two-loop recursion over the stored
//! curvature pairs; the line search brackets a step satisfying the strong Wolfe
//! conditions and refines it with safeguarded cubic interpolation.

use std::collections::VecDeque;
use std::ops::ControlFlow;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsConfig {
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Objective evaluations allowed per line search.
    pub max_evals: usize,
    /// Stop once the gradient's Euclidean norm falls below this.
    pub grad_tol: f64,
    /// Bracket width (scaled by `max |d|`) below which the zoom gives up.
    pub tolerance_change: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 100,
            c1: 1e-4,
            c2: 0.9,
            max_evals: 25,
            grad_tol: 1e-9,
            tolerance_change: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    rho: f64,
}

impl CurvaturePair {
    pub fn curvature(&self) -> f64 {
        1.0 / self.rho
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LbfgsState {
    pub config: LbfgsConfig,
    pub pairs: VecDeque<CurvaturePair>,
}

impl LbfgsState {
    pub fn new(config: LbfgsConfig) -> Self {
        LbfgsState {
            config,
            pairs: VecDeque::new(),
        }
    }

    /// Stores `(s, y)` when `sᵀy` is safely positive; returns whether it was kept.
    pub fn push_pair(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let ys = dot(&s, &y);
        if !(ys > 1e-10) {
            return false;
        }
        if self.pairs.len() == self.config.memory {
            self.pairs.pop_front();
        }
        if self.config.memory > 0 {
            self.pairs.push_back(CurvaturePair { s, y, rho: 1.0 / ys });
        }
        true
    }

    /// `-H g` from the two-loop recursion; plain `-g` with an empty memory.
    pub fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for p in self.pairs.iter().rev() {
            let a = p.rho * dot(&p.s, &q);
            axpy(-a, &p.y, &mut q);
            alphas.push(a);
        }
        if let Some(last) = self.pairs.back() {
            let gamma = last.curvature() / dot(&last.y, &last.y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for (p, a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = p.rho * dot(&p.y, &q);
            axpy(a - b, &p.s, &mut q);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

/// Objective value and gradient, plus caller data carried along with it.
#[derive(Debug, Clone)]
pub struct Evaluation<A> {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub aux: A,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
    Stopped,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::GradientTolerance => "gradient_tolerance",
            Termination::MaxIterations => "max_iterations",
            Termination::LineSearchFailed => "line_search_failed",
            Termination::Stopped => "stopped",
        }
    }
}

/// One accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: f64,
    pub loss_before: f64,
    /// Directional derivative `gᵀd` at the start of the step.
    pub slope: f64,
    pub loss_after: f64,
    pub evals: usize,
    pub strong_wolfe: bool,
}

/// Passed to the observer at the start and after every accepted step.
pub struct IterationInfo<'a, A> {
    pub iteration: usize,
    pub x: &'a [f64],
    pub loss: f64,
    pub aux: &'a A,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome<A> {
    pub x: Vec<f64>,
    pub loss: f64,
    pub aux: A,
    pub grad_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub steps: Vec<StepRecord>,
}

struct Trial<A> {
    t: f64,
    f: f64,
    gtd: f64,
    x: Vec<f64>,
    eval: Option<Evaluation<A>>,
}

struct LineSearch<A> {
    accepted: Option<Trial<A>>,
    evals: usize,
    strong_wolfe: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimiser of the cubic through two points with slopes, clamped to `bounds`.
fn cubic_interpolate(
    (x1, f1, g1): (f64, f64, f64),
    (x2, f2, g2): (f64, f64, f64),
    bounds: Option<(f64, f64)>,
) -> f64 {
    let (lo, hi) = bounds.unwrap_or((x1.min(x2), x1.max(x2)));
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_sq = d1 * d1 - g1 * g2;
    let mid = 0.5 * (lo + hi);
    if !(d2_sq >= 0.0) {
        return mid;
    }
    let d2 = d2_sq.sqrt();
    let pos = if x1 <= x2 {
        x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
    } else {
        x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
    };
    if pos.is_finite() {
        pos.clamp(lo, hi)
    } else {
        mid
    }
}

fn try_eval<A, F>(objective: &mut F, x: &[f64], t: f64, d: &[f64]) -> Result<Trial<A>>
where
    F: FnMut(&[f64]) -> Result<Evaluation<A>>,
{
    let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + t * di).collect();
    match objective(&xt) {
        Ok(e) if e.loss.is_finite() && e.grad.iter().all(|g| g.is_finite()) => Ok(Trial {
            t,
            f: e.loss,
            gtd: dot(&e.grad, d),
            x: xt,
            eval: Some(e),
        }),
        // overshooting into an overflow region is treated as a failed trial
        Ok(_) | Err(Error::NumericalFailure { .. }) => Ok(Trial {
            t,
            f: f64::INFINITY,
            gtd: f64::NAN,
            x: xt,
            eval: None,
        }),
        Err(e) => Err(e),
    }
}

fn strong_wolfe<A: Clone, F>(
    objective: &mut F,
    x: &[f64],
    f0: f64,
    gtd0: f64,
    d: &[f64],
    t_init: f64,
    cfg: &LbfgsConfig,
) -> Result<LineSearch<A>>
where
    F: FnMut(&[f64]) -> Result<Evaluation<A>>,
{
    let (c1, c2) = (cfg.c1, cfg.c2);
    let d_norm = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let armijo = |t: f64, f: f64| f <= f0 + c1 * t * gtd0;
    let origin = || Trial::<A> {
        t: 0.0,
        f: f0,
        gtd: gtd0,
        x: x.to_vec(),
        eval: None,
    };

    let mut evals = 1;
    let mut cur = try_eval(objective, x, t_init, d)?;
    let mut prev = origin();
    let mut done = false;
    let mut bracket: Vec<Trial<A>>;

    loop {
        if !armijo(cur.t, cur.f) || (evals > 2 && cur.f >= prev.f) {
            bracket = vec![prev, cur];
            break;
        }
        if cur.gtd.abs() <= -c2 * gtd0 {
            bracket = vec![cur];
            done = true;
            break;
        }
        if cur.gtd >= 0.0 {
            bracket = vec![prev, cur];
            break;
        }
        if evals >= cfg.max_evals {
            bracket = vec![origin(), cur];
            break;
        }
        let min_step = cur.t + 0.01 * (cur.t - prev.t);
        let max_step = cur.t * 10.0;
        let t = cubic_interpolate(
            (prev.t, prev.f, prev.gtd),
            (cur.t, cur.f, cur.gtd),
            Some((min_step, max_step)),
        );
        let next = try_eval(objective, x, t, d)?;
        evals += 1;
        prev = std::mem::replace(&mut cur, next);
    }

    let order = |b: &[Trial<A>]| if b[0].f <= b[b.len() - 1].f { (0, 1) } else { (1, 0) };
    let (mut low, mut high) = if bracket.len() == 2 { order(&bracket) } else { (0, 0) };
    let mut insufficient = false;
    while !done && evals < cfg.max_evals {
        let (b0, b1) = (&bracket[0], &bracket[1]);
        if (b1.t - b0.t).abs() * d_norm < cfg.tolerance_change {
            break;
        }
        let mut t = cubic_interpolate((b0.t, b0.f, b0.gtd), (b1.t, b1.f, b1.gtd), None);
        let (bmin, bmax) = (b0.t.min(b1.t), b0.t.max(b1.t));
        let eps = 0.1 * (bmax - bmin);
        if (bmax - t).min(t - bmin) < eps {
            if insufficient || t >= bmax || t <= bmin {
                t = if (t - bmax).abs() < (t - bmin).abs() {
                    bmax - eps
                } else {
                    bmin + eps
                };
                insufficient = false;
            } else {
                insufficient = true;
            }
        } else {
            insufficient = false;
        }
        let trial = try_eval(objective, x, t, d)?;
        evals += 1;
        if !armijo(trial.t, trial.f) || trial.f >= bracket[low].f {
            bracket[high] = trial;
            (low, high) = order(&bracket);
        } else {
            if trial.gtd.abs() <= -c2 * gtd0 {
                done = true;
            } else if trial.gtd * (bracket[high].t - bracket[low].t) >= 0.0 {
                bracket.swap(high, low);
            }
            bracket[low] = trial;
        }
    }

    let best = bracket.swap_remove(low);
    let accepted = (best.t > 0.0 && best.eval.is_some() && armijo(best.t, best.f)).then_some(best);
    Ok(LineSearch {
        accepted,
        evals,
        strong_wolfe: done,
    })
}

/// Minimises `objective` starting from `x0`.
///
/// The observer sees the starting point (iteration 0) and every accepted
/// iterate; returning `Break` stops the run.
pub fn lbfgs_minimize<A, F, O>(
    mut objective: F,
    x0: Vec<f64>,
    state: &mut LbfgsState,
    max_iters: usize,
    mut observer: O,
) -> Result<LbfgsOutcome<A>>
where
    A: Clone,
    F: FnMut(&[f64]) -> Result<Evaluation<A>>,
    O: FnMut(&IterationInfo<'_, A>) -> ControlFlow<()>,
{
    let first = objective(&x0)?;
    if !first.loss.is_finite() || first.grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::numerical(None, "objective is not finite at the starting point"));
    }
    let mut x = x0;
    let Evaluation {
        loss: mut f,
        grad: mut g,
        mut aux,
    } = first;
    let mut steps = Vec::new();
    let finish = |x, f, aux, g: &[f64], iterations, termination, steps| LbfgsOutcome {
        x,
        loss: f,
        aux,
        grad_norm: norm(g),
        iterations,
        termination,
        steps,
    };

    if observer(&IterationInfo {
        iteration: 0,
        x: &x,
        loss: f,
        aux: &aux,
    })
    .is_break()
    {
        return Ok(finish(x, f, aux, &g, 0, Termination::Stopped, steps));
    }

    for iter in 0..max_iters {
        if norm(&g) <= state.config.grad_tol {
            return Ok(finish(x, f, aux, &g, iter, Termination::GradientTolerance, steps));
        }
        let mut restarted = false;
        let search = loop {
            let mut d = state.direction(&g);
            let mut gtd = dot(&g, &d);
            if !(gtd < 0.0) {
                state.pairs.clear();
                d = state.direction(&g);
                gtd = dot(&g, &d);
            }
            let t_init = if state.pairs.is_empty() {
                (1.0 / g.iter().map(|v| v.abs()).sum::<f64>()).min(1.0)
            } else {
                1.0
            };
            let ls = strong_wolfe(&mut objective, &x, f, gtd, &d, t_init, &state.config)?;
            match ls.accepted {
                Some(trial) => break Some((trial, gtd, ls.evals, ls.strong_wolfe)),
                None if !restarted && !state.pairs.is_empty() => {
                    state.pairs.clear();
                    restarted = true;
                }
                None => break None,
            }
        };
        let Some((trial, gtd, evals, wolfe)) = search else {
            return Ok(finish(x, f, aux, &g, iter, Termination::LineSearchFailed, steps));
        };
        let eval = trial.eval.expect("accepted trial carries its evaluation");
        let s: Vec<f64> = trial.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = eval.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        state.push_pair(s, y);
        steps.push(StepRecord {
            step: trial.t,
            loss_before: f,
            slope: gtd,
            loss_after: eval.loss,
            evals,
            strong_wolfe: wolfe,
        });
        x = trial.x;
        f = eval.loss;
        g = eval.grad;
        aux = eval.aux;
        if observer(&IterationInfo {
            iteration: iter + 1,
            x: &x,
            loss: f,
            aux: &aux,
        })
        .is_break()
        {
            return Ok(finish(x, f, aux, &g, iter + 1, Termination::Stopped, steps));
        }
    }
    let termination = if norm(&g) <= state.config.grad_tol {
        Termination::GradientTolerance
    } else {
        Termination::MaxIterations
    };
    Ok(finish(x, f, aux, &g, max_iters, termination, steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quadratic(x: &[f64]) -> Result<Evaluation<()>> {
        Ok(Evaluation {
            loss: x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum(),
            grad: x.iter().enumerate().map(|(i, v)| 2.0 * (i + 1) as f64 * v).collect(),
            aux: (),
        })
    }

    #[test]
    fn empty_memory_direction_is_negative_gradient() {
        let s = LbfgsState::default();
        assert_eq!(s.direction(&[1.0, -3.0]), vec![-1.0, 3.0]);
    }

    #[test]
    fn two_loop_recovers_inverse_hessian_on_quadratic() {
        // with pairs spanning the space, H y = s exactly for a diagonal quadratic
        let mut s = LbfgsState::default();
        s.push_pair(vec![1.0, 0.0], vec![2.0, 0.0]);
        s.push_pair(vec![0.0, 1.0], vec![0.0, 8.0]);
        let d = s.direction(&[2.0, 8.0]);
        assert_relative_eq!(d[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(d[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_positive_curvature() {
        let mut s = LbfgsState::default();
        assert!(!s.push_pair(vec![1.0, 0.0], vec![-1.0, 0.0]));
        assert!(!s.push_pair(vec![1.0, 0.0], vec![0.0, 1.0]));
        assert!(s.pairs.is_empty());
    }

    #[test]
    fn memory_is_bounded() {
        let mut s = LbfgsState::new(LbfgsConfig {
            memory: 3,
            ..Default::default()
        });
        for k in 1..10 {
            s.push_pair(vec![k as f64], vec![1.0]);
        }
        assert_eq!(s.pairs.len(), 3);
        assert_eq!(s.pairs[0].s, vec![7.0]);
    }

    #[test]
    fn cubic_interpolation_is_exact_for_quadratics() {
        // f = (t - 0.3)², f' = 2 (t - 0.3)
        let f = |t: f64| (t - 0.3) * (t - 0.3);
        let g = |t: f64| 2.0 * (t - 0.3);
        let t = cubic_interpolate((0.0, f(0.0), g(0.0)), (1.0, f(1.0), g(1.0)), None);
        assert_relative_eq!(t, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn converges_on_diagonal_quadratic_with_non_increasing_loss() {
        let mut state = LbfgsState::default();
        let out = lbfgs_minimize(quadratic, vec![1.0, -2.0, 0.5, 3.0], &mut state, 100, |_| {
            ControlFlow::Continue(())
        })
        .unwrap();
        assert_eq!(out.termination, Termination::GradientTolerance);
        assert!(out.loss < 1e-18);
        for s in &out.steps {
            assert!(s.loss_after <= s.loss_before + s.step * 1e-4 * s.slope);
        }
        assert!(state.pairs.iter().all(|p| p.curvature() > 0.0));
    }

    #[test]
    fn observer_can_stop_and_sees_start() {
        let mut state = LbfgsState::default();
        let mut seen = Vec::new();
        let out = lbfgs_minimize(quadratic, vec![1.0, 1.0], &mut state, 100, |info| {
            seen.push(info.iteration);
            if info.iteration == 2 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert_eq!(seen, vec![0, 1, 2]);
        assert_eq!(out.termination, Termination::Stopped);
        assert_eq!(out.iterations, 2);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let mut state = LbfgsState::default();
        let err = lbfgs_minimize(
            |_x: &[f64]| {
                Ok(Evaluation {
                    loss: f64::NAN,
                    grad: vec![0.0],
                    aux: (),
                })
            },
            vec![0.0],
            &mut state,
            10,
            |_| ControlFlow::Continue(()),
        );
        assert!(matches!(err, Err(Error::NumericalFailure { .. })));
    }

    #[test]
    fn zero_iterations_returns_start() {
        let mut state = LbfgsState::default();
        let out = lbfgs_minimize(quadratic, vec![1.0], &mut state, 0, |_| ControlFlow::Continue(()))
            .unwrap();
        assert_eq!(out.x, vec![1.0]);
        assert_eq!(out.termination, Termination::MaxIterations);
    }
}
