use std::ops::ControlFlow;

use super::{adam_step, lbfgs_minimize, AdamState, Evaluation, LbfgsConfig, LbfgsState};
use super::{StepRecord, Termination};
use crate::net::{InputLayout, MlpParams};
use crate::pde::{LossAssembly, LossBreakdown, ProblemSpec};
use crate::sample::CollocationSet;
use crate::Result;

/// Adam epochs followed by L-BFGS iterations, all full-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub adam_epochs: usize,
    pub lbfgs_iters: usize,
    pub adam_lr: f64,
    pub lbfgs: LbfgsConfig,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            adam_epochs: 3000,
            lbfgs_iters: 5000,
            adam_lr: 1e-3,
            lbfgs: LbfgsConfig::default(),
        }
    }
}

impl Schedule {
    pub fn new(adam_epochs: usize, lbfgs_iters: usize) -> Self {
        Schedule {
            adam_epochs,
            lbfgs_iters,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Adam,
    Lbfgs,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Adam => "adam",
            Phase::Lbfgs => "lbfgs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub phase: Phase,
    pub iteration: usize,
    pub loss: LossBreakdown,
}

/// What the observer sees: the loss at `params`.
pub struct Progress<'a> {
    pub phase: Phase,
    pub iteration: usize,
    pub loss: &'a LossBreakdown,
    pub params: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParams,
    pub trace: Vec<TraceRow>,
    pub lbfgs_termination: Option<Termination>,
    pub lbfgs_steps: Vec<StepRecord>,
    /// The observer asked to stop early.
    pub stopped: bool,
}

/// Trains on the composite loss of `points`.
pub fn train_pipeline(
    params: &MlpParams,
    layout: &InputLayout,
    problem: &ProblemSpec,
    points: &CollocationSet,
    schedule: &Schedule,
) -> Result<TrainOutcome> {
    let assembly = LossAssembly::new(problem, layout, points)?;
    train_observed(params, &assembly, schedule, |_| ControlFlow::Continue(()))
}

/// Like [`train_pipeline`] with a per-iteration observer that may stop training.
pub fn train_observed<O>(
    params: &MlpParams,
    assembly: &LossAssembly<'_>,
    schedule: &Schedule,
    mut observer: O,
) -> Result<TrainOutcome>
where
    O: FnMut(&Progress<'_>) -> ControlFlow<()>,
{
    let mut net = params.clone();
    let mut flat = params.to_flat();
    let mut trace = Vec::with_capacity(schedule.adam_epochs + schedule.lbfgs_iters + 1);
    let done = |net: MlpParams, trace, term, steps, stopped| TrainOutcome {
        params: net,
        trace,
        lbfgs_termination: term,
        lbfgs_steps: steps,
        stopped,
    };

    if schedule.adam_epochs > 0 {
        let mut adam = AdamState::new(flat.len(), schedule.adam_lr);
        for epoch in 0..schedule.adam_epochs {
            let (loss, grad) = assembly.value_and_gradient(&net)?;
            trace.push(TraceRow {
                phase: Phase::Adam,
                iteration: epoch,
                loss,
            });
            let flow = observer(&Progress {
                phase: Phase::Adam,
                iteration: epoch,
                loss: &loss,
                params: &flat,
            });
            if flow.is_break() {
                return Ok(done(net, trace, None, Vec::new(), true));
            }
            adam_step(&mut flat, &grad.to_flat(), &mut adam)?;
            net.set_flat(&flat)?;
        }
    }

    if schedule.lbfgs_iters == 0 {
        return Ok(done(net, trace, None, Vec::new(), false));
    }

    let mut state = LbfgsState::new(schedule.lbfgs.clone());
    let template = net.clone();
    let objective = |x: &[f64]| -> Result<Evaluation<LossBreakdown>> {
        let candidate = template.with_flat(x)?;
        let (loss, grad) = assembly.value_and_gradient(&candidate)?;
        Ok(Evaluation {
            loss: loss.total,
            grad: grad.to_flat(),
            aux: loss,
        })
    };
    let outcome = lbfgs_minimize(objective, flat, &mut state, schedule.lbfgs_iters, |info| {
        trace.push(TraceRow {
            phase: Phase::Lbfgs,
            iteration: info.iteration,
            loss: *info.aux,
        });
        observer(&Progress {
            phase: Phase::Lbfgs,
            iteration: info.iteration,
            loss: info.aux,
            params: info.x,
        })
    })?;
    net.set_flat(&outcome.x)?;
    let stopped = outcome.termination == Termination::Stopped;
    Ok(done(net, trace, Some(outcome.termination), outcome.steps, stopped))
}
