//! Training runs and their evaluation.

use std::path::Path;

use burgers_pinn::metrics::{boundary_trace_surrogate, stationary_report, time_slice_report, FieldDump};
use burgers_pinn::net::checkpoint;
use burgers_pinn::optim::{train_observed, Progress, TraceRow};
use burgers_pinn::pde::LossAssembly;
use burgers_pinn::sample::{rar_refine, sample_set, RarRound};
use burgers_pinn::{CollocationSet, ErrorReport, InputLayout, LossBreakdown, MlpParams, ProblemSpec};
use std::ops::ControlFlow;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output;

/// Progress sink; receives one line at a time.
pub type Log<'a> = &'a mut dyn FnMut(&str);

/// How often training progress is logged.
const LOG_EVERY: usize = 500;

/// A trained network with its history.
#[derive(Debug, Clone)]
pub struct Trained {
    pub params: MlpParams,
    pub layout: InputLayout,
    pub points: CollocationSet,
    /// `("initial", trace)` followed by `("rar<k>", trace)` per refinement round.
    pub stages: Vec<(String, Vec<TraceRow>)>,
    pub rar: Vec<RarRound>,
    pub rar_converged: Option<bool>,
    /// Loss of the final network on the final collocation set.
    pub final_loss: LossBreakdown,
}

pub fn initial_network(cfg: &RunConfig, layout: &InputLayout) -> CliResult<MlpParams> {
    Ok(MlpParams::init(&cfg.sizes(layout), cfg.activation()?, cfg.init_seed())?)
}

pub fn collocation(cfg: &RunConfig, problem: &ProblemSpec) -> CliResult<CollocationSet> {
    let n0 = if problem.time_dependent { cfg.points.initial } else { 0 };
    Ok(sample_set(
        problem,
        cfg.points.interior,
        cfg.points.boundary,
        n0,
        cfg.points_seed(),
    )?)
}

fn logging_observer<'a>(stage: &'a str, log: Log<'a>) -> impl FnMut(&Progress<'_>) -> ControlFlow<()> + 'a {
    move |p: &Progress<'_>| {
        if p.iteration.is_multiple_of(LOG_EVERY) {
            log(&format!(
                "[{stage}] {} {:>5} loss={:.4e}",
                p.phase.name(),
                p.iteration,
                p.loss.total
            ));
        }
        ControlFlow::Continue(())
    }
}

/// Trains on `problem` with the configured schedule, followed by residual-based
/// refinement when enabled.
pub fn train(cfg: &RunConfig, problem: &ProblemSpec, log: Log<'_>) -> CliResult<Trained> {
    let layout = cfg.layout(problem)?;
    let points = collocation(cfg, problem)?;
    let init = initial_network(cfg, &layout)?;
    let assembly = LossAssembly::new(problem, &layout, &points)?
        .with_weights(cfg.loss_weights())?;
    let first = train_observed(&init, &assembly, &cfg.schedule(), logging_observer("initial", log))?;
    drop(assembly);
    let mut stages = vec![("initial".to_string(), first.trace)];

    let (params, points, rar, rar_converged) = if cfg.rar.enabled {
        let retrain = cfg.retrain_schedule();
        let trainer = |p: &MlpParams, pts: &CollocationSet, round: usize| {
            let stage = format!("rar{round}");
            let assembly = LossAssembly::new(problem, &layout, pts)?
                .with_weights(cfg.loss_weights())?;
            let out = train_observed(p, &assembly, &retrain, logging_observer(&stage, log))?;
            stages.push((stage.clone(), out.trace));
            Ok(out.params)
        };
        let out = rar_refine(trainer, first.params, &layout, problem, points, &cfg.rar_config())?;
        for r in &out.trace {
            log(&format!(
                "[rar] round {} points={} mean_residual={:.4e}",
                r.round, r.interior_size, r.mean_residual
            ));
        }
        (out.params, out.points, out.trace, Some(out.converged))
    } else {
        (first.params, points, Vec::new(), None)
    };

    if !params.is_finite() {
        return Err(burgers_pinn::Error::NumericalFailure {
            point: None,
            what: "trained parameters are not finite".into(),
        }
        .into());
    }
    let final_loss = LossAssembly::new(problem, &layout, &points)?
        .with_weights(cfg.loss_weights())?
        .breakdown(&params)?;
    Ok(Trained {
        params,
        layout,
        points,
        stages,
        rar,
        rar_converged,
        final_loss,
    })
}

/// Error report and field dumps on the configured grid and report times.
pub fn evaluate(
    cfg: &RunConfig,
    problem: &ProblemSpec,
    layout: &InputLayout,
    params: &MlpParams,
) -> CliResult<(ErrorReport, Vec<FieldDump>)> {
    let (mut report, fields) = if problem.time_dependent {
        time_slice_report(params, layout, problem, &cfg.eval.times, cfg.eval.grid)?
    } else {
        let (r, f) = stationary_report(params, layout, problem, cfg.eval.grid)?;
        (r, vec![f])
    };
    if cfg.eval.boundary_surrogate {
        let mut worst: f64 = 0.0;
        if problem.time_dependent {
            for &t in &cfg.eval.times {
                worst = worst.max(boundary_trace_surrogate(params, layout, problem, cfg.eval.grid, Some(t))?);
            }
        } else {
            worst = boundary_trace_surrogate(params, layout, problem, cfg.eval.grid, None)?;
        }
        report.boundary_surrogate = Some(worst);
    }
    Ok((report, fields))
}

/// Result of [`reproduce`].
#[derive(Debug, Clone)]
pub struct Reproduction {
    pub trained: Trained,
    pub report: ErrorReport,
}

/// Full pipeline: train, evaluate and write every artifact to the run directory.
pub fn reproduce(cfg: &RunConfig, log: Log<'_>) -> CliResult<Reproduction> {
    cfg.validate()?;
    let problem = cfg.problem_spec()?;
    let dir = prepare_run_dir(cfg)?;
    let trained = train(cfg, &problem, log)?;
    let (report, fields) = evaluate(cfg, &problem, &trained.layout, &trained.params)?;

    let stages = trained.stages.iter().map(|(s, rows)| (s.as_str(), rows.as_slice()));
    output::loss_trace(stages).write(&dir.join("loss_trace.csv"))?;
    write_report(&dir, &report, &fields)?;
    if cfg.rar.enabled {
        output::rar_trace(&trained.rar).write(&dir.join("rar_trace.csv"))?;
    }
    save_checkpoint(&trained.params, &dir.join("model.ckpt"))?;
    log(&format!("final loss={:.4e}", trained.final_loss.total));
    Ok(Reproduction { trained, report })
}

/// Evaluates a saved checkpoint and writes the report next to it.
pub fn eval_checkpoint(cfg: &RunConfig, ckpt: &Path) -> CliResult<(ErrorReport, Vec<FieldDump>)> {
    cfg.validate()?;
    let problem = cfg.problem_spec()?;
    let params = checkpoint::load(ckpt).map_err(|e| match e {
        checkpoint::LoadError::Io(source) => CliError::Io {
            path: ckpt.to_path_buf(),
            source,
        },
        checkpoint::LoadError::Format(e) => e.into(),
    })?;
    let layout = cfg.layout(&problem)?;
    if params.input_dim() != layout.feature_dim() {
        return Err(CliError::Config(format!(
            "checkpoint takes {} inputs but `{}` needs {}",
            params.input_dim(),
            problem.name,
            layout.feature_dim()
        )));
    }
    let (report, fields) = evaluate(cfg, &problem, &layout, &params)?;
    let dir = prepare_run_dir(cfg)?;
    write_report(&dir, &report, &fields)?;
    Ok((report, fields))
}

/// Creates the run directory and stores the resolved configuration in it.
pub fn prepare_run_dir(cfg: &RunConfig) -> CliResult<std::path::PathBuf> {
    let dir = cfg.run_dir();
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let mut resolved = cfg.clone();
    let w = cfg.loss_weights();
    resolved.loss.boundary_weight = Some(w.boundary);
    resolved.loss.initial_weight = Some(w.initial);
    output::write_file(&dir.join("run_config.resolved"), &resolved.to_toml())?;
    Ok(dir)
}

fn write_report(dir: &Path, report: &ErrorReport, fields: &[FieldDump]) -> CliResult<()> {
    output::errors(report).write(&dir.join("errors.csv"))?;
    for f in fields {
        output::field(f).write(&dir.join(output::field_file_name(f.t)))?;
    }
    Ok(())
}

fn save_checkpoint(params: &MlpParams, path: &Path) -> CliResult<()> {
    checkpoint::save(params, path).map_err(CliError::io(path))
}
