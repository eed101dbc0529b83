//! Run configuration, stored as TOML.
//!
//! Every key has a default, so a config file only lists what it changes:
//!
//! ```toml
//! problem = "nonstationary"
//! seed = 3
//!
//! [schedule]
//! adam_epochs = 500
//!
//! [rar]
//! enabled = false
//! ```
//!
//! Any key can also be overridden from the command line as `section.key=value`.

use std::path::{Path, PathBuf};

use burgers_pinn::pde::ProblemOverrides;
use burgers_pinn::{derive_seed, Activation, InputLayout, LbfgsConfig, LossWeights, ProblemSpec, RarConfig, Schedule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `stationary` or `nonstationary`.
    pub problem: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub pde: PdeSection,
    pub network: NetworkSection,
    pub points: PointsSection,
    pub loss: LossSection,
    pub schedule: ScheduleSection,
    pub rar: RarSection,
    pub eval: EvalSection,
    pub bound_study: BoundStudySection,
    pub stability_study: StabilitySection,
}

/// Overrides of the benchmark's data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// Hidden layer widths; input and output sizes follow from the problem.
    pub hidden: Vec<usize>,
    pub activation: String,
    /// Feed `(sin, cos)` of each spatial coordinate instead of the coordinate.
    pub periodic_features: bool,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            hidden: vec![32, 32],
            activation: "tanh".into(),
            periodic_features: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointsSection {
    pub interior: usize,
    pub boundary: usize,
    /// Ignored for stationary problems.
    pub initial: usize,
}

impl Default for PointsSection {
    fn default() -> Self {
        PointsSection {
            interior: 8000,
            boundary: 500,
            initial: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub adam_epochs: usize,
    pub lbfgs_iters: usize,
    pub adam_lr: f64,
    pub lbfgs_memory: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub max_line_search_evals: usize,
    pub grad_tol: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let l = LbfgsConfig::default();
        let s = Schedule::default();
        ScheduleSection {
            adam_epochs: s.adam_epochs,
            lbfgs_iters: s.lbfgs_iters,
            adam_lr: s.adam_lr,
            lbfgs_memory: l.memory,
            wolfe_c1: l.c1,
            wolfe_c2: l.c2,
            max_line_search_evals: l.max_evals,
            grad_tol: l.grad_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RarSection {
    pub enabled: bool,
    pub pool_size: usize,
    pub mean_residual_threshold: f64,
    pub add_per_round: usize,
    pub max_rounds: usize,
    /// Adam epochs before each retrain. Zero by default: restarting Adam from a
    /// converged network undoes most of the L-BFGS progress.
    pub retrain_adam_epochs: usize,
    pub retrain_lbfgs_iters: usize,
}

impl Default for RarSection {
    fn default() -> Self {
        let r = RarConfig::default();
        RarSection {
            enabled: true,
            pool_size: r.pool_size,
            mean_residual_threshold: r.mean_residual_threshold,
            add_per_round: r.add_per_round,
            max_rounds: r.max_rounds,
            retrain_adam_epochs: 0,
            retrain_lbfgs_iters: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Midpoints per axis of the error grid.
    pub grid: usize,
    /// Report times of time-dependent problems.
    pub times: Vec<f64>,
    /// Also report the grid surrogate of the boundary trace norm.
    pub boundary_surrogate: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            grid: 32,
            times: vec![0.0, 0.5, 1.0],
            boundary_surrogate: false,
        }
    }
}

/// Multipliers of the boundary and initial mean-square terms; the residual
/// term has weight 1. Unset weights take the problem's default: 100 on the
/// Dirichlet boundary of the stationary problem, 1 otherwise.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundStudySection {
    /// Target losses, strictly decreasing.
    pub checkpoints: Vec<f64>,
}

impl Default for BoundStudySection {
    fn default() -> Self {
        BoundStudySection {
            checkpoints: vec![1e1, 1e0, 1e-1, 1e-2, 1e-3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub deltas: Vec<f64>,
    /// Add `δ sin(2πx₁)` to the forcing.
    pub perturb_forcing: bool,
    /// Add `δ sin(2πx₁) sin(2πx₂)` to the initial condition.
    pub perturb_initial: bool,
    /// Distances are taken at `t = kT/slices`, `k = 0..=slices`.
    pub slices: usize,
}

impl Default for StabilitySection {
    fn default() -> Self {
        StabilitySection {
            deltas: vec![1e-2, 3e-2, 1e-1],
            perturb_forcing: true,
            perturb_initial: false,
            slices: 10,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "stationary".into(),
            seed: 0,
            out_dir: PathBuf::from("runs"),
            pde: PdeSection::default(),
            network: NetworkSection::default(),
            points: PointsSection::default(),
            loss: LossSection::default(),
            schedule: ScheduleSection::default(),
            rar: RarSection::default(),
            eval: EvalSection::default(),
            bound_study: BoundStudySection::default(),
            stability_study: StabilitySection::default(),
        }
    }
}

// Stream ids for derive_seed.
const POINTS_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const RAR_STREAM: u64 = 3;

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_toml(&text)
    }

    /// Applies `section.key=value`. The value is read as a TOML value, falling
    /// back to a bare string.
    pub fn set(&mut self, assignment: &str) -> CliResult<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got `{assignment}`")))?;
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
        let mut table = toml::Table::try_from(&*self).expect("config serializes");
        let path: Vec<&str> = key.trim().split('.').collect();
        let (last, parents) = path.split_last().expect("split yields one item");
        let mut node = &mut table;
        for part in parents {
            node = node
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("`{part}` is not a section")))?;
        }
        node.insert(last.to_string(), value);
        *self = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("{key}: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        Activation::from_name(&self.network.activation)?;
        if self.network.hidden.is_empty() || self.network.hidden.contains(&0) {
            return bad(format!("hidden widths must be positive, got {:?}", self.network.hidden));
        }
        if self.eval.grid == 0 {
            return bad("eval.grid must be positive".into());
        }
        if !(self.schedule.adam_lr > 0.0) {
            return bad("schedule.adam_lr must be positive".into());
        }
        self.loss_weights().validate()?;
        self.problem_spec()?;
        Ok(())
    }

    pub fn problem_spec(&self) -> CliResult<ProblemSpec> {
        let overrides = ProblemOverrides {
            nu: self.pde.nu,
            lo: self.pde.lo.clone(),
            hi: self.pde.hi.clone(),
            final_time: self.pde.final_time,
        };
        Ok(ProblemSpec::by_name(&self.problem, &overrides)?)
    }

    pub fn layout(&self, problem: &ProblemSpec) -> CliResult<InputLayout> {
        let layout = problem.layout();
        if self.network.periodic_features {
            Ok(layout.with_periodic_features(problem.domain.widths())?)
        } else {
            Ok(layout)
        }
    }

    pub fn activation(&self) -> CliResult<Activation> {
        Ok(Activation::from_name(&self.network.activation)?)
    }

    /// Full layer sizes for `layout`.
    pub fn sizes(&self, layout: &InputLayout) -> Vec<usize> {
        let mut sizes = vec![layout.feature_dim()];
        sizes.extend(&self.network.hidden);
        sizes.push(1);
        sizes
    }

    pub fn loss_weights(&self) -> LossWeights {
        let boundary = if self.problem == "stationary" { 100.0 } else { 1.0 };
        LossWeights {
            boundary: self.loss.boundary_weight.unwrap_or(boundary),
            initial: self.loss.initial_weight.unwrap_or(1.0),
        }
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule_with(self.schedule.adam_epochs, self.schedule.lbfgs_iters)
    }

    pub fn retrain_schedule(&self) -> Schedule {
        self.schedule_with(self.rar.retrain_adam_epochs, self.rar.retrain_lbfgs_iters)
    }

    fn schedule_with(&self, adam_epochs: usize, lbfgs_iters: usize) -> Schedule {
        let s = &self.schedule;
        Schedule {
            adam_epochs,
            lbfgs_iters,
            adam_lr: s.adam_lr,
            lbfgs: LbfgsConfig {
                memory: s.lbfgs_memory,
                c1: s.wolfe_c1,
                c2: s.wolfe_c2,
                max_evals: s.max_line_search_evals,
                grad_tol: s.grad_tol,
                ..LbfgsConfig::default()
            },
        }
    }

    pub fn rar_config(&self) -> RarConfig {
        RarConfig {
            pool_size: self.rar.pool_size,
            mean_residual_threshold: self.rar.mean_residual_threshold,
            add_per_round: self.rar.add_per_round,
            max_rounds: self.rar.max_rounds,
            seed: derive_seed(self.seed, RAR_STREAM),
        }
    }

    pub fn points_seed(&self) -> u64 {
        derive_seed(self.seed, POINTS_STREAM)
    }

    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, INIT_STREAM)
    }

    /// `<out_dir>/<problem>-<seed>`.
    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(format!("{}-{}", self.problem, self.seed))
    }
}
