use std::path::PathBuf;
use std::process::ExitCode;

use burgers_pinn_cli::studies::{self, Perturbation};
use burgers_pinn_cli::{output, run, verify, CliResult, RunConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "burgers-pinn", version, about = "Physics-informed neural network solver for the viscous Burgers equation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// `stationary` or `nonstationary`.
    #[arg(long, global = true)]
    problem: Option<String>,
    /// Override any config key, e.g. `--set schedule.adam_epochs=500`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Suppress progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train with the full pipeline and write errors, fields and the checkpoint.
    Reproduce,
    /// Errors of the network snapshots where the loss first reaches each checkpoint.
    BoundStudy {
        /// Strictly decreasing target losses.
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<f64>>,
    },
    /// Distance between networks trained on perturbed and unperturbed data.
    StabilityStudy {
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        perturb: Option<PerturbTarget>,
    },
    /// Residual of the exact solution and a forcing comparison table.
    VerifyForcing,
    /// Evaluate a saved checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PerturbTarget {
    Forcing,
    Initial,
    Both,
}

fn resolve(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for s in &common.sets {
        cfg.set(s)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &common.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(p) = &common.problem {
        cfg.problem = p.clone();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> CliResult<()> {
    let mut cfg = resolve(&cli.common)?;
    let quiet = cli.common.quiet;
    let mut sink = |line: &str| {
        if !quiet {
            eprintln!("{line}");
        }
    };
    match cli.command {
        Command::Reproduce => {
            let r = run::reproduce(&cfg, &mut sink)?;
            println!("{}", output::summary(&r.report));
            println!("output: {}", cfg.run_dir().display());
        }
        Command::BoundStudy { checkpoints } => {
            if let Some(c) = checkpoints {
                cfg.bound_study.checkpoints = c;
            }
            let study = studies::run_bound_study(&cfg, &mut sink)?;
            print!("{}", study.table().as_str());
            println!("{}", studies::bound_summary(&study));
        }
        Command::StabilityStudy { deltas, perturb } => {
            if let Some(d) = deltas {
                cfg.stability_study.deltas = d;
            }
            if let Some(p) = perturb {
                let kind = match p {
                    PerturbTarget::Forcing => Perturbation { forcing: true, initial: false },
                    PerturbTarget::Initial => Perturbation { forcing: false, initial: true },
                    PerturbTarget::Both => Perturbation { forcing: true, initial: true },
                };
                cfg.stability_study.perturb_forcing = kind.forcing;
                cfg.stability_study.perturb_initial = kind.initial;
            }
            let study = studies::run_stability_study(&cfg, &mut sink)?;
            print!("{}", study.table().as_str());
            println!("{}", studies::stability_summary(&study));
        }
        Command::VerifyForcing => {
            let problem = cfg.problem_spec()?;
            let check = verify::verify_forcing(&problem, cfg.seed)?;
            print!("{}", verify::report(&check));
        }
        Command::Eval { checkpoint } => {
            let (report, _) = run::eval_checkpoint(&cfg, &checkpoint)?;
            println!("{}", output::summary(&report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("error_tag={}", e.tag());
            ExitCode::FAILURE
        }
    }
}
