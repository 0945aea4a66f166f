//! Command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::checks;
use crate::config::{RunConfig, SystemKind};
use crate::error::{HarnessError, Result};
use crate::multi;
use crate::output::{self, GainFormat};
use crate::plan;
use crate::sim;

#[derive(Debug, Parser)]
#[command(name = "flexcable", version, about = "Quadrotor with a flexible cable: planning, gains, closed-loop trials")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings that override the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML or JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Simulation step (s).
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Horizon T (s).
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Gain-table grid step (s).
    #[arg(long = "dt-riccati", global = true)]
    pub dt_riccati: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(dt) = self.dt {
            cfg.sim.dt = dt;
        }
        if let Some(h) = self.horizon {
            cfg.sim.horizon = h;
        }
        if let Some(dt) = self.dt_riccati {
            cfg.lqr.dt = dt;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the reference and its feedforward into plan.csv.
    Plan,
    /// Integrate the Riccati equation and store the gain table.
    Gains {
        /// Destination; defaults to <out>/gains.bin.
        #[arg(long)]
        gains: Option<PathBuf>,
        /// Defaults to the extension of the destination.
        #[arg(long)]
        format: Option<GainFormat>,
    },
    /// Closed-loop trials.
    Simulate {
        /// Trial name; repeat for several. All configured trials when absent.
        #[arg(long)]
        trial: Vec<String>,
        /// Precomputed gain table; computed on the fly when absent.
        #[arg(long)]
        gains: Option<PathBuf>,
        #[arg(long)]
        parallel: bool,
    },
    /// Compare A, B against finite differences along the reference.
    Lincheck,
    /// Dynamics residuals along the reference.
    Flatcheck,
    /// Reference and residual report for several quadrotors.
    MultiPlan {
        /// Defaults to the configured system, or both multi systems when that
        /// is `single`.
        #[arg(long)]
        system: Option<SystemKind>,
    },
}

/// Runs one command; `Ok(false)` means a check or gate failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let cfg = cli.common.resolve()?;
    output::ensure_dir(&cfg.out)?;
    match &cli.command {
        Command::Plan => cmd_plan(&cfg),
        Command::Gains { gains, format } => cmd_gains(&cfg, gains.clone(), *format),
        Command::Simulate {
            trial,
            gains,
            parallel,
        } => cmd_simulate(&cfg, trial, gains.as_ref(), *parallel),
        Command::Lincheck => cmd_lincheck(&cfg),
        Command::Flatcheck => cmd_flatcheck(&cfg),
        Command::MultiPlan { system } => cmd_multi(&cfg, *system),
    }
}

fn cmd_plan(cfg: &RunConfig) -> Result<bool> {
    let p = plan::plan(cfg)?;
    let path = output::write_plan(&cfg.out, &p, cfg.cable.links())?;
    println!(
        "plan: {} rows, max residual {:.3e} -> {}",
        p.points.len(),
        p.max_residual(),
        path.display()
    );
    Ok(true)
}

fn cmd_gains(cfg: &RunConfig, path: Option<PathBuf>, format: Option<GainFormat>) -> Result<bool> {
    let path = path.unwrap_or_else(|| cfg.out.join("gains.bin"));
    let format = format.unwrap_or_else(|| GainFormat::from_path(&path));
    let table = sim::compute_gains(cfg)?;
    output::write_gains(&path, &table, format)?;
    println!(
        "gains: {} samples over [{}, {}] s, state dim {} -> {}",
        table.len(),
        table.start(),
        table.end(),
        table.state_dim(),
        path.display()
    );
    Ok(true)
}

fn cmd_simulate(
    cfg: &RunConfig,
    names: &[String],
    gains: Option<&PathBuf>,
    parallel: bool,
) -> Result<bool> {
    let trials = if names.is_empty() {
        cfg.trials.clone()
    } else {
        names
            .iter()
            .map(|n| cfg.trial(n).cloned())
            .collect::<Result<Vec<_>>>()?
    };
    let table = match gains {
        Some(p) => output::read_gains(p)?,
        None => sim::compute_gains(cfg)?,
    };
    let dim = flexcable::linearize::StateLayout::new(cfg.cable.links()).dim();
    if table.state_dim() != dim || table.end() + 1e-9 < cfg.sim.horizon {
        return Err(HarnessError::Config(format!(
            "gain table (dim {}, ends at {} s) does not fit dim {dim} over {} s",
            table.state_dim(),
            table.end(),
            cfg.sim.horizon
        )));
    }
    let mut all = true;
    for (trial, rec) in trials.iter().zip(sim::simulate_all(cfg, &trials, &table, parallel)) {
        let rec = rec?;
        let files = output::write_run(&cfg.out, &rec, cfg.cable.links())?;
        let s = &rec.summary;
        let when = |t: Option<f64>| t.map_or("never".to_string(), |t| format!("{t:.3} s"));
        println!(
            "trial {}: {} | final |dx_n| {:.3e} m, max {:.3e} m | settled: load {}, Psi_R {}, Psi_q {} | constraint {:.1e} -> {}",
            trial.name,
            if s.passed { "PASS" } else { "FAIL" },
            s.final_load_error,
            s.max_load_error,
            when(s.load_settled_at),
            when(s.psi_r_settled_at),
            when(s.psi_q_last_settled_at),
            s.max_constraint_violation,
            files.series.display()
        );
        all &= s.passed;
    }
    println!("note: convergence thresholds are acceptance gates chosen for this tool");
    Ok(all)
}

fn cmd_lincheck(cfg: &RunConfig) -> Result<bool> {
    let r = checks::lincheck(cfg)?;
    println!("{:>10}  {:>12}  {:>12}  worst blocks", "t", "rel A", "rel B");
    for s in &r.samples {
        println!(
            "{:>10.4}  {:>12.3e}  {:>12.3e}  A[{}, {}] B[{}, {}]",
            s.t, s.max_rel_a, s.max_rel_b, s.worst_a.0, s.worst_a.1, s.worst_b.0, s.worst_b.1
        );
    }
    output::write_json(&cfg.out.join("lincheck.json"), &r)?;
    println!(
        "lincheck: {} ({}x{}), max relative block error {:.3e} (tolerance {:.0e})",
        if r.passed { "PASS" } else { "FAIL" },
        r.state_dim,
        r.state_dim,
        r.max_rel,
        r.tolerance
    );
    if !r.passed {
        for s in r.samples.iter().filter(|s| s.max_rel_a.max(s.max_rel_b) >= r.tolerance) {
            eprintln!(
                "breach at t = {:.4}: A[{}, {}] {:.3e}, B[{}, {}] {:.3e}",
                s.t, s.worst_a.0, s.worst_a.1, s.max_rel_a, s.worst_b.0, s.worst_b.1, s.max_rel_b
            );
        }
    }
    Ok(r.passed)
}

fn cmd_flatcheck(cfg: &RunConfig) -> Result<bool> {
    let r = plan::flatcheck(cfg)?;
    output::write_json(&cfg.out.join("flatcheck.json"), &r)?;
    println!(
        "flatcheck: {} | {} samples, max residual {:.3e} at t = {:.4} (tolerance {:.0e}), min tension {:.4} N",
        if r.passed { "PASS" } else { "FAIL" },
        r.samples,
        r.max_residual,
        r.worst_time,
        r.tolerance,
        r.min_tension
    );
    Ok(r.passed)
}

fn cmd_multi(cfg: &RunConfig, system: Option<SystemKind>) -> Result<bool> {
    let systems = match system.unwrap_or(cfg.system) {
        SystemKind::Single => vec![SystemKind::MultiPoint, SystemKind::MultiRigid],
        s => vec![s],
    };
    let mut all = true;
    for s in systems {
        let p = multi::plan_multi(cfg, s)?;
        let dir = cfg.out.join(match s {
            SystemKind::MultiPoint => "multi_point",
            _ => "multi_rigid",
        });
        let (csv, _) = output::write_multi_plan(&dir, &p)?;
        let r = &p.report;
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2e}"));
        println!(
            "multi-plan {:?}: {} | p = {}, DOF {}, max residual {:.3e}, |Phi T - W| {}, kernel sweep {}, min tension {:.4} N, {} warnings -> {}",
            s,
            if r.passed { "PASS" } else { "FAIL" },
            r.quadrotors,
            r.dof,
            r.max_residual,
            opt(r.max_wrench_residual),
            opt(r.kernel_invariance),
            r.min_tension,
            r.warnings.len(),
            csv.display()
        );
        for w in r.warnings.iter().take(5) {
            eprintln!(
                "warning: t = {:.3}, cable {}, link {}: tension {:.4} N",
                w.t,
                w.cable + 1,
                w.link + 1,
                w.tension
            );
        }
        all &= r.passed;
    }
    Ok(all)
}
