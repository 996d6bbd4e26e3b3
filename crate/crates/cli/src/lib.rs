//! Command-line front end: argument parsing, configuration merging and
//! dispatch to the subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use covfloor::{OutcomeKind, Sampling};

use commands::ExperimentName;
use config::{FloorChoice, Format, NuisanceChoice, RunConfig};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "covfloor", version, about = "Random forests with covariance-floor uncertainty")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// TOML integers are signed, so seeds stop at 2^63 - 1.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a forest, save it and write its predictions.
    Fit(FitArgs),
    /// Floor estimate and intervals for a saved forest.
    Uncertainty(UncertaintyArgs),
    /// Run a named simulation experiment.
    Experiment(ExperimentArgs),
    /// Write a synthetic training set and test points.
    Dgm(DgmArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub outcome: Option<OutcomeKind>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Subsample fraction without replacement instead of the bootstrap.
    #[arg(long)]
    pub subsample: Option<f64>,
}

#[derive(Debug, Args)]
pub struct UncertaintyArgs {
    #[arg(long)]
    pub forest: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub outcome: Option<OutcomeKind>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub r_syn: Option<usize>,
    #[arg(long)]
    pub b_mc: Option<usize>,
    #[arg(long)]
    pub r_cf: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: ExperimentName,
    /// favorable, challenging or stress.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub outcome: Option<OutcomeKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub r_true: Option<usize>,
    #[arg(long)]
    pub b_true: Option<usize>,
    #[arg(long)]
    pub r_syn: Option<usize>,
    #[arg(long)]
    pub b_mc: Option<usize>,
    #[arg(long)]
    pub b_deploy: Option<usize>,
    #[arg(long)]
    pub r_cov: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, value_enum)]
    pub floor: Option<FloorChoice>,
    #[arg(long, value_enum)]
    pub nuisance: Option<NuisanceChoice>,
    /// Exit with status 4 when any of the experiment's checks fails.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct DgmArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub outcome: Option<OutcomeKind>,
    #[arg(long)]
    pub n_test: Option<usize>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_some<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

/// The configuration file (or defaults) with every given flag applied.
pub fn effective_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.threads, cli.threads);
    set(&mut cfg.out, cli.out.clone());
    set(&mut cfg.format, cli.format);
    match &cli.command {
        Command::Fit(a) => {
            let f = &mut cfg.fit;
            set_some(&mut f.data, a.data.clone());
            set_some(&mut f.test, a.test.clone());
            set(&mut f.outcome, a.outcome);
            set(&mut f.trees, a.trees);
            set_some(&mut f.mtry, a.mtry);
            set(&mut f.min_leaf, a.min_leaf);
            set_some(&mut f.max_depth, a.max_depth);
            set(&mut f.sampling, a.subsample.map(|fraction| Sampling::Subsample { fraction }));
        }
        Command::Uncertainty(a) => {
            let u = &mut cfg.uncertainty;
            set_some(&mut u.forest, a.forest.clone());
            set_some(&mut u.data, a.data.clone());
            set_some(&mut u.test, a.test.clone());
            set_some(&mut u.outcome, a.outcome);
            set(&mut u.alpha, a.alpha);
            set(&mut u.r_syn, a.r_syn);
            set(&mut u.b_mc, a.b_mc);
            set(&mut u.r_cf, a.r_cf);
        }
        Command::Experiment(a) => {
            let e = &mut cfg.experiment;
            set(&mut e.preset, a.preset.clone());
            set(&mut e.outcome, a.outcome);
            set_some(&mut e.n, a.n);
            set_some(&mut e.p, a.p);
            set_some(&mut e.mtry, a.mtry);
            let b = &mut e.budgets;
            set(&mut b.n_test, a.n_test);
            set(&mut b.r_true, a.r_true);
            set(&mut b.b_true, a.b_true);
            set(&mut b.r_syn, a.r_syn);
            set(&mut b.b_mc, a.b_mc);
            set(&mut b.b_deploy, a.b_deploy);
            set(&mut b.r_cov, a.r_cov);
            set(&mut b.s, a.s);
            set(&mut e.floor, a.floor);
            set(&mut e.nuisance, a.nuisance);
        }
        Command::Dgm(a) => {
            let d = &mut cfg.dgm;
            set(&mut d.n, a.n);
            set(&mut d.p, a.p);
            set(&mut d.outcome, a.outcome);
            set(&mut d.n_test, a.n_test);
        }
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = effective_config(&cli)?;
    if cfg.threads > 0 {
        // a second initialization (tests in one process) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global();
    }
    match &cli.command {
        Command::Fit(_) => commands::cmd_fit(&cfg),
        Command::Uncertainty(_) => commands::cmd_uncertainty(&cfg),
        Command::Dgm(_) => commands::cmd_dgm(&cfg),
        Command::Experiment(a) => {
            let report = commands::cmd_experiment(a.name, &cfg)?;
            for c in &report.checks {
                eprintln!(
                    "[{}] {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if a.check && !report.passed() {
                let failed: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                return Err(CliError::Check(failed.join(", ")));
            }
            Ok(())
        }
    }
}
