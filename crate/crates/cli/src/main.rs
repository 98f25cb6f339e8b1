use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use gknet::pipeline::{run, Command, RunConfig, Settings};
use gknet::Method;

/// Infer phosphorylation networks with Goldbeter-Koshland kinetics, and
/// benchmark against linear baselines.
#[derive(Parser, Debug)]
#[command(name = "gknet", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON file with the same keys as the long flags; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Phospho-channel CSV (header of species names, one row per sample).
    #[arg(long, global = true)]
    phospho: Option<PathBuf>,
    /// Unphospho-channel CSV with the same header.
    #[arg(long, global = true)]
    unphospho: Option<PathBuf>,
    /// gk, lin-bayes, lin-bayes-adj, lasso or lasso-adj [default: gk]
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Sampler iterations per chain [default: 30000]
    #[arg(long, global = true)]
    iters: Option<usize>,
    /// Discarded iterations [default: 5000]
    #[arg(long, global = true)]
    burnin: Option<usize>,
    /// Independent chains per child [default: 3]
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Master seed for all randomness (required by simulate and infer).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated children to infer [default: all].
    #[arg(long, global = true)]
    children: Option<String>,
    /// Candidates to drop per child: child=cand1|cand2,child2=cand3
    #[arg(long, global = true)]
    exclude: Option<String>,
    /// Maximum kinases per child [default: 3]
    #[arg(long, global = true)]
    dmax: Option<usize>,
    /// Maximum inhibitors per kinase [default: 2]
    #[arg(long, global = true)]
    mmax: Option<usize>,
    /// Species to simulate [default: 12]
    #[arg(long, global = true)]
    p: Option<usize>,
    /// Samples to simulate [default: 24]
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Log-scale measurement noise [default: 0.2]
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Truth edge list (child,parent,role) for evaluate.
    #[arg(long, global = true)]
    truth: Option<PathBuf>,
    /// Comma-separated edge-weight CSVs for evaluate and rank.
    #[arg(long, global = true)]
    weights: Option<String>,
    /// child,known CSV for rank.
    #[arg(long, global = true)]
    known: Option<PathBuf>,
    /// Label for the dataset column of evaluate outputs.
    #[arg(long, global = true)]
    dataset: Option<String>,
    /// Write per-chain sample logs under <out>/samples (gk only).
    #[arg(long, global = true)]
    sample_logs: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Generate a ground-truth network and a noisy dataset.
    Simulate,
    /// Score every (child, candidate) pair with one method.
    Infer,
    /// ROC curves and AURs of edge weights against a truth file.
    Evaluate,
    /// Rank known regulators among candidates.
    Rank,
}

impl Cli {
    fn settings(&self) -> anyhow::Result<Settings> {
        let base = match &self.config {
            Some(path) => Settings::from_json_file(path)?,
            None => Settings::default(),
        };
        let flags = Settings {
            phospho: self.phospho.clone(),
            unphospho: self.unphospho.clone(),
            method: self.method,
            iters: self.iters,
            burnin: self.burnin,
            restarts: self.restarts,
            seed: self.seed,
            out: self.out.clone(),
            children: self.children.clone(),
            exclude: self.exclude.clone(),
            dmax: self.dmax,
            mmax: self.mmax,
            p: self.p,
            n: self.n,
            sigma: self.sigma,
            truth: self.truth.clone(),
            weights: self.weights.clone(),
            known: self.known.clone(),
            dataset: self.dataset.clone(),
            sample_logs: self.sample_logs.then_some(true),
        };
        Ok(base.overlay(flags))
    }
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let command = match cli.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::Infer => Command::Infer,
        Cmd::Evaluate => Command::Evaluate,
        Cmd::Rank => Command::Rank,
    };
    let config = RunConfig::new(command, &cli.settings()?)?;
    let manifest = run(&config).with_context(|| format!("{} failed", command.as_str()))?;
    for w in &manifest.warnings {
        log::warn!("{w}");
    }
    for file in &manifest.outputs {
        println!("{}", config.out.join(file).display());
    }
    println!("{}", config.out.join("manifest.json").display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
