//! Reversible-jump Metropolis-within-Gibbs sampler over mechanisms.
//!
//! The chain for one child walks the union of all mechanism/parameter spaces.
//! Each iteration makes one structural proposal (kinase birth/death,
//! inhibitor birth/death, or kinase swap) followed by a single-site
//! log-scale random-walk sweep over every continuous parameter. New
//! parameters introduced by a structural move are drawn from their priors.

mod chain;
mod summary;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::ChildData;
use crate::mechanism::{MechanismModel, ModelCaps};
use crate::prior::ModelPrior;

pub use chain::{within_model_update, Chain, ChainState, ChainStats, MoveKind, MoveStats};
pub use summary::{summarize, EdgeTally, PosteriorSummary};

/// Relative frequency of each structural move kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveWeights {
    pub kinase: f64,
    pub inhibitor: f64,
    pub swap: f64,
}

impl Default for MoveWeights {
    fn default() -> Self {
        Self::normalized(0.35, 0.25, 0.15).expect("positive defaults")
    }
}

impl MoveWeights {
    /// Scale positive weights so they sum to one.
    pub fn normalized(kinase: f64, inhibitor: f64, swap: f64) -> Result<Self> {
        let total = kinase + inhibitor + swap;
        if !(kinase > 0.0 && inhibitor > 0.0 && swap > 0.0 && total.is_finite()) {
            return Err(Error::Config(format!(
                "move weights must be positive, got ({kinase}, {inhibitor}, {swap})"
            )));
        }
        Ok(Self {
            kinase: kinase / total,
            inhibitor: inhibitor / total,
            swap: swap / total,
        })
    }

    fn validate(&self) -> Result<()> {
        let sum = self.kinase + self.inhibitor + self.swap;
        if !(self.kinase > 0.0 && self.inhibitor > 0.0 && self.swap > 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "move weights must be positive and sum to 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub total_iters: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Standard deviation of the log-scale random walk.
    pub step_size_log: f64,
    pub move_weights: MoveWeights,
    pub n_restarts: usize,
    pub caps: ModelCaps,
    /// Log-prior bonus per parent shared with the reference mechanism.
    pub kappa: f64,
    /// Iterations between cache audits.
    pub audit_interval: usize,
}

impl SamplerConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            total_iters: 30_000,
            burn_in: 5_000,
            seed,
            step_size_log: 0.25,
            move_weights: MoveWeights::default(),
            n_restarts: 3,
            caps: ModelCaps::default(),
            kappa: 0.0,
            audit_interval: 1_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.total_iters {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than total iterations ({})",
                self.burn_in, self.total_iters
            )));
        }
        if !(self.step_size_log >= 0.0 && self.step_size_log.is_finite()) {
            return Err(Error::Config(format!("invalid step size {}", self.step_size_log)));
        }
        if self.n_restarts == 0 {
            return Err(Error::Config("at least one restart is required".into()));
        }
        if self.audit_interval == 0 {
            return Err(Error::Config("audit interval must be positive".into()));
        }
        self.move_weights.validate()
    }
}

/// Post-burn-in samples of one chain plus its acceptance statistics.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub samples: Vec<ChainState>,
    pub stats: ChainStats,
}

/// Run one chain for `child` and keep every post-burn-in state.
pub fn run_chain(data: &Dataset, child: usize, config: &SamplerConfig, restart: usize) -> Result<ChainRun> {
    check_data(data)?;
    let child_data = ChildData::new(data, child)?;
    let prior = ModelPrior::new(child, data.n_species(), config.caps)?;
    let mut samples = Vec::with_capacity(config.total_iters - config.burn_in);
    let stats = Chain::new(&child_data, &prior, config, restart)?.run(|_, s| samples.push(s.clone()))?;
    Ok(ChainRun { samples, stats })
}

fn check_data(data: &Dataset) -> Result<()> {
    if !data.is_normalized() {
        return Err(Error::InvalidInput("sampler requires unit-mean normalized data".into()));
    }
    Ok(())
}

/// Options for [`infer_network`] beyond the sampler configuration.
#[derive(Debug, Clone, Default)]
pub struct InferOptions<'a> {
    /// Children to infer; all species when empty.
    pub children: Vec<usize>,
    /// Reference mechanisms for the tilted structure prior, per child.
    pub references: BTreeMap<usize, MechanismModel>,
    /// Directory receiving one sample log per (child, restart).
    pub sample_log_dir: Option<&'a Path>,
}

/// Run every (child, restart) chain in parallel and reduce the visits into
/// posterior edge probabilities.
pub fn infer_network(data: &Dataset, config: &SamplerConfig, options: &InferOptions<'_>) -> Result<PosteriorSummary> {
    config.validate()?;
    check_data(data)?;
    let p = data.n_species();
    let children: Vec<usize> = if options.children.is_empty() {
        (0..p).collect()
    } else {
        options.children.clone()
    };
    let setups: Vec<(ChildData, ModelPrior)> = children
        .iter()
        .map(|&child| {
            let reference = options
                .references
                .get(&child)
                .cloned()
                .unwrap_or_else(|| MechanismModel::empty(child));
            Ok((
                ChildData::new(data, child)?,
                ModelPrior::with_reference(child, p, config.caps, config.kappa, &reference)?,
            ))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..setups.len())
        .flat_map(|c| (0..config.n_restarts).map(move |r| (c, r)))
        .collect();
    let results: Vec<Result<(EdgeTally, ChainStats)>> = jobs
        .par_iter()
        .map(|&(c, restart)| {
            let (child_data, prior) = &setups[c];
            let child = child_data.child();
            let mut tally = EdgeTally::new(p, child);
            let mut log = match options.sample_log_dir {
                Some(dir) => {
                    let path = dir.join(format!("samples_{}_{restart}.csv", data.species()[child]));
                    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                    let mut w = std::io::BufWriter::new(file);
                    writeln!(w, "iteration,model,log_posterior").map_err(|e| Error::io(&path, e))?;
                    Some((path, w, None::<std::io::Error>))
                }
                None => None,
            };
            let stats = Chain::new(child_data, prior, config, restart)?.run(|iter, state| {
                tally.add(&state.model);
                if let Some((_, w, err @ None)) = log.as_mut() {
                    if let Err(e) = writeln!(
                        w,
                        "{iter},{},{}",
                        state.model.signature(data.species()),
                        state.log_posterior()
                    ) {
                        *err = Some(e);
                    }
                }
            })?;
            if let Some((path, mut w, err)) = log {
                if let Some(e) = err {
                    return Err(Error::io(path, e));
                }
                w.flush().map_err(|e| Error::io(&path, e))?;
            }
            Ok((tally, stats))
        })
        .collect();

    let mut per_child: Vec<(Vec<EdgeTally>, Vec<ChainStats>)> = vec![(Vec::new(), Vec::new()); setups.len()];
    for (&(c, _), result) in jobs.iter().zip(results) {
        let (tally, stats) = result?;
        per_child[c].0.push(tally);
        per_child[c].1.push(stats);
    }
    summarize(p, per_child)
}
