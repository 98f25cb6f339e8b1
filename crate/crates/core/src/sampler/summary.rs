use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanism::MechanismModel;

use super::ChainStats;

/// Cross-restart discrepancy above which a pair counts as unconverged.
pub const DISCREPANCY_THRESHOLD: f64 = 0.1;

/// Visit counts accumulated by one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTally {
    pub child: usize,
    pub samples: usize,
    /// Per candidate: visits with it as a parent, as a kinase, as an
    /// inhibitor, and in both roles at once.
    pub edge: Vec<usize>,
    pub kinase: Vec<usize>,
    pub inhibitor: Vec<usize>,
    pub both: Vec<usize>,
    pub models: BTreeMap<MechanismModel, usize>,
}

impl EdgeTally {
    pub fn new(p: usize, child: usize) -> Self {
        Self {
            child,
            samples: 0,
            edge: vec![0; p],
            kinase: vec![0; p],
            inhibitor: vec![0; p],
            both: vec![0; p],
            models: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, model: &MechanismModel) {
        self.samples += 1;
        let inhibitors = model.inhibitor_species();
        for j in model.parents() {
            self.edge[j] += 1;
            let k = model.has_kinase(j);
            let i = inhibitors.contains(&j);
            self.kinase[j] += usize::from(k);
            self.inhibitor[j] += usize::from(i);
            self.both[j] += usize::from(k && i);
        }
        *self.models.entry(model.clone()).or_default() += 1;
    }

    fn edge_prob(&self, j: usize) -> f64 {
        self.edge[j] as f64 / self.samples as f64
    }
}

/// Convergence diagnostics across restarts.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Edge-probability matrix of each restart index, entry (j, i).
    pub per_restart: Vec<DMatrix<f64>>,
    /// Range of per-restart edge probabilities, entry (j, i).
    pub discrepancy: DMatrix<f64>,
    pub max_discrepancy: f64,
    pub converged: bool,
    /// Fraction of inferred (child, candidate) pairs within the threshold.
    pub fraction_within: f64,
    /// Pairs `(parent, child)` exceeding the threshold.
    pub flagged: Vec<(usize, usize)>,
    pub chains: Vec<ChainStats>,
}

impl Diagnostics {
    /// Fraction of within-model updates accepted over all chains.
    pub fn within_acceptance(&self) -> f64 {
        let (a, n) = self
            .chains
            .iter()
            .fold((0u64, 0u64), |(a, n), c| (a + c.within.accepted, n + c.within.proposed));
        if n == 0 {
            0.0
        } else {
            a as f64 / n as f64
        }
    }
}

/// Posterior edge and role probabilities for the inferred children.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub children: Vec<usize>,
    /// Entry (j, i): posterior probability that j is a parent of i.
    pub edge_prob: DMatrix<f64>,
    pub kinase_prob: DMatrix<f64>,
    pub inhibitor_prob: DMatrix<f64>,
    /// Per child: mechanisms by descending visit frequency.
    pub model_freq: BTreeMap<usize, Vec<(MechanismModel, f64)>>,
    pub diagnostics: Diagnostics,
}

#[derive(Serialize)]
pub struct DiagnosticsReport {
    pub max_discrepancy: f64,
    pub converged: bool,
    pub fraction_within_threshold: f64,
    pub flagged_pairs: usize,
    pub within_model_acceptance: f64,
    pub chains: Vec<ChainStats>,
}

impl PosteriorSummary {
    pub fn report(&self) -> DiagnosticsReport {
        let d = &self.diagnostics;
        DiagnosticsReport {
            max_discrepancy: d.max_discrepancy,
            converged: d.converged,
            fraction_within_threshold: d.fraction_within,
            flagged_pairs: d.flagged.len(),
            within_model_acceptance: d.within_acceptance(),
            chains: d.chains.clone(),
        }
    }
}

/// Pool per-restart tallies into posterior probabilities.
///
/// `per_child` holds, for each inferred child, one tally per restart and the
/// matching chain statistics (which may be empty).
pub fn summarize(p: usize, per_child: Vec<(Vec<EdgeTally>, Vec<ChainStats>)>) -> Result<PosteriorSummary> {
    if per_child.is_empty() {
        return Err(Error::EmptySamples("no children to summarize".into()));
    }
    let n_restarts = per_child.iter().map(|(t, _)| t.len()).max().unwrap_or(0);
    let mut edge_prob = DMatrix::zeros(p, p);
    let mut kinase_prob = DMatrix::zeros(p, p);
    let mut inhibitor_prob = DMatrix::zeros(p, p);
    let mut per_restart = vec![DMatrix::zeros(p, p); n_restarts];
    let mut discrepancy = DMatrix::zeros(p, p);
    let mut model_freq = BTreeMap::new();
    let mut children = Vec::new();
    let mut chains = Vec::new();
    let mut flagged = Vec::new();
    let mut pairs = 0usize;

    for (tallies, stats) in per_child {
        let Some(first) = tallies.first() else {
            return Err(Error::EmptySamples("child with no restarts".into()));
        };
        let child = first.child;
        if let Some(t) = tallies.iter().find(|t| t.samples == 0 || t.child != child || t.edge.len() != p) {
            return Err(Error::EmptySamples(format!(
                "restart for child {} has {} samples",
                t.child, t.samples
            )));
        }
        children.push(child);
        chains.extend(stats);

        let total: usize = tallies.iter().map(|t| t.samples).sum();
        let pooled = |field: fn(&EdgeTally) -> &Vec<usize>, j: usize| {
            tallies.iter().map(|t| field(t)[j]).sum::<usize>() as f64 / total as f64
        };
        for j in (0..p).filter(|&j| j != child) {
            edge_prob[(j, child)] = pooled(|t| &t.edge, j);
            kinase_prob[(j, child)] = pooled(|t| &t.kinase, j);
            inhibitor_prob[(j, child)] = pooled(|t| &t.inhibitor, j);
            let probs: Vec<f64> = tallies.iter().map(|t| t.edge_prob(j)).collect();
            for (r, &pr) in probs.iter().enumerate() {
                per_restart[r][(j, child)] = pr;
            }
            let hi = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = probs.iter().cloned().fold(f64::INFINITY, f64::min);
            discrepancy[(j, child)] = hi - lo;
            pairs += 1;
            if hi - lo > DISCREPANCY_THRESHOLD {
                flagged.push((j, child));
            }
        }

        let mut freq: BTreeMap<MechanismModel, usize> = BTreeMap::new();
        for t in &tallies {
            for (m, &c) in &t.models {
                *freq.entry(m.clone()).or_default() += c;
            }
        }
        let mut freq: Vec<(MechanismModel, f64)> =
            freq.into_iter().map(|(m, c)| (m, c as f64 / total as f64)).collect();
        freq.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        model_freq.insert(child, freq);
    }

    let max_discrepancy = discrepancy.iter().cloned().fold(0.0, f64::max);
    if !flagged.is_empty() {
        log::warn!(
            "{} of {pairs} (child, candidate) pairs differ by more than {DISCREPANCY_THRESHOLD} across restarts",
            flagged.len()
        );
    }
    Ok(PosteriorSummary {
        children,
        edge_prob,
        kinase_prob,
        inhibitor_prob,
        model_freq,
        diagnostics: Diagnostics {
            per_restart,
            discrepancy,
            max_discrepancy,
            converged: max_discrepancy <= DISCREPANCY_THRESHOLD,
            fraction_within: if pairs == 0 { 1.0 } else { 1.0 - flagged.len() as f64 / pairs as f64 },
            flagged,
            chains,
        },
    })
}
