//! ROC analysis of edge weights against known parent sets, and rank reports
//! for known regulators.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// One (child, candidate) pair. `weight = None` is NA; `label = None` is
/// unknown truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredEdge {
    pub child: String,
    pub candidate: String,
    pub weight: Option<f64>,
    pub label: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredEdges {
    pub method: String,
    pub edges: Vec<ScoredEdge>,
}

impl ScoredEdges {
    pub fn new(method: impl Into<String>, edges: Vec<ScoredEdge>) -> Result<Self> {
        for e in &edges {
            if e.child == e.candidate {
                return Err(Error::InvalidInput(format!("self edge for `{}`", e.child)));
            }
            if e.weight.is_some_and(|w| !w.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite weight for {} <- {}", e.child, e.candidate)));
            }
        }
        Ok(Self {
            method: method.into(),
            edges,
        })
    }

    /// (weight, label) for every edge with known truth.
    pub fn labelled(&self) -> Vec<(Option<f64>, bool)> {
        self.edges.iter().filter_map(|e| e.label.map(|l| (e.weight, l))).collect()
    }

    /// Pooled AUR over all children.
    pub fn aur(&self) -> Result<f64> {
        Ok(auc(&roc_curve(&self.labelled())?))
    }

    /// AUR of each child that has both positive and negative labels.
    pub fn per_child_aur(&self) -> BTreeMap<String, f64> {
        let mut by_child: BTreeMap<&str, Vec<(Option<f64>, bool)>> = BTreeMap::new();
        for e in &self.edges {
            if let Some(l) = e.label {
                by_child.entry(&e.child).or_default().push((e.weight, l));
            }
        }
        by_child
            .into_iter()
            .filter_map(|(c, s)| roc_curve(&s).ok().map(|pts| (c.to_string(), auc(&pts))))
            .collect()
    }
}

/// Descending order with NA below every number.
fn descending(a: &Option<f64>, b: &Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => y.total_cmp(x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// ROC points (FPR, TPR) from (0, 0) to (1, 1), one per distinct threshold.
pub fn roc_curve(scores: &[(Option<f64>, bool)]) -> Result<Vec<(f64, f64)>> {
    let positives = scores.iter().filter(|s| s.1).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels { positives, negatives });
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| descending(&a.0, &b.0));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < sorted.len() {
        let w = sorted[k].0;
        while k < sorted.len() && descending(&sorted[k].0, &w) == Ordering::Equal {
            if sorted[k].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    Ok(points)
}

/// Trapezoidal area under an ROC curve.
pub fn auc(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Position of a known regulator among candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankReport {
    pub known: String,
    /// Competition rank (1 = best); `None` when the known weight is NA.
    pub rank: Option<usize>,
    pub n_candidates: usize,
}

impl RankReport {
    pub fn rank_label(&self) -> String {
        self.rank.map_or_else(|| "NA".to_string(), |r| r.to_string())
    }
}

/// Rank `known` by descending weight after removing `exclude`. Tied
/// candidates share the best rank of their group.
pub fn rank_candidates(weights: &[(String, Option<f64>)], known: &str, exclude: &[String]) -> Result<RankReport> {
    let kept: Vec<&(String, Option<f64>)> = weights.iter().filter(|(c, _)| !exclude.contains(c)).collect();
    let (_, target) = kept
        .iter()
        .find(|(c, _)| c == known)
        .ok_or_else(|| Error::UnknownCandidate(known.to_string()))?;
    let rank = target.map(|w| 1 + kept.iter().filter(|(_, x)| x.is_some_and(|x| x > w)).count());
    Ok(RankReport {
        known: known.to_string(),
        rank,
        n_candidates: kept.len(),
    })
}
