//! Linear baselines on log-transformed, standardized data.
//!
//! Columns are standardized with the population standard deviation, so every
//! non-degenerate column satisfies xᵀx = n.

mod gprior;
mod lasso;

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::method::Method;

pub use gprior::{bayes_inclusion_probs, gprior_log_evidence, MAX_BAYES_CANDIDATES, MAX_SUBSET_SIZE};
pub use lasso::{lasso_cv, lasso_path, LassoConfig, LassoFit};

/// Shifts and scales applied to the raw log columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub response_mean: f64,
    pub response_sd: f64,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Positions (into the candidate list) of zero-variance columns, which
    /// are kept as all-zero columns and never selected.
    pub dropped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearDesign {
    pub child: usize,
    pub response: DVector<f64>,
    /// n × (p − 1), one column per candidate.
    pub candidates: DMatrix<f64>,
    /// Species index of each candidate column.
    pub candidate_ids: Vec<usize>,
    pub standardization: Standardization,
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Columns whose spread is indistinguishable from rounding are degenerate.
fn is_degenerate(mean: f64, sd: f64) -> bool {
    !(sd > 1e-12 * mean.abs().max(1.0))
}

impl LinearDesign {
    /// Standardize a raw response and candidate matrix.
    pub fn from_columns(child: usize, response: &[f64], candidates: &DMatrix<f64>, candidate_ids: Vec<usize>) -> Result<Self> {
        let n = response.len();
        if candidates.nrows() != n || candidates.ncols() != candidate_ids.len() {
            return Err(Error::InvalidInput("design shape mismatch".into()));
        }
        if n < 2 {
            return Err(Error::InvalidInput("need at least two samples".into()));
        }
        if response.iter().chain(candidates.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite design entry".into()));
        }
        let (ry, sy) = mean_sd(response);
        if is_degenerate(ry, sy) {
            return Err(Error::ZeroVariance(format!("response of child {child}")));
        }
        let y = DVector::from_iterator(n, response.iter().map(|v| (v - ry) / sy));
        let mut x = DMatrix::zeros(n, candidates.ncols());
        let mut means = Vec::with_capacity(candidates.ncols());
        let mut sds = Vec::with_capacity(candidates.ncols());
        let mut dropped = Vec::new();
        for (c, col) in candidates.column_iter().enumerate() {
            let raw: Vec<f64> = col.iter().copied().collect();
            let (m, s) = mean_sd(&raw);
            means.push(m);
            sds.push(s);
            if is_degenerate(m, s) {
                log::warn!("candidate {} has zero variance; excluded for child {child}", candidate_ids[c]);
                dropped.push(c);
                continue;
            }
            for r in 0..n {
                x[(r, c)] = (raw[r] - m) / s;
            }
        }
        Ok(Self {
            child,
            response: y,
            candidates: x,
            candidate_ids,
            standardization: Standardization {
                response_mean: ry,
                response_sd: sy,
                means,
                sds,
                dropped,
            },
        })
    }

    pub fn n_samples(&self) -> usize {
        self.response.len()
    }

    pub fn n_candidates(&self) -> usize {
        self.candidate_ids.len()
    }

    /// Candidate positions with usable (nonzero-variance) columns.
    pub fn active(&self) -> Vec<usize> {
        (0..self.n_candidates())
            .filter(|c| !self.standardization.dropped.contains(c))
            .collect()
    }
}

/// Response log X_child (or log(X_child / U_child) when adjusted) against
/// log X_j for every other species, all standardized.
pub fn make_design(data: &Dataset, child: usize, adjusted: bool) -> Result<LinearDesign> {
    if !data.is_normalized() {
        return Err(Error::InvalidInput("linear baselines require normalized data".into()));
    }
    let (n, p) = (data.n_samples(), data.n_species());
    if child >= p {
        return Err(Error::InvalidInput(format!("child {child} out of range for p = {p}")));
    }
    let ph = data.phospho();
    let response: Vec<f64> = (0..n)
        .map(|s| {
            let x = ph[(s, child)];
            if adjusted {
                (x / data.total(s, child)).ln()
            } else {
                x.ln()
            }
        })
        .collect();
    let ids: Vec<usize> = (0..p).filter(|&j| j != child).collect();
    let raw = DMatrix::from_fn(n, ids.len(), |s, c| ph[(s, ids[c])].ln());
    LinearDesign::from_columns(child, &response, &raw, ids)
}

/// Per-candidate weights for one child. `None` marks an NA weight.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateWeights {
    pub child: usize,
    pub method: Method,
    pub candidates: Vec<usize>,
    pub weights: Vec<Option<f64>>,
}

impl CandidateWeights {
    pub fn weight_of(&self, candidate: usize) -> Option<Option<f64>> {
        self.candidates.iter().position(|&c| c == candidate).map(|k| self.weights[k])
    }
}

/// Score every candidate of `child` with a linear method.
pub fn linear_weights(data: &Dataset, child: usize, method: Method, lasso: &LassoConfig) -> Result<CandidateWeights> {
    let design = make_design(data, child, method.is_adjusted())?;
    let weights = match method {
        Method::LinBayes | Method::LinBayesAdj => bayes_inclusion_probs(&design)?.into_iter().map(Some).collect(),
        Method::Lasso | Method::LassoAdj => lasso_cv(&design, lasso)?.weights,
        Method::Gk => return Err(Error::Config("gk is not a linear method".into())),
    };
    Ok(CandidateWeights {
        child,
        method,
        candidates: design.candidate_ids,
        weights,
    })
}
