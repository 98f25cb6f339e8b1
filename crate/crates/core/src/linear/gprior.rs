use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use super::LinearDesign;
use crate::error::{Error, Result};
use crate::prior::binomial;

/// Largest subset size enumerated by the Bayesian baseline.
pub const MAX_SUBSET_SIZE: usize = 3;
/// Largest candidate count accepted for exhaustive enumeration.
pub const MAX_BAYES_CANDIDATES: usize = 40;

enum Evidence {
    Value(f64),
    RankDeficient,
}

/// Log marginal likelihood of `y` regressed on the columns `subset` of `x`
/// under a flat intercept, p(σ) ∝ 1/σ and β ~ N(0, gσ²(XᵀX)⁻¹) with g = n.
fn evidence(y: &DVector<f64>, x: &DMatrix<f64>, subset: &[usize]) -> Evidence {
    let n = y.len();
    let nf = n as f64;
    let d = subset.len();
    let g = nf;
    let y_mean = y.mean();
    let yc = y.map(|v| v - y_mean);
    let yty = yc.dot(&yc);

    let mut fit = 0.0;
    if d > 0 {
        let mut xm = DMatrix::zeros(n, d);
        for (k, &c) in subset.iter().enumerate() {
            let col = x.column(c);
            let m = col.mean();
            for r in 0..n {
                xm[(r, k)] = col[r] - m;
            }
        }
        let xtx = xm.transpose() * &xm;
        let scale = xtx.diagonal().max();
        let Some(chol) = xtx.clone().cholesky() else {
            return Evidence::RankDeficient;
        };
        let l = chol.l();
        if !(scale > 0.0) || (0..d).any(|k| l[(k, k)].powi(2) < 1e-10 * scale) {
            return Evidence::RankDeficient;
        }
        let xty = xm.transpose() * &yc;
        fit = xty.dot(&chol.solve(&xty));
    }
    let s = yty - g / (1.0 + g) * fit;
    let m = (nf - 1.0) / 2.0;
    Evidence::Value(
        -m * std::f64::consts::PI.ln() - 0.5 * nf.ln() - std::f64::consts::LN_2 + ln_gamma(m)
            - 0.5 * d as f64 * (1.0 + g).ln()
            - m * s.ln(),
    )
}

/// Log marginal likelihood of the design's response given the candidate
/// columns in `subset`; −∞ when those columns are linearly dependent.
pub fn gprior_log_evidence(design: &LinearDesign, subset: &[usize]) -> Result<f64> {
    let n = design.n_samples();
    if subset.len() > MAX_SUBSET_SIZE.min(n.saturating_sub(2)) {
        return Err(Error::InvalidInput(format!(
            "subset of size {} exceeds min({MAX_SUBSET_SIZE}, n − 2) for n = {n}",
            subset.len()
        )));
    }
    if let Some(&c) = subset.iter().find(|&&c| c >= design.n_candidates()) {
        return Err(Error::InvalidInput(format!("candidate position {c} out of range")));
    }
    Ok(match evidence(&design.response, &design.candidates, subset) {
        Evidence::Value(v) => v,
        Evidence::RankDeficient => {
            log::warn!("rank-deficient design for subset {subset:?} of child {}", design.child);
            f64::NEG_INFINITY
        }
    })
}

/// Visit every subset of `items` with at most `max` elements.
fn for_each_subset(items: &[usize], max: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(items: &[usize], start: usize, max: usize, cur: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        visit(cur);
        if cur.len() == max {
            return;
        }
        for k in start..items.len() {
            cur.push(items[k]);
            rec(items, k + 1, max, cur, visit);
            cur.pop();
        }
    }
    rec(items, 0, max, &mut Vec::new(), visit);
}

/// Posterior inclusion probability of every candidate, averaging over all
/// subsets of at most three usable candidates. Each subset size gets equal
/// prior mass, split uniformly among subsets of that size.
pub fn bayes_inclusion_probs(design: &LinearDesign) -> Result<Vec<f64>> {
    let active = design.active();
    if active.len() > MAX_BAYES_CANDIDATES {
        return Err(Error::Config(format!(
            "exhaustive enumeration supports at most {MAX_BAYES_CANDIDATES} candidates, got {}",
            active.len()
        )));
    }
    let max = MAX_SUBSET_SIZE.min(design.n_samples().saturating_sub(2)).min(active.len());
    let strata = (max + 1) as f64;
    let mut subsets = Vec::new();
    let mut log_post = Vec::new();
    let mut deficient = 0usize;
    for_each_subset(&active, max, &mut |subset| {
        let count = binomial(active.len(), subset.len()).expect("small binomial") as f64;
        let log_prior = -strata.ln() - count.ln();
        match evidence(&design.response, &design.candidates, subset) {
            Evidence::Value(v) => {
                subsets.push(subset.to_vec());
                log_post.push(v + log_prior);
            }
            Evidence::RankDeficient => deficient += 1,
        }
    });
    if deficient > 0 {
        log::warn!("{deficient} rank-deficient subsets skipped for child {}", design.child);
    }
    let top = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_post.iter().map(|l| (l - top).exp()).sum();
    let mut probs = vec![0.0; design.n_candidates()];
    for (subset, l) in subsets.iter().zip(&log_post) {
        let w = (l - top).exp() / z;
        for &c in subset {
            probs[c] += w;
        }
    }
    Ok(probs.into_iter().map(|p| p.clamp(0.0, 1.0)).collect())
}
