use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::LinearDesign;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub folds: usize,
    pub n_lambda: usize,
    /// Smallest λ as a fraction of λ_max.
    pub lambda_ratio: f64,
    pub seed: u64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl LassoConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            folds: 5,
            n_lambda: 100,
            lambda_ratio: 1e-4,
            seed,
            tol: 1e-10,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    /// Descending penalty grid.
    pub lambdas: Vec<f64>,
    /// Mean squared held-out prediction error per λ.
    pub cv_error: Vec<f64>,
    pub lambda_cv: f64,
    /// Coefficients on the standardized scale at λ_cv.
    pub coefficients: Vec<f64>,
    /// |β̂| at λ_cv, with exact zeros reported as NA.
    pub weights: Vec<Option<f64>>,
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Coordinate descent for (1/2n)‖y − Xβ‖² + λ‖β‖₁ along a descending λ
/// grid with warm starts. Columns outside `active` stay at zero.
fn path(x: &DMatrix<f64>, y: &DVector<f64>, active: &[usize], lambdas: &[f64], tol: f64, max_sweeps: usize) -> Vec<Vec<f64>> {
    let n = y.len() as f64;
    let scale: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).norm_squared() / n).collect();
    let mut beta = vec![0.0; x.ncols()];
    let mut resid = y.clone();
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        for _ in 0..max_sweeps {
            let mut change: f64 = 0.0;
            for &j in active {
                if scale[j] == 0.0 {
                    continue;
                }
                let col = x.column(j);
                let z = col.dot(&resid) / n + scale[j] * beta[j];
                let next = soft_threshold(z, lambda) / scale[j];
                let delta = next - beta[j];
                if delta != 0.0 {
                    resid.axpy(-delta, &col, 1.0);
                    beta[j] = next;
                    change = change.max(delta.abs() * scale[j].sqrt());
                }
            }
            if change < tol {
                break;
            }
        }
        out.push(beta.clone());
    }
    out
}

fn lambda_grid(lambda_max: f64, config: &LassoConfig) -> Vec<f64> {
    let k = config.n_lambda;
    if k == 1 {
        return vec![lambda_max];
    }
    let (hi, lo) = (lambda_max.ln(), (lambda_max * config.lambda_ratio).ln());
    (0..k).map(|i| (hi + (lo - hi) * i as f64 / (k - 1) as f64).exp()).collect()
}

/// Coefficients of the full-data fit at each λ.
pub fn lasso_path(design: &LinearDesign, lambdas: &[f64], config: &LassoConfig) -> Vec<Vec<f64>> {
    path(&design.candidates, &design.response, &design.active(), lambdas, config.tol, config.max_sweeps)
}

/// LASSO with the penalty chosen by K-fold cross-validation. Ties in CV
/// error go to the larger penalty.
pub fn lasso_cv(design: &LinearDesign, config: &LassoConfig) -> Result<LassoFit> {
    let n = design.n_samples();
    let k = config.folds;
    if !(k >= 2 && n >= k) {
        return Err(Error::Config(format!("need n ≥ folds ≥ 2, got n = {n}, folds = {k}")));
    }
    if config.n_lambda == 0 || !(config.lambda_ratio > 0.0 && config.lambda_ratio < 1.0) {
        return Err(Error::Config("invalid λ grid".into()));
    }
    let (x, y) = (&design.candidates, &design.response);
    let active = design.active();
    let lambda_max = active
        .iter()
        .map(|&j| (x.column(j).dot(y) / n as f64).abs())
        .fold(0.0, f64::max);
    let p = design.n_candidates();
    if !(lambda_max > 0.0) {
        return Ok(LassoFit {
            lambdas: Vec::new(),
            cv_error: Vec::new(),
            lambda_cv: 0.0,
            coefficients: vec![0.0; p],
            weights: vec![None; p],
        });
    }
    let lambdas = lambda_grid(lambda_max, config);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(config.seed, Purpose::Folds, design.child as u64, 0));
    let mut fold_of = vec![0; n];
    for (pos, &s) in order.iter().enumerate() {
        fold_of[s] = pos % k;
    }

    let mut sse = vec![0.0; lambdas.len()];
    for fold in 0..k {
        let train: Vec<usize> = (0..n).filter(|&s| fold_of[s] != fold).collect();
        let test: Vec<usize> = (0..n).filter(|&s| fold_of[s] == fold).collect();
        let y_mean = train.iter().map(|&s| y[s]).sum::<f64>() / train.len() as f64;
        let x_means: Vec<f64> = (0..p)
            .map(|j| train.iter().map(|&s| x[(s, j)]).sum::<f64>() / train.len() as f64)
            .collect();
        let xt = DMatrix::from_fn(train.len(), p, |r, j| x[(train[r], j)] - x_means[j]);
        let yt = DVector::from_iterator(train.len(), train.iter().map(|&s| y[s] - y_mean));
        let fits = path(&xt, &yt, &active, &lambdas, config.tol, config.max_sweeps);
        for (l, beta) in fits.iter().enumerate() {
            for &s in &test {
                let pred = y_mean + (0..p).map(|j| (x[(s, j)] - x_means[j]) * beta[j]).sum::<f64>();
                sse[l] += (y[s] - pred).powi(2);
            }
        }
    }
    let cv_error: Vec<f64> = sse.iter().map(|e| e / n as f64).collect();
    let mut best = 0;
    for (l, &e) in cv_error.iter().enumerate() {
        if e < cv_error[best] {
            best = l;
        }
    }
    let full = path(x, y, &active, &lambdas, config.tol, config.max_sweeps);
    let coefficients = full[best].clone();
    let weights = coefficients.iter().map(|&b| (b != 0.0).then_some(b.abs())).collect();
    Ok(LassoFit {
        lambda_cv: lambdas[best],
        lambdas,
        cv_error,
        coefficients,
        weights,
    })
}
