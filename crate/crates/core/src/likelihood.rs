//! Log-normal observation model for one child species.

use std::f64::consts::PI;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mechanism::{eval_gk, KineticParams, MechanismModel};

/// Per-child view of a dataset laid out for repeated likelihood evaluation.
#[derive(Debug, Clone)]
pub struct ChildData {
    child: usize,
    p: usize,
    /// Phospho levels, row-major (sample × species).
    rows: Vec<f64>,
    /// Child's unphospho level per sample.
    unphospho: Vec<f64>,
    /// log X_child per sample.
    log_response: Vec<f64>,
    mu: f64,
}

impl ChildData {
    pub fn new(data: &Dataset, child: usize) -> Result<Self> {
        let p = data.n_species();
        if child >= p {
            return Err(Error::InvalidInput(format!("child {child} out of range for p = {p}")));
        }
        let n = data.n_samples();
        let ph = data.phospho();
        let mut rows = Vec::with_capacity(n * p);
        for s in 0..n {
            rows.extend(ph.row(s).iter().copied());
        }
        let mut log_response = Vec::with_capacity(n);
        for s in 0..n {
            let x = ph[(s, child)];
            if !(x > 0.0) {
                return Err(Error::UndefinedLikelihood {
                    child,
                    sample: s,
                    reason: "nonpositive child phospho level",
                });
            }
            log_response.push(x.ln());
        }
        Ok(Self {
            child,
            p,
            rows,
            unphospho: data.unphospho().column(child).iter().copied().collect(),
            log_response,
            mu: data.phospho_mean(child),
        })
    }

    /// No observations: the likelihood is identically 1.
    #[cfg(test)]
    pub(crate) fn without_samples(child: usize, p: usize) -> Self {
        Self {
            child,
            p,
            rows: Vec::new(),
            unphospho: Vec::new(),
            log_response: Vec::new(),
            mu: 1.0,
        }
    }

    pub fn child(&self) -> usize {
        self.child
    }

    pub fn n_species(&self) -> usize {
        self.p
    }

    pub fn n_samples(&self) -> usize {
        self.log_response.len()
    }

    /// Mean of the child's phospho column (1 for normalized data).
    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn row(&self, s: usize) -> &[f64] {
        &self.rows[s * self.p..(s + 1) * self.p]
    }

    /// Σ_s (log X_s − log f_s)².
    pub fn sum_sq_log_residuals(&self, params: &KineticParams) -> Result<f64> {
        let mut ssr = 0.0;
        for (s, &y) in self.log_response.iter().enumerate() {
            let f = eval_gk(params, self.row(s), self.unphospho[s])?;
            if !(f > 0.0) {
                return Err(Error::UndefinedLikelihood {
                    child: self.child,
                    sample: s,
                    reason: "nonpositive predicted level",
                });
            }
            let r = y - f.ln();
            ssr += r * r;
        }
        Ok(ssr)
    }

    /// Gaussian log-likelihood of the log-residuals with noise scale σ.
    pub fn log_likelihood(&self, params: &KineticParams) -> Result<f64> {
        let ssr = self.sum_sq_log_residuals(params)?;
        Ok(gaussian_log_lik(ssr, self.n_samples(), params.sigma))
    }
}

/// Σ log N(r_s; 0, σ²) given the residual sum of squares.
pub fn gaussian_log_lik(ssr: f64, n: usize, sigma: f64) -> f64 {
    let var = sigma * sigma;
    -0.5 * n as f64 * (2.0 * PI * var).ln() - ssr / (2.0 * var)
}

/// Log-likelihood of one child's phospho column under a mechanism.
pub fn log_likelihood(
    model: &MechanismModel,
    params: &KineticParams,
    data: &Dataset,
) -> Result<f64> {
    if !params.matches(model) {
        return Err(Error::InvalidInput(
            "parameter keys do not match mechanism structure".into(),
        ));
    }
    ChildData::new(data, model.child())?.log_likelihood(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::KinaseParams;
    use nalgebra::DMatrix;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("S{i}")).collect()
    }

    /// Child 0 with kinase 1, v = K = 1: f = X_1 X⁰ / (X⁰ + 1).
    fn one_kinase(sigma: f64) -> (MechanismModel, KineticParams) {
        let model = MechanismModel::new(0, 2, [(1, vec![])]).unwrap();
        let params = KineticParams {
            kinases: [(1, KinaseParams { v: 1.0, k: 1.0, k_inhibitors: Default::default() })].into(),
            sigma,
            mu: 1.0,
        };
        (model, params)
    }

    fn data(rows: &[[f64; 2]], unphospho_child: &[f64]) -> Dataset {
        let n = rows.len();
        let ph = DMatrix::from_fn(n, 2, |r, c| rows[r][c]);
        let un = DMatrix::from_fn(n, 2, |r, c| if c == 0 { unphospho_child[r] } else { 1.0 });
        Dataset::new_normalized(names(2), ph, un).unwrap()
    }

    #[test]
    fn zero_residual_single_sample() {
        let (m, p) = one_kinase(0.2);
        // X_1 = 1, X⁰ = 1 → f = 0.5; observe X_0 = 0.5.
        let d = data(&[[0.5, 1.0]], &[1.0]);
        let ll = log_likelihood(&m, &p, &d).unwrap();
        let expected = -0.5 * (2.0 * PI * 0.04f64).ln();
        assert!((ll - expected).abs() < 1e-12);
        assert!((ll - 0.6905).abs() < 1e-4);
    }

    #[test]
    fn zero_residual_is_additive_over_samples() {
        let (m, p) = one_kinase(0.2);
        let d = data(&[[0.5, 1.0], [0.5, 1.0]], &[1.0, 1.0]);
        let ll = log_likelihood(&m, &p, &d).unwrap();
        assert!((ll + (2.0 * PI * 0.04f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn unit_residual_is_standard_normal_log_density() {
        let (m, p) = one_kinase(1.0);
        let d = data(&[[0.5 * std::f64::consts::E, 1.0]], &[1.0]);
        let ll = log_likelihood(&m, &p, &d).unwrap();
        let expected = -0.5 * (2.0 * PI).ln() - 0.5;
        assert!((ll - expected).abs() < 1e-12);
        assert!((ll + 1.4189).abs() < 1e-4);
    }

    #[test]
    fn nonpositive_response_is_undefined() {
        let (m, p) = one_kinase(0.2);
        let ph = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let d = Dataset::new(names(2), ph, DMatrix::from_element(1, 2, 1.0)).unwrap();
        assert!(matches!(
            log_likelihood(&m, &p, &d),
            Err(Error::UndefinedLikelihood { .. })
        ));
    }

    #[test]
    fn underflowing_prediction_is_undefined() {
        let (m, mut p) = one_kinase(0.2);
        p.kinases.get_mut(&1).unwrap().v = 1e-320;
        let d = data(&[[0.5, 1e-10]], &[1.0]);
        assert!(matches!(
            log_likelihood(&m, &p, &d),
            Err(Error::UndefinedLikelihood { .. })
        ));
    }

    #[test]
    fn sigma_maximizer_is_root_mean_square_residual() {
        let (m, p) = one_kinase(1.0);
        let d = data(&[[0.7, 1.0], [0.2, 2.0], [1.1, 0.5], [0.4, 1.5]], &[1.0, 0.6, 2.0, 0.8]);
        let child = ChildData::new(&d, 0).unwrap();
        let ssr = child.sum_sq_log_residuals(&p).unwrap();
        let sigma_hat = (ssr / 4.0).sqrt();

        // Golden-section search on log σ.
        let ll = |log_s: f64| {
            let mut q = p.clone();
            q.sigma = log_s.exp();
            log_likelihood(&m, &q, &d).unwrap()
        };
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (-8.0, 3.0);
        while b - a > 1e-10 {
            let c = b - g * (b - a);
            let e = a + g * (b - a);
            if ll(c) > ll(e) {
                b = e;
            } else {
                a = c;
            }
        }
        assert!(((0.5 * (a + b)).exp() - sigma_hat).abs() < 1e-6 * sigma_hat);
    }
}
