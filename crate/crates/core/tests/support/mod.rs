//! Independent reference computations shared by integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use gknet::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

/// Kinase index with its inhibitor indices.
pub type Mechanism = Vec<(usize, Vec<usize>)>;

/// Predicted phospho level. `params[k] = (v, K, K_I per inhibitor)`.
pub fn gk(row: &[f64], x0: f64, mech: &Mechanism, params: &[(f64, f64, Vec<f64>)]) -> f64 {
    let mut f = 0.0;
    for ((e, inh), (v, k, kis)) in mech.iter().zip(params) {
        let mut scale = 1.0;
        for (i, ki) in inh.iter().zip(kis) {
            scale += row[*i] / ki;
        }
        f += v * row[*e] * x0 / (x0 + k * scale);
    }
    f
}

/// log ∫ InvGamma(σ; 6, 1) · Π_s N(r_s; 0, σ²) dσ as a function of Σ r_s²,
/// tabulated on a log-ssr grid.
pub struct SigmaMarginal {
    n: usize,
    lo: f64,
    h: f64,
    table: Vec<f64>,
}

impl SigmaMarginal {
    pub fn new(n: usize) -> Self {
        let (lo, hi, h) = (-40.0, 12.0, 0.005);
        let count = ((hi - lo) / h) as usize + 1;
        let table = (0..count).map(|k| Self::direct(n, (lo + k as f64 * h).exp())).collect();
        Self { n, lo, h, table }
    }

    /// Trapezoid rule in t = log σ.
    pub fn direct(n: usize, ssr: f64) -> f64 {
        let (a, b, m) = (-14.0, 6.0, 8000);
        let dt = (b - a) / m as f64;
        let nf = n as f64;
        let log_norm = 6.0 * 1f64.ln() - ln_gamma(6.0);
        let terms: Vec<f64> = (0..=m)
            .map(|k| {
                let t = a + k as f64 * dt;
                let s2 = (2.0 * t).exp();
                let w: f64 = if k == 0 || k == m { 0.5 } else { 1.0 };
                // InvGamma density times dσ/dt = σ.
                let prior = log_norm - 7.0 * t - (-t).exp() + t;
                let lik = -0.5 * nf * (2.0 * std::f64::consts::PI * s2).ln() - ssr / (2.0 * s2);
                w.ln() + prior + lik
            })
            .collect();
        log_sum_exp(&terms) + dt.ln()
    }

    pub fn log_value(&self, ssr: f64) -> f64 {
        let x = (ssr.ln() - self.lo) / self.h;
        if x < 0.0 || x >= (self.table.len() - 1) as f64 {
            return Self::direct(self.n, ssr);
        }
        let k = x.floor() as usize;
        let frac = x - k as f64;
        self.table[k] * (1.0 - frac) + self.table[k + 1] * frac
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// All mechanisms for `child` with at most `d` kinases and `m` inhibitors each.
pub fn enumerate_mechanisms(child: usize, p: usize, d: usize, m: usize) -> Vec<Mechanism> {
    let others: Vec<usize> = (0..p).filter(|&j| j != child).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << others.len()) {
        let kinases: Vec<usize> = others.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &j)| j).collect();
        if kinases.len() > d {
            continue;
        }
        let mut partial: Vec<Mechanism> = vec![Vec::new()];
        for &e in &kinases {
            let pool: Vec<usize> = others.iter().copied().filter(|&j| j != e).collect();
            let mut next = Vec::new();
            for pm in &partial {
                for imask in 0u32..(1 << pool.len()) {
                    let inh: Vec<usize> = pool.iter().enumerate().filter(|(b, _)| imask >> b & 1 == 1).map(|(_, &j)| j).collect();
                    if inh.len() <= m {
                        let mut q = pm.clone();
                        q.push((e, inh));
                        next.push(q);
                    }
                }
            }
            partial = next;
        }
        out.extend(partial);
    }
    out
}

pub fn parent_count(mech: &Mechanism) -> usize {
    let mut parents: Vec<usize> = mech.iter().flat_map(|(e, inh)| std::iter::once(*e).chain(inh.iter().copied())).collect();
    parents.sort_unstable();
    parents.dedup();
    parents.len()
}

/// Equal mass per parent-count group, uniform within each group.
pub fn log_model_prior(models: &[Mechanism]) -> Vec<f64> {
    let mut groups: BTreeMap<usize, usize> = BTreeMap::new();
    for m in models {
        *groups.entry(parent_count(m)).or_default() += 1;
    }
    let g = groups.len() as f64;
    models.iter().map(|m| -(g.ln()) - (groups[&parent_count(m)] as f64).ln()).collect()
}

/// Child-specific view of a normalized dataset.
pub struct ChildObs {
    pub rows: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    pub log_y: Vec<f64>,
    pub mu: f64,
}

impl ChildObs {
    pub fn new(data: &Dataset, child: usize) -> Self {
        let ph = data.phospho();
        let n = data.n_samples();
        let rows: Vec<Vec<f64>> = (0..n).map(|s| ph.row(s).iter().copied().collect()).collect();
        let col: Vec<f64> = (0..n).map(|s| ph[(s, child)]).collect();
        Self {
            x0: (0..n).map(|s| data.unphospho()[(s, child)]).collect(),
            log_y: col.iter().map(|x| x.ln()).collect(),
            mu: col.iter().sum::<f64>() / n as f64,
            rows,
        }
    }
}

/// log p(D | M) by importance sampling kinetic parameters from their priors
/// with σ integrated out numerically.
pub fn log_evidence(obs: &ChildObs, mech: &Mechanism, sigma: &SigmaMarginal, draws: usize, seed: u64) -> f64 {
    let ssr_of = |f: &dyn Fn(usize) -> f64| -> f64 {
        obs.log_y.iter().enumerate().map(|(s, y)| (y - f(s).ln()).powi(2)).sum()
    };
    if mech.is_empty() {
        return sigma.log_value(ssr_of(&|_| obs.mu));
    }
    let gamma = Gamma::new(2.0, 0.5).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut terms = Vec::with_capacity(draws);
    for _ in 0..draws {
        let params: Vec<(f64, f64, Vec<f64>)> = mech
            .iter()
            .map(|(_, inh)| {
                let v = gamma.sample(&mut rng);
                let k = gamma.sample(&mut rng);
                (v, k, inh.iter().map(|_| gamma.sample(&mut rng)).collect())
            })
            .collect();
        let ssr = ssr_of(&|s| gk(&obs.rows[s], obs.x0[s], mech, &params));
        terms.push(sigma.log_value(ssr));
    }
    log_sum_exp(&terms) - (draws as f64).ln()
}

/// Exact posterior over every mechanism for one child, by enumeration.
pub fn posterior_oracle(data: &Dataset, child: usize, d: usize, m: usize, draws: usize, seed: u64) -> Vec<(Mechanism, f64)> {
    let obs = ChildObs::new(data, child);
    let sigma = SigmaMarginal::new(data.n_samples());
    let models = enumerate_mechanisms(child, data.n_species(), d, m);
    let prior = log_model_prior(&models);
    let log_post: Vec<f64> = models
        .iter()
        .zip(&prior)
        .enumerate()
        .map(|(k, (mech, lp))| lp + log_evidence(&obs, mech, &sigma, draws, seed.wrapping_add(k as u64)))
        .collect();
    let z = log_sum_exp(&log_post);
    models.into_iter().zip(log_post).map(|(mech, l)| (mech, (l - z).exp())).collect()
}

/// Mechanism as used by the library.
pub fn to_model(child: usize, p: usize, mech: &Mechanism) -> gknet::MechanismModel {
    gknet::MechanismModel::new(child, p, mech.iter().cloned()).unwrap()
}

/// A small normalized dataset whose child follows a random GK mechanism.
pub fn random_problem(p: usize, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let gamma = Gamma::new(2.0, 0.5).unwrap();
    let normal = rand_distr::Normal::new(0.0, 0.2).unwrap();
    let mut ph = nalgebra::DMatrix::zeros(n, p);
    let mut un = nalgebra::DMatrix::zeros(n, p);
    for s in 0..n {
        for j in 0..p {
            ph[(s, j)] = (0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal)).exp();
            un[(s, j)] = (0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal)).exp();
        }
    }
    let e = rng.random_range(1..p);
    let (v, k): (f64, f64) = (gamma.sample(&mut rng), gamma.sample(&mut rng));
    for s in 0..n {
        let row: Vec<f64> = ph.row(s).iter().copied().collect();
        let f = gk(&row, un[(s, 0)], &vec![(e, vec![])], &[(v, k, vec![])]);
        ph[(s, 0)] = f * Distribution::<f64>::sample(&normal, &mut rng).exp();
    }
    let names = (0..p).map(|j| format!("S{j}")).collect();
    Dataset::new(names, ph, un).unwrap().normalize_unit_mean().unwrap()
}

/// Mechanism and parameter tuples of one simulated node.
pub fn node_mechanism(node: &gknet::sim::NodeTruth) -> (Mechanism, Vec<(f64, f64, Vec<f64>)>) {
    let mut mech = Vec::new();
    let mut params = Vec::new();
    for e in node.model.kinases() {
        let inh: Vec<usize> = node.model.inhibitors(e).unwrap().iter().copied().collect();
        let kp = &node.params.kinases[&e];
        params.push((kp.v, kp.k, inh.iter().map(|i| kp.k_inhibitors[i]).collect()));
        mech.push((e, inh));
    }
    (mech, params)
}

/// Steady state of an acyclic network, visiting nodes parents-first and
/// solving each scalar balance with the Illinois variant of regula falsi.
pub fn topological_solve(net: &gknet::sim::GroundTruthNetwork, totals: &[f64]) -> Option<Vec<f64>> {
    let p = net.nodes.len();
    let parents: Vec<Vec<usize>> = net.nodes.iter().map(|n| n.model.parents().into_iter().collect()).collect();
    let mut x = vec![f64::NAN; p];
    let mut done = vec![false; p];
    for _ in 0..p {
        let i = (0..p).find(|&i| !done[i] && parents[i].iter().all(|&j| done[j]))?;
        let node = &net.nodes[i];
        let u = totals[i];
        x[i] = match node.activation {
            Some(phi) => phi * u,
            None => {
                let (mech, params) = node_mechanism(node);
                let h = |xi: f64, row: &[f64]| xi - gk(row, u - xi, &mech, &params);
                let (mut a, mut b) = (0.0, u);
                let (mut fa, mut fb) = (h(a, &x), h(b, &x));
                let mut side = 0;
                for _ in 0..500 {
                    let c = (a * fb - b * fa) / (fb - fa);
                    let fc = h(c, &x);
                    if fc == 0.0 || (b - a).abs() <= 1e-15 * u {
                        a = c;
                        b = c;
                        break;
                    }
                    if fc.signum() == fb.signum() {
                        b = c;
                        fb = fc;
                        if side == -1 {
                            fa /= 2.0;
                        }
                        side = -1;
                    } else {
                        a = c;
                        fa = fc;
                        if side == 1 {
                            fb /= 2.0;
                        }
                        side = 1;
                    }
                }
                0.5 * (a + b)
            }
        };
        done[i] = true;
    }
    Some(x)
}
