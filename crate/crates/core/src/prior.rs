//! Prior densities over kinetic parameters and mechanism structure.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::mechanism::{KinaseParams, KineticParams, MechanismModel, ModelCaps};

/// Gamma distribution in shape/scale form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl GammaPrior {
    pub fn log_density(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        -ln_gamma(self.shape) - self.shape * self.scale.ln() + (self.shape - 1.0) * x.ln()
            - x / self.scale
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gamma::new(self.shape, self.scale)
            .expect("validated gamma parameters")
            .sample(rng)
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }
}

/// Inverse-gamma distribution: 1/x ~ Gamma(shape, 1/scale).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaPrior {
    pub fn log_density(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.shape * self.scale.ln() - ln_gamma(self.shape) - (self.shape + 1.0) * x.ln()
            - self.scale / x
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(self.shape, 1.0 / self.scale).expect("validated inverse-gamma parameters");
        1.0 / g.sample(rng)
    }

    pub fn mean(&self) -> f64 {
        self.scale / (self.shape - 1.0)
    }

    pub fn variance(&self) -> f64 {
        let a = self.shape;
        self.scale * self.scale / ((a - 1.0) * (a - 1.0) * (a - 2.0))
    }
}

/// Priors on rate ratios, Michaelis/inhibition constants and noise scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamPriors {
    pub rate: GammaPrior,
    pub michaelis: GammaPrior,
    pub sigma: InvGammaPrior,
}

impl Default for ParamPriors {
    /// V, K ~ Γ(2, ½) with unit mean and variance ½; σ ~ Γ⁻¹(6, 1) with mean
    /// 1/5 and variance 1/100.
    fn default() -> Self {
        Self {
            rate: GammaPrior { shape: 2.0, scale: 0.5 },
            michaelis: GammaPrior { shape: 2.0, scale: 0.5 },
            sigma: InvGammaPrior { shape: 6.0, scale: 1.0 },
        }
    }
}

impl ParamPriors {
    /// Joint log-density of every rate, constant and σ. μ carries no prior.
    pub fn log_prior(&self, params: &KineticParams) -> Result<f64> {
        let check = |name: &'static str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(x)
            } else {
                Err(Error::Domain { name, value: x })
            }
        };
        let mut lp = self.sigma.log_density(check("sigma", params.sigma)?);
        for kp in params.kinases.values() {
            lp += self.rate.log_density(check("v", kp.v)?);
            lp += self.michaelis.log_density(check("K_E", kp.k)?);
            for &ki in kp.k_inhibitors.values() {
                lp += self.michaelis.log_density(check("K_I", ki)?);
            }
        }
        Ok(lp)
    }

    /// Draw parameters for `model` from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, model: &MechanismModel, mu: f64, rng: &mut R) -> KineticParams {
        let mut kinases = BTreeMap::new();
        for (e, set) in model.mechanisms() {
            let v = self.rate.sample(rng);
            let k = self.michaelis.sample(rng);
            let k_inhibitors = set.iter().map(|&i| (i, self.michaelis.sample(rng))).collect();
            kinases.insert(e, KinaseParams { v, k, k_inhibitors });
        }
        KineticParams {
            kinases,
            sigma: self.sigma.sample(rng),
            mu,
        }
    }
}

/// Log-density of kinetic parameters under the default priors.
pub fn log_prior_params(params: &KineticParams) -> Result<f64> {
    ParamPriors::default().log_prior(params)
}

/// Tag recorded in every output that depends on the structure prior.
pub const MODEL_PRIOR_TAG: &str = "uniform-indegree";

/// Structure prior: equal mass for each parent-set size, uniform over
/// mechanisms within a size, optionally tilted toward a reference model.
#[derive(Debug, Clone)]
pub struct ModelPrior {
    child: usize,
    p: usize,
    caps: ModelCaps,
    kappa: f64,
    reference_parents: BTreeSet<usize>,
    /// Mechanism count per parent-set size.
    group_counts: Vec<u128>,
    /// log of the mass of each nonempty group's members (κ = 0).
    log_member_mass: Vec<f64>,
}

impl ModelPrior {
    pub fn new(child: usize, p: usize, caps: ModelCaps) -> Result<Self> {
        Self::with_reference(child, p, caps, 0.0, &MechanismModel::empty(child))
    }

    /// Prior tilted by exp(κ · |π ∩ π_ref|) toward a reference mechanism.
    /// With κ ≠ 0 the returned log-prior is unnormalized.
    pub fn with_reference(
        child: usize,
        p: usize,
        caps: ModelCaps,
        kappa: f64,
        reference: &MechanismModel,
    ) -> Result<Self> {
        if child >= p {
            return Err(Error::InvalidInput(format!("child {child} out of range for p = {p}")));
        }
        if !kappa.is_finite() {
            return Err(Error::Config(format!("prior-model bonus must be finite, got {kappa}")));
        }
        let group_counts = count_by_parent_size(p - 1, caps.max_kinases, caps.max_inhibitors)
            .ok_or_else(|| Error::Config("model space too large to count".into()))?;
        let n_groups = group_counts.iter().filter(|&&c| c > 0).count() as f64;
        let log_member_mass = group_counts
            .iter()
            .map(|&c| {
                if c == 0 {
                    f64::NEG_INFINITY
                } else {
                    -n_groups.ln() - (c as f64).ln()
                }
            })
            .collect();
        Ok(Self {
            child,
            p,
            caps,
            kappa,
            reference_parents: if kappa != 0.0 { reference.parents() } else { BTreeSet::new() },
            group_counts,
            log_member_mass,
        })
    }

    pub fn caps(&self) -> ModelCaps {
        self.caps
    }

    pub fn group_counts(&self) -> &[u128] {
        &self.group_counts
    }

    pub fn log_prior(&self, model: &MechanismModel) -> f64 {
        if model.child() != self.child || !model.within_caps(&self.caps) {
            return f64::NEG_INFINITY;
        }
        let parents = model.parents();
        let base = self.log_member_mass[parents.len()];
        if self.kappa == 0.0 {
            base
        } else {
            base + self.kappa * parents.intersection(&self.reference_parents).count() as f64
        }
    }

    /// Draw a mechanism from the untilted prior: pick a parent-set size
    /// uniformly among the attainable ones, then a mechanism uniformly within it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MechanismModel> {
        let sizes: Vec<usize> = (0..self.group_counts.len())
            .filter(|&s| self.group_counts[s] > 0)
            .collect();
        let size = sizes[rng.random_range(0..sizes.len())];
        if size == 0 {
            return Ok(MechanismModel::empty(self.child));
        }
        let q = self.p - 1;
        let m = self.caps.max_inhibitors.min(q.saturating_sub(1));
        let weights: Vec<(usize, u128)> = (1..=self.caps.max_kinases.min(q).min(size))
            .filter_map(|k| {
                let u = size - k;
                if u > q - k {
                    return None;
                }
                let w = binomial(q, k)?
                    .checked_mul(binomial(q - k, u)?)?
                    .checked_mul(u128::try_from(covering_tuples(k, u, m)?).ok()?)?;
                (w > 0).then_some((k, w))
            })
            .collect();
        let total: u128 = weights.iter().map(|w| w.1).sum();
        let mut ticket = (rng.random::<f64>() * total as f64) as u128;
        let mut k = weights[weights.len() - 1].0;
        for &(kk, w) in &weights {
            if ticket < w {
                k = kk;
                break;
            }
            ticket -= w;
        }
        let u = size - k;
        let others: Vec<usize> = (0..self.p).filter(|&j| j != self.child).collect();
        let picked = index::sample(rng, q, k + u).into_vec();
        let kinases: Vec<usize> = picked[..k].iter().map(|&ix| others[ix]).collect();
        let extra: BTreeSet<usize> = picked[k..].iter().map(|&ix| others[ix]).collect();

        const MAX_ATTEMPTS: usize = 1_000_000;
        for _ in 0..MAX_ATTEMPTS {
            let mut model = MechanismModel::empty(self.child);
            let mut covered = BTreeSet::new();
            for &e in &kinases {
                let allowed: Vec<usize> = kinases
                    .iter()
                    .copied()
                    .filter(|&x| x != e)
                    .chain(extra.iter().copied())
                    .collect();
                let set = uniform_small_subset(&allowed, m, rng);
                covered.extend(set.iter().copied().filter(|i| extra.contains(i)));
                model.insert_kinase(e, set);
            }
            if covered.len() == extra.len() {
                return Ok(model);
            }
        }
        Err(Error::Config(format!(
            "could not draw a mechanism with {size} parents from the prior"
        )))
    }
}

/// Uniform draw from subsets of `pool` with at most `max` elements.
fn uniform_small_subset<R: Rng + ?Sized>(pool: &[usize], max: usize, rng: &mut R) -> BTreeSet<usize> {
    let max = max.min(pool.len());
    let weights: Vec<f64> = (0..=max)
        .map(|a| binomial(pool.len(), a).map_or(f64::INFINITY, |c| c as f64))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut ticket = rng.random::<f64>() * total;
    let mut size = max;
    for (a, &w) in weights.iter().enumerate() {
        if ticket < w {
            size = a;
            break;
        }
        ticket -= w;
    }
    index::sample(rng, pool.len(), size)
        .into_iter()
        .map(|ix| pool[ix])
        .collect()
}

pub(crate) fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc.checked_mul((n - j) as u128)? / (j as u128 + 1);
    }
    Some(acc)
}

/// Number of inhibitor-set tuples (one set per kinase, each of size ≤ m and
/// drawn from the other k − 1 kinases plus u extra species) that use every
/// extra species at least once. Inclusion-exclusion over uncovered extras.
fn covering_tuples(k: usize, u: usize, m: usize) -> Option<i128> {
    let subsets_up_to = |pool: usize| -> Option<i128> {
        (0..=m).try_fold(0i128, |acc, a| acc.checked_add(i128::try_from(binomial(pool, a)?).ok()?))
    };
    let mut total: i128 = 0;
    for j in 0..=u {
        let h = subsets_up_to(k - 1 + u - j)?;
        let term = i128::try_from(binomial(u, j)?)
            .ok()?
            .checked_mul(h.checked_pow(k as u32)?)?;
        total = if j % 2 == 0 {
            total.checked_add(term)?
        } else {
            total.checked_sub(term)?
        };
    }
    Some(total)
}

/// Mechanism counts indexed by parent-set size for a child with `q`
/// candidate parents, at most `d` kinases and `m` inhibitors per kinase.
pub(crate) fn count_by_parent_size(q: usize, d: usize, m: usize) -> Option<Vec<u128>> {
    let m = m.min(q.saturating_sub(1));
    let mut counts = vec![0u128; q + 1];
    counts[0] = 1;
    for k in 1..=d.min(q) {
        for u in 0..=(q - k).min(k * m) {
            let c = binomial(q, k)?
                .checked_mul(binomial(q - k, u)?)?
                .checked_mul(u128::try_from(covering_tuples(k, u, m)?).ok()?)?;
            counts[k + u] = counts[k + u].checked_add(c)?;
        }
    }
    Some(counts)
}
