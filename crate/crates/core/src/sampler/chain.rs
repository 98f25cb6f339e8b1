use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::likelihood::{gaussian_log_lik, ChildData};
use crate::mechanism::{KinaseParams, KineticParams, MechanismModel};
use crate::prior::{binomial, ModelPrior, ParamPriors};
use crate::rng::{stream, Purpose, StreamRng};

use super::SamplerConfig;

/// One point of the across-model space with cached log-densities.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub model: MechanismModel,
    pub params: KineticParams,
    /// Log-likelihood of the child's data.
    pub cached_log_lik: f64,
    /// Structure prior plus parameter prior.
    pub cached_log_prior: f64,
    ssr: f64,
}

impl ChainState {
    pub fn log_posterior(&self) -> f64 {
        self.cached_log_lik + self.cached_log_prior
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    KinaseBirth,
    KinaseDeath,
    InhibitorBirth,
    InhibitorDeath,
    Swap,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += u64::from(accepted);
    }
}

/// Acceptance counts for one chain.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ChainStats {
    pub child: usize,
    pub restart: usize,
    pub kinase_birth: MoveStats,
    pub kinase_death: MoveStats,
    pub inhibitor_birth: MoveStats,
    pub inhibitor_death: MoveStats,
    pub swap: MoveStats,
    pub within: MoveStats,
    /// Structural proposals with no legal target (counted as rejected).
    pub no_op: u64,
    pub audits: u64,
}

impl ChainStats {
    fn for_kind(&mut self, kind: MoveKind) -> &mut MoveStats {
        match kind {
            MoveKind::KinaseBirth => &mut self.kinase_birth,
            MoveKind::KinaseDeath => &mut self.kinase_death,
            MoveKind::InhibitorBirth => &mut self.inhibitor_birth,
            MoveKind::InhibitorDeath => &mut self.inhibitor_death,
            MoveKind::Swap => &mut self.swap,
        }
    }

    pub fn structural_accepted(&self) -> u64 {
        [self.kinase_birth, self.kinase_death, self.inhibitor_birth, self.inhibitor_death, self.swap]
            .iter()
            .map(|m| m.accepted)
            .sum()
    }
}

/// A proposed structural jump with its log proposal ratio q(s'→s)/q(s→s').
struct Jump {
    kind: MoveKind,
    model: MechanismModel,
    params: KineticParams,
    log_proposal_ratio: f64,
}

/// Sampler state for one (child, restart) pair.
pub struct Chain<'a> {
    data: &'a ChildData,
    model_prior: &'a ModelPrior,
    priors: ParamPriors,
    config: &'a SamplerConfig,
    rng: StreamRng,
    state: ChainState,
    stats: ChainStats,
    /// Every species except the child.
    candidates: Vec<usize>,
}

impl<'a> Chain<'a> {
    /// Restart 0 starts from the empty mechanism; later restarts start from a
    /// mechanism drawn from the structure prior. Parameters come from their
    /// priors in both cases.
    pub fn new(data: &'a ChildData, model_prior: &'a ModelPrior, config: &'a SamplerConfig, restart: usize) -> Result<Self> {
        config.validate()?;
        let child = data.child();
        let p = data.n_species();
        let priors = ParamPriors::default();
        let mut rng = stream(config.seed, Purpose::Chain, child as u64, restart as u64);

        let mut start = None;
        if restart > 0 {
            let model = model_prior.sample(&mut rng)?;
            for _ in 0..100 {
                let params = priors.sample(&model, data.mu(), &mut rng);
                if let Some(state) = score(data, model_prior, &priors, model.clone(), params) {
                    start = Some(state);
                    break;
                }
            }
        }
        let state = match start {
            Some(s) => s,
            None => {
                let model = MechanismModel::empty(child);
                let params = priors.sample(&model, data.mu(), &mut rng);
                score(data, model_prior, &priors, model, params)
                    .ok_or_else(|| Error::InvalidInput(format!("empty mechanism has no support for child {child}")))?
            }
        };

        Ok(Self {
            data,
            model_prior,
            priors,
            config,
            rng,
            state,
            stats: ChainStats {
                child,
                restart,
                ..Default::default()
            },
            candidates: (0..p).filter(|&j| j != child).collect(),
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn stats(&self) -> &ChainStats {
        &self.stats
    }

    /// Run all iterations, handing each post-burn-in state to `visit`.
    pub fn run<F>(mut self, mut visit: F) -> Result<ChainStats>
    where
        F: FnMut(usize, &ChainState),
    {
        for iter in 0..self.config.total_iters {
            self.step()?;
            if (iter + 1) % self.config.audit_interval == 0 {
                self.audit(iter)?;
            }
            if iter >= self.config.burn_in {
                visit(iter, &self.state);
            }
        }
        Ok(self.stats)
    }

    /// One structural proposal followed by a full within-model sweep.
    pub fn step(&mut self) -> Result<()> {
        self.structural_move()?;
        let step = self.config.step_size_log;
        let (state, accepted, proposed) = sweep(self.data, self.model_prior, &self.priors, self.state.clone(), step, &mut self.rng);
        self.state = state;
        self.stats.within.accepted += accepted;
        self.stats.within.proposed += proposed;
        Ok(())
    }

    /// Recompute the caches from scratch and compare.
    pub fn audit(&mut self, iteration: usize) -> Result<()> {
        self.stats.audits += 1;
        let fresh = score(self.data, self.model_prior, &self.priors, self.state.model.clone(), self.state.params.clone())
            .ok_or(Error::CacheMismatch {
                iteration,
                cached: self.state.log_posterior(),
                fresh: f64::NAN,
            })?;
        for (cached, fresh) in [
            (self.state.cached_log_lik, fresh.cached_log_lik),
            (self.state.cached_log_prior, fresh.cached_log_prior),
        ] {
            if (cached - fresh).abs() > 1e-9 * fresh.abs().max(1.0) {
                return Err(Error::CacheMismatch { iteration, cached, fresh });
            }
        }
        Ok(())
    }

    fn structural_move(&mut self) -> Result<()> {
        let w = self.config.move_weights;
        let u: f64 = self.rng.random();
        let birth = self.rng.random_bool(0.5);
        let jump = if u < w.kinase {
            if birth {
                self.propose_kinase_birth()
            } else {
                self.propose_kinase_death()
            }
        } else if u < w.kinase + w.inhibitor {
            if birth {
                self.propose_inhibitor_birth()
            } else {
                self.propose_inhibitor_death()
            }
        } else {
            self.propose_swap()
        };
        let Some(jump) = jump else {
            self.stats.no_op += 1;
            return Ok(());
        };
        let accepted = match score(self.data, self.model_prior, &self.priors, jump.model, jump.params) {
            Some(next) => {
                let log_alpha = next.log_posterior() - self.state.log_posterior() + jump.log_proposal_ratio;
                if log_alpha.is_finite() || log_alpha == f64::INFINITY {
                    if log_alpha >= 0.0 || self.rng.random::<f64>().ln() < log_alpha {
                        if !next.params.matches(&next.model) {
                            return Err(Error::InvalidInput("accepted state violates structure/parameter match".into()));
                        }
                        self.state = next;
                        true
                    } else {
                        false
                    }
                } else {
                    false
                }
            }
            None => false,
        };
        self.stats.for_kind(jump.kind).record(accepted);
        Ok(())
    }

    /// Pool available as inhibitors of kinase `e`: everything but child and e.
    fn inhibitor_pool_size(&self) -> usize {
        self.candidates.len() - 1
    }

    /// Largest inhibitor set a kinase birth may propose.
    fn birth_inhibitor_cap(&self) -> usize {
        self.model_prior.caps().max_inhibitors.min(self.inhibitor_pool_size())
    }

    /// Log-probability that a kinase birth proposes inhibitor set size `a`
    /// (and then a specific subset of that size).
    fn log_birth_inhibitor_set(&self, a: usize) -> f64 {
        let cap = self.birth_inhibitor_cap();
        if a > cap {
            return f64::NEG_INFINITY;
        }
        let log_size = if cap == 0 {
            0.0
        } else if a == 0 {
            0.5f64.ln()
        } else {
            (0.5 / cap as f64).ln()
        };
        let subsets = binomial(self.inhibitor_pool_size(), a).expect("small binomial") as f64;
        log_size - subsets.ln()
    }

    fn log_prior_kinase(&self, kp: &KinaseParams) -> f64 {
        self.priors.rate.log_density(kp.v)
            + self.priors.michaelis.log_density(kp.k)
            + kp.k_inhibitors.values().map(|&x| self.priors.michaelis.log_density(x)).sum::<f64>()
    }

    fn propose_kinase_birth(&mut self) -> Option<Jump> {
        let model = &self.state.model;
        let free: Vec<usize> = self.candidates.iter().copied().filter(|&j| !model.has_kinase(j)).collect();
        let &e = free.choose(&mut self.rng)?;

        let cap = self.birth_inhibitor_cap();
        let size = if cap == 0 || self.rng.random_bool(0.5) {
            0
        } else {
            self.rng.random_range(1..=cap)
        };
        let pool: Vec<usize> = self.candidates.iter().copied().filter(|&j| j != e).collect();
        let inhibitors: BTreeSet<usize> = pool.choose_multiple(&mut self.rng, size).copied().collect();

        let kp = KinaseParams {
            v: self.priors.rate.sample(&mut self.rng),
            k: self.priors.michaelis.sample(&mut self.rng),
            k_inhibitors: inhibitors.iter().map(|&i| (i, self.priors.michaelis.sample(&mut self.rng))).collect(),
        };
        let forward = -(free.len() as f64).ln() + self.log_birth_inhibitor_set(size) + self.log_prior_kinase(&kp);
        let reverse = -((model.n_kinases() + 1) as f64).ln();

        let mut next_model = model.clone();
        next_model.insert_kinase(e, inhibitors);
        let mut next_params = self.state.params.clone();
        next_params.kinases.insert(e, kp);
        Some(Jump {
            kind: MoveKind::KinaseBirth,
            model: next_model,
            params: next_params,
            log_proposal_ratio: reverse - forward,
        })
    }

    fn propose_kinase_death(&mut self) -> Option<Jump> {
        let model = &self.state.model;
        let kinases: Vec<usize> = model.kinases().collect();
        let &e = kinases.choose(&mut self.rng)?;
        let mut next_model = model.clone();
        let removed = next_model.remove_kinase(e).expect("kinase present");
        let mut next_params = self.state.params.clone();
        let kp = next_params.kinases.remove(&e).expect("params match model");

        let free_after = self.candidates.len() - next_model.n_kinases();
        let reverse = -(free_after as f64).ln() + self.log_birth_inhibitor_set(removed.len()) + self.log_prior_kinase(&kp);
        let forward = -(kinases.len() as f64).ln();
        Some(Jump {
            kind: MoveKind::KinaseDeath,
            model: next_model,
            params: next_params,
            log_proposal_ratio: reverse - forward,
        })
    }

    fn propose_inhibitor_birth(&mut self) -> Option<Jump> {
        let model = &self.state.model;
        let kinases: Vec<usize> = model.kinases().collect();
        let &e = kinases.choose(&mut self.rng)?;
        let current = model.inhibitors(e).expect("kinase present");
        let pool: Vec<usize> = self
            .candidates
            .iter()
            .copied()
            .filter(|&j| j != e && !current.contains(&j))
            .collect();
        let &i = pool.choose(&mut self.rng)?;
        let ki = self.priors.michaelis.sample(&mut self.rng);

        let forward = -(pool.len() as f64).ln() + self.priors.michaelis.log_density(ki);
        let reverse = -((current.len() + 1) as f64).ln();

        let mut next_model = model.clone();
        next_model.inhibitors_mut(e).expect("kinase present").insert(i);
        let mut next_params = self.state.params.clone();
        next_params.kinases.get_mut(&e).expect("params match model").k_inhibitors.insert(i, ki);
        Some(Jump {
            kind: MoveKind::InhibitorBirth,
            model: next_model,
            params: next_params,
            log_proposal_ratio: reverse - forward,
        })
    }

    fn propose_inhibitor_death(&mut self) -> Option<Jump> {
        let model = &self.state.model;
        let kinases: Vec<usize> = model.kinases().collect();
        let &e = kinases.choose(&mut self.rng)?;
        let current: Vec<usize> = model.inhibitors(e).expect("kinase present").iter().copied().collect();
        let &i = current.choose(&mut self.rng)?;

        let mut next_model = model.clone();
        next_model.inhibitors_mut(e).expect("kinase present").remove(&i);
        let mut next_params = self.state.params.clone();
        let ki = next_params
            .kinases
            .get_mut(&e)
            .expect("params match model")
            .k_inhibitors
            .remove(&i)
            .expect("params match model");

        let pool_after = self.inhibitor_pool_size() - (current.len() - 1);
        let reverse = -(pool_after as f64).ln() + self.priors.michaelis.log_density(ki);
        let forward = -(current.len() as f64).ln();
        Some(Jump {
            kind: MoveKind::InhibitorDeath,
            model: next_model,
            params: next_params,
            log_proposal_ratio: reverse - forward,
        })
    }

    /// Replace a kinase by a species that is neither a kinase nor one of its
    /// inhibitors; the inhibitor set and constants carry over, v and K are
    /// redrawn from the prior. The move is its own reverse with the same
    /// candidate count, so only the parameter densities enter the ratio.
    fn propose_swap(&mut self) -> Option<Jump> {
        let model = &self.state.model;
        let kinases: Vec<usize> = model.kinases().collect();
        let &e = kinases.choose(&mut self.rng)?;
        let inhibitors = model.inhibitors(e).expect("kinase present").clone();
        let replacements: Vec<usize> = self
            .candidates
            .iter()
            .copied()
            .filter(|&j| !model.has_kinase(j) && !inhibitors.contains(&j))
            .collect();
        let &target = replacements.choose(&mut self.rng)?;

        let mut next_model = model.clone();
        next_model.remove_kinase(e);
        next_model.insert_kinase(target, inhibitors);
        let mut next_params = self.state.params.clone();
        let old = next_params.kinases.remove(&e).expect("params match model");
        let new = KinaseParams {
            v: self.priors.rate.sample(&mut self.rng),
            k: self.priors.michaelis.sample(&mut self.rng),
            k_inhibitors: old.k_inhibitors.clone(),
        };
        let log_proposal_ratio = self.priors.rate.log_density(old.v) + self.priors.michaelis.log_density(old.k)
            - self.priors.rate.log_density(new.v)
            - self.priors.michaelis.log_density(new.k);
        next_params.kinases.insert(target, new);
        Some(Jump {
            kind: MoveKind::Swap,
            model: next_model,
            params: next_params,
            log_proposal_ratio,
        })
    }
}

/// Score a state; `None` when it lies outside the support (zero prior mass,
/// invalid parameters, or undefined likelihood).
fn score(
    data: &ChildData,
    model_prior: &ModelPrior,
    priors: &ParamPriors,
    model: MechanismModel,
    params: KineticParams,
) -> Option<ChainState> {
    let log_model = model_prior.log_prior(&model);
    if !log_model.is_finite() {
        return None;
    }
    let log_params = priors.log_prior(&params).ok()?;
    let ssr = data.sum_sq_log_residuals(&params).ok()?;
    let log_lik = gaussian_log_lik(ssr, data.n_samples(), params.sigma);
    let log_prior = log_model + log_params;
    if !(log_lik.is_finite() && log_prior.is_finite()) {
        return None;
    }
    Some(ChainState {
        model,
        params,
        cached_log_lik: log_lik,
        cached_log_prior: log_prior,
        ssr,
    })
}

/// Which continuous coordinate a single-site update touches.
#[derive(Clone, Copy)]
enum Site {
    Rate(usize),
    Michaelis(usize),
    Inhibition(usize, usize),
    Sigma,
}

fn get(params: &KineticParams, site: Site) -> f64 {
    match site {
        Site::Rate(e) => params.kinases[&e].v,
        Site::Michaelis(e) => params.kinases[&e].k,
        Site::Inhibition(e, i) => params.kinases[&e].k_inhibitors[&i],
        Site::Sigma => params.sigma,
    }
}

fn set(params: &mut KineticParams, site: Site, x: f64) {
    match site {
        Site::Rate(e) => params.kinases.get_mut(&e).expect("site exists").v = x,
        Site::Michaelis(e) => params.kinases.get_mut(&e).expect("site exists").k = x,
        Site::Inhibition(e, i) => {
            *params.kinases.get_mut(&e).expect("site exists").k_inhibitors.get_mut(&i).expect("site exists") = x
        }
        Site::Sigma => params.sigma = x,
    }
}

/// Update every continuous parameter once, in a fixed order, by a
/// random walk on its logarithm. Returns the new state and the number of
/// accepted and proposed updates.
fn sweep(
    data: &ChildData,
    model_prior: &ModelPrior,
    priors: &ParamPriors,
    mut state: ChainState,
    step: f64,
    rng: &mut StreamRng,
) -> (ChainState, u64, u64) {
    let mut sites = Vec::with_capacity(state.model.param_dimension());
    for (e, set) in state.model.mechanisms() {
        sites.push(Site::Rate(e));
        sites.push(Site::Michaelis(e));
        sites.extend(set.iter().map(|&i| Site::Inhibition(e, i)));
    }
    sites.push(Site::Sigma);

    let n = data.n_samples();
    let mut accepted = 0;
    for &site in &sites {
        let x = get(&state.params, site);
        let z: f64 = rng.sample(StandardNormal);
        let x_new = x * (step * z).exp();
        let density = |v: f64| match site {
            Site::Rate(_) => priors.rate.log_density(v),
            Site::Michaelis(_) | Site::Inhibition(..) => priors.michaelis.log_density(v),
            Site::Sigma => priors.sigma.log_density(v),
        };
        let mut params = state.params.clone();
        set(&mut params, site, x_new);
        let ssr = match site {
            Site::Sigma => Some(state.ssr),
            _ => data.sum_sq_log_residuals(&params).ok(),
        };
        let Some(ssr) = ssr else { continue };
        let log_lik = gaussian_log_lik(ssr, n, params.sigma);
        let delta_prior = density(x_new) - density(x);
        // x'/x is the Jacobian of the log-scale proposal.
        let log_alpha = log_lik - state.cached_log_lik + delta_prior + (x_new / x).ln();
        if !log_alpha.is_nan() && (log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha) && log_lik.is_finite() {
            let log_prior = state.cached_log_prior + delta_prior;
            if log_prior.is_finite() {
                state.params = params;
                state.ssr = ssr;
                state.cached_log_lik = log_lik;
                state.cached_log_prior = log_prior;
                accepted += 1;
            }
        }
    }
    debug_assert!(model_prior.log_prior(&state.model).is_finite());
    (state, accepted, sites.len() as u64)
}

/// One within-model sweep with the given log-scale step, outside a chain.
pub fn within_model_update(
    data: &ChildData,
    model_prior: &ModelPrior,
    state: &ChainState,
    step: f64,
    rng: &mut StreamRng,
) -> ChainState {
    sweep(data, model_prior, &ParamPriors::default(), state.clone(), step, rng).0
}

impl ChainState {
    /// Score an arbitrary state; `None` outside the posterior support.
    pub fn new(data: &ChildData, model_prior: &ModelPrior, model: MechanismModel, params: KineticParams) -> Option<Self> {
        score(data, model_prior, &ParamPriors::default(), model, params)
    }
}
