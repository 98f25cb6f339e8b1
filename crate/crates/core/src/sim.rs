//! Synthetic ground-truth networks and their noisy equilibrium data.
//!
//! Each node is either a root, held at a fixed fraction φ of its total
//! protein, or regulated by 1-2 kinases with 0-1 competitive inhibitors each.
//! Cycles are allowed. Equilibria are found by Gauss-Seidel sweeps over
//! nodes with an exact per-node bisection.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mechanism::{KinaseParams, KineticParams, MechanismModel};
use crate::prior::ParamPriors;
use crate::rng::{stream, Purpose};

/// Balance residual |X − f(X)| / U accepted as an equilibrium.
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 10_000;
pub const MAX_RETRIES: usize = 10;
/// Phospho fraction below which a steady state counts as collapsed onto the
/// all-off solution (reachable only without an active root upstream).
pub const COLLAPSE_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub p: usize,
    pub n: usize,
    /// Log-scale measurement noise.
    pub sigma: f64,
    /// Probability that a node is a root.
    pub root_prob: f64,
    /// Regulated nodes draw 1..=max_kinases kinases.
    pub max_kinases: usize,
    /// Each kinase draws 0..=max_inhibitors inhibitors.
    pub max_inhibitors: usize,
    /// Log-scale s.d. of total protein across samples.
    pub total_sd: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(p: usize, n: usize, seed: u64) -> Self {
        Self {
            p,
            n,
            sigma: 0.2,
            root_prob: 0.25,
            max_kinases: 2,
            max_inhibitors: 1,
            total_sd: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.p < 2 {
            return bad(format!("need at least 2 species, got {}", self.p));
        }
        if self.n < 1 {
            return bad("need at least one sample".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("invalid noise level {}", self.sigma));
        }
        // ρ = 0 is accepted so fully regulated (cyclic) networks can be built.
        if !(0.0..=1.0).contains(&self.root_prob) {
            return bad(format!("root probability must lie in [0, 1], got {}", self.root_prob));
        }
        if self.max_kinases == 0 {
            return bad("regulated nodes need at least one kinase".into());
        }
        if !(self.total_sd >= 0.0 && self.total_sd.is_finite()) {
            return bad(format!("invalid total-protein spread {}", self.total_sd));
        }
        Ok(())
    }
}

/// True mechanism of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTruth {
    pub model: MechanismModel,
    pub params: KineticParams,
    /// Fixed phospho fraction φ for roots; `None` for regulated nodes.
    pub activation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Kinase,
    Inhibitor,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Kinase => "kinase",
            Role::Inhibitor => "inhibitor",
        }
    }
}

/// One row of the truth file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TruthEdge {
    pub child: String,
    pub parent: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthNetwork {
    pub species: Vec<String>,
    pub nodes: Vec<NodeTruth>,
}

impl GroundTruthNetwork {
    pub fn n_species(&self) -> usize {
        self.nodes.len()
    }

    /// Entry (j, i) is true iff j is a parent of i.
    pub fn adjacency(&self) -> DMatrix<bool> {
        let p = self.nodes.len();
        let mut adj = DMatrix::from_element(p, p, false);
        for (i, node) in self.nodes.iter().enumerate() {
            for j in node.model.parents() {
                adj[(j, i)] = true;
            }
        }
        adj
    }

    /// Edges with roles; a species acting both as kinase and inhibitor of
    /// the same child yields two rows.
    pub fn truth_edges(&self) -> Vec<TruthEdge> {
        let mut edges = Vec::new();
        for node in &self.nodes {
            let child = &self.species[node.model.child()];
            for e in node.model.kinases() {
                edges.push(TruthEdge {
                    child: child.clone(),
                    parent: self.species[e].clone(),
                    role: Role::Kinase,
                });
            }
            for i in node.model.inhibitor_species() {
                edges.push(TruthEdge {
                    child: child.clone(),
                    parent: self.species[i].clone(),
                    role: Role::Inhibitor,
                });
            }
        }
        edges
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Parents before children, or `None` when the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let p = self.nodes.len();
        let parents: Vec<Vec<usize>> = self.nodes.iter().map(|n| n.model.parents().into_iter().collect()).collect();
        let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..p).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(p);
        while let Some(j) = ready.pop() {
            order.push(j);
            for i in 0..p {
                if parents[i].contains(&j) {
                    indegree[i] -= 1;
                    if indegree[i] == 0 {
                        ready.push(i);
                    }
                }
            }
        }
        (order.len() == p).then_some(order)
    }
}

/// Species names used by generated networks.
pub fn species_names(p: usize) -> Vec<String> {
    let width = p.to_string().len();
    (1..=p).map(|i| format!("P{i:0width$}")).collect()
}

/// Draw a random network. `attempt` selects an independent stream so
/// retries see fresh parameters.
pub fn generate_network(config: &SimConfig, attempt: usize) -> Result<GroundTruthNetwork> {
    config.validate()?;
    let p = config.p;
    let mut rng = stream(config.seed, Purpose::Network, attempt as u64, 0);
    let priors = ParamPriors::default();
    let mut nodes = Vec::with_capacity(p);
    for i in 0..p {
        let others: Vec<usize> = (0..p).filter(|&j| j != i).collect();
        if config.root_prob > 0.0 && rng.random_bool(config.root_prob) {
            nodes.push(NodeTruth {
                model: MechanismModel::empty(i),
                params: KineticParams::empty(config.sigma.max(f64::MIN_POSITIVE), 0.0),
                activation: Some(rng.random_range(0.2..0.8)),
            });
            continue;
        }
        let k = rng.random_range(1..=config.max_kinases).min(others.len());
        let kinases: Vec<usize> = others.choose_multiple(&mut rng, k).copied().collect();
        let mut mechanisms = Vec::with_capacity(k);
        let mut params = KineticParams::empty(config.sigma.max(f64::MIN_POSITIVE), 0.0);
        for &e in &kinases {
            let pool: Vec<usize> = others.iter().copied().filter(|&j| j != e).collect();
            let m = rng.random_range(0..=config.max_inhibitors).min(pool.len());
            let inhibitors: Vec<usize> = pool.choose_multiple(&mut rng, m).copied().collect();
            let kp = KinaseParams {
                v: priors.rate.sample(&mut rng),
                k: priors.michaelis.sample(&mut rng),
                k_inhibitors: inhibitors.iter().map(|&x| (x, priors.michaelis.sample(&mut rng))).collect(),
            };
            params.kinases.insert(e, kp);
            mechanisms.push((e, inhibitors));
        }
        nodes.push(NodeTruth {
            model: MechanismModel::new(i, p, mechanisms)?,
            params,
            activation: None,
        });
    }
    Ok(GroundTruthNetwork {
        species: species_names(p),
        nodes,
    })
}

/// Phospho level of a regulated node predicted from the current state when
/// its own phospho level is `x`.
fn node_response(params: &KineticParams, state: &[f64], total: f64, x: f64) -> f64 {
    let x0 = total - x;
    params
        .kinases
        .iter()
        .map(|(&e, kp)| {
            let inhibition: f64 = kp.k_inhibitors.iter().map(|(&i, &ki)| state[i] / ki).sum();
            kp.v * state[e] * x0 / (x0 + kp.k * (1.0 + inhibition))
        })
        .sum()
}

/// Root of x = f(x) on [0, U] by bisection to full precision. The left side
/// rises from 0 and the right side falls to 0, so the root is unique.
fn solve_node(params: &KineticParams, state: &[f64], total: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, total);
    for _ in 0..2_000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mid - node_response(params, state, total, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick the endpoint with the smaller residual.
    let r = |x: f64| (x - node_response(params, state, total, x)).abs();
    if r(lo) <= r(hi) {
        lo
    } else {
        hi
    }
}

/// Relative balance residual |X_i − f_i(X)| / U_i of every node.
pub fn balance_residuals(net: &GroundTruthNetwork, totals: &[f64], x: &[f64]) -> Vec<f64> {
    net.nodes
        .iter()
        .enumerate()
        .map(|(i, node)| {
            let target = match node.activation {
                Some(phi) => phi * totals[i],
                None => node_response(&node.params, x, totals[i], x[i]),
            };
            (x[i] - target).abs() / totals[i]
        })
        .collect()
}

/// Equilibrium phospho levels for the given totals.
pub fn solve_steady_state(net: &GroundTruthNetwork, totals: &[f64]) -> Result<Vec<f64>> {
    let p = net.n_species();
    if totals.len() != p || totals.iter().any(|&u| !(u > 0.0 && u.is_finite())) {
        return Err(Error::InvalidInput("totals must be positive, one per species".into()));
    }
    let mut x: Vec<f64> = net
        .nodes
        .iter()
        .zip(totals)
        .map(|(node, &u)| node.activation.map_or(0.5 * u, |phi| phi * u))
        .collect();
    let mut damping = 1.0;
    let mut last_change = f64::INFINITY;
    let mut worst = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for (i, node) in net.nodes.iter().enumerate() {
            if node.activation.is_some() {
                continue;
            }
            let target = solve_node(&node.params, &x, totals[i]);
            let next = x[i] + damping * (target - x[i]);
            change = change.max((next - x[i]).abs() / totals[i]);
            x[i] = next;
        }
        worst = balance_residuals(net, totals, &x).into_iter().fold(0.0, f64::max);
        if worst <= 1e-13 || (change == 0.0 && worst < RESIDUAL_TOL) {
            return Ok(x);
        }
        if change > last_change && damping == 1.0 {
            damping = 0.5;
        }
        last_change = change;
    }
    if worst < RESIDUAL_TOL {
        return Ok(x);
    }
    Err(Error::NonConvergence {
        sweeps: MAX_SWEEPS,
        worst_residual: worst,
    })
}

/// A simulated dataset with the noiseless values it was derived from.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    /// Noisy measurements, not normalized.
    pub dataset: Dataset,
    pub totals: DMatrix<f64>,
    pub clean_phospho: DMatrix<f64>,
    pub clean_unphospho: DMatrix<f64>,
}

/// Draw totals, solve each sample's equilibrium, and add log-normal noise
/// to both channels.
pub fn simulate_dataset(net: &GroundTruthNetwork, config: &SimConfig) -> Result<SimulatedData> {
    config.validate()?;
    let (n, p) = (config.n, net.n_species());
    if p != config.p {
        return Err(Error::Config(format!("network has {p} species, config says {}", config.p)));
    }
    let mut totals = DMatrix::zeros(n, p);
    let mut clean_phospho = DMatrix::zeros(n, p);
    let mut clean_unphospho = DMatrix::zeros(n, p);
    let mut phospho = DMatrix::zeros(n, p);
    let mut unphospho = DMatrix::zeros(n, p);
    for s in 0..n {
        let mut rng = stream(config.seed, Purpose::Sample, s as u64, 0);
        let u: Vec<f64> = (0..p)
            .map(|_| (config.total_sd * rng.sample::<f64, _>(StandardNormal)).exp())
            .collect();
        let x = solve_steady_state(net, &u)?;
        for i in 0..p {
            let x0 = u[i] - x[i];
            totals[(s, i)] = u[i];
            clean_phospho[(s, i)] = x[i];
            clean_unphospho[(s, i)] = x0;
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            phospho[(s, i)] = x[i] * (config.sigma * z1).exp();
            unphospho[(s, i)] = x0 * (config.sigma * z2).exp();
        }
    }
    Ok(SimulatedData {
        dataset: Dataset::new(net.species.clone(), phospho, unphospho)?,
        totals,
        clean_phospho,
        clean_unphospho,
    })
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub network: GroundTruthNetwork,
    pub data: SimulatedData,
    /// Failed attempts before success.
    pub retries: usize,
}

/// First (sample, species) whose noiseless phospho fraction is below
/// [`COLLAPSE_FRACTION`].
pub fn find_collapse(data: &SimulatedData) -> Option<Error> {
    let (n, p) = data.totals.shape();
    for s in 0..n {
        for i in 0..p {
            let fraction = data.clean_phospho[(s, i)] / data.totals[(s, i)];
            if fraction < COLLAPSE_FRACTION {
                return Some(Error::CollapsedSteadyState {
                    species: data.dataset.species()[i].clone(),
                    sample: s,
                    fraction,
                });
            }
        }
    }
    None
}

/// Generate a network and dataset, redrawing the network when the solver
/// fails on a pathological parameter draw or the equilibrium collapses.
pub fn simulate_benchmark(config: &SimConfig) -> Result<Benchmark> {
    let mut last = None;
    for attempt in 0..=MAX_RETRIES {
        let network = generate_network(config, attempt)?;
        let outcome = simulate_dataset(&network, config).and_then(|data| match find_collapse(&data) {
            Some(e) => Err(e),
            None => Ok(data),
        });
        match outcome {
            Ok(data) => {
                return Ok(Benchmark {
                    network,
                    data,
                    retries: attempt,
                })
            }
            Err(e @ (Error::NonConvergence { .. } | Error::CollapsedSteadyState { .. })) => {
                log::warn!("simulation attempt {attempt} failed: {e}; redrawing parameters");
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

pub fn write_truth(path: &Path, edges: &[TruthEdge]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in edges {
        w.serialize(e)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthEdge>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|e| e.map_err(Error::from)).collect()
}
