//! Phosphorylation mechanisms and the Goldbeter-Koshland response function.
//!
//! A [`MechanismModel`] names the kinases that phosphorylate one child species
//! and, for each kinase, the competitive inhibitors acting on it. Together with
//! [`KineticParams`] it predicts the child's equilibrium phospho level
//!
//! ```text
//! f = Σ_E v_E · X_E · X⁰ / (X⁰ + K_E · (1 + Σ_I X_I / K_I))
//! ```
//!
//! where X⁰ is the child's unphosphorylated level. A model with no kinases
//! predicts the constant μ.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Caps on the size of a mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelCaps {
    /// Maximum number of kinases per child.
    pub max_kinases: usize,
    /// Maximum number of inhibitors per kinase.
    pub max_inhibitors: usize,
}

impl Default for ModelCaps {
    fn default() -> Self {
        Self {
            max_kinases: 3,
            max_inhibitors: 2,
        }
    }
}

/// Kinases of one child, each with its (possibly empty) inhibitor set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MechanismModel {
    child: usize,
    kinases: BTreeMap<usize, BTreeSet<usize>>,
}

impl MechanismModel {
    pub fn empty(child: usize) -> Self {
        Self {
            child,
            kinases: BTreeMap::new(),
        }
    }

    /// Build a model from `(kinase, inhibitors)` pairs, checking the
    /// structural invariants against `p` species.
    pub fn new<I, J>(child: usize, p: usize, kinases: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, J)>,
        J: IntoIterator<Item = usize>,
    {
        if child >= p {
            return Err(Error::InvalidInput(format!("child {child} out of range for p = {p}")));
        }
        let mut model = Self::empty(child);
        for (e, inhibitors) in kinases {
            if e >= p || e == child {
                return Err(Error::InvalidInput(format!("invalid kinase {e} for child {child}")));
            }
            let set: BTreeSet<usize> = inhibitors.into_iter().collect();
            if let Some(&bad) = set.iter().find(|&&i| i >= p || i == child || i == e) {
                return Err(Error::InvalidInput(format!(
                    "invalid inhibitor {bad} of kinase {e} for child {child}"
                )));
            }
            if model.kinases.insert(e, set).is_some() {
                return Err(Error::InvalidInput(format!("duplicate kinase {e}")));
            }
        }
        Ok(model)
    }

    pub fn child(&self) -> usize {
        self.child
    }

    pub fn is_empty(&self) -> bool {
        self.kinases.is_empty()
    }

    pub fn n_kinases(&self) -> usize {
        self.kinases.len()
    }

    pub fn kinases(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinases.keys().copied()
    }

    pub fn has_kinase(&self, e: usize) -> bool {
        self.kinases.contains_key(&e)
    }

    pub fn inhibitors(&self, kinase: usize) -> Option<&BTreeSet<usize>> {
        self.kinases.get(&kinase)
    }

    /// `(kinase, inhibitors)` pairs in kinase order.
    pub fn mechanisms(&self) -> impl Iterator<Item = (usize, &BTreeSet<usize>)> + '_ {
        self.kinases.iter().map(|(&e, set)| (e, set))
    }

    /// All `(kinase, inhibitor)` pairs.
    pub fn inhibitor_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.kinases
            .iter()
            .flat_map(|(&e, set)| set.iter().map(move |&i| (e, i)))
    }

    pub fn n_inhibitor_pairs(&self) -> usize {
        self.kinases.values().map(BTreeSet::len).sum()
    }

    /// Parent set: kinases plus every inhibitor of any kinase.
    pub fn parents(&self) -> BTreeSet<usize> {
        self.kinases
            .iter()
            .flat_map(|(&e, set)| std::iter::once(e).chain(set.iter().copied()))
            .collect()
    }

    /// Species acting as an inhibitor of at least one kinase.
    pub fn inhibitor_species(&self) -> BTreeSet<usize> {
        self.kinases.values().flatten().copied().collect()
    }

    pub fn within_caps(&self, caps: &ModelCaps) -> bool {
        self.kinases.len() <= caps.max_kinases
            && self.kinases.values().all(|s| s.len() <= caps.max_inhibitors)
    }

    /// Number of continuous parameters: v and K per kinase, one K per
    /// inhibitor pair, and the noise scale.
    pub fn param_dimension(&self) -> usize {
        2 * self.kinases.len() + self.n_inhibitor_pairs() + 1
    }

    pub(crate) fn insert_kinase(&mut self, e: usize, inhibitors: BTreeSet<usize>) {
        debug_assert!(e != self.child && !inhibitors.contains(&e) && !inhibitors.contains(&self.child));
        self.kinases.insert(e, inhibitors);
    }

    pub(crate) fn remove_kinase(&mut self, e: usize) -> Option<BTreeSet<usize>> {
        self.kinases.remove(&e)
    }

    pub(crate) fn inhibitors_mut(&mut self, e: usize) -> Option<&mut BTreeSet<usize>> {
        self.kinases.get_mut(&e)
    }

    /// Compact text form, e.g. `B(C);D` for kinases B (inhibited by C) and D.
    /// The empty model renders as `-`.
    pub fn signature(&self, names: &[String]) -> String {
        if self.kinases.is_empty() {
            return "-".to_string();
        }
        let mut out = String::new();
        for (k, (&e, set)) in self.kinases.iter().enumerate() {
            if k > 0 {
                out.push(';');
            }
            out.push_str(&names[e]);
            if !set.is_empty() {
                out.push('(');
                for (j, &i) in set.iter().enumerate() {
                    if j > 0 {
                        out.push('|');
                    }
                    let _ = write!(out, "{}", names[i]);
                }
                out.push(')');
            }
        }
        out
    }
}

/// Rate ratio and Michaelis constant for one kinase, plus the inhibition
/// constants of its inhibitors.
#[derive(Debug, Clone, PartialEq)]
pub struct KinaseParams {
    /// v_E = V_E / V_0.
    pub v: f64,
    /// K_E.
    pub k: f64,
    /// K_I per inhibitor species.
    pub k_inhibitors: BTreeMap<usize, f64>,
}

/// Continuous parameters of one child's mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticParams {
    pub kinases: BTreeMap<usize, KinaseParams>,
    /// Log-scale noise standard deviation.
    pub sigma: f64,
    /// Prediction of the empty model: the child's mean phospho level.
    pub mu: f64,
}

impl KineticParams {
    pub fn empty(sigma: f64, mu: f64) -> Self {
        Self {
            kinases: BTreeMap::new(),
            sigma,
            mu,
        }
    }

    /// Key sets match the model's kinases and inhibitor pairs exactly.
    pub fn matches(&self, model: &MechanismModel) -> bool {
        self.kinases.len() == model.n_kinases()
            && model.mechanisms().all(|(e, set)| {
                self.kinases.get(&e).is_some_and(|kp| {
                    kp.k_inhibitors.len() == set.len()
                        && set.iter().all(|i| kp.k_inhibitors.contains_key(i))
                })
            })
    }

    /// Every rate, Michaelis constant and σ is finite and positive.
    pub fn all_positive(&self) -> bool {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        ok(self.sigma)
            && self.mu.is_finite()
            && self.mu >= 0.0
            && self.kinases.values().all(|kp| {
                ok(kp.v) && ok(kp.k) && kp.k_inhibitors.values().all(|&x| ok(x))
            })
    }
}

/// Evaluate the GK response for one sample.
///
/// `phospho` supplies X_j for every species (indexed by species) and
/// `child_unphospho` is the child's X⁰.
pub fn eval_gk(params: &KineticParams, phospho: &[f64], child_unphospho: f64) -> Result<f64> {
    if params.kinases.is_empty() {
        return Ok(params.mu);
    }
    let x0 = child_unphospho;
    let mut f = 0.0;
    for (&e, kp) in &params.kinases {
        let inhibition: f64 = kp
            .k_inhibitors
            .iter()
            .map(|(&i, &ki)| phospho[i] / ki)
            .sum();
        f += kp.v * phospho[e] * x0 / (x0 + kp.k * (1.0 + inhibition));
    }
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::InvalidInput(format!("GK response is not finite ({f})")))
    }
}

/// [`eval_gk`] for a model/params pair, checking that the parameters fit the
/// model structure.
pub fn eval_model(
    model: &MechanismModel,
    params: &KineticParams,
    phospho: &[f64],
    child_unphospho: f64,
) -> Result<f64> {
    if !params.matches(model) {
        return Err(Error::InvalidInput(
            "parameter keys do not match mechanism structure".into(),
        ));
    }
    eval_gk(params, phospho, child_unphospho)
}
