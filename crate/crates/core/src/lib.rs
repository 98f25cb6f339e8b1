//! Network inference for protein-phosphorylation data.
//!
//! Each species' equilibrium phospho level is modelled as a Goldbeter-Koshland
//! function of its kinases and their competitive inhibitors. Mechanisms are
//! selected per child species by reversible-jump MCMC, yielding posterior
//! edge probabilities. Linear baselines, a steady-state simulator with known
//! ground truth, and ROC/rank evaluation complete the benchmark.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod likelihood;
pub mod linear;
pub mod mechanism;
pub mod method;
pub mod pipeline;
pub mod prior;
pub mod rng;
pub mod sampler;
pub mod sim;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use method::Method;
pub use mechanism::{eval_gk, KinaseParams, KineticParams, MechanismModel, ModelCaps};
