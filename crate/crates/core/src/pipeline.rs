//! The four workflows behind the command-line tool: simulate, infer,
//! evaluate and rank. Each writes its artifacts plus `manifest.json` into the
//! output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{auc, rank_candidates, roc_curve, ScoredEdge, ScoredEdges};
use crate::io::{parse_exclusions, parse_list, read_edges, read_known, write_edges, EdgeRow};
use crate::linear::{linear_weights, LassoConfig};
use crate::mechanism::ModelCaps;
use crate::method::Method;
use crate::sampler::{infer_network, InferOptions, SamplerConfig};
use crate::sim::{read_truth, simulate_benchmark, write_truth, SimConfig};

/// Tag recorded in every manifest naming the structure prior in use.
pub const MODEL_PRIOR_TAG: &str = "uniform-indegree";

/// Top mechanisms reported per child by `infer --method gk`.
const TOP_MODELS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Infer,
    Evaluate,
    Rank,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Infer => "infer",
            Command::Evaluate => "evaluate",
            Command::Rank => "rank",
        }
    }
}

/// Settings as they appear on the command line or in a JSON config file.
/// Every field is optional so that flags can be layered over a file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub phospho: Option<PathBuf>,
    pub unphospho: Option<PathBuf>,
    pub method: Option<Method>,
    pub iters: Option<usize>,
    pub burnin: Option<usize>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Comma-separated species names.
    pub children: Option<String>,
    /// `child=cand1|cand2,...`
    pub exclude: Option<String>,
    pub dmax: Option<usize>,
    pub mmax: Option<usize>,
    pub p: Option<usize>,
    pub n: Option<usize>,
    pub sigma: Option<f64>,
    pub truth: Option<PathBuf>,
    /// Comma-separated edge-weight files.
    pub weights: Option<String>,
    pub known: Option<PathBuf>,
    pub dataset: Option<String>,
    pub sample_logs: Option<bool>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        Settings { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Settings {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(self, top: Settings) -> Settings {
        let base = self;
        overlay!(
            base, top, phospho, unphospho, method, iters, burnin, restarts, seed, out, children, exclude, dmax, mmax, p,
            n, sigma, truth, weights, known, dataset, sample_logs
        )
    }
}

/// A validated configuration for one workflow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub phospho: Option<PathBuf>,
    pub unphospho: Option<PathBuf>,
    pub method: Method,
    pub sampler: SamplerConfig,
    pub sim: SimConfig,
    pub lasso: LassoConfig,
    pub children: Vec<String>,
    pub exclude: BTreeMap<String, Vec<String>>,
    pub truth: Option<PathBuf>,
    pub weights: Vec<PathBuf>,
    pub known: Option<PathBuf>,
    pub dataset: Option<String>,
    pub sample_logs: bool,
}

fn require<T: Clone>(value: &Option<T>, flag: &str, command: Command) -> Result<T> {
    value
        .clone()
        .ok_or_else(|| Error::Config(format!("`{}` requires --{flag}", command.as_str())))
}

fn require_file(value: &Option<PathBuf>, flag: &str, command: Command) -> Result<PathBuf> {
    let path = require(value, flag, command)?;
    if !path.is_file() {
        return Err(Error::Config(format!("--{flag}: {} does not exist", path.display())));
    }
    Ok(path)
}

impl RunConfig {
    pub fn new(command: Command, s: &Settings) -> Result<Self> {
        let seed = match command {
            Command::Simulate | Command::Infer => Some(require(&s.seed, "seed", command)?),
            Command::Evaluate | Command::Rank => s.seed,
        };
        let base_seed = seed.unwrap_or(0);
        let out = require(&s.out, "out", command)?;

        let mut sampler = SamplerConfig::new(base_seed);
        if let Some(v) = s.iters {
            sampler.total_iters = v;
        }
        if let Some(v) = s.burnin {
            sampler.burn_in = v;
        }
        if let Some(v) = s.restarts {
            sampler.n_restarts = v;
        }
        sampler.caps = ModelCaps {
            max_kinases: s.dmax.unwrap_or(sampler.caps.max_kinases),
            max_inhibitors: s.mmax.unwrap_or(sampler.caps.max_inhibitors),
        };
        let mut sim = SimConfig::new(s.p.unwrap_or(12), s.n.unwrap_or(24), base_seed);
        if let Some(v) = s.sigma {
            sim.sigma = v;
        }

        let config = Self {
            command,
            seed,
            out,
            phospho: s.phospho.clone(),
            unphospho: s.unphospho.clone(),
            method: s.method.unwrap_or(Method::Gk),
            sampler,
            sim,
            lasso: LassoConfig::new(base_seed),
            children: s.children.as_deref().map(parse_list).unwrap_or_default(),
            exclude: s.exclude.as_deref().map(parse_exclusions).transpose()?.unwrap_or_default(),
            truth: s.truth.clone(),
            weights: s.weights.as_deref().map(parse_list).unwrap_or_default().into_iter().map(PathBuf::from).collect(),
            known: s.known.clone(),
            dataset: s.dataset.clone(),
            sample_logs: s.sample_logs.unwrap_or(false),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        match self.command {
            Command::Simulate => self.sim.validate(),
            Command::Infer => {
                require_file(&self.phospho, "phospho", self.command)?;
                require_file(&self.unphospho, "unphospho", self.command)?;
                if self.method == Method::Gk {
                    self.sampler.validate()?;
                }
                Ok(())
            }
            Command::Evaluate => {
                require_file(&self.truth, "truth", self.command)?;
                self.require_weights()
            }
            Command::Rank => {
                require_file(&self.known, "known", self.command)?;
                self.require_weights()
            }
        }
    }

    fn require_weights(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::Config(format!("`{}` requires --weights", self.command.as_str())));
        }
        for w in &self.weights {
            if !w.is_file() {
                return Err(Error::Config(format!("--weights: {} does not exist", w.display())));
            }
        }
        Ok(())
    }

    fn excluded(&self, child: &str, candidate: &str) -> bool {
        self.exclude.get(child).is_some_and(|c| c.iter().any(|x| x == candidate))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Command,
    pub seed: Option<u64>,
    pub model_prior: &'static str,
    pub config: RunConfig,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub diagnostics: Option<serde_json::Value>,
    pub warnings: Vec<String>,
    pub created_unix_seconds: u64,
}

/// Run one workflow and write its manifest.
pub fn run(config: &RunConfig) -> Result<Manifest> {
    std::fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    let mut manifest = Manifest {
        tool: "gknet",
        version: env!("CARGO_PKG_VERSION"),
        command: config.command,
        seed: config.seed,
        model_prior: MODEL_PRIOR_TAG,
        config: config.clone(),
        outputs: Vec::new(),
        diagnostics: None,
        warnings: Vec::new(),
        created_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    match config.command {
        Command::Simulate => simulate(config, &mut manifest)?,
        Command::Infer => infer(config, &mut manifest)?,
        Command::Evaluate => evaluate(config, &mut manifest)?,
        Command::Rank => rank(config, &mut manifest)?,
    }
    let path = config.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn simulate(config: &RunConfig, manifest: &mut Manifest) -> Result<()> {
    let bench = simulate_benchmark(&config.sim)?;
    if bench.retries > 0 {
        manifest
            .warnings
            .push(format!("{} network draws failed to converge or collapsed and were replaced", bench.retries));
    }
    let out = &config.out;
    bench.data.dataset.write(&out.join("phospho.csv"), &out.join("unphospho.csv"))?;
    write_truth(&out.join("truth.csv"), &bench.network.truth_edges())?;
    manifest.outputs = vec!["phospho.csv".into(), "unphospho.csv".into(), "truth.csv".into()];
    Ok(())
}

fn child_indices(data: &Dataset, names: &[String]) -> Result<Vec<usize>> {
    if names.is_empty() {
        return Ok((0..data.n_species()).collect());
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for name in names {
        let i = data
            .species_index(name)
            .ok_or_else(|| Error::Config(format!("--children: unknown species `{name}`")))?;
        if seen.insert(i) {
            out.push(i);
        }
    }
    Ok(out)
}

fn infer(config: &RunConfig, manifest: &mut Manifest) -> Result<()> {
    let phospho = config.phospho.as_deref().expect("validated");
    let unphospho = config.unphospho.as_deref().expect("validated");
    let data = Dataset::load(phospho, unphospho)?.normalize_unit_mean()?;
    let children = child_indices(&data, &config.children)?;
    let names = data.species();
    let method = config.method;
    let mut rows = Vec::new();

    if method == Method::Gk {
        let log_dir = config.out.join("samples");
        if config.sample_logs {
            std::fs::create_dir_all(&log_dir).map_err(|e| Error::io(&log_dir, e))?;
        }
        let options = InferOptions {
            children: children.clone(),
            sample_log_dir: config.sample_logs.then_some(log_dir.as_path()),
            ..Default::default()
        };
        let summary = infer_network(&data, &config.sampler, &options)?;
        for &i in &children {
            for j in (0..data.n_species()).filter(|&j| j != i) {
                rows.push(EdgeRow {
                    child: names[i].clone(),
                    candidate: names[j].clone(),
                    weight: Some(summary.edge_prob[(j, i)]),
                    role_kinase_prob: Some(summary.kinase_prob[(j, i)]),
                    role_inhibitor_prob: Some(summary.inhibitor_prob[(j, i)]),
                    method: method.to_string(),
                });
            }
        }
        let models_path = config.out.join("models_gk.csv");
        let mut w = csv::Writer::from_path(&models_path)?;
        w.write_record(["child", "mechanism", "probability"])?;
        for &i in &children {
            for (model, freq) in summary.model_freq[&i].iter().take(TOP_MODELS) {
                w.write_record([names[i].as_str(), &model.signature(names), &freq.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(&models_path, e))?;
        manifest.outputs.push("models_gk.csv".into());
        if config.sample_logs {
            manifest.outputs.push("samples/".into());
        }
        let report = summary.report();
        if !report.converged {
            manifest.warnings.push(format!(
                "restarts disagree: max edge-probability discrepancy {} over {} flagged pairs",
                report.max_discrepancy, report.flagged_pairs
            ));
        }
        manifest.diagnostics = Some(serde_json::to_value(&report)?);
    } else {
        for &i in &children {
            let weights = match linear_weights(&data, i, method, &config.lasso) {
                Ok(w) => w.candidates.into_iter().zip(w.weights).collect::<Vec<_>>(),
                Err(Error::ZeroVariance(what)) => {
                    let msg = format!("{}: {what} has zero variance; all weights NA", names[i]);
                    log::warn!("{msg}");
                    manifest.warnings.push(msg);
                    (0..data.n_species()).filter(|&j| j != i).map(|j| (j, None)).collect()
                }
                Err(e) => return Err(e),
            };
            for (j, w) in weights {
                rows.push(EdgeRow {
                    child: names[i].clone(),
                    candidate: names[j].clone(),
                    weight: w,
                    role_kinase_prob: None,
                    role_inhibitor_prob: None,
                    method: method.to_string(),
                });
            }
        }
    }
    let file = format!("edges_{method}.csv");
    write_edges(&config.out.join(&file), &rows)?;
    manifest.outputs.insert(0, file);
    Ok(())
}

/// Edge rows from every weights file, grouped by method in first-seen order.
fn load_weights(config: &RunConfig) -> Result<Vec<(String, Vec<EdgeRow>)>> {
    let mut groups: Vec<(String, Vec<EdgeRow>)> = Vec::new();
    for path in &config.weights {
        for row in read_edges(path)? {
            if config.excluded(&row.child, &row.candidate) {
                continue;
            }
            match groups.iter_mut().find(|(m, _)| *m == row.method) {
                Some((_, rows)) => rows.push(row),
                None => groups.push((row.method.clone(), vec![row])),
            }
        }
    }
    Ok(groups)
}

fn dataset_label(config: &RunConfig) -> String {
    config.dataset.clone().unwrap_or_else(|| {
        config
            .truth
            .as_deref()
            .and_then(Path::parent)
            .and_then(Path::file_name)
            .map(|s| s.to_string_lossy().into_owned())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| "dataset".to_string())
    })
}

fn evaluate(config: &RunConfig, manifest: &mut Manifest) -> Result<()> {
    let truth: BTreeSet<(String, String)> = read_truth(config.truth.as_deref().expect("validated"))?
        .into_iter()
        .map(|e| (e.child, e.parent))
        .collect();
    let label = dataset_label(config);
    let groups = load_weights(config)?;

    let mut roc = csv::Writer::from_path(config.out.join("roc.csv"))?;
    roc.write_record(["dataset", "method", "fpr", "tpr"])?;
    let mut aur = csv::Writer::from_path(config.out.join("aur.csv"))?;
    aur.write_record(["dataset", "method", "AUR"])?;
    let mut per_child = csv::Writer::from_path(config.out.join("aur_per_child.csv"))?;
    per_child.write_record(["dataset", "method", "child", "AUR"])?;

    let mut summary = BTreeMap::new();
    for (method, rows) in groups {
        let edges = rows
            .into_iter()
            .map(|r| {
                let label = truth.contains(&(r.child.clone(), r.candidate.clone()));
                ScoredEdge {
                    child: r.child,
                    candidate: r.candidate,
                    weight: r.weight,
                    label: Some(label),
                }
            })
            .collect();
        let scored = ScoredEdges::new(method.clone(), edges)?;
        let points = roc_curve(&scored.labelled())?;
        for (fpr, tpr) in &points {
            roc.write_record([label.as_str(), method.as_str(), &fpr.to_string(), &tpr.to_string()])?;
        }
        let pooled = auc(&points);
        aur.write_record([label.as_str(), method.as_str(), &pooled.to_string()])?;
        let children = scored.per_child_aur();
        for (child, a) in &children {
            per_child.write_record([label.as_str(), method.as_str(), child.as_str(), &a.to_string()])?;
        }
        let macro_mean = (!children.is_empty()).then(|| children.values().sum::<f64>() / children.len() as f64);
        summary.insert(method, serde_json::json!({ "pooled": pooled, "per_child_mean": macro_mean }));
    }
    for (w, name) in [(&mut roc, "roc.csv"), (&mut aur, "aur.csv"), (&mut per_child, "aur_per_child.csv")] {
        let path = config.out.join(name);
        w.flush().map_err(|e| Error::io(&path, e))?;
        manifest.outputs.push(name.into());
    }
    manifest.diagnostics = Some(serde_json::to_value(summary)?);
    Ok(())
}

fn rank(config: &RunConfig, manifest: &mut Manifest) -> Result<()> {
    let known = read_known(config.known.as_deref().expect("validated"))?;
    let groups = load_weights(config)?;
    let mut header = vec!["child".to_string(), "known".to_string(), "candidates".to_string()];
    header.extend(groups.iter().map(|(m, _)| m.clone()));

    let path = config.out.join("rank.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(&header)?;
    for (child, target) in &known {
        let mut record = vec![child.clone(), target.clone()];
        let mut ranks = Vec::new();
        let mut count = None;
        for (method, rows) in &groups {
            let weights: Vec<(String, Option<f64>)> = rows
                .iter()
                .filter(|r| &r.child == child)
                .map(|r| (r.candidate.clone(), r.weight))
                .collect();
            if weights.is_empty() {
                return Err(Error::InvalidInput(format!("method {method} has no weights for child `{child}`")));
            }
            let report = rank_candidates(&weights, target, &[])?;
            match count {
                None => count = Some(report.n_candidates),
                Some(c) if c != report.n_candidates => manifest.warnings.push(format!(
                    "{child}: methods disagree on the candidate count ({c} vs {})",
                    report.n_candidates
                )),
                Some(_) => {}
            }
            ranks.push(report.rank_label());
        }
        record.push(count.map_or_else(|| "NA".to_string(), |c| c.to_string()));
        record.extend(ranks);
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    manifest.outputs.push("rank.csv".into());
    Ok(())
}
