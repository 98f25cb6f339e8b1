//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line to
//! stderr (uncaptured) before asserting.

mod support;

use std::io::Write;
use std::sync::OnceLock;

use gknet::eval::{auc, roc_curve, ScoredEdge, ScoredEdges};
use gknet::linear::{gprior_log_evidence, linear_weights, LassoConfig, LinearDesign};
use gknet::pipeline::{run, Command, RunConfig, Settings};
use gknet::prior::ParamPriors;
use gknet::rng::{stream, Purpose};
use gknet::sampler::{infer_network, run_chain, InferOptions, SamplerConfig};
use gknet::sim::{generate_network, simulate_benchmark, solve_steady_state, SimConfig};
use gknet::{Dataset, Error, Method, ModelCaps};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ContinuousCDF, Normal};

fn report(criterion: u32, pass: bool, detail: &str) {
    let line = format!("criterion {criterion}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_1_sampler_matches_enumeration() {
    let caps = ModelCaps { max_kinases: 1, max_inhibitors: 1 };
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for problem in 0..5u64 {
        let data = support::random_problem(3, 8, 100 + problem);
        let oracle = support::posterior_oracle(&data, 0, 1, 1, 1_000_000, 7_000 + problem);
        let cfg = SamplerConfig {
            caps,
            ..SamplerConfig::new(problem)
        };
        let mut samples = Vec::new();
        for restart in 0..cfg.n_restarts {
            samples.extend(run_chain(&data, 0, &cfg, restart).unwrap().samples);
        }
        let mut diff: f64 = 0.0;
        for (mech, prob) in &oracle {
            let model = support::to_model(0, 3, mech);
            let freq = samples.iter().filter(|s| s.model == model).count() as f64 / samples.len() as f64;
            diff = diff.max((freq - prob).abs());
        }
        details.push(format!("{diff:.3}"));
        worst = worst.max(diff);
    }
    let pass = worst <= 0.05;
    report(1, pass, &format!("max |chain − oracle| per problem [{}]", details.join(", ")));
    assert!(pass);
}

// ---------------------------------------------------------------- 2, 3, 9

struct BenchResult {
    /// Pooled AUR per method, in `Method::ALL` order.
    aur: Vec<f64>,
    pairs_within: usize,
    pairs: usize,
}

const DATASETS: u64 = 10;

fn scored(data: &Dataset, truth: &DMatrix<bool>, method: Method, weight: impl Fn(usize, usize) -> Option<f64>) -> f64 {
    let names = data.species();
    let p = data.n_species();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (0..p).filter(|&j| j != i) {
            edges.push(ScoredEdge {
                child: names[i].clone(),
                candidate: names[j].clone(),
                weight: weight(j, i),
                label: Some(truth[(j, i)]),
            });
        }
    }
    ScoredEdges::new(method.as_str(), edges).unwrap().aur().unwrap()
}

fn benchmark_suite(sigma: f64) -> Vec<BenchResult> {
    (0..DATASETS)
        .map(|k| {
            let mut sim = SimConfig::new(12, 24, 1_000 + k);
            sim.sigma = sigma;
            let bench = simulate_benchmark(&sim).unwrap();
            let data = bench.data.dataset.normalize_unit_mean().unwrap();
            let truth = bench.network.adjacency();
            let summary = infer_network(&data, &SamplerConfig::new(k), &InferOptions::default()).unwrap();
            let mut aur = Vec::new();
            for method in Method::ALL {
                let a = if method == Method::Gk {
                    scored(&data, &truth, method, |j, i| Some(summary.edge_prob[(j, i)]))
                } else {
                    let mut w = DMatrix::from_element(12, 12, None);
                    for i in 0..12 {
                        match linear_weights(&data, i, method, &LassoConfig::new(k)) {
                            Ok(cw) => {
                                for (c, x) in cw.candidates.iter().zip(cw.weights) {
                                    w[(*c, i)] = x;
                                }
                            }
                            Err(Error::ZeroVariance(_)) => {}
                            Err(e) => panic!("{e}"),
                        }
                    }
                    scored(&data, &truth, method, |j, i| w[(j, i)])
                };
                aur.push(a);
            }
            let d = &summary.diagnostics.discrepancy;
            let off_diagonal = (0..12).flat_map(|i| (0..12).filter(move |&j| j != i).map(move |j| (j, i)));
            let pairs_within = off_diagonal.filter(|&ji| d[ji] <= 0.1).count();
            BenchResult {
                aur,
                pairs_within,
                pairs: 12 * 11,
            }
        })
        .collect()
}

fn noisy() -> &'static [BenchResult] {
    static CELL: OnceLock<Vec<BenchResult>> = OnceLock::new();
    CELL.get_or_init(|| benchmark_suite(0.2))
}

fn noiseless() -> &'static [BenchResult] {
    static CELL: OnceLock<Vec<BenchResult>> = OnceLock::new();
    CELL.get_or_init(|| benchmark_suite(0.0))
}

fn mean_aurs(results: &[BenchResult]) -> Vec<f64> {
    (0..Method::ALL.len())
        .map(|m| results.iter().map(|r| r.aur[m]).sum::<f64>() / results.len() as f64)
        .collect()
}

fn aur_table(results: &[BenchResult]) -> String {
    let means = mean_aurs(results);
    Method::ALL
        .iter()
        .zip(&means)
        .map(|(m, a)| format!("{m}={a:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn criterion_2_gk_beats_linear_baselines() {
    let results = noisy();
    for (k, r) in results.iter().enumerate() {
        let per: Vec<String> = r.aur.iter().map(|a| format!("{a:.3}")).collect();
        eprintln!("dataset {k}: {}", per.join(" "));
    }
    let means = mean_aurs(results);
    let gk = means[0];
    let pass = means[1..].iter().all(|&m| gk > m) && gk >= 0.8;
    report(2, pass, &format!("mean AUR over {DATASETS} datasets: {}", aur_table(results)));
    assert!(pass);
}

#[test]
fn criterion_3_noiseless_variant() {
    let results = noiseless();
    let means = mean_aurs(results);
    let pass = means[1..].iter().all(|&m| means[0] > m);
    report(3, pass, &format!("σ = 0 mean AUR: {}", aur_table(results)));
    assert!(pass);
}

#[test]
fn criterion_9_restarts_agree() {
    let results = noisy();
    let within: usize = results.iter().map(|r| r.pairs_within).sum();
    let pairs: usize = results.iter().map(|r| r.pairs).sum();
    let fraction = within as f64 / pairs as f64;
    let per: Vec<String> = results
        .iter()
        .map(|r| format!("{:.2}", r.pairs_within as f64 / r.pairs as f64))
        .collect();
    let pass = fraction >= 0.9;
    report(
        9,
        pass,
        &format!("{within}/{pairs} pairs within 0.1 ({fraction:.3}); per dataset [{}]", per.join(", ")),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 4

/// Mean, variance, and their standard errors from a sample.
fn moments(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (mean, m2, (m2 / n).sqrt(), ((m4 - m2 * m2) / n).sqrt())
}

#[test]
fn criterion_4_prior_moments() {
    let priors = ParamPriors::default();
    let draws = 1_000_000;
    let mut rng = stream(4, Purpose::Chain, 0, 0);
    let v: Vec<f64> = (0..draws).map(|_| priors.rate.sample(&mut rng)).collect();
    let k: Vec<f64> = (0..draws).map(|_| priors.michaelis.sample(&mut rng)).collect();
    let s: Vec<f64> = (0..draws).map(|_| priors.sigma.sample(&mut rng)).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, xs, mean, var) in [("V", &v, 1.0, 0.5), ("K", &k, 1.0, 0.5), ("σ", &s, 0.2, 0.01)] {
        let (m, v2, se_m, se_v) = moments(xs);
        let ok = (m - mean).abs() <= 3.0 * se_m && (v2 - var).abs() <= 3.0 * se_v;
        pass &= ok;
        parts.push(format!("{name}: mean {m:.5} (±{:.5}) var {v2:.5} (±{:.5})", 3.0 * se_m, 3.0 * se_v));
    }
    report(4, pass, &parts.join("; "));
    assert!(pass);
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_solver() {
    // Balance residuals of every simulated sample, recomputed independently.
    let mut worst: f64 = 0.0;
    for k in 0..DATASETS {
        let bench = simulate_benchmark(&SimConfig::new(12, 24, 1_000 + k)).unwrap();
        let net = &bench.network;
        for s in 0..24 {
            let x: Vec<f64> = bench.data.clean_phospho.row(s).iter().copied().collect();
            let u: Vec<f64> = bench.data.totals.row(s).iter().copied().collect();
            for (i, node) in net.nodes.iter().enumerate() {
                let target = match node.activation {
                    Some(phi) => phi * u[i],
                    None => {
                        let (mech, params) = support::node_mechanism(node);
                        support::gk(&x, u[i] - x[i], &mech, &params)
                    }
                };
                worst = worst.max((x[i] - target).abs() / u[i]);
            }
        }
    }

    // Single edge with v = K = 1, X_E = U = 1: X² − 3X + 1 = 0.
    let mut two = SimConfig::new(2, 1, 0);
    two.root_prob = 0.0;
    two.max_kinases = 1;
    two.max_inhibitors = 0;
    let mut net = generate_network(&two, 0).unwrap();
    net.nodes[1].activation = Some(1.0);
    net.nodes[1].model = gknet::MechanismModel::empty(1);
    net.nodes[1].params.kinases.clear();
    let kp = net.nodes[0].params.kinases.get_mut(&1).unwrap();
    kp.v = 1.0;
    kp.k = 1.0;
    let x = solve_steady_state(&net, &[1.0, 1.0]).unwrap();
    let closed = (3.0 - 5f64.sqrt()) / 2.0;
    let quadratic_err = (x[0] - closed).abs();

    // Gauss–Seidel against a parents-first solve on acyclic networks.
    let mut topo_err: f64 = 0.0;
    let mut acyclic = 0;
    let mut seed = 0;
    while acyclic < 10 {
        seed += 1;
        let mut cfg = SimConfig::new(8, 1, seed);
        cfg.root_prob = 0.3;
        let net = generate_network(&cfg, 0).unwrap();
        if !net.is_acyclic() {
            continue;
        }
        acyclic += 1;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for _ in 0..5 {
            let totals: Vec<f64> = (0..8).map(|_| (0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal)).exp()).collect();
            let gs = solve_steady_state(&net, &totals).unwrap();
            let oracle = support::topological_solve(&net, &totals).unwrap();
            for (a, b) in gs.iter().zip(&oracle) {
                topo_err = topo_err.max((a - b).abs());
            }
        }
    }

    let pass = worst < 1e-10 && quadratic_err < 1e-9 && topo_err < 1e-10;
    report(
        5,
        pass,
        &format!("max residual {worst:.2e}; (3−√5)/2 error {quadratic_err:.2e}; topological-order max diff {topo_err:.2e}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 6

/// log p(y | subset) by trapezoid quadrature over β (on a grid shifted and
/// scaled to the conditional posterior) and log σ, with the flat intercept
/// integrated in closed form.
fn gprior_quadrature(y: &DVector<f64>, x: &DMatrix<f64>, subset: &[usize]) -> f64 {
    let n = y.len();
    let nf = n as f64;
    let g = nf;
    let d = subset.len();
    let yc = y.map(|v| v - y.mean());
    let xc = DMatrix::from_fn(n, d, |r, k| {
        let col = x.column(subset[k]);
        col[r] - col.mean()
    });
    let a = xc.transpose() * &xc;
    let xty = xc.transpose() * &yc;
    let yty = yc.dot(&yc);
    let (center, chol_l, log_det_a) = if d > 0 {
        let chol = a.clone().cholesky().unwrap();
        let shrink = g / (1.0 + g);
        let a_inv = chol.inverse();
        let center = &a_inv * &xty * shrink;
        let l = (a_inv * shrink).cholesky().unwrap().l();
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        (center, l, log_det)
    } else {
        (DVector::zeros(0), DMatrix::zeros(0, 0), 0.0)
    };
    let log_det_l: f64 = chol_l.diagonal().iter().map(|v| v.ln()).sum();

    // Offsets L·z for every grid node z ∈ [−10, 10]^d.
    let h = 0.125;
    let zs: Vec<f64> = (-80..=80).map(|k| k as f64 * h).collect();
    let offsets: Vec<DVector<f64>> = match d {
        0 => vec![DVector::zeros(0)],
        1 => zs.iter().map(|&z| &chol_l * DVector::from_element(1, z)).collect(),
        _ => zs
            .iter()
            .flat_map(|&z1| zs.iter().map(move |&z2| DVector::from_vec(vec![z1, z2])))
            .map(|z| &chol_l * z)
            .collect(),
    };

    // log of the β-integral at log σ = t.
    let inner = |t: f64| -> f64 {
        let sigma = t.exp();
        let s2 = sigma * sigma;
        let two_pi = 2.0 * std::f64::consts::PI;
        let base = -0.5 * (nf - 1.0) * (two_pi * s2).ln() - 0.5 * nf.ln() - 0.5 * d as f64 * (two_pi * g * s2).ln()
            + 0.5 * log_det_a;
        let mut terms = Vec::with_capacity(offsets.len());
        let mut beta = vec![0.0; d];
        for off in &offsets {
            for k in 0..d {
                beta[k] = center[k] + sigma * off[k];
            }
            let mut quad = 0.0;
            let mut lin = 0.0;
            for r in 0..d {
                lin += beta[r] * xty[r];
                for c in 0..d {
                    quad += beta[r] * a[(r, c)] * beta[c];
                }
            }
            let rss = yty - 2.0 * lin + quad;
            terms.push(base - rss / (2.0 * s2) - quad / (2.0 * g * s2));
        }
        support::log_sum_exp(&terms) + d as f64 * (h.ln() + t) + log_det_l
    };
    // p(σ) ∝ 1/σ: in t = log σ the Jacobian cancels it.
    let coarse: Vec<(f64, f64)> = (-100..=100).map(|k| k as f64 * 0.1).map(|t| (t, inner(t))).collect();
    let t_max = coarse.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let dt = 0.01;
    let fine: Vec<f64> = (-400..=700).map(|k| inner(t_max + k as f64 * dt)).collect();
    support::log_sum_exp(&fine) + dt.ln()
}

#[test]
fn criterion_6_gprior_matches_quadrature() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let n = 8;
        let cols = 3;
        let x = DMatrix::from_fn(n, cols, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let beta: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|r| (0..cols).map(|c| x[(r, c)] * beta[c]).sum::<f64>() + rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let design = LinearDesign::from_columns(0, &y, &x, vec![1, 2, 3]).unwrap();
        let d = case % 3;
        let subset: Vec<usize> = (0..d).collect();
        let closed = gprior_log_evidence(&design, &subset).unwrap();
        let oracle = gprior_quadrature(&design.response, &design.candidates, &subset);
        worst = worst.max((closed - oracle).exp_m1().abs());
    }
    let pass = worst < 1e-6;
    report(6, pass, &format!("max relative error {worst:.2e} over 20 cases"));
    assert!(pass);
}

// ---------------------------------------------------------------- 7

/// P(score_pos > score_neg) + ½ P(tie), with NA below every number.
fn mann_whitney(scores: &[(Option<f64>, bool)]) -> f64 {
    let key = |w: Option<f64>| w.unwrap_or(f64::NEG_INFINITY);
    let pos: Vec<f64> = scores.iter().filter(|s| s.1).map(|s| key(s.0)).collect();
    let neg: Vec<f64> = scores.iter().filter(|s| !s.1).map(|s| key(s.0)).collect();
    let mut credit = 0.0;
    for &a in &pos {
        for &b in &neg {
            credit += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    credit / (pos.len() * neg.len()) as f64
}

#[test]
fn criterion_7_trapezoid_equals_mann_whitney() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.random_range(2..80);
        let levels = rng.random_range(2..12);
        let mut scores: Vec<(Option<f64>, bool)> = (0..len)
            .map(|_| {
                let w = (rng.random::<f64>() >= 0.1).then(|| rng.random_range(0..levels) as f64 / levels as f64);
                (w, rng.random_bool(0.3))
            })
            .collect();
        scores[0].1 = true;
        scores[1].1 = false;
        let trapezoid = auc(&roc_curve(&scores).unwrap());
        worst = worst.max((trapezoid - mann_whitney(&scores)).abs());
    }
    let pass = worst <= 1e-12;
    report(7, pass, &format!("max |trapezoid − Mann–Whitney| {worst:.1e} over 100 sets"));
    assert!(pass);
}

// ---------------------------------------------------------------- 8

fn pipeline_once(dir: &std::path::Path) {
    let base = Settings {
        seed: Some(8),
        p: Some(6),
        n: Some(24),
        iters: Some(4_000),
        burnin: Some(1_000),
        ..Default::default()
    };
    let sim = dir.join("sim");
    let at = |out: &std::path::Path, extra: Settings| base.clone().overlay(Settings { out: Some(out.into()), ..extra });
    run(&RunConfig::new(Command::Simulate, &at(&sim, Settings::default())).unwrap()).unwrap();
    let mut weights = Vec::new();
    for method in Method::ALL {
        let out = dir.join(method.as_str());
        let s = at(
            &out,
            Settings {
                method: Some(method),
                phospho: Some(sim.join("phospho.csv")),
                unphospho: Some(sim.join("unphospho.csv")),
                ..Default::default()
            },
        );
        run(&RunConfig::new(Command::Infer, &s).unwrap()).unwrap();
        weights.push(out.join(format!("edges_{method}.csv")).to_string_lossy().into_owned());
    }
    let s = at(
        &dir.join("eval"),
        Settings {
            truth: Some(sim.join("truth.csv")),
            weights: Some(weights.join(",")),
            dataset: Some("d".into()),
            ..Default::default()
        },
    );
    run(&RunConfig::new(Command::Evaluate, &s).unwrap()).unwrap();
}

fn csv_files(root: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_8_pipeline_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline_once(a.path());
    pipeline_once(b.path());
    let files = csv_files(a.path());
    let same = files == csv_files(b.path())
        && files
            .iter()
            .all(|f| std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap());
    report(8, same, &format!("{} CSV artifacts compared byte for byte", files.len()));
    assert!(same);
    assert!(files.len() >= 10);
}

#[test]
fn simulated_noise_has_the_configured_scale() {
    // One fixed entry measured 10⁴ times: log(noisy / clean) ~ N(0, σ²).
    let cfg = SimConfig::new(3, 10_000, 12);
    let net = generate_network(&cfg, 0).unwrap();
    let sim = gknet::sim::simulate_dataset(&net, &cfg).unwrap();
    let logs: Vec<f64> = (0..cfg.n)
        .map(|s| (sim.dataset.phospho()[(s, 0)] / sim.clean_phospho[(s, 0)]).ln())
        .collect();
    let (mean, var, se_mean, se_var) = moments(&logs);
    assert!(mean.abs() <= 3.0 * se_mean);
    let sd = var.sqrt();
    // Delta method: se(sd) = se(var) / (2 sd).
    assert!((sd - 0.2).abs() <= 3.0 * se_var / (2.0 * sd), "sd {sd}");
    let z = Normal::new(0.0, 0.2).unwrap();
    let below = logs.iter().filter(|&&l| l < 0.2).count() as f64 / logs.len() as f64;
    assert!((below - z.cdf(0.2)).abs() < 0.02);
}
