//! Experiment execution: boosting runs, the KDE comparison, and the theory
//! suite, with CSV/JSON result emission.
//!
//! Every experiment writes per-run trace CSVs under `runs/`, an
//! `aggregate.csv` holding per-round means with 95% confidence halfwidths
//! over runs, a `manifest.json` echoing the configuration plus a content hash
//! of the aggregate, and (for boosting runs) the first run's final density
//! snapshot under `snapshots/`. Identical config and seed give byte-identical
//! aggregates regardless of `--jobs`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use boostdens::boost::{
    run_adabode, AdaBodeConfig, BoostTrace, MetricsConfig, StepPolicy,
};
use boostdens::dist::{BoostedDensity, DiagonalGaussian, GaussianMixture, ReferenceDensity, Sampleable};
use boostdens::kde;
use boostdens::learner::{Activation, TrainConfig};
use boostdens::metrics::{nll_on_samples, GridSpec};
use boostdens::theory::{run_theory_suite, DEFAULT_TOLERANCE};
use boostdens::{Error, Result};

use crate::config::{ExperimentConfig, ExperimentKind, ReferenceSpec, Scale, TargetSpec};

/// Splitmix-style stream separation for experiment-level seeding.
fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(a << 20)
        .wrapping_add(b + 1);
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// One emitted aggregate observation.
#[derive(Debug, Clone)]
struct Observation {
    condition: String,
    t: Option<usize>,
    kl: Option<f64>,
    nll: Option<f64>,
    accuracy: Option<f64>,
    coverage: Option<f64>,
}

fn observations_from_trace(condition: &str, trace: &BoostTrace) -> Vec<Observation> {
    let mut rows = vec![Observation {
        condition: condition.to_string(),
        t: Some(0),
        kl: trace.initial_kl,
        nll: Some(trace.initial_nll),
        accuracy: None,
        coverage: trace.initial_coverage,
    }];
    for r in &trace.rounds {
        rows.push(Observation {
            condition: condition.to_string(),
            t: Some(r.t),
            kl: r.kl,
            nll: Some(r.nll),
            accuracy: Some(r.accuracy),
            coverage: r.coverage,
        });
    }
    rows
}

struct RunOutput {
    condition: String,
    run: usize,
    trace: Option<BoostTrace>,
    observations: Vec<Observation>,
    snapshot: Option<String>,
}

pub struct ExperimentResult {
    pub exit_code: i32,
    pub aggregate_path: PathBuf,
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    full: bool,
    jobs: Option<usize>,
    effective_seed: u64,
    output_dir: &Path,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let scale = if full { Scale::full() } else { Scale::desk() };
    fs::create_dir_all(output_dir)?;

    let exit_code = match cfg.experiment {
        ExperimentKind::Theory => {
            return run_theory_experiment(cfg, effective_seed, output_dir);
        }
        _ => 0,
    };

    let outputs = match cfg.experiment {
        ExperimentKind::KdeCompare => {
            run_with_jobs(jobs, || kde_compare_runs(cfg, scale, effective_seed))?
        }
        _ => run_with_jobs(jobs, || boosting_runs(cfg, scale, effective_seed))?,
    };

    // Per-run trace CSVs and first-run snapshots.
    let runs_dir = output_dir.join("runs");
    fs::create_dir_all(&runs_dir)?;
    let snap_dir = output_dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    for out in &outputs {
        if let Some(trace) = &out.trace {
            let path = runs_dir.join(format!("{}_run{:02}.csv", out.condition, out.run));
            fs::write(path, trace.to_csv())?;
        }
        if let Some(snapshot) = &out.snapshot {
            let path = snap_dir.join(format!("{}_run{:02}.json", out.condition, out.run));
            fs::write(path, snapshot)?;
        }
    }

    let aggregate = aggregate_csv(cfg.experiment.name(), &outputs);
    let aggregate_path = output_dir.join("aggregate.csv");
    fs::write(&aggregate_path, &aggregate)?;
    write_manifest(cfg, effective_seed, full, &aggregate, output_dir)?;

    Ok(ExperimentResult {
        exit_code,
        aggregate_path,
    })
}

fn run_with_jobs<F, T>(jobs: Option<usize>, f: F) -> Result<T>
where
    F: FnOnce() -> Result<T> + Send,
    T: Send,
{
    match jobs {
        None => f(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(f)
        }
    }
}

// ---------------------------------------------------------------------------
// Boosting experiments (ring, random_mixture, activations, topology,
// dimensions).
// ---------------------------------------------------------------------------

struct BoostCondition {
    name: String,
    target: TargetSpec,
    /// Rebuild the target per run (random mixtures are re-drawn each run).
    per_run_target: bool,
    q0: ReferenceSpec,
    policy: StepPolicy,
    topology: Vec<usize>,
    activation: Activation,
    t_rounds: usize,
    epochs: usize,
    batch_size: usize,
    early_stop_gap: Option<f64>,
    use_grid: bool,
}

fn base_condition(cfg: &ExperimentConfig, scale: Scale) -> BoostCondition {
    BoostCondition {
        name: "default".into(),
        target: cfg.target.clone().unwrap_or(TargetSpec::Ring {
            modes: 8,
            radius: 5.0,
            sigma: 1.0,
        }),
        per_run_target: false,
        q0: cfg.q0.clone().unwrap_or(ReferenceSpec::Isotropic { sigma: 1.0 }),
        policy: cfg.policy.unwrap_or(StepPolicy::Fixed { value: 0.5 }),
        topology: cfg.topology.clone().unwrap_or_else(|| vec![2, 5, 5, 1]),
        activation: cfg.activation.unwrap_or(Activation::Selu),
        t_rounds: cfg.t_rounds.unwrap_or(6),
        epochs: cfg.epochs.unwrap_or(scale.epochs),
        batch_size: cfg.batch_size.unwrap_or(50),
        early_stop_gap: cfg.early_stop_gap,
        use_grid: true,
    }
}

fn conditions_for(cfg: &ExperimentConfig, scale: Scale) -> Result<Vec<BoostCondition>> {
    let base = base_condition(cfg, scale);
    Ok(match cfg.experiment {
        ExperimentKind::Ring => vec![BoostCondition {
            name: "ring".into(),
            ..base
        }],
        ExperimentKind::RandomMixture => vec![BoostCondition {
            name: "random_mixture".into(),
            target: cfg.target.clone().unwrap_or(TargetSpec::Random {
                dim: 2,
                modes: 8,
                box_halfwidth: 10.0,
                sigma: 1.0,
                seed: 0,
            }),
            per_run_target: true,
            ..base
        }],
        ExperimentKind::Activations => Activation::ALL
            .into_iter()
            .map(|act| BoostCondition {
                name: act.name().into(),
                activation: act,
                topology: cfg.topology.clone().unwrap_or_else(|| vec![2, 5, 5, 1]),
                ..base_condition(cfg, scale)
            })
            .collect(),
        ExperimentKind::Topology => {
            let topologies: [(&str, Vec<usize>); 5] = [
                ("1x5", vec![2, 5, 1]),
                ("2x5", vec![2, 5, 5, 1]),
                ("1x10", vec![2, 10, 1]),
                ("2x10", vec![2, 10, 10, 1]),
                ("2x20", vec![2, 20, 20, 1]),
            ];
            topologies
                .into_iter()
                .map(|(name, topology)| BoostCondition {
                    name: name.into(),
                    topology,
                    activation: Activation::Selu,
                    target: cfg.target.clone().unwrap_or(TargetSpec::Random {
                        dim: 2,
                        modes: 8,
                        box_halfwidth: 10.0,
                        sigma: 1.0,
                        seed: 0,
                    }),
                    per_run_target: true,
                    ..base_condition(cfg, scale)
                })
                .collect()
        }
        ExperimentKind::Dimensions => [2usize, 4, 6]
            .into_iter()
            .map(|dim| BoostCondition {
                name: format!("d{dim}"),
                target: TargetSpec::Random {
                    dim,
                    modes: 8,
                    box_halfwidth: 10.0,
                    sigma: 1.0,
                    seed: 0,
                },
                per_run_target: true,
                topology: vec![dim, 10, 10, 1],
                activation: Activation::Relu,
                t_rounds: cfg.t_rounds.unwrap_or(10),
                epochs: cfg.epochs.unwrap_or(scale.epochs),
                batch_size: cfg.batch_size.unwrap_or(250),
                early_stop_gap: Some(cfg.early_stop_gap.unwrap_or(0.2)),
                use_grid: false,
                ..base_condition(cfg, scale)
            })
            .collect(),
        ExperimentKind::KdeCompare | ExperimentKind::Theory => {
            return Err(Error::Config("not a boosting experiment".into()))
        }
    })
}

fn build_target(spec: &TargetSpec, per_run: bool, seed: u64, run: usize) -> Result<GaussianMixture> {
    match spec {
        TargetSpec::Random {
            dim,
            modes,
            box_halfwidth,
            sigma,
            ..
        } if per_run => GaussianMixture::random(
            *dim,
            *modes,
            *box_halfwidth,
            *sigma,
            derive_seed(seed, 7, run as u64),
        ),
        other => other.build(),
    }
}

fn adabode_config(
    cfg: &ExperimentConfig,
    scale: Scale,
    cond: &BoostCondition,
    target: &GaussianMixture,
    run_seed: u64,
) -> Result<AdaBodeConfig> {
    use boostdens::dist::Density;
    let grid = if cond.use_grid && target.dim() <= 2 {
        Some(GridSpec::around_mixture(
            target,
            4.0,
            cfg.grid_points.unwrap_or(scale.grid_points),
        )?)
    } else {
        None
    };
    Ok(AdaBodeConfig {
        t_rounds: cond.t_rounds,
        policy: cond.policy,
        topology: cond.topology.clone(),
        activation: cond.activation,
        train: TrainConfig {
            epochs: cond.epochs,
            batch_size: cond.batch_size,
            early_stop_gap: cond.early_stop_gap,
            ..TrainConfig::default()
        },
        n_p: cfg.n_p.unwrap_or(1000),
        n_q: cfg.n_q.unwrap_or(1000),
        mh: cfg.mh.clone().unwrap_or_default(),
        grid,
        importance_n: cfg.importance_n.unwrap_or(100_000),
        metrics: MetricsConfig {
            kl: cond.use_grid,
            coverage: cfg.coverage.clone(),
        },
        seed: run_seed,
    })
}

fn boosting_runs(cfg: &ExperimentConfig, scale: Scale, seed: u64) -> Result<Vec<RunOutput>> {
    let conditions = conditions_for(cfg, scale)?;
    let n_runs = cfg.n_runs.unwrap_or(20);
    let jobs: Vec<(usize, usize)> = (0..conditions.len())
        .flat_map(|c| (0..n_runs).map(move |r| (c, r)))
        .collect();

    let mut outputs: Vec<RunOutput> = jobs
        .into_par_iter()
        .map(|(c, run)| -> Result<RunOutput> {
            let cond = &conditions[c];
            let run_seed = derive_seed(seed, c as u64, run as u64);
            let target = build_target(&cond.target, cond.per_run_target, seed, run)?;
            let q0 = match &cond.q0 {
                ReferenceSpec::Empirical => {
                    use boostdens::dist::Density;
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run_seed, 11, 0));
                    let sample = target.sample_n(cfg.n_p.unwrap_or(1000), &mut rng);
                    let _ = Density::dim(&target);
                    ReferenceDensity::Diagonal(DiagonalGaussian::fit(sample.view())?)
                }
                spec => {
                    use boostdens::dist::Density;
                    spec.build(Density::dim(&target), None)?
                }
            };
            let ab_cfg = adabode_config(cfg, scale, cond, &target, run_seed)?;
            let (bd, trace) = run_adabode(&target, q0, &ab_cfg)?;
            let snapshot = if run == 0 {
                Some(boostdens::snapshot::to_json(&bd)?)
            } else {
                None
            };
            let observations = observations_from_trace(&cond.name, &trace);
            Ok(RunOutput {
                condition: cond.name.clone(),
                run,
                trace: Some(trace),
                observations,
                snapshot,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    outputs.sort_by(|a, b| (&a.condition, a.run).cmp(&(&b.condition, b.run)));
    Ok(outputs)
}

// ---------------------------------------------------------------------------
// KDE comparison.
// ---------------------------------------------------------------------------

fn kde_compare_runs(cfg: &ExperimentConfig, scale: Scale, seed: u64) -> Result<Vec<RunOutput>> {
    let n_runs = cfg.n_runs.unwrap_or(20);
    let n_fit = cfg.n_p.unwrap_or(1000);
    let t_rounds = cfg.t_rounds.unwrap_or(2);

    let mut outputs: Vec<RunOutput> = (0..n_runs)
        .into_par_iter()
        .map(|run| -> Result<RunOutput> {
            let run_seed = derive_seed(seed, 0, run as u64);
            let target_spec = cfg.target.clone().unwrap_or(TargetSpec::Random {
                dim: 2,
                modes: 8,
                box_halfwidth: 10.0,
                sigma: 1.0,
                seed: 0,
            });
            let target = build_target(&target_spec, true, seed, run)?;

            // One master sample per run: the KDEs are fit on it, the
            // empirical reference is fit on it, and every condition's NLL is
            // evaluated on it.
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run_seed, 1, 0));
            let master = target.sample_n(n_fit, &mut rng);
            let q0 = ReferenceDensity::Diagonal(DiagonalGaussian::fit(master.view())?);

            let cond = BoostCondition {
                name: "boost".into(),
                target: target_spec,
                per_run_target: true,
                q0: ReferenceSpec::Empirical,
                policy: cfg.policy.unwrap_or(StepPolicy::LinesearchNll),
                topology: cfg.topology.clone().unwrap_or_else(|| vec![2, 10, 10, 1]),
                activation: cfg.activation.unwrap_or(Activation::Relu),
                t_rounds,
                epochs: cfg.epochs.unwrap_or(scale.epochs),
                batch_size: cfg.batch_size.unwrap_or(50),
                early_stop_gap: cfg.early_stop_gap,
                use_grid: true,
            };
            let ab_cfg = adabode_config(cfg, scale, &cond, &target, run_seed)?;
            let (bd, trace) = run_adabode(&target, q0.clone(), &ab_cfg)?;

            // NLL of each boosted prefix Q_0..Q_T on the master sample.
            let mut observations = Vec::new();
            for t in 0..=t_rounds {
                let prefix =
                    BoostedDensity::from_parts(q0.clone(), bd.rounds()[..t].to_vec())?;
                let nll = nll_on_samples(master.view(), &target, &prefix)?;
                observations.push(Observation {
                    condition: format!("q{t}"),
                    t: Some(t),
                    kl: None,
                    nll: Some(nll),
                    accuracy: None,
                    coverage: None,
                });
            }

            // Each kernel estimator fit on the same master sample.
            for kernel in kde::Kernel::ALL {
                let model = kde::fit(master.view(), kernel, kde::BandwidthRule::ScottSilverman)?;
                let nll = nll_on_samples(master.view(), &target, &model)?;
                observations.push(Observation {
                    condition: kernel.name().to_string(),
                    t: None,
                    kl: None,
                    nll: Some(nll),
                    accuracy: None,
                    coverage: None,
                });
            }

            Ok(RunOutput {
                condition: "boost".into(),
                run,
                trace: Some(trace),
                observations,
                snapshot: if run == 0 {
                    Some(boostdens::snapshot::to_json(&bd)?)
                } else {
                    None
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    outputs.sort_by(|a, b| (&a.condition, a.run).cmp(&(&b.condition, b.run)));
    Ok(outputs)
}

// ---------------------------------------------------------------------------
// Theory suite.
// ---------------------------------------------------------------------------

fn run_theory_experiment(
    cfg: &ExperimentConfig,
    seed: u64,
    output_dir: &Path,
) -> Result<ExperimentResult> {
    let trials = cfg.theory_trials.unwrap_or(1000);
    let reports = run_theory_suite(trials, seed, DEFAULT_TOLERANCE);
    let mut ok = true;
    for r in &reports {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status} {name}: {trials} trials, {violations} violations, worst slack {slack:.3e}",
            name = r.name,
            trials = r.n_trials,
            violations = r.n_violations,
            slack = r.worst_slack
        );
        ok &= r.passed();
    }
    let json = serde_json::to_string_pretty(&reports).map_err(|e| Error::Parse(e.to_string()))?;
    let path = output_dir.join("theory_report.json");
    fs::write(&path, json)?;
    Ok(ExperimentResult {
        exit_code: if ok { 0 } else { 1 },
        aggregate_path: path,
    })
}

// ---------------------------------------------------------------------------
// Aggregation and manifest.
// ---------------------------------------------------------------------------

fn mean_ci(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, 1.96 * (var / n).sqrt()))
}

fn aggregate_csv(experiment: &str, outputs: &[RunOutput]) -> String {
    // Group rows by (condition, t) preserving first-seen order.
    let mut keys: Vec<(String, Option<usize>)> = Vec::new();
    let mut groups: std::collections::HashMap<(String, Option<usize>), Vec<&Observation>> =
        std::collections::HashMap::new();
    for out in outputs {
        for obs in &out.observations {
            let key = (obs.condition.clone(), obs.t);
            if !groups.contains_key(&key) {
                keys.push(key.clone());
            }
            groups.entry(key).or_default().push(obs);
        }
    }

    let mut csv = String::from(
        "experiment,condition,t,kl_mean,kl_ci95,nll_mean,nll_ci95,acc_mean,acc_ci95,coverage_mean,coverage_ci95\n",
    );
    let fmt = |stats: Option<(f64, f64)>| match stats {
        None => (String::new(), String::new()),
        Some((m, c)) => (format!("{m:.6}"), format!("{c:.6}")),
    };
    for key in keys {
        let rows = &groups[&key];
        let collect = |f: fn(&Observation) -> Option<f64>| -> Vec<f64> {
            rows.iter().filter_map(|o| f(o)).collect()
        };
        let (kl_m, kl_c) = fmt(mean_ci(&collect(|o| o.kl)));
        let (nll_m, nll_c) = fmt(mean_ci(&collect(|o| o.nll)));
        let (acc_m, acc_c) = fmt(mean_ci(&collect(|o| o.accuracy)));
        let (cov_m, cov_c) = fmt(mean_ci(&collect(|o| o.coverage)));
        let t_str = key.1.map_or(String::new(), |t| t.to_string());
        csv.push_str(&format!(
            "{experiment},{},{},{},{},{},{},{},{},{},{}\n",
            key.0, t_str, kl_m, kl_c, nll_m, nll_c, acc_m, acc_c, cov_m, cov_c
        ));
    }
    csv
}

fn write_manifest(
    cfg: &ExperimentConfig,
    seed: u64,
    full: bool,
    aggregate: &str,
    output_dir: &Path,
) -> Result<()> {
    let mut hasher = Sha256::new();
    hasher.update(aggregate.as_bytes());
    let digest = hasher.finalize();
    let manifest = serde_json::json!({
        "tool": "boostdens",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment.name(),
        "effective_seed": seed,
        "scale": if full { "full" } else { "desk" },
        "config": serde_json::to_value(cfg).map_err(|e| Error::Parse(e.to_string()))?,
        "aggregate_sha256": format!("{digest:x}"),
    });
    let body =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(output_dir.join("manifest.json"), body)?;
    Ok(())
}
