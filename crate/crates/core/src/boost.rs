//! The boosting loop and its step-size machinery.
//!
//! Each round trains a classifier to separate fresh target samples from
//! samples of the current iterate, estimates its edges, picks a step size
//! according to the active policy, and pushes the multiplicative update.
//! Three policies are provided:
//!
//! * `Wla` — the edge-driven step
//!   `α = min(1, (1/2ĉ_sup)·log((1+μ̂_Q)/(1-μ̂_Q)))` applied to a properly
//!   scaled classifier; the step is *clamped* exactly when
//!   `μ̂_Q >= tanh(ĉ_sup)`.
//! * `Fixed(v)` — a constant step size (the naive 1/2 in most experiments).
//! * `LinesearchNll` — pick the step from 10 equally spaced candidates in
//!   `[0, 1]` minimizing the training-set normalized NLL, first index on ties.
//!
//! The module also carries the sample-size calculator for edge estimation and
//! the two rate helpers (iteration-count bound and geometric decay factor).

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{BoostedDensity, Density, ReferenceDensity, Sampleable, ZEstimator};
use crate::error::{Error, Result};
use crate::learner::{
    estimate_edges, properly_scale, train_classifier, Activation, EdgeEstimates, MlpClassifier,
    TrainConfig,
};
use crate::mcmc::MhConfig;
use crate::metrics::{accuracy, kl_grid, GridSpec};

/// Step-size selection policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepPolicy {
    Wla,
    Fixed { value: f64 },
    LinesearchNll,
}

impl StepPolicy {
    fn validate(&self) -> Result<()> {
        if let StepPolicy::Fixed { value } = self {
            if !(0.0..=1.0).contains(value) {
                return Err(Error::AlphaRange(*value));
            }
        }
        Ok(())
    }
}

/// Whether the edge-driven step size hit its ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Regular,
    Clamped,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Regular => "regular",
            Regime::Clamped => "clamped",
        })
    }
}

/// Clamping threshold `μ* = (e^{2c} - 1)/(e^{2c} + 1) = tanh(c_sup)`.
pub fn mu_c_sup(c_sup: f64) -> f64 {
    c_sup.tanh()
}

/// Edge-driven step size, clamped to `[0, 1]`. `μ̂_Q` is clipped into
/// `±(1 - 1e-9)` first (an empirical maximum can reach |μ̂| = 1 exactly);
/// negative edges give step 0.
pub fn step_size_wla(mu_q_hat: f64, c_sup: f64) -> (f64, Regime) {
    let mu = mu_q_hat.clamp(-(1.0 - 1e-9), 1.0 - 1e-9);
    let raw = ((1.0 + mu) / (1.0 - mu)).ln() / (2.0 * c_sup);
    if raw >= 1.0 {
        (1.0, Regime::Clamped)
    } else {
        (raw.max(0.0), Regime::Regular)
    }
}

/// Sample sizes sufficient for the empirical weak learning assumption:
/// `m >= (1/(κ*·γ)²)·log(4T/δ)` per class, with `κ* = μ*(1-μ*)/2`.
pub fn ewla_sample_sizes(
    gamma_p: f64,
    gamma_q: f64,
    c_sup: f64,
    t_rounds: usize,
    delta: f64,
) -> Result<(u64, u64)> {
    for (name, v) in [("gamma_p", gamma_p), ("gamma_q", gamma_q)] {
        if !(0.0..=1.0).contains(&v) || v == 0.0 {
            return Err(Error::Range {
                name,
                value: v,
                range: "(0, 1]",
            });
        }
    }
    if c_sup <= 0.0 {
        return Err(Error::Range {
            name: "c_sup",
            value: c_sup,
            range: "(0, inf)",
        });
    }
    if !(0.0..=1.0).contains(&delta) || delta == 0.0 {
        return Err(Error::Range {
            name: "delta",
            value: delta,
            range: "(0, 1]",
        });
    }
    if t_rounds == 0 {
        return Err(Error::Range {
            name: "t_rounds",
            value: 0.0,
            range: "[1, inf)",
        });
    }
    let mu_star = mu_c_sup(c_sup);
    let kappa = mu_star * (1.0 - mu_star) / 2.0;
    let log_term = (4.0 * t_rounds as f64 / delta).ln();
    let bound = |gamma: f64| ((kappa * gamma).powi(-2) * log_term).ceil() as u64;
    Ok((bound(gamma_p), bound(gamma_q)))
}

/// Iteration-count bound `T >= 2·(KL(P,Q_0) - ρ)/(γ_P·γ_Q)`.
pub fn rate_wla_iterations(kl0: f64, rho: f64, gamma_p: f64, gamma_q: f64) -> f64 {
    2.0 * (kl0 - rho) / (gamma_p * gamma_q)
}

/// Per-round geometric decay factor
/// `1 - min{2, γ_Q/c_sup}·γ_P / (2(1+γ_ε))`.
pub fn geom_boost_factor(gamma_p: f64, gamma_q: f64, c_sup: f64, gamma_eps: f64) -> f64 {
    1.0 - (gamma_q / c_sup).min(2.0) * gamma_p / (2.0 * (1.0 + gamma_eps))
}

/// Which form of the per-round decrease to evaluate: the estimated-edge bound
/// or the exact-edge bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaForm {
    Estimate,
    Exact,
}

/// Guaranteed KL decrease `Δ` for the given regime.
///
/// Regular regime: `(μ_P/16)·log((1+μ_Q)/(1-μ_Q))` (estimate form) or
/// `(μ_P/4)·log(...)` (exact form). Clamped regime:
/// `(μ_P·c_sup)/2 + μ*²(1/4 + δ/(1-μ*²))` (estimate) or
/// `μ_P·c_sup + μ*²(1/2 + δ/(1-μ*²))` (exact), with `δ = μ_Q/μ* - 1`.
pub fn predicted_decrease(edges: &EdgeEstimates, regime: Regime, form: DeltaForm) -> f64 {
    let mu_p = edges.mu_p_hat;
    let mu_q = edges.mu_q_hat.clamp(-(1.0 - 1e-9), 1.0 - 1e-9);
    match regime {
        Regime::Regular => {
            let log_odds = ((1.0 + mu_q) / (1.0 - mu_q)).ln();
            match form {
                DeltaForm::Estimate => mu_p / 16.0 * log_odds,
                DeltaForm::Exact => mu_p / 4.0 * log_odds,
            }
        }
        Regime::Clamped => {
            let mu_star = mu_c_sup(edges.c_sup_hat);
            let delta = edges.mu_q_hat / mu_star - 1.0;
            let var_term = delta / (1.0 - mu_star * mu_star);
            match form {
                DeltaForm::Estimate => {
                    mu_p * edges.c_sup_hat / 2.0 + mu_star * mu_star * (0.25 + var_term)
                }
                DeltaForm::Exact => mu_p * edges.c_sup_hat + mu_star * mu_star * (0.5 + var_term),
            }
        }
    }
}

/// Per-round metrics to record while boosting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Compute grid KL against the target each round (dim <= 2 only).
    pub kl: bool,
    /// Coverage `C_κ` each round; `None` skips it.
    pub coverage: Option<CoverageConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub kappa: f64,
    pub n_q: usize,
    pub n_p: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            kl: true,
            coverage: None,
        }
    }
}

/// Full configuration of one boosting run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaBodeConfig {
    pub t_rounds: usize,
    pub policy: StepPolicy,
    pub topology: Vec<usize>,
    pub activation: Activation,
    pub train: TrainConfig,
    /// Per-round sample sizes for the target and the current iterate.
    pub n_p: usize,
    pub n_q: usize,
    pub mh: MhConfig,
    /// Grid for the Z estimator and KL metric when dim <= 2.
    pub grid: Option<GridSpec>,
    /// Importance-sample count for the Z estimator when dim > 2.
    pub importance_n: usize,
    pub metrics: MetricsConfig,
    pub seed: u64,
}

/// One recorded boosting round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundTrace {
    pub t: usize,
    pub alpha: f64,
    pub regime: Regime,
    pub mu_p_hat: f64,
    pub mu_q_hat: f64,
    pub c_sup_hat: f64,
    pub predicted_delta: f64,
    pub kl: Option<f64>,
    pub nll: f64,
    pub accuracy: f64,
    pub coverage: Option<f64>,
    pub wla_satisfied: bool,
}

/// Trace of a full run, including the reference iterate's metrics at t = 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostTrace {
    pub initial_kl: Option<f64>,
    pub initial_nll: f64,
    pub initial_coverage: Option<f64>,
    pub rounds: Vec<RoundTrace>,
}

impl BoostTrace {
    /// KL curve indexed by round, starting at t = 0. Entries are present only
    /// when the KL metric was computed.
    pub fn kl_curve(&self) -> Vec<Option<f64>> {
        let mut curve = vec![self.initial_kl];
        curve.extend(self.rounds.iter().map(|r| r.kl));
        curve
    }

    /// CSV lines with the stable column set; the t = 0 row has empty
    /// round-specific fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "t,alpha,regime,mu_p_hat,mu_q_hat,c_sup_hat,predicted_delta,kl,nll,accuracy,wla_satisfied\n",
        );
        let fmt_opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        out.push_str(&format!(
            "0,,,,,,,{},{:.6},,\n",
            fmt_opt(self.initial_kl),
            self.initial_nll
        ));
        for r in &self.rounds {
            out.push_str(&format!(
                "{},{:.6},{},{:.6},{:.6},{:.6},{:.6},{},{:.6},{:.6},{}\n",
                r.t,
                r.alpha,
                r.regime,
                r.mu_p_hat,
                r.mu_q_hat,
                r.c_sup_hat,
                r.predicted_delta,
                fmt_opt(r.kl),
                r.nll,
                r.accuracy,
                r.wla_satisfied
            ));
        }
        out
    }
}

/// Deterministic per-(round, purpose) seed derivation (splitmix64 finalizer).
fn derive_seed(seed: u64, round: usize, purpose: u64) -> u64 {
    let mut x = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((round as u64) << 8)
        .wrapping_add(purpose + 1);
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn z_estimator_for(cfg: &AdaBodeConfig, dim: usize, round: usize) -> Result<ZEstimator> {
    if dim <= 2 {
        if let Some(grid) = &cfg.grid {
            return Ok(ZEstimator::Grid(grid.clone()));
        }
    }
    if cfg.importance_n == 0 {
        return Err(Error::Config(
            "no Z estimator available: provide a grid (dim <= 2) or importance_n > 0".into(),
        ));
    }
    Ok(ZEstimator::ImportanceQ0 {
        n: cfg.importance_n,
        seed: derive_seed(cfg.seed, round, 4),
    })
}

/// Candidate step sizes for the NLL line search: 10 equally spaced points on
/// `[0, 1]`.
pub fn linesearch_candidates() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 9.0).collect()
}

/// Evaluate the training-set normalized NLL at each candidate step size and
/// return the first minimizer together with all candidate values.
pub fn linesearch_nll_alpha(
    prev: &BoostedDensity,
    classifier: &MlpClassifier,
    p_pool: ArrayView2<'_, f64>,
    log_p_mean: f64,
    z_estimator: &ZEstimator,
) -> Result<(f64, Vec<f64>)> {
    let base: Vec<f64> = p_pool
        .rows()
        .into_iter()
        .map(|r| prev.log_unnormalized(r.as_slice().unwrap()) - prev.log_z_cum())
        .collect();
    let c_vals: Vec<f64> = p_pool
        .rows()
        .into_iter()
        .map(|r| classifier.value(r.as_slice().unwrap()))
        .collect();
    let n = base.len() as f64;

    let candidates = linesearch_candidates();
    let mut values = Vec::with_capacity(candidates.len());
    for &alpha in &candidates {
        let pushed = prev.push_round(classifier.clone(), alpha, z_estimator)?;
        let log_z_step = pushed.log_z_cum() - prev.log_z_cum();
        let mean_q: f64 = base
            .iter()
            .zip(&c_vals)
            .map(|(b, c)| b + alpha * c - log_z_step)
            .sum::<f64>()
            / n;
        values.push(mean_q / log_p_mean);
    }
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    Ok((candidates[best], values))
}

/// Run the boosting loop for `t_rounds` rounds against a sampleable target.
///
/// Per round: draw target samples, draw iterate samples (directly from the
/// reference before the first round, by Metropolis–Hastings afterwards),
/// train a classifier, pick the step size per policy (proper scaling is
/// applied under the `Wla` policy only), push the round, and record metrics.
/// WLA violations are recorded in the trace, never fatal. Deterministic in
/// `config.seed`.
pub fn run_adabode<T: Sampleable + ?Sized>(
    target: &T,
    q0: ReferenceDensity,
    config: &AdaBodeConfig,
) -> Result<(BoostedDensity, BoostTrace)> {
    config.policy.validate()?;
    if config.t_rounds == 0 {
        return Err(Error::Config("t_rounds must be >= 1".into()));
    }
    let dim = crate::dist::Density::dim(&q0);
    if target.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: target.dim(),
        });
    }

    let mut bd = BoostedDensity::new(q0);

    // Metrics of the bare reference.
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0, 0));
    let p0 = target.sample_n(config.n_p.max(2), &mut rng);
    let initial_nll = crate::metrics::nll_on_samples(p0.view(), target, &bd)?;
    let initial_kl = round_kl(target, &bd, config)?;
    let initial_coverage = round_coverage(target, &bd, config, 0)?;
    let mut trace = BoostTrace {
        initial_kl,
        initial_nll,
        initial_coverage,
        rounds: Vec::with_capacity(config.t_rounds),
    };

    for t in 1..=config.t_rounds {
        // Fresh target pool and iterate pool.
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, t, 0));
        let p_pool = target.sample_n(config.n_p, &mut rng);
        let mh = MhConfig {
            seed: derive_seed(config.seed, t, 1),
            ..config.mh.clone()
        };
        let q_pool = bd.sample_with(config.n_q, &mh)?;

        let train_cfg = TrainConfig {
            seed: derive_seed(config.seed, t, 2),
            ..config.train.clone()
        };
        let (classifier, _record) = train_classifier(
            p_pool.view(),
            q_pool.view(),
            &config.topology,
            config.activation,
            &train_cfg,
        )?;
        let edges = estimate_edges(&classifier, p_pool.view(), q_pool.view())?;
        let wla_satisfied = edges.mu_p_hat > 0.0 && edges.mu_q_hat > 0.0;

        // End-of-round test accuracy: balanced decision accuracy on fresh
        // held-out draws from the two classes the classifier was trained on
        // (the target and the pre-update iterate).
        let test_accuracy = {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, t, 3));
            let p_eval = target.sample_n(config.n_p, &mut rng);
            let eval_mh = MhConfig {
                seed: derive_seed(config.seed, t, 7),
                ..config.mh.clone()
            };
            let q_eval = bd.sample_with(config.n_q, &eval_mh)?;
            accuracy(&classifier, p_eval.view(), q_eval.view())
        };

        let z_estimator = z_estimator_for(config, dim, t)?;
        let log_p_mean: f64 = p_pool
            .rows()
            .into_iter()
            .map(|r| target.log_density(r.as_slice().unwrap()))
            .sum::<f64>()
            / p_pool.nrows() as f64;

        // Step size, regime, and the classifier that actually gets pushed.
        let (classifier, edges, alpha, regime) = match config.policy {
            StepPolicy::Wla => {
                let (scaled, scaled_edges) = properly_scale(&classifier, &edges)?;
                let (alpha, regime) = step_size_wla(scaled_edges.mu_q_hat, scaled_edges.c_sup_hat);
                (scaled, scaled_edges, alpha, regime)
            }
            StepPolicy::Fixed { value } => {
                let (_, regime) = step_size_wla(edges.mu_q_hat, edges.c_sup_hat);
                (classifier, edges, value, regime)
            }
            StepPolicy::LinesearchNll => {
                let (alpha, _) =
                    linesearch_nll_alpha(&bd, &classifier, p_pool.view(), log_p_mean, &z_estimator)?;
                let (_, regime) = step_size_wla(edges.mu_q_hat, edges.c_sup_hat);
                (classifier, edges, alpha, regime)
            }
        };

        bd = bd.push_round(classifier, alpha, &z_estimator)?;

        let nll = {
            let mean_q: f64 = p_pool
                .rows()
                .into_iter()
                .map(|r| bd.log_density(r.as_slice().unwrap()))
                .sum::<f64>()
                / p_pool.nrows() as f64;
            mean_q / log_p_mean
        };
        let kl = round_kl(target, &bd, config)?;
        let coverage = round_coverage(target, &bd, config, t)?;

        trace.rounds.push(RoundTrace {
            t,
            alpha,
            regime,
            mu_p_hat: edges.mu_p_hat,
            mu_q_hat: edges.mu_q_hat,
            c_sup_hat: edges.c_sup_hat,
            predicted_delta: predicted_decrease(&edges, regime, DeltaForm::Estimate),
            kl,
            nll,
            accuracy: test_accuracy,
            coverage,
            wla_satisfied,
        });
    }

    Ok((bd, trace))
}

fn round_kl<T: Sampleable + ?Sized>(
    target: &T,
    bd: &BoostedDensity,
    config: &AdaBodeConfig,
) -> Result<Option<f64>> {
    if !config.metrics.kl || crate::dist::Density::dim(bd) > 2 {
        return Ok(None);
    }
    let Some(grid) = &config.grid else {
        return Ok(None);
    };
    Ok(Some(kl_grid(target, bd, grid)?))
}

fn round_coverage<T: Sampleable + ?Sized>(
    target: &T,
    bd: &BoostedDensity,
    config: &AdaBodeConfig,
    round: usize,
) -> Result<Option<f64>> {
    let Some(cov) = &config.metrics.coverage else {
        return Ok(None);
    };
    let mh = MhConfig {
        seed: derive_seed(config.seed, round, 5),
        ..config.mh.clone()
    };
    let sampler = bd.sampler(mh);
    Ok(Some(crate::metrics::coverage(
        target,
        &sampler,
        cov.kappa,
        cov.n_q,
        cov.n_p,
        derive_seed(config.seed, round, 6),
    )?))
}

/// Balanced test accuracy of a classifier against held-out pools; exposed for
/// experiment harnesses that evaluate on fresh draws.
pub fn classifier_accuracy(
    clf: &MlpClassifier,
    p_samples: &Array2<f64>,
    q_samples: &Array2<f64>,
) -> f64 {
    accuracy(clf, p_samples.view(), q_samples.view())
}
