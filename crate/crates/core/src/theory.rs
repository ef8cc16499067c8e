//! Brute-force numerical verification of the convergence theory on small
//! discrete instances.
//!
//! Everything here works on finite supports where every expectation is an
//! exact sum, so each bound can be checked to floating-point accuracy. An
//! instance bundles the target `P`, the current iterate `Q` (both probability
//! vectors), a positive candidate ratio update `d`, and a step size `α`; the
//! next iterate is `Q_t ∝ d^α · Q` and the error term is `ε_i = d_i q_i / p_i`
//! (so that `d = (p/q)·ε`).
//!
//! Each checker reports *slack* = RHS − LHS of its inequality, normalized by
//! `max(1, |LHS|, |RHS|)`; a violation is slack below `-tolerance`. The raw
//! `*_slack_with` entry points accept explicitly supplied hypothesis values so
//! a test harness can feed deliberately corrupted inputs and confirm the
//! checkers are falsifiable.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Exact discrete KL divergence `Σ p_i log(p_i/q_i)`.
pub fn kl_discrete(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| if pi > 0.0 { pi * (pi / qi).ln() } else { 0.0 })
        .sum()
}

/// A finite boosting step: `P`, `Q_{t-1}`, a positive update `d`, and `α`.
#[derive(Debug, Clone)]
pub struct DiscreteBoostInstance {
    p: Vec<f64>,
    q: Vec<f64>,
    d: Vec<f64>,
    alpha: f64,
}

impl DiscreteBoostInstance {
    pub fn new(p: Vec<f64>, q: Vec<f64>, d: Vec<f64>, alpha: f64) -> Result<Self> {
        if p.len() != q.len() || p.len() != d.len() || p.is_empty() {
            return Err(Error::Dimension {
                expected: p.len().max(1),
                got: q.len().min(d.len()),
            });
        }
        for (name, v) in [("p", &p), ("q", &q)] {
            if v.iter().any(|&x| x <= 0.0) {
                return Err(Error::Config(format!("{name} must be strictly positive")));
            }
            let s: f64 = v.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("{name} sums to {s}")));
            }
        }
        if d.iter().any(|&x| x <= 0.0) {
            return Err(Error::Config("d must be strictly positive".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::AlphaRange(alpha));
        }
        Ok(DiscreteBoostInstance { p, q, d, alpha })
    }

    /// Bypasses validation; for out-of-hypothesis negative controls only.
    pub fn new_unchecked(p: Vec<f64>, q: Vec<f64>, d: Vec<f64>, alpha: f64) -> Self {
        DiscreteBoostInstance { p, q, d, alpha }
    }

    /// Random instance: `p`, `q` from a symmetric Dirichlet(1) on supports of
    /// size 2–`max_support`, ratios `d` log-uniform on `[e^-2, e^2]` (keeping
    /// `c_sup <= 2`), `α` uniform on `[0, 1]`.
    pub fn random(rng: &mut ChaCha8Rng, max_support: usize) -> Self {
        let size = rng.gen_range(2..=max_support);
        let p = random_simplex(rng, size);
        let q = random_simplex(rng, size);
        let d = (0..size)
            .map(|_| rng.gen_range(-2.0..2.0f64).exp())
            .collect();
        let alpha = rng.gen_range(0.0..=1.0);
        DiscreteBoostInstance { p, q, d, alpha }
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }
    pub fn q(&self) -> &[f64] {
        &self.q
    }
    pub fn d(&self) -> &[f64] {
        &self.d
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Error term `ε_i = d_i q_i / p_i`.
    pub fn epsilon(&self) -> Vec<f64> {
        self.d
            .iter()
            .zip(&self.q)
            .zip(&self.p)
            .map(|((&di, &qi), &pi)| di * qi / pi)
            .collect()
    }

    /// Reconstruct `d` from the error term; inverse of [`Self::epsilon`].
    pub fn d_from_epsilon(&self, epsilon: &[f64]) -> Vec<f64> {
        epsilon
            .iter()
            .zip(&self.p)
            .zip(&self.q)
            .map(|((&ei, &pi), &qi)| ei * pi / qi)
            .collect()
    }

    /// Classifier values `c_i = log d_i`.
    pub fn c_values(&self) -> Vec<f64> {
        self.d.iter().map(|&di| di.ln()).collect()
    }

    pub fn c_sup(&self) -> f64 {
        self.c_values().iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn kl_prev(&self) -> f64 {
        kl_discrete(&self.p, &self.q)
    }

    /// Normalized next iterate `Q_t ∝ d^α q` for the given step size.
    pub fn posterior(&self, alpha: f64) -> Vec<f64> {
        let mut qt: Vec<f64> = self
            .q
            .iter()
            .zip(&self.d)
            .map(|(&qi, &di)| qi * di.powf(alpha))
            .collect();
        let z: f64 = qt.iter().sum();
        for x in &mut qt {
            *x /= z;
        }
        qt
    }

    pub fn kl_post(&self, alpha: f64) -> f64 {
        kl_discrete(&self.p, &self.posterior(alpha))
    }

    /// Expected edges `μ_P = E_P[c]/c_sup`, `μ_Q = E_Q[-c]/c_sup`.
    pub fn edges(&self) -> (f64, f64) {
        let c = self.c_values();
        let c_sup = self.c_sup();
        let mu_p: f64 = self.p.iter().zip(&c).map(|(&pi, &ci)| pi * ci).sum::<f64>() / c_sup;
        let mu_q: f64 = -self.q.iter().zip(&c).map(|(&qi, &ci)| qi * ci).sum::<f64>() / c_sup;
        (mu_p, mu_q)
    }

    /// Normalized `R` with `dR̃ = ε·dP`, i.e. `r_i ∝ ε_i p_i`.
    pub fn r_iterate(&self) -> Vec<f64> {
        let eps = self.epsilon();
        let mut r: Vec<f64> = eps.iter().zip(&self.p).map(|(&ei, &pi)| ei * pi).collect();
        let z: f64 = r.iter().sum();
        for x in &mut r {
            *x /= z;
        }
        r
    }

    /// Normalized expected log-error `μ_ε = E_P[log ε]/c_sup`.
    pub fn mu_epsilon(&self) -> f64 {
        let eps = self.epsilon();
        let e: f64 = self
            .p
            .iter()
            .zip(&eps)
            .map(|(&pi, &ei)| pi * ei.ln())
            .sum();
        e / self.c_sup()
    }

    /// Rescale the update `d -> d^eta` (classifier `c -> eta·c`).
    pub fn scale_update(&self, eta: f64) -> Self {
        DiscreteBoostInstance {
            p: self.p.clone(),
            q: self.q.clone(),
            d: self.d.iter().map(|&di| di.powf(eta)).collect(),
            alpha: self.alpha,
        }
    }
}

pub(crate) fn random_simplex(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..size)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    v
}

/// Aggregated result of a randomized checker battery.
///
/// `worst_slack` is the smallest normalized slack seen; a trial counts as a
/// violation when its slack falls below `-tolerance`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub n_trials: usize,
    pub n_violations: usize,
    pub worst_slack: f64,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        CheckReport {
            name: name.into(),
            n_trials: 0,
            n_violations: 0,
            worst_slack: f64::INFINITY,
            tolerance,
        }
    }

    pub fn record(&mut self, slack: f64, scale: f64) {
        let rel = slack / scale.max(1.0);
        self.n_trials += 1;
        if rel < self.worst_slack {
            self.worst_slack = rel;
        }
        if rel < -self.tolerance {
            self.n_violations += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.n_violations == 0
    }
}

// ---------------------------------------------------------------------------
// Individual checkers. Each returns (slack, scale); slack >= 0 means the
// inequality holds with margin.
// ---------------------------------------------------------------------------

/// KL interpolation bound:
/// `KL(P,Q_t|α) <= (1-α)·KL(P,Q_{t-1}) + α·(log E_P[ε] - E_P[log ε])`.
pub fn kl_bound_slack(inst: &DiscreteBoostInstance) -> (f64, f64) {
    let eps = inst.epsilon();
    let e_p_eps: f64 = inst.p.iter().zip(&eps).map(|(&pi, &ei)| pi * ei).sum();
    let e_p_log_eps: f64 = inst
        .p
        .iter()
        .zip(&eps)
        .map(|(&pi, &ei)| pi * ei.ln())
        .sum();
    let lhs = inst.kl_post(inst.alpha);
    let rhs = (1.0 - inst.alpha) * inst.kl_prev() + inst.alpha * (e_p_eps.ln() - e_p_log_eps);
    (rhs - lhs, lhs.abs().max(rhs.abs()))
}

/// Geometric bound through the `R` iterate: if `KL(P,R) <= γ·KL(P,Q_{t-1})`
/// then `KL(P,Q_t|α) <= (1-α(1-γ))·KL(P,Q_{t-1})`.
///
/// Errors with [`Error::PreconditionUnmet`] when the instance does not satisfy
/// the hypothesis for the given `γ`.
pub fn corollary_qt_rt_slack(inst: &DiscreteBoostInstance, gamma: f64) -> Result<(f64, f64)> {
    let kl_prev = inst.kl_prev();
    let kl_pr = kl_discrete(&inst.p, &inst.r_iterate());
    if kl_pr > gamma * kl_prev {
        return Err(Error::PreconditionUnmet(1));
    }
    let lhs = inst.kl_post(inst.alpha);
    let rhs = (1.0 - inst.alpha * (1.0 - gamma)) * kl_prev;
    Ok((rhs - lhs, lhs.abs().max(rhs.abs())))
}

/// The two-sided edge inequality used by the step-size lemma:
/// `1 - ab >= sqrt(1-a²)·exp(-(b/2)·log((1+a)/(1-a)))` for `a, b ∈ [-1, 1]`.
pub fn rn_inequality_slack(a: f64, b: f64) -> (f64, f64) {
    let lhs = (1.0 - a * a).sqrt() * (-(b / 2.0) * ((1.0 + a) / (1.0 - a)).ln()).exp();
    let rhs = 1.0 - a * b;
    (rhs - lhs, lhs.abs().max(rhs.abs()))
}

pub fn check_rn_inequality(a: f64, b: f64) -> bool {
    let (slack, scale) = rn_inequality_slack(a, b);
    slack >= -1e-12 * scale.max(1.0)
}

/// Reverse Jensen bound for `φ = exp` with an explicit value range `[a, b]`:
/// Bregman information `E_Q[e^c] - e^{E_Q[c]}` is at most
/// `D_exp(b ‖ log m)` where `m = (e^b - e^a)/(b - a)` is the chord slope.
pub fn reverse_jensen_slack_with_range(
    c_values: &[f64],
    q_weights: &[f64],
    a: f64,
    b: f64,
) -> (f64, f64) {
    let e_q_exp: f64 = q_weights
        .iter()
        .zip(c_values)
        .map(|(&qi, &ci)| qi * ci.exp())
        .sum();
    let e_q_c: f64 = q_weights
        .iter()
        .zip(c_values)
        .map(|(&qi, &ci)| qi * ci)
        .sum();
    let info = e_q_exp - e_q_c.exp();
    let m = (b.exp() - a.exp()) / (b - a);
    let rhs = b.exp() - m - (b - m.ln()) * m;
    (rhs - info, info.abs().max(rhs.abs()))
}

/// Reverse Jensen with the range taken from the data. Constant `c` has zero
/// Bregman information and holds trivially.
pub fn check_reverse_jensen(c_values: &[f64], q_weights: &[f64]) -> Result<bool> {
    if c_values.is_empty() || c_values.len() != q_weights.len() {
        return Err(Error::Dimension {
            expected: c_values.len().max(1),
            got: q_weights.len(),
        });
    }
    let a = c_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let b = c_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if b - a < 1e-15 {
        return Ok(true);
    }
    let (slack, scale) = reverse_jensen_slack_with_range(c_values, q_weights, a, b);
    Ok(slack >= -1e-12 * scale.max(1.0))
}

/// Explicit three-term Bregman divergence
/// `D_exp(z ‖ log(sinh z / z)) = e^z(1/2 - 1/2z) + e^-z(1/2 + 1/2z) + m·log m`
/// with `m = sinh(z)/z`; bounded by `z²` for `|z| <= 2`.
pub fn bregman_chord_divergence(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        // Series limit: the three terms sum to z²/3 + z²/6 + O(z⁴).
        return 0.5 * z * z;
    }
    // First two terms pair into cosh(z) - sinh(z)/z, avoiding the huge
    // cancelling intermediates of the expanded form.
    let m = z.sinh() / z;
    z.cosh() - m + m * m.ln()
}

pub fn bregman_bound_slack(z: f64) -> (f64, f64) {
    let lhs = bregman_chord_divergence(z);
    let rhs = z * z;
    (rhs - lhs, lhs.abs().max(rhs.abs()))
}

pub fn check_bregbound(z: f64) -> bool {
    let (slack, scale) = bregman_bound_slack(z);
    slack >= -1e-12 * scale.max(1.0)
}

/// Step-size lemma: with `α = (1/2c_sup)·log((1+μ_Q)/(1-μ_Q))`,
/// `E_Q[exp(α c)] <= sqrt(1-μ_Q²)`. Requires `|c_i| <= c_sup`, `μ_Q ∈ (-1,1)`.
pub fn lemma_wla_slack(c_values: &[f64], q_weights: &[f64], c_sup: f64) -> Result<(f64, f64)> {
    if c_values.iter().any(|c| c.abs() > c_sup * (1.0 + 1e-12)) {
        return Err(Error::Range {
            name: "c",
            value: c_values.iter().fold(0.0, |m: f64, c| m.max(c.abs())),
            range: "[-c_sup, c_sup]",
        });
    }
    let mu_q: f64 = -q_weights
        .iter()
        .zip(c_values)
        .map(|(&qi, &ci)| qi * ci)
        .sum::<f64>()
        / c_sup;
    if mu_q.abs() >= 1.0 {
        return Err(Error::Range {
            name: "mu_q",
            value: mu_q,
            range: "(-1, 1)",
        });
    }
    let alpha = ((1.0 + mu_q) / (1.0 - mu_q)).ln() / (2.0 * c_sup);
    let lhs: f64 = q_weights
        .iter()
        .zip(c_values)
        .map(|(&qi, &ci)| qi * (alpha * ci).exp())
        .sum();
    let rhs = (1.0 - mu_q * mu_q).sqrt();
    Ok((rhs - lhs, lhs.abs().max(rhs.abs())))
}

/// Properly Scaled conditions for a discrete instance.
pub fn is_properly_scaled(inst: &DiscreteBoostInstance) -> bool {
    let c_sup = inst.c_sup();
    let (mu_p, _) = inst.edges();
    let c = inst.c_values();
    let sdp1 = (2.0 * c_sup).exp() <= 2.0 + mu_p * c_sup;
    let e_q_exp: f64 = inst
        .q
        .iter()
        .zip(&c)
        .map(|(&qi, &ci)| qi * ci.exp())
        .sum();
    let sdp2 = e_q_exp <= (mu_p * c_sup / 4.0).exp();
    sdp1 && sdp2
}

/// Regular-regime decrease with explicitly supplied edges: with the step size
/// from the edge formula (not clamped),
/// `KL(P,Q_t) <= KL(P,Q_{t-1}) - (μ_P/4)·log((1+μ_Q)/(1-μ_Q))`.
pub fn regular_regime_slack_with(
    inst: &DiscreteBoostInstance,
    mu_p: f64,
    mu_q: f64,
    c_sup: f64,
) -> (f64, f64) {
    let log_odds = ((1.0 + mu_q) / (1.0 - mu_q)).ln();
    let alpha = log_odds / (2.0 * c_sup);
    let lhs = inst.kl_post(alpha);
    let rhs = inst.kl_prev() - mu_p / 4.0 * log_odds;
    (rhs - lhs, lhs.abs().max(rhs.abs()))
}

pub fn regular_regime_slack(inst: &DiscreteBoostInstance) -> (f64, f64) {
    let (mu_p, mu_q) = inst.edges();
    regular_regime_slack_with(inst, mu_p, mu_q, inst.c_sup())
}

/// High-regime decrease with explicitly supplied edges: with `α = 1` and
/// `μ_Q = (1+δ)·μ*` for `μ* = tanh(c_sup)`,
/// `KL(P,Q_t) <= KL(P,Q_{t-1}) - μ_P·c_sup - μ*²·(1/2 + δ/(1-μ*²))`.
pub fn high_regime_slack_with(
    inst: &DiscreteBoostInstance,
    mu_p: f64,
    mu_q: f64,
    c_sup: f64,
) -> (f64, f64) {
    let mu_star = c_sup.tanh();
    let delta = mu_q / mu_star - 1.0;
    let lhs = inst.kl_post(1.0);
    let rhs = inst.kl_prev()
        - mu_p * c_sup
        - mu_star * mu_star * (0.5 + delta / (1.0 - mu_star * mu_star));
    (rhs - lhs, lhs.abs().max(rhs.abs()))
}

pub fn high_regime_slack(inst: &DiscreteBoostInstance) -> (f64, f64) {
    let (mu_p, mu_q) = inst.edges();
    high_regime_slack_with(inst, mu_p, mu_q, inst.c_sup())
}

/// `μ_ε` together with the identity residual
/// `μ_P - (KL(P,Q_{t-1})/c_sup + μ_ε)` (zero in exact arithmetic).
pub fn wda_mu_epsilon(inst: &DiscreteBoostInstance) -> (f64, f64) {
    let mu_eps = inst.mu_epsilon();
    let (mu_p, _) = inst.edges();
    let residual = mu_p - (inst.kl_prev() / inst.c_sup() + mu_eps);
    (mu_eps, residual)
}

// ---------------------------------------------------------------------------
// Instance generation for the regime theorems.
// ---------------------------------------------------------------------------

/// Rejection-sample an instance that satisfies the weak learning assumption,
/// is Properly Scaled after a positive rescaling, and sits in the regular
/// (non-clamped) regime.
pub fn gen_ps_regular_instance(
    rng: &mut ChaCha8Rng,
    max_support: usize,
    max_tries: usize,
) -> Result<DiscreteBoostInstance> {
    for _ in 0..max_tries {
        let inst = DiscreteBoostInstance::random(rng, max_support);
        let (mu_p, mu_q) = inst.edges();
        if mu_p <= 1e-3 || mu_q <= 1e-3 || mu_q >= 0.25 {
            continue;
        }
        let c_sup = inst.c_sup();
        // Scaling preserves the edges; try a few targets just above the
        // clamping threshold atanh(mu_q), all within the PS budget log(2)/2.
        for factor in [1.05, 1.2, 1.5, 2.0, 3.0] {
            let target = factor * mu_q.atanh();
            if target > 0.5 * 2.0_f64.ln() {
                break;
            }
            let scaled = inst.scale_update(target / c_sup);
            if is_properly_scaled(&scaled) && mu_q < scaled.c_sup().tanh() {
                return Ok(scaled);
            }
        }
    }
    Err(Error::PreconditionUnmet(max_tries))
}

/// Rejection-sample an instance in the clamped (high) regime:
/// `μ_Q >= tanh(c_sup)` after rescaling.
pub fn gen_clamped_instance(
    rng: &mut ChaCha8Rng,
    max_support: usize,
    max_tries: usize,
) -> Result<DiscreteBoostInstance> {
    for _ in 0..max_tries {
        let inst = DiscreteBoostInstance::random(rng, max_support);
        let (_, mu_q) = inst.edges();
        if mu_q <= 1e-3 {
            continue;
        }
        let c_sup = inst.c_sup();
        let target = (0.95 * mu_q).atanh();
        let scaled = inst.scale_update((target / c_sup).min(1.0));
        let (_, mu_q_s) = scaled.edges();
        if mu_q_s >= scaled.c_sup().tanh() {
            return Ok(scaled);
        }
    }
    Err(Error::PreconditionUnmet(max_tries))
}

// ---------------------------------------------------------------------------
// Batteries.
// ---------------------------------------------------------------------------

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Run every checker for `trials` randomized trials each (fixed master seed)
/// and return one report per checker.
pub fn run_theory_suite(trials: usize, seed: u64, tolerance: f64) -> Vec<CheckReport> {
    let mut reports = Vec::new();

    // Theorem bound for arbitrary updates.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CheckReport::new("kl_bound", tolerance);
    for _ in 0..trials {
        let inst = DiscreteBoostInstance::random(&mut rng, 10);
        let (slack, scale) = kl_bound_slack(&inst);
        report.record(slack, scale);
    }
    reports.push(report);

    // Corollary via the R iterate, gamma taken as the tightest admissible
    // value KL(P,R)/KL(P,Q); instances filtered to gamma <= 1.
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut report = CheckReport::new("corollary_qt_rt", tolerance);
    let mut tries = 0;
    while report.n_trials < trials && tries < trials * 100 {
        tries += 1;
        let inst = DiscreteBoostInstance::random(&mut rng, 10);
        let gamma = kl_discrete(inst.p(), &inst.r_iterate()) / inst.kl_prev();
        if !(0.0..=1.0).contains(&gamma) {
            continue;
        }
        if let Ok((slack, scale)) = corollary_qt_rt_slack(&inst, gamma) {
            report.record(slack, scale);
        }
    }
    reports.push(report);

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let mut report = CheckReport::new("rn_inequality", tolerance);
    for _ in 0..trials {
        let a = rng.gen_range(-0.99..0.99);
        let b = rng.gen_range(-1.0..=1.0);
        let (slack, scale) = rn_inequality_slack(a, b);
        report.record(slack, scale);
    }
    reports.push(report);

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
    let mut report = CheckReport::new("reverse_jensen", tolerance);
    for _ in 0..trials {
        let size = rng.gen_range(2..=10);
        let c: Vec<f64> = (0..size).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let q = random_simplex(&mut rng, size);
        let a = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let b = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (slack, scale) = reverse_jensen_slack_with_range(&c, &q, a, b);
        report.record(slack, scale);
    }
    reports.push(report);

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(4));
    let mut report = CheckReport::new("bregman_bound", tolerance);
    for _ in 0..trials {
        let z = rng.gen_range(-2.0..=2.0);
        let (slack, scale) = bregman_bound_slack(z);
        report.record(slack, scale);
    }
    reports.push(report);

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(5));
    let mut report = CheckReport::new("lemma_wla", tolerance);
    let mut done = 0;
    while done < trials {
        let size = rng.gen_range(2..=10);
        let c_sup = rng.gen_range(0.1..2.0);
        let c: Vec<f64> = (0..size).map(|_| rng.gen_range(-c_sup..c_sup)).collect();
        let q = random_simplex(&mut rng, size);
        if let Ok((slack, scale)) = lemma_wla_slack(&c, &q, c_sup) {
            report.record(slack, scale);
            done += 1;
        }
    }
    reports.push(report);

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(6));
    let mut report = CheckReport::new("regular_regime", tolerance);
    for _ in 0..trials {
        match gen_ps_regular_instance(&mut rng, 10, 10_000) {
            Ok(inst) => {
                let (slack, scale) = regular_regime_slack(&inst);
                report.record(slack, scale);
            }
            Err(_) => break,
        }
    }
    reports.push(report);

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7));
    let mut report = CheckReport::new("high_regime", tolerance);
    for _ in 0..trials {
        match gen_clamped_instance(&mut rng, 10, 10_000) {
            Ok(inst) => {
                let (slack, scale) = high_regime_slack(&inst);
                report.record(slack, scale);
            }
            Err(_) => break,
        }
    }
    reports.push(report);

    // mu_P = KL/c_sup + mu_eps identity; slack is -|residual|.
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(8));
    let mut report = CheckReport::new("wda_identity", tolerance);
    for _ in 0..trials {
        let inst = DiscreteBoostInstance::random(&mut rng, 10);
        let (_, residual) = wda_mu_epsilon(&inst);
        report.record(-residual.abs(), 1.0);
    }
    reports.push(report);

    // d -> epsilon -> d round trip, exact to 1e-14.
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(9));
    let mut report = CheckReport::new("epsilon_roundtrip", 1e-14);
    for _ in 0..trials {
        let inst = DiscreteBoostInstance::random(&mut rng, 10);
        let back = inst.d_from_epsilon(&inst.epsilon());
        let err = inst
            .d
            .iter()
            .zip(&back)
            .map(|(&a, &b)| ((a - b) / a).abs())
            .fold(0.0, f64::max);
        report.record(-err, 1.0);
    }
    reports.push(report);

    reports
}

use rand::SeedableRng;

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(p: &[f64], q: &[f64], d: &[f64], alpha: f64) -> DiscreteBoostInstance {
        DiscreteBoostInstance::new(p.to_vec(), q.to_vec(), d.to_vec(), alpha).unwrap()
    }

    #[test]
    fn kl_bound_uniform_error_examples() {
        // epsilon == 1 means d = p/q exactly; alpha = 1 lands on P.
        let p = [0.2, 0.5, 0.3];
        let q = [0.4, 0.4, 0.2];
        let d: Vec<f64> = p.iter().zip(&q).map(|(&pi, &qi)| pi / qi).collect();
        let exact = inst(&p, &q, &d, 1.0);
        assert!(exact.kl_post(1.0).abs() < 1e-14);
        let (slack, _) = kl_bound_slack(&exact);
        assert!(slack.abs() < 1e-12);

        // alpha = 1/2 gives the geometric halving bound.
        let half = inst(&p, &q, &d, 0.5);
        assert!(half.kl_post(0.5) <= 0.5 * half.kl_prev() + 1e-12);
    }

    #[test]
    fn kl_bound_random_battery() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let inst = DiscreteBoostInstance::random(&mut rng, 10);
            let (slack, scale) = kl_bound_slack(&inst);
            assert!(slack >= -1e-9 * scale.max(1.0), "violated: {inst:?}");
        }
    }

    #[test]
    fn kl_bound_negative_control() {
        // alpha = 1.5 is outside the theorem's hypothesis and breaks the bound
        // on a symmetric two-point instance.
        let d = vec![2.0f64.exp(), (-2.0f64).exp()];
        let bad = DiscreteBoostInstance::new_unchecked(vec![0.5, 0.5], vec![0.5, 0.5], d, 1.5);
        let (slack, scale) = kl_bound_slack(&bad);
        assert!(slack < -1e-6 * scale.max(1.0));
        // And the validating constructor rejects it.
        assert!(DiscreteBoostInstance::new(
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![1.0, 1.0],
            1.5
        )
        .is_err());
    }

    #[test]
    fn corollary_examples() {
        // Constant epsilon makes R = P, so gamma = 0 is admissible and the
        // bound reduces to (1-alpha)·KL.
        let p = [0.3, 0.7];
        let q = [0.6, 0.4];
        let d: Vec<f64> = p.iter().zip(&q).map(|(&pi, &qi)| 2.0 * pi / qi).collect();
        let i = inst(&p, &q, &d, 0.7);
        let (slack, _) = corollary_qt_rt_slack(&i, 0.0).unwrap();
        assert!(slack >= -1e-12);

        // gamma = 1 degenerates to non-increase for any admissible instance.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 1000 {
            let inst = DiscreteBoostInstance::random(&mut rng, 10);
            match corollary_qt_rt_slack(&inst, 1.0) {
                Ok((slack, scale)) => {
                    assert!(slack >= -1e-9 * scale.max(1.0));
                    checked += 1;
                }
                Err(_) => continue,
            }
        }
    }

    #[test]
    fn corollary_negative_control() {
        // Claiming gamma = 0 for an instance whose R is far from P.
        let p = [0.5, 0.5];
        let q = [0.5, 0.5];
        let d = [4.0, 0.25];
        let i = inst(&p, &q, &d, 1.0);
        // Hypothesis not actually satisfied: the checker refuses.
        assert!(matches!(
            corollary_qt_rt_slack(&i, 0.0),
            Err(Error::PreconditionUnmet(_))
        ));
        // Forcing the bound by bypassing the filter shows a real violation.
        let kl_prev = i.kl_prev(); // 0
        let lhs = i.kl_post(1.0);
        let rhs = (1.0 - 1.0 * (1.0 - 0.0)) * kl_prev;
        assert!(lhs > rhs + 1e-3);
    }

    #[test]
    fn rn_inequality_examples() {
        let (slack, _) = rn_inequality_slack(0.0, 0.7);
        assert!(slack.abs() < 1e-15); // equality at a = 0

        let (slack, _) = rn_inequality_slack(0.5, 1.0);
        assert!(slack.abs() < 1e-12); // both sides 0.5

        // Full grid sweep.
        for i in -99..=99 {
            for j in -99..=99 {
                let a = i as f64 / 100.0;
                let b = j as f64 / 100.0;
                assert!(check_rn_inequality(a, b), "a={a} b={b}");
            }
        }
    }

    #[test]
    fn rn_inequality_negative_control() {
        // b outside [-1, 1] breaks it.
        assert!(!check_rn_inequality(0.5, 3.0));
    }

    #[test]
    fn reverse_jensen_examples() {
        // Constant c: trivially holds.
        assert!(check_reverse_jensen(&[0.7, 0.7, 0.7], &[0.2, 0.3, 0.5]).unwrap());

        // c = ±1 with equal weights: I = cosh(1) - 1.
        let c = [1.0, -1.0];
        let q = [0.5, 0.5];
        let info = 0.5 * (1.0f64.exp() + (-1.0f64).exp()) - 1.0;
        assert!((info - 0.543081).abs() < 1e-6);
        let (slack, _) = reverse_jensen_slack_with_range(&c, &q, -1.0, 1.0);
        assert!(slack >= 0.0);
        // RHS = e - m - (1 - ln m)·m with m = sinh(1).
        let m = 1.0f64.sinh();
        let rhs = 1.0f64.exp() - m - (1.0 - m.ln()) * m;
        assert!((slack - (rhs - info)).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let size = rng.gen_range(2..=10);
            let c: Vec<f64> = (0..size).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let q = random_simplex(&mut rng, size);
            assert!(check_reverse_jensen(&c, &q).unwrap());
        }
    }

    #[test]
    fn reverse_jensen_negative_control() {
        // Claiming a range narrower than the actual values breaks the bound.
        let c = [2.0, -2.0];
        let q = [0.5, 0.5];
        let (slack, scale) = reverse_jensen_slack_with_range(&c, &q, -1.0, 1.0);
        assert!(slack < -1e-6 * scale.max(1.0));
    }

    #[test]
    fn bregbound_examples() {
        assert!(bregman_chord_divergence(0.0).abs() < 1e-15);
        assert!(bregman_chord_divergence(1e-3) < 1e-5);

        let d2 = bregman_chord_divergence(2.0);
        assert!((d2 - 3.028).abs() < 1e-3);
        assert!(d2 <= 4.0);

        // Grid sweep over |z| <= 2.
        for i in -2000..=2000 {
            let z = i as f64 / 1000.0;
            assert!(check_bregbound(z), "z={z}");
        }
    }

    #[test]
    fn bregbound_negative_control() {
        // Outside |z| <= 2 the bound eventually fails; z = 3 violates it.
        assert!(!check_bregbound(3.0));
    }

    #[test]
    fn lemma_wla_examples() {
        // c = ±c_sup equally weighted: mu_q = 0, alpha = 0, equality at 1.
        let (slack, _) = lemma_wla_slack(&[0.5, -0.5], &[0.5, 0.5], 0.5).unwrap();
        assert!(slack.abs() < 1e-15);

        // mu_q = 1 boundary is rejected.
        assert!(lemma_wla_slack(&[-0.5, -0.5], &[0.5, 0.5], 0.5).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut done = 0;
        while done < 1000 {
            let size = rng.gen_range(2..=10);
            let c_sup = rng.gen_range(0.1..2.0);
            let c: Vec<f64> = (0..size).map(|_| rng.gen_range(-c_sup..c_sup)).collect();
            let q = random_simplex(&mut rng, size);
            if let Ok((slack, scale)) = lemma_wla_slack(&c, &q, c_sup) {
                assert!(slack >= -1e-9 * scale.max(1.0));
                done += 1;
            }
        }
    }

    #[test]
    fn lemma_wla_negative_control() {
        // |c| exceeding the claimed c_sup is rejected outright.
        assert!(lemma_wla_slack(&[-1.5, 0.5], &[0.5, 0.5], 1.0).is_err());
        // Bypassing the range check (c_sup understated) breaks the bound:
        // evaluate the raw quantities directly.
        let c = [-1.5f64, 0.5];
        let q = [0.5f64, 0.5];
        let c_sup = 1.0f64;
        let mu_q = -(q[0] * c[0] + q[1] * c[1]) / c_sup;
        let alpha = ((1.0 + mu_q) / (1.0 - mu_q)).ln() / (2.0 * c_sup);
        let lhs: f64 = q
            .iter()
            .zip(&c)
            .map(|(&qi, &ci)| qi * (alpha * ci).exp())
            .sum();
        assert!(lhs > (1.0 - mu_q * mu_q).sqrt() + 1e-3);
    }

    #[test]
    fn regular_regime_battery() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let inst = gen_ps_regular_instance(&mut rng, 10, 10_000).unwrap();
            assert!(is_properly_scaled(&inst));
            let (mu_p, mu_q) = inst.edges();
            assert!(mu_p > 0.0 && mu_q > 0.0 && mu_q < inst.c_sup().tanh());
            let (slack, scale) = regular_regime_slack(&inst);
            assert!(slack >= -1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn regular_regime_zero_edge_reduces_to_nonincrease() {
        // mu_p == 0 exact: claimed decrease is 0 and the bound still holds.
        let p = [0.5, 0.5];
        let q = [0.2, 0.8];
        let c_sup = 0.3f64;
        let d = [c_sup.exp(), (-c_sup).exp()];
        let i = inst(&p, &q, &d, 0.5);
        let (mu_p, mu_q) = i.edges();
        assert!(mu_p.abs() < 1e-12 && mu_q > 0.0);
        let (slack, scale) = regular_regime_slack(&i);
        assert!(slack >= -1e-9 * scale.max(1.0));
    }

    #[test]
    fn regular_regime_negative_control() {
        // Out-of-hypothesis instance (mu_p < 0, WLA violated): the claimed
        // decrease direction is wrong and the checker flags it.
        let p = [0.498, 0.004, 0.498];
        let q = [0.45, 0.1, 0.45];
        let d = [(-2.0f64).exp(), 2.0f64.exp(), (-2.0f64).exp()];
        let bad = inst(&p, &q, &d, 0.5);
        let (mu_p, mu_q) = bad.edges();
        assert!(mu_p < 0.0 && mu_q > 0.0);
        let (slack, scale) = regular_regime_slack(&bad);
        assert!(slack < -1e-6 * scale.max(1.0));
    }

    #[test]
    fn high_regime_battery() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..500 {
            let inst = gen_clamped_instance(&mut rng, 10, 10_000).unwrap();
            let (_, mu_q) = inst.edges();
            assert!(mu_q >= inst.c_sup().tanh());
            let (slack, scale) = high_regime_slack(&inst);
            assert!(slack >= -1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn high_regime_negative_control() {
        // Lying about the edges (mu_p outside [-1,1], c_sup understated)
        // produces an impossible claimed decrease.
        let p = [0.6, 0.4];
        let q = [0.05, 0.95];
        let d = [3.0f64.exp(), (-0.3f64).exp()];
        let bad = inst(&p, &q, &d, 1.0);
        let c_sup_claimed = 0.3;
        let c = bad.c_values();
        let mu_p: f64 = p.iter().zip(&c).map(|(&pi, &ci)| pi * ci).sum::<f64>() / c_sup_claimed;
        let mu_q: f64 = -q.iter().zip(&c).map(|(&qi, &ci)| qi * ci).sum::<f64>() / c_sup_claimed;
        assert!(mu_p > 1.0); // flagrantly invalid edge
        let (slack, scale) = high_regime_slack_with(&bad, mu_p, mu_q, c_sup_claimed);
        assert!(slack < -1e-6 * scale.max(1.0));
    }

    #[test]
    fn wda_examples() {
        // Uniform error term: mu_eps = 0 and mu_p·c_sup = KL.
        let p = [0.3, 0.7];
        let q = [0.6, 0.4];
        let d: Vec<f64> = p.iter().zip(&q).map(|(&pi, &qi)| pi / qi).collect();
        let i = inst(&p, &q, &d, 0.5);
        let (mu_eps, residual) = wda_mu_epsilon(&i);
        assert!(mu_eps.abs() < 1e-14);
        assert!(residual.abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let inst = DiscreteBoostInstance::random(&mut rng, 10);
            let (_, residual) = wda_mu_epsilon(&inst);
            assert!(residual.abs() < 1e-12);
        }
    }

    #[test]
    fn wda_threshold_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let gamma_eps = 0.5;
        for _ in 0..200 {
            let inst = DiscreteBoostInstance::random(&mut rng, 10);
            let (mu_eps, _) = wda_mu_epsilon(&inst);
            let satisfies = mu_eps >= -gamma_eps;
            assert_eq!(satisfies, !(mu_eps < -gamma_eps));
        }
    }

    #[test]
    fn epsilon_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let inst = DiscreteBoostInstance::random(&mut rng, 10);
            let back = inst.d_from_epsilon(&inst.epsilon());
            for (a, b) in inst.d().iter().zip(&back) {
                assert!(((a - b) / a).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn full_suite_runs_clean() {
        let reports = run_theory_suite(200, 12345, DEFAULT_TOLERANCE);
        assert_eq!(reports.len(), 10);
        for r in &reports {
            assert!(r.passed(), "{} had {} violations", r.name, r.n_violations);
            assert!(r.n_trials >= 200, "{} only ran {} trials", r.name, r.n_trials);
        }
    }
}
