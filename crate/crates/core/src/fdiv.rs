//! f-divergences and their variational machinery.
//!
//! An f-divergence of `P` from `Q` is `I_f(P,Q) = ∫ f(dP/dQ) dQ` for a convex
//! lower-semicontinuous `f`. Every such divergence admits the variational
//! representation `I_f = sup_u E_P[f'∘u] - E_Q[f*∘f'∘u]`, with the supremum
//! attained at the density ratio `u = dP/dQ`. This module ships five standard
//! divergences as four scalar maps each (`f`, `f*`, `f'`, `f*∘f'`) together
//! with explicit open domains, the brute-force discrete oracle for `I_f`, the
//! (estimated or exact) variational objective `J(u)`, and the classifier
//! isomorphisms `σ` (logit to class-posterior) and `φ` (posterior to ratio).
//!
//! Domain handling is strict: evaluating a map outside its stored open
//! interval is an error, never a clamp, so that violations of the variational
//! lower bound cannot hide behind silent saturation.
//!
//! One caveat: the Hellinger conjugate is stored in a nonstandard form
//! (`3/(t*-1) - 1`) that is *not* the Fenchel conjugate of `(√t-1)²`; the
//! composite column `f*∘f'` is the coherent one and is what
//! [`variational_objective`] consumes. Hellinger is therefore excluded from
//! the Fenchel–Young consistency checks.

use crate::error::{Error, Result};

/// The five shipped divergences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Divergence {
    Kl,
    ReverseKl,
    Hellinger,
    Pearson,
    Gan,
}

impl Divergence {
    pub const ALL: [Divergence; 5] = [
        Divergence::Kl,
        Divergence::ReverseKl,
        Divergence::Hellinger,
        Divergence::Pearson,
        Divergence::Gan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Divergence::Kl => "kl",
            Divergence::ReverseKl => "reverse_kl",
            Divergence::Hellinger => "hellinger",
            Divergence::Pearson => "pearson",
            Divergence::Gan => "gan",
        }
    }
}

/// Open interval `(lo, hi)`; infinite endpoints allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, t: f64) -> bool {
        t.is_finite() && t > self.lo && t < self.hi
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// Which of the four stored scalar maps to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableColumn {
    F,
    Conj,
    Prime,
    ConjOfPrime,
}

/// One f-divergence as four scalar maps with domain metadata.
///
/// `f` and `f'` live on `dom_f`; the conjugate lives on `dom_conj`; the
/// composite `f*∘f'` lives on `dom_f` again.
#[derive(Debug, Clone, Copy)]
pub struct DivergenceSpec {
    pub name: Divergence,
    pub dom_f: Interval,
    pub dom_conj: Interval,
}

impl DivergenceSpec {
    pub fn new(name: Divergence) -> Self {
        let pos = Interval::new(0.0, f64::INFINITY);
        let all = Interval::new(f64::NEG_INFINITY, f64::INFINITY);
        let neg = Interval::new(f64::NEG_INFINITY, 0.0);
        let (dom_f, dom_conj) = match name {
            Divergence::Kl => (pos, all),
            Divergence::ReverseKl => (pos, neg),
            // Conjugate as shipped has a pole at 1; see module docs.
            Divergence::Hellinger => (pos, Interval::new(f64::NEG_INFINITY, 1.0)),
            Divergence::Pearson => (pos, all),
            Divergence::Gan => (pos, neg),
        };
        DivergenceSpec {
            name,
            dom_f,
            dom_conj,
        }
    }

    fn check_f_domain(&self, what: &'static str, t: f64) -> Result<()> {
        if self.dom_f.contains(t) {
            Ok(())
        } else {
            Err(Error::domain(what, t, self.dom_f.to_string()))
        }
    }

    /// `f(t)`.
    pub fn f(&self, t: f64) -> Result<f64> {
        self.check_f_domain("f", t)?;
        Ok(match self.name {
            Divergence::Kl => t * t.ln(),
            Divergence::ReverseKl => -t.ln(),
            Divergence::Hellinger => {
                let s = t.sqrt() - 1.0;
                s * s
            }
            Divergence::Pearson => (t - 1.0) * (t - 1.0),
            Divergence::Gan => t * t.ln() - (t + 1.0) * (t + 1.0).ln(),
        })
    }

    /// Fenchel conjugate `f*(t*)`.
    pub fn conj(&self, t: f64) -> Result<f64> {
        if !self.dom_conj.contains(t) {
            return Err(Error::domain("f_conj", t, self.dom_conj.to_string()));
        }
        Ok(match self.name {
            Divergence::Kl => (t - 1.0).exp(),
            Divergence::ReverseKl => -(-t).ln() - 1.0,
            Divergence::Hellinger => 3.0 / (t - 1.0) - 1.0,
            Divergence::Pearson => t * (4.0 + t) / 4.0,
            Divergence::Gan => -(-t.exp()).ln_1p(),
        })
    }

    /// Derivative `f'(t)`.
    pub fn prime(&self, t: f64) -> Result<f64> {
        self.check_f_domain("f_prime", t)?;
        Ok(match self.name {
            Divergence::Kl => t.ln() + 1.0,
            Divergence::ReverseKl => -1.0 / t,
            Divergence::Hellinger => 1.0 - 1.0 / t.sqrt(),
            Divergence::Pearson => 2.0 * (t - 1.0),
            Divergence::Gan => t.ln() - (t + 1.0).ln(),
        })
    }

    /// Composite `(f*∘f')(t)` in closed form.
    pub fn conj_of_prime(&self, t: f64) -> Result<f64> {
        self.check_f_domain("f_conj_of_prime", t)?;
        Ok(match self.name {
            Divergence::Kl => t,
            Divergence::ReverseKl => t.ln() - 1.0,
            Divergence::Hellinger => t.sqrt() - 1.0,
            Divergence::Pearson => t * t - 1.0,
            Divergence::Gan => t.ln_1p(),
        })
    }
}

/// Evaluate one stored column of the divergence table.
pub fn eval_table(spec: &DivergenceSpec, column: TableColumn, t: f64) -> Result<f64> {
    match column {
        TableColumn::F => spec.f(t),
        TableColumn::Conj => spec.conj(t),
        TableColumn::Prime => spec.prime(t),
        TableColumn::ConjOfPrime => spec.conj_of_prime(t),
    }
}

/// A pair of discrete distributions on a common finite support, the substrate
/// for brute-force divergence oracles. `q` must be strictly positive.
#[derive(Debug, Clone)]
pub struct DiscreteDistPair {
    p: Vec<f64>,
    q: Vec<f64>,
}

impl DiscreteDistPair {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.len() != q.len() {
            return Err(Error::Dimension {
                expected: p.len().max(1),
                got: q.len(),
            });
        }
        for (name, v) in [("p", &p), ("q", &q)] {
            let sum: f64 = v.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("{name} sums to {sum}, expected 1")));
            }
        }
        if p.iter().any(|&x| x < 0.0) {
            return Err(Error::Config("p has negative entries".into()));
        }
        if q.iter().any(|&x| x <= 0.0) {
            return Err(Error::Config("q must be strictly positive".into()));
        }
        Ok(DiscreteDistPair { p, q })
    }

    pub fn support_size(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Pointwise ratio `p_i / q_i`.
    pub fn ratio(&self) -> Vec<f64> {
        self.p
            .iter()
            .zip(&self.q)
            .map(|(&pi, &qi)| pi / qi)
            .collect()
    }
}

/// Brute-force `I_f(P,Q) = Σ_i q_i f(p_i/q_i)`, the oracle every variational
/// check is measured against.
pub fn f_divergence_discrete(spec: &DivergenceSpec, pair: &DiscreteDistPair) -> Result<f64> {
    let mut acc = 0.0;
    for (&pi, &qi) in pair.p.iter().zip(&pair.q) {
        acc += qi * spec.f(pi / qi)?;
    }
    Ok(acc)
}

/// Estimated variational objective
/// `J(u) = mean(f'∘u over the P-sample) - mean(f*∘f'∘u over the Q-sample)`.
///
/// `u_on_p` / `u_on_q` hold the values of the candidate ratio `u` at sample
/// points drawn from `P` and `Q` respectively; all values must lie strictly
/// inside `dom f`.
pub fn variational_objective(
    spec: &DivergenceSpec,
    u_on_p: &[f64],
    u_on_q: &[f64],
) -> Result<f64> {
    if u_on_p.is_empty() || u_on_q.is_empty() {
        return Err(Error::EmptySample("variational_objective"));
    }
    let mut ep = 0.0;
    for &u in u_on_p {
        ep += spec.prime(u)?;
    }
    let mut eq = 0.0;
    for &u in u_on_q {
        eq += spec.conj_of_prime(u)?;
    }
    Ok(ep / u_on_p.len() as f64 - eq / u_on_q.len() as f64)
}

/// Variational objective with exact expectations over a discrete pair:
/// `J(u) = Σ_i p_i f'(u_i) - Σ_i q_i (f*∘f')(u_i)`.
///
/// With `u = p/q` this reproduces [`f_divergence_discrete`]; any other `u`
/// lower-bounds it.
pub fn variational_objective_exact(
    spec: &DivergenceSpec,
    pair: &DiscreteDistPair,
    u: &[f64],
) -> Result<f64> {
    if u.len() != pair.support_size() {
        return Err(Error::Dimension {
            expected: pair.support_size(),
            got: u.len(),
        });
    }
    let mut acc = 0.0;
    for ((&pi, &qi), &ui) in pair.p.iter().zip(&pair.q).zip(u) {
        acc += pi * spec.prime(ui)? - qi * spec.conj_of_prime(ui)?;
    }
    Ok(acc)
}

/// The classifier isomorphisms: a raw logit `c` maps to the class-posterior
/// `D = σ(c) ∈ (0,1)` and on to the density ratio `d = φ(D) = D/(1-D) > 0`,
/// with `φ∘σ = exp`.
///
/// `d` saturates: for `c` large enough that `1 - D` underflows (c ≳ 37) the
/// ratio comes back as `+∞`, and for very negative `c` it underflows to 0.
pub fn isomorphisms(c: f64) -> (f64, f64) {
    let d_posterior = 1.0 / (1.0 + (-c).exp());
    let d_ratio = d_posterior / (1.0 - d_posterior);
    (d_posterior, d_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(name: Divergence) -> DivergenceSpec {
        DivergenceSpec::new(name)
    }

    /// Random strictly positive probability vector of the given size.
    pub(crate) fn random_simplex(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
        // Dirichlet(1): normalized Exp(1) draws.
        let mut v: Vec<f64> = (0..size)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let s: f64 = v.iter().sum();
        for x in &mut v {
            *x /= s;
        }
        v
    }

    pub(crate) fn random_pair(rng: &mut ChaCha8Rng, max_support: usize) -> DiscreteDistPair {
        let size = rng.gen_range(2..=max_support);
        let p = random_simplex(rng, size);
        let q = random_simplex(rng, size);
        DiscreteDistPair::new(p, q).unwrap()
    }

    #[test]
    fn eval_table_examples() {
        let kl = spec(Divergence::Kl);
        assert_eq!(eval_table(&kl, TableColumn::F, 1.0).unwrap(), 0.0);
        assert_eq!(eval_table(&kl, TableColumn::ConjOfPrime, 3.0).unwrap(), 3.0);
        assert!((eval_table(&kl, TableColumn::F, 2.0).unwrap() - 2.0 * 2.0_f64.ln()).abs() < 1e-12);
        assert!((eval_table(&kl, TableColumn::F, 2.0).unwrap() - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn domain_errors() {
        let kl = spec(Divergence::Kl);
        assert!(kl.f(0.0).is_err());
        assert!(kl.f(-1.0).is_err());
        assert!(kl.conj(5.0).is_ok()); // KL conjugate lives on all of R
        let gan = spec(Divergence::Gan);
        assert!(gan.conj(0.5).is_err()); // GAN conjugate needs t* < 0
        let rkl = spec(Divergence::ReverseKl);
        assert!(rkl.conj(0.0).is_err());
        assert!(rkl.conj(-1.0).is_ok());
    }

    #[test]
    fn f_divergence_discrete_examples() {
        let kl = spec(Divergence::Kl);
        let same = DiscreteDistPair::new(vec![0.3, 0.7], vec![0.3, 0.7]).unwrap();
        assert!(f_divergence_discrete(&kl, &same).unwrap().abs() < 1e-15);

        let pair = DiscreteDistPair::new(vec![0.5, 0.5], vec![0.25, 0.75]).unwrap();
        let expect = 0.5 * 2.0_f64.ln() + 0.5 * (2.0_f64 / 3.0).ln();
        let got = f_divergence_discrete(&kl, &pair).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 0.143841).abs() < 1e-6);

        let pearson = spec(Divergence::Pearson);
        let got = f_divergence_discrete(&pearson, &pair).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-12);
        assert!((got - 0.333333).abs() < 1e-6);
    }

    #[test]
    fn variational_objective_examples() {
        let kl = spec(Divergence::Kl);
        // u == 1 with P == Q: J = f'(1)·1 - (f*∘f')(1)·1 = 1 - 1 = 0.
        let same = DiscreteDistPair::new(vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let j = variational_objective_exact(&kl, &same, &[1.0, 1.0]).unwrap();
        assert!(j.abs() < 1e-15);

        let pair = DiscreteDistPair::new(vec![0.5, 0.5], vec![0.25, 0.75]).unwrap();
        let u = pair.ratio();
        let j = variational_objective_exact(&kl, &pair, &u).unwrap();
        let oracle = f_divergence_discrete(&kl, &pair).unwrap();
        assert!((j - oracle).abs() < 1e-12);

        let u_sub: Vec<f64> = u.iter().map(|x| 0.9 * x).collect();
        let j_sub = variational_objective_exact(&kl, &pair, &u_sub).unwrap();
        assert!(j_sub < oracle);
    }

    #[test]
    fn variational_objective_sample_means() {
        // Sample-mean form agrees with the exact form when each support point
        // appears proportionally to its probability.
        let kl = spec(Divergence::Kl);
        let pair = DiscreteDistPair::new(vec![0.25, 0.75], vec![0.5, 0.5]).unwrap();
        let u = pair.ratio();
        let u_on_p = vec![u[0], u[1], u[1], u[1]];
        let u_on_q = vec![u[0], u[1]];
        let j = variational_objective(&kl, &u_on_p, &u_on_q).unwrap();
        let exact = variational_objective_exact(&kl, &pair, &u).unwrap();
        assert!((j - exact).abs() < 1e-12);
        assert!(variational_objective(&kl, &[], &[1.0]).is_err());
    }

    #[test]
    fn isomorphism_examples() {
        let (d_post, d_ratio) = isomorphisms(0.0);
        assert_eq!(d_post, 0.5);
        assert!((d_ratio - 1.0).abs() < 1e-15);

        let (d_post, d_ratio) = isomorphisms(2.0_f64.ln());
        assert!((d_post - 2.0 / 3.0).abs() < 1e-15);
        assert!((d_ratio - 2.0).abs() < 1e-12);

        let (d_post, d_ratio) = isomorphisms(-(2.0_f64.ln()));
        assert!((d_post - 1.0 / 3.0).abs() < 1e-15);
        assert!((d_ratio - 0.5).abs() < 1e-12);

        // Saturation for extreme logits.
        assert_eq!(isomorphisms(800.0).1, f64::INFINITY);
        assert_eq!(isomorphisms(-800.0).1, 0.0);
    }

    #[test]
    fn fenchel_young_equality_on_grid() {
        // f(t) + f*(f'(t)) = t·f'(t). Hellinger excluded (see module docs).
        for name in Divergence::ALL {
            if name == Divergence::Hellinger {
                continue;
            }
            let s = spec(name);
            for i in 1..200 {
                let t = 0.05 * i as f64;
                let prime = s.prime(t).unwrap();
                if !s.dom_conj.contains(prime) {
                    continue;
                }
                let lhs = s.f(t).unwrap() + s.conj(prime).unwrap();
                let rhs = t * prime;
                let scale = 1.0_f64.max(lhs.abs()).max(rhs.abs());
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * scale,
                    "{:?} t={} lhs={} rhs={}",
                    name,
                    t,
                    lhs,
                    rhs
                );
            }
        }
    }

    #[test]
    fn conj_of_prime_consistency_on_grid() {
        for name in Divergence::ALL {
            if name == Divergence::Hellinger {
                continue;
            }
            let s = spec(name);
            for i in 1..200 {
                let t = 0.05 * i as f64;
                let prime = s.prime(t).unwrap();
                if !s.dom_conj.contains(prime) {
                    continue;
                }
                let composite = s.conj_of_prime(t).unwrap();
                let direct = s.conj(prime).unwrap();
                let scale = 1.0_f64.max(composite.abs()).max(direct.abs());
                assert!(
                    (composite - direct).abs() <= 1e-12 * scale,
                    "{:?} t={}",
                    name,
                    t
                );
            }
        }
    }

    #[test]
    fn convexity_midpoint_check() {
        // f((a+b)/2) <= (f(a)+f(b))/2 on a grid, all five divergences.
        for name in Divergence::ALL {
            let s = spec(name);
            for i in 1..60 {
                for j in (i + 1)..60 {
                    let a = 0.1 * i as f64;
                    let b = 0.1 * j as f64;
                    let mid = s.f(0.5 * (a + b)).unwrap();
                    let chord = 0.5 * (s.f(a).unwrap() + s.f(b).unwrap());
                    assert!(mid <= chord + 1e-12, "{:?} a={} b={}", name, a, b);
                }
            }
        }
    }

    #[test]
    fn gan_recovery() {
        // With GAN's f: f'∘φ∘σ(c) = log σ(c) and (f*∘f')∘φ∘σ(c) = -log(1-σ(c)).
        let gan = spec(Divergence::Gan);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let c = rng.gen_range(-8.0..8.0);
            let (d_post, d_ratio) = isomorphisms(c);
            let lhs_p = gan.prime(d_ratio).unwrap();
            let lhs_q = gan.conj_of_prime(d_ratio).unwrap();
            assert!((lhs_p - d_post.ln()).abs() < 1e-10, "c={c}");
            assert!((lhs_q + (1.0 - d_post).ln()).abs() < 1e-10, "c={c}");
        }
    }

    #[test]
    fn variational_oracle_random_pairs() {
        // Plug-in u = p/q reproduces the brute-force oracle; a perturbed u
        // never exceeds it (variational lower bound).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in Divergence::ALL {
            let s = spec(name);
            for _ in 0..200 {
                let pair = random_pair(&mut rng, 10);
                let u = pair.ratio();
                let oracle = f_divergence_discrete(&s, &pair).unwrap();
                let j = variational_objective_exact(&s, &pair, &u).unwrap();
                assert!(
                    (j - oracle).abs() <= 1e-10 * 1.0_f64.max(oracle.abs()),
                    "{:?}: J={} I_f={}",
                    name,
                    j,
                    oracle
                );
                let factor = rng.gen_range(0.5..1.5);
                let u_pert: Vec<f64> = u.iter().map(|x| factor * x).collect();
                let j_pert = variational_objective_exact(&s, &pair, &u_pert).unwrap();
                assert!(j_pert <= oracle + 1e-12, "{:?}", name);
            }
        }
    }

    proptest! {
        #[test]
        fn isomorphism_identity(c in -30.0f64..30.0) {
            let (_, d_ratio) = isomorphisms(c);
            let expected = c.exp();
            // Computing d through 1 - sigma(c) cancels catastrophically for
            // large c; the achievable relative accuracy is ~eps·(1 + e^c).
            let tol = 1e-14 + 4.0 * f64::EPSILON * (1.0 + expected);
            prop_assert!((d_ratio - expected).abs() <= tol * expected.max(1e-300));
        }

        #[test]
        fn ratio_positive_and_posterior_in_unit(c in -700.0f64..700.0) {
            let (d_post, d_ratio) = isomorphisms(c);
            prop_assert!(d_post > 0.0 && d_post < 1.0 || c.abs() > 30.0);
            prop_assert!(d_ratio >= 0.0);
        }
    }
}
