//! Evaluation metrics: grid-quadrature KL, normalized negative log-likelihood,
//! balanced classifier accuracy, and the coverage metric `C_κ`.
//!
//! KL is computed by midpoint-rule quadrature on a rectangular grid and is
//! only available up to two dimensions; higher-dimensional runs fall back to
//! NLL. Normalized NLL is `E_P[log dQ] / E_P[log dP]` over one shared
//! `P`-sample, so 1 is ideal. Coverage is the `P`-mass of the super-level set
//! of `dQ` carrying `Q`-mass `κ`; the level is an empirical quantile of `dQ`
//! over `Q`-draws, which makes the metric invariant under strictly monotone
//! transformations of the density values.

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{Density, GaussianMixture, Sampleable};
use crate::error::{Error, Result};
use crate::learner::MlpClassifier;

/// Log densities below this floor are clamped inside quadrature so underflow
/// cannot poison a whole integral.
pub const LOG_DENSITY_FLOOR: f64 = -700.0;

/// Midpoint-rule evaluation grid over an axis-aligned box, dim <= 2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points_per_axis: usize,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, points_per_axis: usize) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 2 {
            return Err(Error::Config(format!(
                "grid dim must be 1 or 2, got lo={lo:?} hi={hi:?}"
            )));
        }
        if points_per_axis < 16 {
            return Err(Error::Range {
                name: "points_per_axis",
                value: points_per_axis as f64,
                range: "[16, inf)",
            });
        }
        if lo.iter().zip(&hi).any(|(&l, &h)| l >= h) {
            return Err(Error::Config("grid needs lo < hi componentwise".into()));
        }
        Ok(GridSpec {
            lo,
            hi,
            points_per_axis,
        })
    }

    /// Symmetric square grid `[lo, hi]^2`.
    pub fn square(lo: f64, hi: f64, points_per_axis: usize) -> Result<Self> {
        GridSpec::new(vec![lo, lo], vec![hi, hi], points_per_axis)
    }

    /// Bounding box of the mixture's means expanded by `pad_sigmas` standard
    /// deviations of the widest component on each side.
    pub fn around_mixture(
        mixture: &GaussianMixture,
        pad_sigmas: f64,
        points_per_axis: usize,
    ) -> Result<Self> {
        let dim = mixture.dim();
        let max_sigma = mixture
            .components()
            .iter()
            .map(|c| c.sigma)
            .fold(0.0f64, f64::max);
        let pad = pad_sigmas * max_sigma;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for c in mixture.components() {
            for j in 0..dim {
                lo[j] = lo[j].min(c.mean[j] - pad);
                hi[j] = hi[j].max(c.mean[j] + pad);
            }
        }
        GridSpec::new(lo, hi, points_per_axis)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| (h - l) / self.points_per_axis as f64)
            .product()
    }

    /// Visit every cell midpoint in row-major order.
    pub fn for_each_center<F: FnMut(&[f64])>(&self, mut f: F) {
        let n = self.points_per_axis;
        let step: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| (h - l) / n as f64)
            .collect();
        match self.dim() {
            1 => {
                let mut x = [0.0];
                for i in 0..n {
                    x[0] = self.lo[0] + (i as f64 + 0.5) * step[0];
                    f(&x);
                }
            }
            2 => {
                let mut x = [0.0, 0.0];
                for i in 0..n {
                    x[0] = self.lo[0] + (i as f64 + 0.5) * step[0];
                    for j in 0..n {
                        x[1] = self.lo[1] + (j as f64 + 0.5) * step[1];
                        f(&x);
                    }
                }
            }
            _ => unreachable!("GridSpec is validated to dim <= 2"),
        }
    }
}

/// Midpoint quadrature of `p·log(p/q)`; `q`'s log density is floored at
/// [`LOG_DENSITY_FLOOR`] so underflow regions contribute a large finite
/// penalty instead of infinity.
pub fn kl_grid(
    p: &(impl Density + ?Sized),
    q: &(impl Density + ?Sized),
    grid: &GridSpec,
) -> Result<f64> {
    if p.dim() > 2 || q.dim() > 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: p.dim().max(q.dim()),
        });
    }
    if p.dim() != grid.dim() || q.dim() != grid.dim() {
        return Err(Error::Dimension {
            expected: grid.dim(),
            got: p.dim(),
        });
    }
    let mut acc = 0.0;
    grid.for_each_center(|x| {
        let log_p = p.log_density(x);
        if log_p > LOG_DENSITY_FLOOR {
            let log_q = q.log_density(x).max(LOG_DENSITY_FLOOR);
            acc += log_p.exp() * (log_p - log_q);
        }
    });
    Ok(acc * grid.cell_volume())
}

/// Normalized NLL over a fresh `P`-sample of size `n`:
/// `mean(log dQ) / mean(log dP)`, 1 is ideal.
pub fn nll_normalized(
    p: &(impl Sampleable + ?Sized),
    q: &(impl Density + ?Sized),
    n: usize,
    seed: u64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptySample("nll_normalized"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = p.sample_n(n, &mut rng);
    nll_on_samples(samples.view(), p, q)
}

/// Normalized NLL evaluated on a given `P`-sample (used when fitting and
/// evaluation must share the same draw).
pub fn nll_on_samples(
    samples: ArrayView2<'_, f64>,
    p: &(impl Density + ?Sized),
    q: &(impl Density + ?Sized),
) -> Result<f64> {
    if samples.nrows() == 0 {
        return Err(Error::EmptySample("nll_on_samples"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for row in samples.rows() {
        let x = row.as_slice().expect("row-major samples");
        let lq = q.log_density(x);
        if !lq.is_finite() {
            return Err(Error::NonFiniteLogDensity(format!(
                "log dQ = {lq} at {x:?}"
            )));
        }
        num += lq;
        den += p.log_density(x);
    }
    let n = samples.nrows() as f64;
    let (num, den) = (num / n, den / n);
    if den.abs() < 1e-3 {
        return Err(Error::DegenerateSample(
            "normalized NLL undefined: |E_P log dP| < 1e-3",
        ));
    }
    Ok(num / den)
}

/// Balanced accuracy of the decision rule `c > 0 ⇒ P`:
/// `(frac of P-samples with c > 0 + frac of Q-samples with c <= 0) / 2`.
pub fn accuracy(
    clf: &MlpClassifier,
    p_samples: ArrayView2<'_, f64>,
    q_samples: ArrayView2<'_, f64>,
) -> f64 {
    let p_vals = clf.value_batch(p_samples);
    let q_vals = clf.value_batch(q_samples);
    let p_frac = p_vals.iter().filter(|&&c| c > 0.0).count() as f64 / p_vals.len() as f64;
    let q_frac = q_vals.iter().filter(|&&c| c <= 0.0).count() as f64 / q_vals.len() as f64;
    0.5 * (p_frac + q_frac)
}

/// Linear-interpolated order statistic at `level` in [0, 1].
fn quantile_linear(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = level.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Coverage from precomputed density values: the threshold `β` is the
/// `(1-κ)`-quantile of `dQ` over the `Q`-draws, and the result is the
/// fraction of `P`-draw values strictly above `β`.
pub fn coverage_from_values(dq_at_q: &[f64], dq_at_p: &[f64], kappa: f64) -> Result<f64> {
    if dq_at_q.is_empty() || dq_at_p.is_empty() {
        return Err(Error::EmptySample("coverage"));
    }
    if !(0.0..1.0).contains(&kappa) || kappa == 0.0 {
        return Err(Error::Range {
            name: "kappa",
            value: kappa,
            range: "(0, 1)",
        });
    }
    let mut sorted = dq_at_q.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let beta = quantile_linear(&sorted, 1.0 - kappa);
    let above = dq_at_p.iter().filter(|&&v| v > beta).count();
    Ok(above as f64 / dq_at_p.len() as f64)
}

/// Coverage metric `C_κ(P,Q) = P(lev_{>β} dQ)` with `Q(lev_{>β} dQ) = κ`.
///
/// Works on log densities directly (the quantile construction only needs a
/// monotone transform of `dQ`).
pub fn coverage(
    p: &(impl Sampleable + ?Sized),
    q: &(impl Sampleable + ?Sized),
    kappa: f64,
    n_q: usize,
    n_p: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let q_draws = q.sample_n(n_q, &mut rng);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let p_draws = p.sample_n(n_p, &mut rng);
    let dq_at_q: Vec<f64> = q_draws
        .rows()
        .into_iter()
        .map(|r| q.log_density(r.as_slice().unwrap()))
        .collect();
    let dq_at_p: Vec<f64> = p_draws
        .rows()
        .into_iter()
        .map(|r| q.log_density(r.as_slice().unwrap()))
        .collect();
    coverage_from_values(&dq_at_q, &dq_at_p, kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::IsotropicGaussian;
    use ndarray::array;

    fn grid10() -> GridSpec {
        GridSpec::square(-10.0, 10.0, 400).unwrap()
    }

    #[test]
    fn kl_self_divergence_is_zero() {
        let p = IsotropicGaussian::new(vec![0.0, 0.0], 1.0).unwrap();
        let kl = kl_grid(&p, &p, &grid10()).unwrap();
        assert!(kl.abs() < 1e-6);
    }

    #[test]
    fn kl_gaussian_oracle_battery() {
        // Closed form: KL(N(m1,s1²I), N(m2,s2²I))
        //   = d·(log(s2/s1) + s1²/(2s2²) - 1/2) + |m1-m2|²/(2s2²).
        let cases: [(Vec<f64>, f64, Vec<f64>, f64); 5] = [
            (vec![0.0, 0.0], 1.0, vec![1.0, 0.0], 1.0),
            (vec![0.0, 0.0], 1.0, vec![0.0, 2.0], 1.0),
            (vec![0.0, 0.0], 1.0, vec![0.0, 0.0], 2.0),
            (vec![0.0, 0.0], 1.0, vec![0.0, 0.0], 0.5),
            (vec![0.5, -0.5], 1.0, vec![-0.5, 0.5], 1.5),
        ];
        for (m1, s1, m2, s2) in cases {
            let p = IsotropicGaussian::new(m1.clone(), s1).unwrap();
            let q = IsotropicGaussian::new(m2.clone(), s2).unwrap();
            let shift: f64 = m1
                .iter()
                .zip(&m2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            let expect = 2.0 * ((s2 / s1).ln() + s1 * s1 / (2.0 * s2 * s2) - 0.5)
                + shift / (2.0 * s2 * s2);
            let got = kl_grid(&p, &q, &grid10()).unwrap();
            assert!(
                (got - expect).abs() < 1e-3,
                "KL({m1:?},{s1} || {m2:?},{s2}): got {got}, want {expect}"
            );
            assert!(got >= -1e-6);
        }
    }

    #[test]
    fn kl_known_values() {
        let p = IsotropicGaussian::new(vec![0.0, 0.0], 1.0).unwrap();
        let shifted = IsotropicGaussian::new(vec![1.0, 0.0], 1.0).unwrap();
        let got = kl_grid(&p, &shifted, &grid10()).unwrap();
        assert!((got - 0.5).abs() < 1e-3);

        let wide = IsotropicGaussian::new(vec![0.0, 0.0], 2.0).unwrap();
        let got = kl_grid(&p, &wide, &grid10()).unwrap();
        let expect = 2.0 * (2.0f64.ln() - 3.0 / 8.0);
        assert!((got - expect).abs() < 1e-3);
        assert!((expect - 0.636294).abs() < 1e-6);
    }

    #[test]
    fn kl_rejects_high_dimension() {
        let p = IsotropicGaussian::new(vec![0.0; 3], 1.0).unwrap();
        let q = IsotropicGaussian::new(vec![0.0; 3], 1.0).unwrap();
        assert!(kl_grid(&p, &q, &grid10()).is_err());
    }

    #[test]
    fn nll_examples() {
        let p = IsotropicGaussian::new(vec![0.0, 0.0], 1.0).unwrap();
        let nll = nll_normalized(&p, &p, 100_000, 7).unwrap();
        assert!((nll - 1.0).abs() < 0.01, "self NLL {nll}");

        // Broader q scores worse than the truth, so the ratio exceeds 1
        // (both means are negative here).
        let q = IsotropicGaussian::new(vec![0.0, 0.0], 2.0).unwrap();
        let nll = nll_normalized(&p, &q, 50_000, 8).unwrap();
        assert!(nll > 1.0, "broad-q NLL {nll}");
        // E_P[log dQ] = -(log 8π + 1/4), E_P[log dP] = -(log 2π + 1).
        let expect = ((8.0 * std::f64::consts::PI).ln() + 0.25)
            / ((2.0 * std::f64::consts::PI).ln() + 1.0);
        assert!((nll - expect).abs() < 0.02, "nll {nll} expect {expect}");
    }

    #[test]
    fn nll_denominator_guard() {
        // A sample point where log dP = 0 exactly: sigma with
        // -log(2π σ²) = 1 and the point at squared radius 2σ².
        let sigma = (1.0 / (2.0 * std::f64::consts::PI * std::f64::consts::E)).sqrt();
        let p = IsotropicGaussian::new(vec![0.0, 0.0], sigma).unwrap();
        let x = sigma * 2.0f64.sqrt();
        let samples = array![[x, 0.0]];
        assert!(p.log_density(&[x, 0.0]).abs() < 1e-12);
        assert!(matches!(
            nll_on_samples(samples.view(), &p, &p),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn accuracy_examples() {
        let p = array![[1.0, 0.0], [2.0, 0.0]];
        let q = array![[-1.0, 0.0], [-2.0, 0.0]];

        let perfect = MlpClassifier::linear(&[1.0, 0.0], 0.0);
        assert_eq!(accuracy(&perfect, p.view(), q.view()), 1.0);

        let zero = MlpClassifier::linear(&[0.0, 0.0], 0.0);
        assert_eq!(accuracy(&zero, p.view(), q.view()), 0.5);

        let inverted = MlpClassifier::linear(&[-1.0, 0.0], 0.0);
        assert_eq!(accuracy(&inverted, p.view(), q.view()), 0.0);
    }

    #[test]
    fn coverage_self_is_kappa() {
        let p = IsotropicGaussian::new(vec![0.0, 0.0], 1.0).unwrap();
        let c = coverage(&p, &p, 0.95, 40_000, 40_000, 11).unwrap();
        assert!((c - 0.95).abs() < 0.02, "self-coverage {c}");
    }

    #[test]
    fn coverage_broad_q_covers_everything() {
        let p = IsotropicGaussian::new(vec![0.0, 0.0], 1.0).unwrap();
        let q = IsotropicGaussian::new(vec![0.0, 0.0], 10.0).unwrap();
        let c = coverage(&p, &q, 0.95, 20_000, 20_000, 12).unwrap();
        assert!(c > 0.99, "broad coverage {c}");
    }

    #[test]
    fn coverage_single_mode_q_captures_one_eighth() {
        let p = GaussianMixture::ring(8, 5.0, 0.5).unwrap();
        let q = IsotropicGaussian::new(vec![5.0, 0.0], 0.5).unwrap();
        let c = coverage(&p, &q, 0.95, 20_000, 20_000, 13).unwrap();
        assert!((c - 0.125).abs() < 0.05, "one-mode coverage {c}");
    }

    #[test]
    fn coverage_invariant_under_monotone_transform() {
        let vals_q: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin() + 2.0).collect();
        let vals_p: Vec<f64> = (0..500).map(|i| (i as f64 * 0.11).cos() + 2.0).collect();
        let base = coverage_from_values(&vals_q, &vals_p, 0.9).unwrap();
        let doubled_q: Vec<f64> = vals_q.iter().map(|v| 2.0 * v).collect();
        let doubled_p: Vec<f64> = vals_p.iter().map(|v| 2.0 * v).collect();
        let doubled = coverage_from_values(&doubled_q, &doubled_p, 0.9).unwrap();
        assert_eq!(base, doubled);
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(vec![0.0], vec![1.0], 16).is_ok());
        assert!(GridSpec::new(vec![0.0], vec![1.0], 8).is_err());
        assert!(GridSpec::new(vec![1.0], vec![0.0], 32).is_err());
        assert!(GridSpec::new(vec![0.0; 3], vec![1.0; 3], 32).is_err());

        let g = GridSpec::square(-1.0, 1.0, 100).unwrap();
        let mut count = 0;
        let mut mass = 0.0;
        g.for_each_center(|_| count += 1);
        assert_eq!(count, 100 * 100);
        // Cell volumes tile the box.
        g.for_each_center(|_| mass += g.cell_volume());
        assert!((mass - 4.0).abs() < 1e-9);
    }
}
