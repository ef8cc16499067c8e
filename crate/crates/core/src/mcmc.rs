//! Random-walk Metropolis–Hastings over an unnormalized log density.
//!
//! Proposals are isotropic Gaussian steps `x' = x + proposal_std·ξ`, accepted
//! with probability `min(1, exp(ℓ(x') - ℓ(x)))`. Only log-density differences
//! enter the accept test, so any additive normalization constant cancels and
//! the sampler takes unnormalized inputs.
//!
//! Chains are independent: chain `j` owns the RNG stream `(seed, j)` and may
//! run in parallel; the merged output interleaves chains round-robin, so the
//! result is identical regardless of scheduling.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MhConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub proposal_std: f64,
    pub n_chains: usize,
    pub seed: u64,
}

impl Default for MhConfig {
    fn default() -> Self {
        MhConfig {
            n_samples: 1000,
            burn_in: 1000,
            proposal_std: 1.0,
            n_chains: 8,
            seed: 0,
        }
    }
}

/// Chain initialization: one start point per chain, or a single shared point.
#[derive(Debug, Clone)]
pub enum MhInit {
    PerChain(Vec<Vec<f64>>),
    Fixed(Vec<f64>),
}

/// Run the sampler; returns `(samples, acceptance_rate)` with one sample per
/// row. Burn-in draws are discarded per chain; the acceptance rate counts all
/// proposals including burn-in.
pub fn rw_metropolis<F>(
    log_density: F,
    dim: usize,
    init: &MhInit,
    config: &MhConfig,
) -> Result<(Array2<f64>, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if config.proposal_std <= 0.0 {
        return Err(Error::Range {
            name: "proposal_std",
            value: config.proposal_std,
            range: "(0, inf)",
        });
    }
    if config.n_chains == 0 {
        return Err(Error::Config("n_chains must be >= 1".into()));
    }
    let n_chains = config.n_chains.min(config.n_samples.max(1));
    let per_chain = config.n_samples.div_ceil(n_chains);

    let starts: Vec<Vec<f64>> = match init {
        MhInit::Fixed(x) => vec![x.clone(); n_chains],
        MhInit::PerChain(points) => {
            if points.len() < n_chains {
                return Err(Error::Config(format!(
                    "need {n_chains} init points, got {}",
                    points.len()
                )));
            }
            points[..n_chains].to_vec()
        }
    };
    for x in &starts {
        if x.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: x.len(),
            });
        }
        let l = log_density(x);
        if !l.is_finite() {
            return Err(Error::NonFiniteLogDensity(format!(
                "log density {l} at chain start {x:?}"
            )));
        }
    }

    let chains: Vec<(Vec<Vec<f64>>, usize, usize)> = (0..n_chains)
        .into_par_iter()
        .map(|chain_idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(chain_idx as u64);
            let mut x = starts[chain_idx].clone();
            let mut log_p = log_density(&x);
            let mut proposal = vec![0.0; dim];
            let mut kept = Vec::with_capacity(per_chain);
            let mut accepted = 0usize;
            let total = config.burn_in + per_chain;
            for step in 0..total {
                for (p, xi) in proposal.iter_mut().zip(&x) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *p = xi + config.proposal_std * z;
                }
                let log_q = log_density(&proposal);
                let delta = log_q - log_p;
                let u: f64 = rng.gen();
                if delta >= 0.0 || u < delta.exp() {
                    x.copy_from_slice(&proposal);
                    log_p = log_q;
                    accepted += 1;
                }
                if step >= config.burn_in {
                    kept.push(x.clone());
                }
            }
            (kept, accepted, total)
        })
        .collect();

    // Round-robin merge: sample i comes from chain i % n_chains.
    let mut out = Array2::zeros((config.n_samples, dim));
    for i in 0..config.n_samples {
        let chain = i % n_chains;
        let step = i / n_chains;
        out.row_mut(i)
            .iter_mut()
            .zip(&chains[chain].0[step])
            .for_each(|(o, &v)| *o = v);
    }
    let accepted: usize = chains.iter().map(|c| c.1).sum();
    let proposed: usize = chains.iter().map(|c| c.2).sum();
    Ok((out, accepted as f64 / proposed as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Axis;

    fn std_normal_2d(x: &[f64]) -> f64 {
        -0.5 * (x[0] * x[0] + x[1] * x[1])
    }

    fn cfg(n: usize, seed: u64) -> MhConfig {
        MhConfig {
            n_samples: n,
            seed,
            ..MhConfig::default()
        }
    }

    #[test]
    fn constant_density_accepts_everything() {
        let (_, rate) = rw_metropolis(|_| 0.0, 2, &MhInit::Fixed(vec![0.0, 0.0]), &cfg(500, 1)).unwrap();
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn vanishing_proposals_accept_almost_everything() {
        let config = MhConfig {
            proposal_std: 1e-9,
            ..cfg(500, 2)
        };
        let (_, rate) =
            rw_metropolis(std_normal_2d, 2, &MhInit::Fixed(vec![0.5, 0.5]), &config).unwrap();
        assert!(rate > 0.999);
    }

    #[test]
    fn standard_normal_moments() {
        let config = cfg(40_000, 3);
        let (samples, rate) =
            rw_metropolis(std_normal_2d, 2, &MhInit::Fixed(vec![0.0, 0.0]), &config).unwrap();
        assert!(rate > 0.1 && rate < 0.95);
        let mean = samples.mean_axis(Axis(0)).unwrap();
        let var = samples.var_axis(Axis(0), 1.0);
        for axis in 0..2 {
            assert!(mean[axis].abs() < 0.06, "mean {:?}", mean);
            assert!((var[axis] - 1.0).abs() < 0.12, "var {:?}", var);
        }
    }

    #[test]
    fn additive_constant_invariance_is_exact() {
        let config = cfg(2_000, 4);
        let init = MhInit::Fixed(vec![0.2, -0.3]);
        let (a, ra) = rw_metropolis(std_normal_2d, 2, &init, &config).unwrap();
        let (b, rb) = rw_metropolis(|x| std_normal_2d(x) + 7.0, 2, &init, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn seed_determinism() {
        let config = cfg(1_000, 5);
        let init = MhInit::Fixed(vec![0.0, 0.0]);
        let (a, _) = rw_metropolis(std_normal_2d, 2, &init, &config).unwrap();
        let (b, _) = rw_metropolis(std_normal_2d, 2, &init, &config).unwrap();
        assert_eq!(a, b);
        let other = MhConfig { seed: 6, ..config };
        let (c, _) = rw_metropolis(std_normal_2d, 2, &init, &other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn per_chain_starts_and_errors() {
        let starts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 0.0]).collect();
        let (samples, _) =
            rw_metropolis(std_normal_2d, 2, &MhInit::PerChain(starts), &cfg(64, 7)).unwrap();
        assert_eq!(samples.nrows(), 64);

        // Non-finite start is rejected.
        let err = rw_metropolis(
            |x| (x[0] - 1.0).ln(), // -inf at x = 0
            1,
            &MhInit::Fixed(vec![0.0]),
            &cfg(10, 8),
        );
        assert!(matches!(err, Err(Error::NonFiniteLogDensity(_))));

        // Too few init points.
        let err = rw_metropolis(
            std_normal_2d,
            2,
            &MhInit::PerChain(vec![vec![0.0, 0.0]]),
            &cfg(100, 9),
        );
        assert!(err.is_err());
    }
}
