// Dev probe: one ring run at desk scale; prints the KL/NLL/accuracy curve
// and wall time.

use boostdens::boost::{run_adabode, AdaBodeConfig, MetricsConfig, StepPolicy};
use boostdens::dist::{GaussianMixture, IsotropicGaussian, ReferenceDensity};
use boostdens::learner::{Activation, TrainConfig};
use boostdens::mcmc::MhConfig;
use boostdens::metrics::GridSpec;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let epochs: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(600);
    let target = GaussianMixture::ring(8, 5.0, 1.0).unwrap();
    let q0 = ReferenceDensity::Isotropic(IsotropicGaussian::standard(2));
    let cfg = AdaBodeConfig {
        t_rounds: 6,
        policy: StepPolicy::Fixed { value: 0.5 },
        topology: vec![2, 5, 5, 1],
        activation: Activation::Selu,
        train: TrainConfig {
            epochs,
            batch_size: 50,
            ..TrainConfig::default()
        },
        n_p: 1000,
        n_q: 1000,
        mh: MhConfig::default(),
        grid: Some(GridSpec::around_mixture(&target, 4.0, 200).unwrap()),
        importance_n: 100_000,
        metrics: MetricsConfig::default(),
        seed,
    };
    let start = std::time::Instant::now();
    let (_, trace) = run_adabode(&target, q0, &cfg).unwrap();
    println!(
        "seed {seed} epochs {epochs}: kl0 = {:.4}, nll0 = {:.4}  ({:.1?})",
        trace.initial_kl.unwrap(),
        trace.initial_nll,
        start.elapsed()
    );
    for r in &trace.rounds {
        println!(
            "t={} alpha={:.3} kl={:.4} nll={:.4} acc={:.3} mu_p={:.3} mu_q={:.3} c_sup={:.2} wla={}",
            r.t,
            r.alpha,
            r.kl.unwrap(),
            r.nll,
            r.accuracy,
            r.mu_p_hat,
            r.mu_q_hat,
            r.c_sup_hat,
            r.wla_satisfied
        );
    }
}
