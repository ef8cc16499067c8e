// Dev probe: per-run NLL of Q0, Q1, Q2 and the Gaussian KDE on the random
// 8-mode mixture, to preview the comparison ordering.

use boostdens::boost::{run_adabode, AdaBodeConfig, MetricsConfig, StepPolicy};
use boostdens::dist::{BoostedDensity, DiagonalGaussian, GaussianMixture, ReferenceDensity, Sampleable};
use boostdens::kde::{fit, BandwidthRule, Kernel};
use boostdens::learner::{Activation, TrainConfig};
use boostdens::mcmc::MhConfig;
use boostdens::metrics::{nll_on_samples, GridSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let runs: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let epochs: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(600);
    let mut ordering_ok = 0;
    let (mut sum_q0, mut sum_q1, mut sum_q2, mut sum_g) = (0.0, 0.0, 0.0, 0.0);
    for run in 0..runs {
        let target = GaussianMixture::random(2, 8, 10.0, 1.0, 9000 + run).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + run);
        let master = target.sample_n(1000, &mut rng);
        let q0 = ReferenceDensity::Diagonal(DiagonalGaussian::fit(master.view()).unwrap());

        let cfg = AdaBodeConfig {
            t_rounds: 2,
            policy: StepPolicy::LinesearchNll,
            topology: vec![2, 10, 10, 1],
            activation: Activation::Relu,
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
            metrics: MetricsConfig {
                kl: false,
                coverage: None,
            },
            seed: 100 + run,
        };
        let start = std::time::Instant::now();
        let (bd, trace) = run_adabode(&target, q0.clone(), &cfg).unwrap();

        let nll_at = |t: usize| {
            let prefix = BoostedDensity::from_parts(q0.clone(), bd.rounds()[..t].to_vec()).unwrap();
            nll_on_samples(master.view(), &target, &prefix).unwrap()
        };
        let nll_q0 = nll_at(0);
        let nll_q1 = nll_at(1);
        let nll_q2 = nll_at(2);
        let kde = fit(master.view(), Kernel::Gaussian, BandwidthRule::ScottSilverman).unwrap();
        let nll_g = nll_on_samples(master.view(), &target, &kde).unwrap();
        let ok = nll_g <= nll_q1 && nll_q1 <= nll_q0;
        ordering_ok += ok as u32;
        sum_q0 += nll_q0;
        sum_q1 += nll_q1;
        sum_q2 += nll_q2;
        sum_g += nll_g;
        println!(
            "run {run}: q0={nll_q0:.4} q1={nll_q1:.4} q2={nll_q2:.4} gauss={nll_g:.4} alphas=[{:.2},{:.2}] order_ok={ok} ({:.1?})",
            trace.rounds[0].alpha,
            trace.rounds[1].alpha,
            start.elapsed()
        );
    }
    let n = runs as f64;
    println!(
        "means: q0={:.4} q1={:.4} q2={:.4} gauss={:.4} ordering {}/{}",
        sum_q0 / n,
        sum_q1 / n,
        sum_q2 / n,
        sum_g / n,
        ordering_ok,
        runs
    );
}
