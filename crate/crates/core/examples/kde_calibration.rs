// Dev scan: mean in-sample normalized NLL of Q0 and each KDE kernel on the
// random 8-mode mixture, across box halfwidths and mode widths.

use boostdens::dist::{DiagonalGaussian, GaussianMixture, Sampleable};
use boostdens::kde::{fit, BandwidthRule, Kernel};
use boostdens::metrics::nll_on_samples;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let n = 1000;
    let runs = 20;
    for &(hw, sigma) in &[
        (5.0, 1.0),
        (8.0, 1.0),
        (10.0, 1.0),
        (12.0, 1.0),
        (15.0, 1.0),
        (10.0, 0.5),
    ] {
        let mut q0_nll = 0.0;
        let mut kernel_nll = [0.0f64; 6];
        let mut h_mean = 0.0;
        for run in 0..runs {
            let target = GaussianMixture::random(2, 8, hw, sigma, 1000 + run).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5000 + run);
            let master = target.sample_n(n, &mut rng);
            let q0 = DiagonalGaussian::fit(master.view()).unwrap();
            q0_nll += nll_on_samples(master.view(), &target, &q0).unwrap();
            for (i, kernel) in Kernel::ALL.into_iter().enumerate() {
                let model = fit(master.view(), kernel, BandwidthRule::ScottSilverman).unwrap();
                if i == 0 {
                    h_mean += model.bandwidth();
                }
                kernel_nll[i] += nll_on_samples(master.view(), &target, &model).unwrap();
            }
        }
        let r = runs as f64;
        print!(
            "hw={hw:>4} sigma={sigma}  h={:.3}  q0={:.4}",
            h_mean / r,
            q0_nll / r
        );
        for (i, kernel) in Kernel::ALL.into_iter().enumerate() {
            print!("  {}={:.4}", kernel.name(), kernel_nll[i] / r);
        }
        println!();
    }
    println!("paper:                      q0=1.5131  gaussian=1.0333  epanechnikov=0.9675  tophat=0.9983  exponential=0.9154  triangular=0.8898  cosine=0.7734");
}
