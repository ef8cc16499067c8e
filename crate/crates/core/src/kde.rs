//! Kernel density estimation with radially applied kernels and the
//! Scott/Silverman bandwidth rule.
//!
//! Each kernel is a radial profile `k(r)` on `r = |x - x_i|/h`, normalized in
//! `d` dimensions so that `K_h(u) = k(|u|/h) / (h^d · N_d)` integrates to one;
//! `N_d = S_{d-1} ∫ k(r) r^{d-1} dr` with `S_{d-1}` the unit-sphere surface
//! area. Compact kernels vanish outside `r = 1`, so the estimated density can
//! be exactly zero away from the data; evaluation then returns the shared log
//! floor instead of `-inf`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dist::{log_sum_exp, Density};
use crate::error::{Error, Result};
use crate::metrics::LOG_DENSITY_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
    Tophat,
    Exponential,
    Triangular,
    Cosine,
}

impl Kernel {
    pub const ALL: [Kernel; 6] = [
        Kernel::Gaussian,
        Kernel::Epanechnikov,
        Kernel::Tophat,
        Kernel::Exponential,
        Kernel::Triangular,
        Kernel::Cosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Tophat => "tophat",
            Kernel::Exponential => "exponential",
            Kernel::Triangular => "triangular",
            Kernel::Cosine => "cosine",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Kernel::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown kernel '{s}'")))
    }

    /// Log of the unit-bandwidth profile `k(r)`; `-inf` outside the support.
    #[inline]
    fn log_profile(self, r: f64) -> f64 {
        match self {
            Kernel::Gaussian => -0.5 * r * r,
            Kernel::Epanechnikov => {
                if r < 1.0 {
                    (1.0 - r * r).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kernel::Tophat => {
                if r < 1.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kernel::Exponential => -r,
            Kernel::Triangular => {
                if r < 1.0 {
                    (1.0 - r).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kernel::Cosine => {
                if r < 1.0 {
                    (std::f64::consts::FRAC_PI_2 * r).cos().ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// `∫_{R^d} k(|u|) du`, the unit-bandwidth normalizing constant.
    pub fn unit_normalizer(self, dim: usize) -> f64 {
        let d = dim as f64;
        let surface = unit_sphere_area(dim);
        match self {
            Kernel::Gaussian => (2.0 * std::f64::consts::PI).powf(d / 2.0),
            Kernel::Exponential => surface * factorial(dim - 1),
            Kernel::Tophat => surface / d,
            Kernel::Epanechnikov => surface * 2.0 / (d * (d + 2.0)),
            Kernel::Triangular => surface / (d * (d + 1.0)),
            Kernel::Cosine => surface * cosine_radial_integral(dim),
        }
    }
}

/// Surface area of the unit sphere in `R^dim`: `2 π^{d/2} / Γ(d/2)`.
fn unit_sphere_area(dim: usize) -> f64 {
    let d = dim as f64;
    2.0 * std::f64::consts::PI.powf(d / 2.0) / gamma_half(dim)
}

/// `Γ(n/2)` for positive integer `n`.
fn gamma_half(n: usize) -> f64 {
    match n {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (n as f64 / 2.0 - 1.0) * gamma_half(n - 2),
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `∫_0^1 cos(πr/2) r^{d-1} dr`: closed form for d <= 2, Simpson otherwise.
fn cosine_radial_integral(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        1 => 2.0 / PI,
        2 => 2.0 / PI - 4.0 / (PI * PI),
        _ => {
            let n = 4000;
            let h = 1.0 / n as f64;
            let f = |r: f64| (PI / 2.0 * r).cos() * r.powi(dim as i32 - 1);
            let mut acc = f(0.0) + f(1.0);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(i as f64 * h);
            }
            acc * h / 3.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// `h = σ̂ · n^{-1/(d+4)}` with `σ̂` the mean per-axis sample standard
    /// deviation. Scott and Silverman coincide in two dimensions.
    ScottSilverman,
    Manual(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KdeModel {
    samples: Array2<f64>,
    kernel: Kernel,
    bandwidth: f64,
    /// `-log(n · h^d · N_d)`, added to each log-sum-exp evaluation.
    log_norm: f64,
}

/// Fit a kernel density estimate. The Scott/Silverman rule needs at least two
/// samples (and nonzero spread); a manual bandwidth accepts a single sample.
pub fn fit(samples: ArrayView2<'_, f64>, kernel: Kernel, rule: BandwidthRule) -> Result<KdeModel> {
    let (n, dim) = (samples.nrows(), samples.ncols());
    if n == 0 || dim == 0 {
        return Err(Error::EmptySample("kde::fit"));
    }
    let bandwidth = match rule {
        BandwidthRule::Manual(h) => {
            if h <= 0.0 {
                return Err(Error::Range {
                    name: "bandwidth",
                    value: h,
                    range: "(0, inf)",
                });
            }
            h
        }
        BandwidthRule::ScottSilverman => {
            if n < 2 {
                return Err(Error::EmptySample("Scott/Silverman needs >= 2 samples"));
            }
            let mut sigma_sum = 0.0;
            for j in 0..dim {
                let col = samples.column(j);
                let mean = col.mean().unwrap();
                let var: f64 =
                    col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
                sigma_sum += var.sqrt();
            }
            let sigma_hat = sigma_sum / dim as f64;
            if sigma_hat == 0.0 {
                return Err(Error::DegenerateSample("zero sample spread"));
            }
            sigma_hat * (n as f64).powf(-1.0 / (dim as f64 + 4.0))
        }
    };
    let log_norm =
        -(n as f64).ln() - dim as f64 * bandwidth.ln() - kernel.unit_normalizer(dim).ln();
    Ok(KdeModel {
        samples: samples.to_owned(),
        kernel,
        bandwidth,
        log_norm,
    })
}

impl KdeModel {
    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }
}

impl Density for KdeModel {
    fn dim(&self) -> usize {
        self.samples.ncols()
    }

    /// `log((1/n) Σ K_h(x - x_i))`; the shared floor stands in for `-inf`
    /// when every compact kernel misses.
    fn log_density(&self, x: &[f64]) -> f64 {
        let h = self.bandwidth;
        let mut terms = Vec::with_capacity(self.samples.nrows());
        for row in self.samples.rows() {
            let sq: f64 = row
                .iter()
                .zip(x)
                .map(|(&si, &xi)| (si - xi) * (si - xi))
                .sum();
            let lp = self.kernel.log_profile(sq.sqrt() / h);
            if lp > f64::NEG_INFINITY {
                terms.push(lp);
            }
        }
        if terms.is_empty() {
            return LOG_DENSITY_FLOOR;
        }
        (log_sum_exp(&terms) + self.log_norm).max(LOG_DENSITY_FLOOR)
    }
}
