//! Experiment configuration: JSON file format plus flag/env overrides.

use serde::{Deserialize, Serialize};

use boostdens::boost::{CoverageConfig, StepPolicy};
use boostdens::dist::{DiagonalGaussian, GaussianMixture, IsotropicGaussian, ReferenceDensity};
use boostdens::learner::Activation;
use boostdens::mcmc::MhConfig;
use boostdens::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Ring,
    RandomMixture,
    Activations,
    Topology,
    Dimensions,
    KdeCompare,
    Theory,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Ring => "ring",
            ExperimentKind::RandomMixture => "random_mixture",
            ExperimentKind::Activations => "activations",
            ExperimentKind::Topology => "topology",
            ExperimentKind::Dimensions => "dimensions",
            ExperimentKind::KdeCompare => "kde_compare",
            ExperimentKind::Theory => "theory",
        }
    }
}

/// Target density specification, also accepted by `boostdens metrics`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    Ring {
        modes: usize,
        radius: f64,
        sigma: f64,
    },
    Random {
        dim: usize,
        modes: usize,
        box_halfwidth: f64,
        sigma: f64,
        seed: u64,
    },
    Mixture {
        components: Vec<boostdens::dist::MixtureComponent>,
    },
}

impl TargetSpec {
    pub fn build(&self) -> Result<GaussianMixture> {
        match self {
            TargetSpec::Ring {
                modes,
                radius,
                sigma,
            } => GaussianMixture::ring(*modes, *radius, *sigma),
            TargetSpec::Random {
                dim,
                modes,
                box_halfwidth,
                sigma,
                seed,
            } => GaussianMixture::random(*dim, *modes, *box_halfwidth, *sigma, *seed),
            TargetSpec::Mixture { components } => GaussianMixture::new(components.clone()),
        }
    }
}

/// Reference density choice: a fixed isotropic Gaussian or a Gaussian fit to
/// an initial target sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpec {
    Isotropic { sigma: f64 },
    Empirical,
}

impl ReferenceSpec {
    pub fn build(
        &self,
        dim: usize,
        fit_sample: Option<ndarray::ArrayView2<'_, f64>>,
    ) -> Result<ReferenceDensity> {
        match self {
            ReferenceSpec::Isotropic { sigma } => Ok(ReferenceDensity::Isotropic(
                IsotropicGaussian::new(vec![0.0; dim], *sigma)?,
            )),
            ReferenceSpec::Empirical => {
                let sample = fit_sample.ok_or_else(|| {
                    Error::Config("empirical reference needs a fit sample".into())
                })?;
                Ok(ReferenceDensity::Diagonal(DiagonalGaussian::fit(sample)?))
            }
        }
    }
}

/// On-disk experiment configuration. Optional fields fall back to the
/// experiment's defaults (desk scale, or paper scale under `--full`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub q0: Option<ReferenceSpec>,
    #[serde(default)]
    pub policy: Option<StepPolicy>,
    #[serde(default)]
    pub topology: Option<Vec<usize>>,
    #[serde(default)]
    pub activation: Option<Activation>,
    #[serde(default)]
    pub t_rounds: Option<usize>,
    #[serde(default)]
    pub n_runs: Option<usize>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub early_stop_gap: Option<f64>,
    #[serde(default)]
    pub n_p: Option<usize>,
    #[serde(default)]
    pub n_q: Option<usize>,
    #[serde(default)]
    pub grid_points: Option<usize>,
    #[serde(default)]
    pub importance_n: Option<usize>,
    #[serde(default)]
    pub mh: Option<MhConfig>,
    #[serde(default)]
    pub coverage: Option<CoverageConfig>,
    #[serde(default)]
    pub theory_trials: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.n_runs {
            if n == 0 {
                return Err(Error::Config("n_runs must be >= 1".into()));
            }
        }
        if let Some(t) = self.t_rounds {
            if t == 0 {
                return Err(Error::Config("t_rounds must be >= 1".into()));
            }
        }
        if let Some(topo) = &self.topology {
            if topo.len() < 2 || *topo.last().unwrap() != 1 {
                return Err(Error::Config(format!(
                    "topology {topo:?} must end in a single output"
                )));
            }
        }
        Ok(())
    }
}

/// Scale-dependent defaults: desk scale keeps acceptance runs in minutes;
/// `--full` restores the long training schedule and fine grid.
#[derive(Debug, Clone, Copy)]
pub struct Scale {
    pub epochs: usize,
    pub grid_points: usize,
}

impl Scale {
    pub fn desk() -> Self {
        Scale {
            epochs: 600,
            grid_points: 200,
        }
    }

    pub fn full() -> Self {
        Scale {
            epochs: 3000,
            grid_points: 400,
        }
    }
}
