//! Boosted density estimation with classifier weak learners.
//!
//! A target density `P` is approximated by an exponential-family iterate
//!
//! ```text
//! q_t(x) ∝ q_0(x) · exp(α_1 c_1(x) + … + α_t c_t(x)),
//! ```
//!
//! where each `c_i` is a binary classifier trained to separate samples of `P`
//! from samples of the previous iterate `Q_{i-1}`, and `α_i ∈ [0, 1]` is a step
//! size. The crate provides:
//!
//! * [`fdiv`] — f-divergences, their Fenchel machinery and the variational
//!   objective that justifies the classifier-as-density-ratio view;
//! * [`dist`] — Gaussian targets and the boosted (multiplicative) density with
//!   its normalization estimators;
//! * [`learner`] — a small MLP scorer trained with Adam on logistic
//!   cross-entropy, edge estimation, and proper scaling;
//! * [`boost`] — the boosting loop, step-size policies and rate calculators;
//! * [`mcmc`] — random-walk Metropolis–Hastings for sampling boosted densities;
//! * [`metrics`] — grid KL, normalized NLL, accuracy and the coverage metric;
//! * [`kde`] — multi-kernel density estimation baselines with the
//!   Scott/Silverman bandwidth rule;
//! * [`theory`] — brute-force numerical verification of the convergence bounds
//!   on small discrete instances;
//! * [`snapshot`] — JSON (de)serialization of fitted densities.

pub mod boost;
pub mod dist;
pub mod error;
pub mod fdiv;
pub mod kde;
pub mod learner;
pub mod mcmc;
pub mod metrics;
pub mod snapshot;
pub mod theory;

pub use error::{Error, Result};
