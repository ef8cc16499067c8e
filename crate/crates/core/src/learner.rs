//! The weak learner: a small feed-forward scorer `c: R^n -> R` trained with
//! Adam on logistic cross-entropy, plus edge estimation and proper scaling.
//!
//! The classifier outputs a raw logit; training post-composes it with the
//! logistic sigmoid and minimizes cross-entropy against labels 1 (samples of
//! `P`) and 0 (samples of `Q`). The boosting loop later exponentiates the
//! logit into a density-ratio update, so the classifier also carries a
//! positive output `scale` that proper scaling adjusts without retraining.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer activation functions. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Selu,
    Softplus,
    Sigmoid,
    Tanh,
}

// Canonical self-normalizing constants.
const SELU_LAMBDA: f64 = 1.0507009873554805;
const SELU_ALPHA: f64 = 1.6732632423543772;

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Relu,
        Activation::Selu,
        Activation::Softplus,
        Activation::Sigmoid,
        Activation::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Selu => "selu",
            Activation::Softplus => "softplus",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "selu" => Ok(Activation::Selu),
            "softplus" => Ok(Activation::Softplus),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Parse(format!("unknown activation '{other}'"))),
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Selu => {
                if z > 0.0 {
                    SELU_LAMBDA * z
                } else {
                    SELU_LAMBDA * SELU_ALPHA * z.exp_m1()
                }
            }
            Activation::Softplus => {
                // log(1 + e^z), stable for large |z|.
                if z > 30.0 {
                    z
                } else if z < -30.0 {
                    z.exp()
                } else {
                    z.exp().ln_1p()
                }
            }
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative as a function of the pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Selu => {
                if z > 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * z.exp()
                }
            }
            Activation::Softplus => sigmoid(z),
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Feed-forward real-valued scorer with a raw (linear) output logit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpClassifier {
    topology: Vec<usize>,
    activation: Activation,
    weights: Vec<Array2<f64>>, // layer l: (out_l, in_l)
    biases: Vec<Array1<f64>>,
    scale: f64,
}

impl MlpClassifier {
    /// Glorot-uniform initialization: per layer `U(±sqrt(6/(fan_in+fan_out)))`.
    pub fn new_random(topology: &[usize], activation: Activation, rng: &mut ChaCha8Rng) -> Result<Self> {
        Self::validate_topology(topology)?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..topology.len() - 1 {
            let (n_in, n_out) = (topology[l], topology[l + 1]);
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            let w = Array2::from_shape_fn((n_out, n_in), |_| rng.gen_range(-bound..bound));
            weights.push(w);
            biases.push(Array1::zeros(n_out));
        }
        Ok(MlpClassifier {
            topology: topology.to_vec(),
            activation,
            weights,
            biases,
            scale: 1.0,
        })
    }

    pub fn from_parts(
        topology: Vec<usize>,
        activation: Activation,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        scale: f64,
    ) -> Result<Self> {
        Self::validate_topology(&topology)?;
        if weights.len() != topology.len() - 1 || biases.len() != weights.len() {
            return Err(Error::Config("layer count mismatch".into()));
        }
        for l in 0..weights.len() {
            if weights[l].shape() != [topology[l + 1], topology[l]] || biases[l].len() != topology[l + 1] {
                return Err(Error::Config(format!("bad shapes in layer {l}")));
            }
        }
        if scale <= 0.0 {
            return Err(Error::Config("scale must be positive".into()));
        }
        Ok(MlpClassifier {
            topology,
            activation,
            weights,
            biases,
            scale,
        })
    }

    /// Single linear layer `c(x) = <w, x> + b`.
    pub fn linear(w: &[f64], b: f64) -> Self {
        MlpClassifier {
            topology: vec![w.len(), 1],
            activation: Activation::Relu,
            weights: vec![Array2::from_shape_vec((1, w.len()), w.to_vec()).unwrap()],
            biases: vec![Array1::from_elem(1, b)],
            scale: 1.0,
        }
    }

    fn validate_topology(topology: &[usize]) -> Result<()> {
        if topology.len() < 2 || *topology.last().unwrap() != 1 || topology.iter().any(|&w| w == 0) {
            return Err(Error::Config(format!(
                "topology {topology:?} must run from input width to a single output"
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.topology[0]
    }

    pub fn topology(&self) -> &[usize] {
        &self.topology
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(&self, scale: f64) -> Self {
        let mut c = self.clone();
        c.scale = scale;
        c
    }

    /// Number of trainable parameters.
    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// The scorer value `c(x) = scale · raw_logit(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut a: Vec<f64> = x.to_vec();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = vec![0.0; w.nrows()];
            for (j, out) in next.iter_mut().enumerate() {
                let mut z = b[j];
                for (k, &ak) in a.iter().enumerate() {
                    z += w[(j, k)] * ak;
                }
                *out = if l == last { z } else { self.activation.apply(z) };
            }
            a = next;
        }
        self.scale * a[0]
    }

    /// Scorer values for every row of `xs`.
    pub fn value_batch(&self, xs: ArrayView2<'_, f64>) -> Array1<f64> {
        let (acts, _) = self.forward_batch(xs);
        acts.last().unwrap().column(0).mapv(|z| self.scale * z)
    }

    /// Forward pass keeping per-layer activations and pre-activations; the
    /// final entry of `activations` is the raw (unscaled) logit column.
    fn forward_batch(&self, xs: ArrayView2<'_, f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let last = self.weights.len() - 1;
        let mut activations = vec![xs.to_owned()];
        let mut pre = Vec::new();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = activations.last().unwrap().dot(&w.t());
            z += b;
            let a = if l == last {
                z.clone()
            } else {
                z.mapv(|v| self.activation.apply(v))
            };
            pre.push(z);
            activations.push(a);
        }
        (activations, pre)
    }

    /// Smallest `|z|` over all hidden pre-activations of the batch. Finite
    /// differencing near a ReLU kink (z ≈ 0) is meaningless; callers that
    /// validate gradients can use this to stay away from the kinks.
    pub fn min_abs_preactivation(&self, xs: ArrayView2<'_, f64>) -> f64 {
        let (_, pre) = self.forward_batch(xs);
        pre[..pre.len().saturating_sub(1)]
            .iter()
            .flat_map(|z| z.iter())
            .fold(f64::INFINITY, |m, &z| m.min(z.abs()))
    }

    /// Mean logistic cross-entropy of `σ(c(x))` against labels, plus the
    /// gradient with respect to every weight and bias.
    fn loss_and_grads(
        &self,
        xs: ArrayView2<'_, f64>,
        labels: &[f64],
    ) -> (f64, Vec<Array2<f64>>, Vec<Array1<f64>>) {
        let n = xs.nrows();
        let (acts, pre) = self.forward_batch(xs);
        let logits = acts.last().unwrap().column(0);

        let mut loss = 0.0;
        // delta at the output: d(loss)/d(raw logit), batch-mean folded in.
        let mut delta = Array2::zeros((n, 1));
        for i in 0..n {
            let c = self.scale * logits[i];
            let y = labels[i];
            loss += bce_with_logit(c, y);
            delta[(i, 0)] = (sigmoid(c) - y) * self.scale / n as f64;
        }
        loss /= n as f64;

        let n_layers = self.weights.len();
        let mut grad_w = vec![Array2::zeros((0, 0)); n_layers];
        let mut grad_b = vec![Array1::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            grad_w[l] = delta.t().dot(&acts[l]);
            grad_b[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let back = delta.dot(&self.weights[l]);
                delta = &back * &pre[l - 1].mapv(|z| self.activation.derivative(z));
            }
        }
        (loss, grad_w, grad_b)
    }

    fn loss(&self, xs: ArrayView2<'_, f64>, labels: &[f64]) -> f64 {
        let values = self.value_batch(xs);
        values
            .iter()
            .zip(labels)
            .map(|(&c, &y)| bce_with_logit(c, y))
            .sum::<f64>()
            / labels.len() as f64
    }

    /// Plain fraction of correct decisions under the rule `c > 0 ⇒ P`.
    fn classification_accuracy(&self, xs: ArrayView2<'_, f64>, labels: &[f64]) -> f64 {
        let values = self.value_batch(xs);
        let correct = values
            .iter()
            .zip(labels)
            .filter(|(&c, &y)| if y > 0.5 { c > 0.0 } else { c <= 0.0 })
            .count();
        correct as f64 / labels.len() as f64
    }
}

/// Numerically stable `-y log σ(c) - (1-y) log(1-σ(c))`.
#[inline]
fn bce_with_logit(c: f64, y: f64) -> f64 {
    c.max(0.0) - c * y + (-c.abs()).exp().ln_1p()
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamParams {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            eta: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamParams,
    /// Stop once `test_loss > train_loss · (1 + gap)` at an epoch boundary.
    pub early_stop_gap: Option<f64>,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 600,
            batch_size: 50,
            adam: AdamParams::default(),
            early_stop_gap: None,
            test_fraction: 0.25,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.test_fraction) || self.test_fraction == 0.0 {
            return Err(Error::Range {
                name: "test_fraction",
                value: self.test_fraction,
                range: "(0, 1)",
            });
        }
        if let Some(gap) = self.early_stop_gap {
            if !(0.0..1.0).contains(&gap) {
                return Err(Error::Range {
                    name: "early_stop_gap",
                    value: gap,
                    range: "(0, 1)",
                });
            }
        }
        Ok(())
    }
}

/// Per-epoch training history.
#[derive(Debug, Clone, Default)]
pub struct TrainRecord {
    pub train_loss: Vec<f64>,
    pub test_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub stopped_epoch: usize,
}

struct Adam {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    t: i32,
    params: AdamParams,
}

impl Adam {
    fn new(clf: &MlpClassifier, params: AdamParams) -> Self {
        Adam {
            m_w: clf.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            v_w: clf.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            m_b: clf.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            v_b: clf.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            t: 0,
            params,
        }
    }

    fn step(&mut self, clf: &mut MlpClassifier, grad_w: &[Array2<f64>], grad_b: &[Array1<f64>]) {
        self.t += 1;
        let AdamParams {
            eta,
            beta1,
            beta2,
            eps,
        } = self.params;
        let bc1 = 1.0 - beta1.powi(self.t);
        let bc2 = 1.0 - beta2.powi(self.t);
        for l in 0..clf.weights.len() {
            azip_update(
                clf.weights[l].as_slice_mut().unwrap(),
                self.m_w[l].as_slice_mut().unwrap(),
                self.v_w[l].as_slice_mut().unwrap(),
                grad_w[l].as_slice().unwrap(),
                eta,
                beta1,
                beta2,
                eps,
                bc1,
                bc2,
            );
            azip_update(
                clf.biases[l].as_slice_mut().unwrap(),
                self.m_b[l].as_slice_mut().unwrap(),
                self.v_b[l].as_slice_mut().unwrap(),
                grad_b[l].as_slice().unwrap(),
                eta,
                beta1,
                beta2,
                eps,
                bc1,
                bc2,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn azip_update(
    theta: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    g: &[f64],
    eta: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..theta.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= eta * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Train a classifier to separate `p_samples` (label 1) from `q_samples`
/// (label 0). Deterministic in `config.seed`: weight init, the train/test
/// split, and every epoch's minibatch order come from seeded streams.
pub fn train_classifier(
    p_samples: ArrayView2<'_, f64>,
    q_samples: ArrayView2<'_, f64>,
    topology: &[usize],
    activation: Activation,
    config: &TrainConfig,
) -> Result<(MlpClassifier, TrainRecord)> {
    config.validate()?;
    if p_samples.nrows() < 2 || q_samples.nrows() < 2 {
        return Err(Error::EmptySample("need at least 2 samples per class"));
    }
    if p_samples.ncols() != q_samples.ncols() {
        return Err(Error::Dimension {
            expected: p_samples.ncols(),
            got: q_samples.ncols(),
        });
    }
    if topology[0] != p_samples.ncols() {
        return Err(Error::Dimension {
            expected: p_samples.ncols(),
            got: topology[0],
        });
    }

    let n_total = p_samples.nrows() + q_samples.nrows();
    let dim = p_samples.ncols();
    let mut xs = Array2::zeros((n_total, dim));
    let mut labels = vec![0.0; n_total];
    for (i, row) in p_samples.rows().into_iter().enumerate() {
        xs.row_mut(i).assign(&row);
        labels[i] = 1.0;
    }
    for (i, row) in q_samples.rows().into_iter().enumerate() {
        xs.row_mut(p_samples.nrows() + i).assign(&row);
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_rng.set_stream(0);
    let mut clf = MlpClassifier::new_random(topology, activation, &mut init_rng)?;

    // Train/test split over the pooled data.
    let mut split_rng = ChaCha8Rng::seed_from_u64(config.seed);
    split_rng.set_stream(1);
    let mut order: Vec<usize> = (0..n_total).collect();
    shuffle(&mut order, &mut split_rng);
    let n_test = ((n_total as f64 * config.test_fraction).round() as usize)
        .clamp(1, n_total - 1);
    let (test_idx, train_idx) = order.split_at(n_test);
    let (test_x, test_y) = gather(&xs, &labels, test_idx);
    let (train_x, train_y) = gather(&xs, &labels, train_idx);

    let mut adam = Adam::new(&clf, config.adam);
    let mut record = TrainRecord::default();
    let mut epoch_rng = ChaCha8Rng::seed_from_u64(config.seed);
    epoch_rng.set_stream(2);

    let n_train = train_x.nrows();
    let mut batch_order: Vec<usize> = (0..n_train).collect();
    record.stopped_epoch = config.epochs;

    for epoch in 0..config.epochs {
        shuffle(&mut batch_order, &mut epoch_rng);
        for chunk in batch_order.chunks(config.batch_size) {
            let (bx, by) = gather(&train_x, &train_y, chunk);
            let (_, grad_w, grad_b) = clf.loss_and_grads(bx.view(), &by);
            adam.step(&mut clf, &grad_w, &grad_b);
        }

        let train_loss = clf.loss(train_x.view(), &train_y);
        let test_loss = clf.loss(test_x.view(), &test_y);
        record.train_loss.push(train_loss);
        record.test_loss.push(test_loss);
        record.train_accuracy.push(clf.classification_accuracy(train_x.view(), &train_y));
        record.test_accuracy.push(clf.classification_accuracy(test_x.view(), &test_y));

        if let Some(gap) = config.early_stop_gap {
            if test_loss > train_loss * (1.0 + gap) {
                record.stopped_epoch = epoch + 1;
                break;
            }
        }
    }

    Ok((clf, record))
}

fn shuffle(idx: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..idx.len()).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
}

fn gather(xs: &Array2<f64>, ys: &[f64], idx: &[usize]) -> (Array2<f64>, Vec<f64>) {
    let mut out = Array2::zeros((idx.len(), xs.ncols()));
    let mut labels = Vec::with_capacity(idx.len());
    for (row, &i) in idx.iter().enumerate() {
        out.row_mut(row).assign(&xs.row(i));
        labels.push(ys[i]);
    }
    (out, labels)
}

/// Compare the backprop gradient of the cross-entropy loss against central
/// finite differences over every parameter; returns the worst relative error.
pub fn gradient_check(clf: &MlpClassifier, xs: ArrayView2<'_, f64>, labels: &[f64]) -> f64 {
    const H: f64 = 1e-5;
    let (_, grad_w, grad_b) = clf.loss_and_grads(xs, labels);
    let mut worst: f64 = 0.0;
    let mut probe = clf.clone();

    for l in 0..clf.weights.len() {
        for j in 0..clf.weights[l].nrows() {
            for k in 0..clf.weights[l].ncols() {
                let analytic = grad_w[l][(j, k)];
                let orig = probe.weights[l][(j, k)];
                probe.weights[l][(j, k)] = orig + H;
                let up = probe.loss(xs, labels);
                probe.weights[l][(j, k)] = orig - H;
                let down = probe.loss(xs, labels);
                probe.weights[l][(j, k)] = orig;
                let fd = (up - down) / (2.0 * H);
                let denom = analytic.abs().max(fd.abs()).max(1e-4);
                worst = worst.max((analytic - fd).abs() / denom);
            }
        }
        for j in 0..clf.biases[l].len() {
            let analytic = grad_b[l][j];
            let orig = probe.biases[l][j];
            probe.biases[l][j] = orig + H;
            let up = probe.loss(xs, labels);
            probe.biases[l][j] = orig - H;
            let down = probe.loss(xs, labels);
            probe.biases[l][j] = orig;
            let fd = (up - down) / (2.0 * H);
            let denom = analytic.abs().max(fd.abs()).max(1e-4);
            worst = worst.max((analytic - fd).abs() / denom);
        }
    }
    worst
}

/// Empirical edges of a classifier over estimation samples:
/// `μ̂_P = mean_P(c)/ĉ_sup`, `μ̂_Q = mean_Q(-c)/ĉ_sup`, with
/// `ĉ_sup = max |c|` over the pooled samples.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EdgeEstimates {
    pub mu_p_hat: f64,
    pub mu_q_hat: f64,
    pub c_sup_hat: f64,
    pub m_p: usize,
    pub m_q: usize,
}

pub fn estimate_edges(
    clf: &MlpClassifier,
    p_samples: ArrayView2<'_, f64>,
    q_samples: ArrayView2<'_, f64>,
) -> Result<EdgeEstimates> {
    if p_samples.nrows() == 0 || q_samples.nrows() == 0 {
        return Err(Error::EmptySample("estimate_edges"));
    }
    let c_p = clf.value_batch(p_samples);
    let c_q = clf.value_batch(q_samples);
    let c_sup_hat = c_p
        .iter()
        .chain(c_q.iter())
        .fold(0.0f64, |m, c| m.max(c.abs()));
    if c_sup_hat == 0.0 {
        return Err(Error::DegenerateClassifier);
    }
    let mu_p_hat = c_p.mean().unwrap() / c_sup_hat;
    let mu_q_hat = -c_q.mean().unwrap() / c_sup_hat;
    Ok(EdgeEstimates {
        mu_p_hat,
        mu_q_hat,
        c_sup_hat,
        m_p: p_samples.nrows(),
        m_q: q_samples.nrows(),
    })
}

/// Rescale the classifier so its empirical confidence bound satisfies
/// `ĉ_sup <= log(2)/2`; the edges are invariant under the rescaling.
pub fn properly_scale(
    clf: &MlpClassifier,
    edges: &EdgeEstimates,
) -> Result<(MlpClassifier, EdgeEstimates)> {
    if edges.c_sup_hat <= 0.0 {
        return Err(Error::DegenerateClassifier);
    }
    let eta = (0.5 * 2.0f64.ln() / edges.c_sup_hat).min(1.0);
    let scaled = clf.with_scale(clf.scale * eta);
    let new_edges = EdgeEstimates {
        c_sup_hat: edges.c_sup_hat * eta,
        ..*edges
    };
    Ok((scaled, new_edges))
}
