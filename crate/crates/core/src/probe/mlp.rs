//! Two-hidden-layer ReLU regressor trained with Adam and early stopping.

use nalgebra::{DMatrix, RowDVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    pub l2_alpha: f64,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before training stops.
    pub patience: usize,
    pub validation_fraction: f64,
    /// `None` means `min(200, n_train)`.
    pub batch_size: Option<usize>,
    /// Stale epochs before the learning rate is divided by `lr_decay`.
    pub lr_patience: usize,
    pub lr_decay: f64,
    pub min_learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![128, 64],
            learning_rate: 1e-3,
            l2_alpha: 1e-4,
            max_epochs: 500,
            patience: 100,
            validation_fraction: 0.1,
            batch_size: None,
            lr_patience: 10,
            lr_decay: 5.0,
            min_learning_rate: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(format!("mlp: {m}")));
        if self.hidden_layers.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if !(self.learning_rate > 0.0 && self.min_learning_rate > 0.0 && self.lr_decay > 1.0) {
            return bad("learning rates must be positive and the decay factor above 1");
        }
        if self.l2_alpha < 0.0 || self.max_epochs == 0 || self.patience == 0 || self.patience > self.max_epochs {
            return bad("need alpha >= 0 and 0 < patience <= max_epochs");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("adam betas must lie in [0, 1) and epsilon be positive");
        }
        Ok(())
    }
}

/// Dense ReLU network; weights are `fan_in x fan_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<RowDVector<f64>>,
}

impl Mlp {
    /// Uniform in ±sqrt(6 / fan_in) for weights, zero biases.
    pub fn init(sizes: &[usize], rng: &mut impl Rng) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let bound = (6.0 / w[0] as f64).sqrt();
            weights.push(DMatrix::from_fn(w[0], w[1], |_, _| rng.random_range(-bound..bound)));
            biases.push(RowDVector::zeros(w[1]));
        }
        Self { weights, biases }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.weights[0].nrows()];
        s.extend(self.weights.iter().map(|w| w.ncols()));
        s
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Weights then biases, layer by layer, each in column-major order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn from_vec(sizes: &[usize], params: &[f64]) -> Result<Self> {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut at = 0;
        for w in sizes.windows(2) {
            let (n_w, n_b) = (w[0] * w[1], w[1]);
            if at + n_w + n_b > params.len() {
                return Err(Error::DimensionMismatch { expected: at + n_w + n_b, found: params.len() });
            }
            weights.push(DMatrix::from_column_slice(w[0], w[1], &params[at..at + n_w]));
            biases.push(RowDVector::from_row_slice(&params[at + n_w..at + n_w + n_b]));
            at += n_w + n_b;
        }
        if at != params.len() {
            return Err(Error::DimensionMismatch { expected: at, found: params.len() });
        }
        Ok(Self { weights, biases })
    }

    /// Pre-activations and activations of every layer; the last activation
    /// is the linear output.
    fn forward_all(&self, x: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
        let mut zs = Vec::with_capacity(self.weights.len());
        let mut acts = vec![x.clone()];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = &acts[l] * w;
            for mut row in z.row_iter_mut() {
                row += b;
            }
            let a = if l == last { z.clone() } else { z.map(|v| v.max(0.0)) };
            zs.push(z);
            acts.push(a);
        }
        (zs, acts)
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward_all(x).1.pop().expect("network has layers")
    }

    /// Objective `0.5 * sum((p - y)^2) / n + 0.5 * alpha * sum(W^2) / n` and
    /// its gradient, laid out like [`Mlp::to_vec`].
    pub fn loss_and_gradient(&self, x: &DMatrix<f64>, y: &DMatrix<f64>, alpha: f64) -> (f64, Vec<f64>) {
        let n = x.nrows() as f64;
        let (zs, acts) = self.forward_all(x);
        let out = acts.last().expect("network has layers");
        let mut delta = (out - y) / n;
        let penalty: f64 = self.weights.iter().map(|w| w.norm_squared()).sum();
        let loss = 0.5 * (out - y).norm_squared() / n + 0.5 * alpha * penalty / n;

        let layers = self.weights.len();
        let mut grads_w = vec![DMatrix::zeros(0, 0); layers];
        let mut grads_b = vec![RowDVector::zeros(0); layers];
        for l in (0..layers).rev() {
            grads_w[l] = acts[l].transpose() * &delta + &self.weights[l] * (alpha / n);
            grads_b[l] = delta.row_sum();
            if l > 0 {
                let mut back = &delta * self.weights[l].transpose();
                back.zip_apply(&zs[l - 1], |d, z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        let mut grad = Vec::with_capacity(self.param_count());
        for (w, b) in grads_w.iter().zip(&grads_b) {
            grad.extend(w.iter());
            grad.extend(b.iter());
        }
        (loss, grad)
    }

    /// Data term only, as used for validation.
    pub fn mse_loss(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        0.5 * (self.predict(x) - y).norm_squared() / x.nrows() as f64
    }

    fn apply_update(&mut self, step: &[f64]) {
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut() {
                *v -= step[at];
                at += 1;
            }
            for v in b.iter_mut() {
                *v -= step[at];
                at += 1;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub final_learning_rate: f64,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, grad: &[f64], lr: f64, cfg: &MlpConfig) -> Vec<f64> {
        self.t += 1;
        let lr_t = lr * (1.0 - cfg.beta2.powi(self.t)).sqrt() / (1.0 - cfg.beta1.powi(self.t));
        grad.iter()
            .enumerate()
            .map(|(i, &g)| {
                self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
                self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
                lr_t * self.m[i] / (self.v[i].sqrt() + cfg.epsilon)
            })
            .collect()
    }
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |r, c| x[(idx[r], c)])
}

/// Train on `x` (n x d) against `y` (n x k). The last `validation_fraction`
/// of a seeded permutation is held out for early stopping, and the
/// parameters with the lowest validation loss are returned.
pub fn train(x: &DMatrix<f64>, y: &DMatrix<f64>, cfg: &MlpConfig) -> Result<(Mlp, TrainingSummary)> {
    cfg.validate()?;
    if x.nrows() != y.nrows() {
        return Err(Error::LengthMismatch(x.nrows(), y.nrows()));
    }
    let n = x.nrows();
    let n_val = ((n as f64) * cfg.validation_fraction).floor().max(1.0) as usize;
    if n < 2 || n_val >= n {
        return Err(Error::TooFewRecords { needed: 2, found: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(cfg.seed, "probe.mlp-validation"));
    let (train_idx, val_idx) = order.split_at(n - n_val);
    let (xv, yv) = (rows(x, val_idx), rows(y, val_idx));
    let mut train_idx = train_idx.to_vec();

    let mut sizes = vec![x.ncols()];
    sizes.extend(&cfg.hidden_layers);
    sizes.push(y.ncols());
    let mut net = Mlp::init(&sizes, &mut rng::stream(cfg.seed, "probe.mlp-init"));
    let mut adam = Adam::new(net.param_count());
    let mut shuffle_rng = rng::stream(cfg.seed, "probe.mlp-shuffle");
    let batch = cfg.batch_size.unwrap_or(200).min(train_idx.len());

    let mut lr = cfg.learning_rate;
    let mut best = (f64::INFINITY, 0usize, net.clone());
    let (mut stale, mut lr_stale) = (0usize, 0usize);
    let mut summary = TrainingSummary {
        epochs: 0,
        best_epoch: 0,
        best_validation_loss: f64::INFINITY,
        final_learning_rate: lr,
        train_loss: Vec::new(),
        validation_loss: Vec::new(),
    };
    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in train_idx.chunks(batch) {
            let (xb, yb) = (rows(x, chunk), rows(y, chunk));
            let (loss, grad) = net.loss_and_gradient(&xb, &yb, cfg.l2_alpha);
            epoch_loss += loss * chunk.len() as f64;
            let step = adam.step(&grad, lr, cfg);
            net.apply_update(&step);
        }
        let val = net.mse_loss(&xv, &yv);
        summary.train_loss.push(epoch_loss / train_idx.len() as f64);
        summary.validation_loss.push(val);
        summary.epochs = epoch + 1;
        if !val.is_finite() {
            break;
        }
        if val < best.0 {
            best = (val, epoch, net.clone());
            stale = 0;
            lr_stale = 0;
        } else {
            stale += 1;
            lr_stale += 1;
            if lr_stale >= cfg.lr_patience {
                lr = (lr / cfg.lr_decay).max(cfg.min_learning_rate);
                lr_stale = 0;
            }
            if stale >= cfg.patience {
                break;
            }
        }
    }
    summary.best_epoch = best.1;
    summary.best_validation_loss = best.0;
    summary.final_learning_rate = lr;
    Ok((best.2, summary))
}
