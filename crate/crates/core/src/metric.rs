//! Normalized linear embedding trained with a triplet hinge.
//!
//! A model maps a raw descriptor `x` to `e = W x / |W x|`. Training minimizes
//!
//! ```text
//! L = max(0, |e_a - e_p|^2 - |e_a - e_n|^2 + margin)
//! ```
//!
//! over mined triplets by plain mini-batch gradient descent. The normalization
//! is part of the loss, so the gradient carries its Jacobian
//! `(I - e e^T) / |v|` back to `W`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geo::Triplet;
use crate::linalg::{dot, norm, sq_dist};

pub const DEFAULT_D_OUT: usize = 64;
pub const DEFAULT_MARGIN: f64 = 0.2;
pub const DEFAULT_NORM_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("projection norm {norm:e} is below the degeneracy guard {epsilon:e}")]
    DegenerateNorm { norm: f64, epsilon: f64 },
    #[error("projection overflowed to a non-finite norm")]
    NonFiniteProjection,
    #[error("invalid model shape {d_out}x{d_in} (need 1 <= d_out <= d_in)")]
    Shape { d_in: usize, d_out: usize },
    #[error("weight matrix has {actual} entries, expected {expected}")]
    WeightCount { expected: usize, actual: usize },
    #[error("weight {index} is not finite")]
    NonFiniteWeight { index: usize },
    #[error("margin must be finite and > 0, got {0}")]
    Margin(f64),
    #[error("norm epsilon must be finite and > 0, got {0}")]
    NormEpsilon(f64),
    #[error("invalid training configuration: {0}")]
    Config(&'static str),
    #[error("triplet {triplet} references descriptor {index}, but only {len} exist")]
    TripletIndex {
        triplet: usize,
        index: usize,
        len: usize,
    },
    #[error("no triplets to train on")]
    NoTriplets,
    #[error("every triplet hit the degenerate-norm guard ({skipped} skipped)")]
    NoUsableTriplets { skipped: usize },
    #[error("non-finite loss in epoch {epoch}; the learning rate is probably too large")]
    NonFiniteLoss { epoch: usize },
}

/// A `d_out x d_in` projection followed by L2 normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    d_in: usize,
    d_out: usize,
    /// Row-major, `d_out` rows of `d_in`.
    weights: Vec<f64>,
    margin: f64,
    norm_epsilon: f64,
}

impl EmbeddingModel {
    pub fn new(
        d_in: usize,
        d_out: usize,
        weights: Vec<f64>,
        margin: f64,
        norm_epsilon: f64,
    ) -> Result<Self, MetricError> {
        if d_out == 0 || d_out > d_in {
            return Err(MetricError::Shape { d_in, d_out });
        }
        let expected = d_in * d_out;
        if weights.len() != expected {
            return Err(MetricError::WeightCount {
                expected,
                actual: weights.len(),
            });
        }
        if let Some(index) = weights.iter().position(|w| !w.is_finite()) {
            return Err(MetricError::NonFiniteWeight { index });
        }
        check_margin(margin)?;
        if !(norm_epsilon.is_finite() && norm_epsilon > 0.0) {
            return Err(MetricError::NormEpsilon(norm_epsilon));
        }
        Ok(Self {
            d_in,
            d_out,
            weights,
            margin,
            norm_epsilon,
        })
    }

    /// The identity projection: embeddings are the L2-normalized raw descriptors.
    pub fn identity(dim: usize, margin: f64) -> Result<Self, MetricError> {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Self::new(dim, dim, weights, margin, DEFAULT_NORM_EPSILON)
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.d_in..(i + 1) * self.d_in]
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn norm_epsilon(&self) -> f64 {
        self.norm_epsilon
    }

    /// `W x`, unnormalized.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, MetricError> {
        if x.len() != self.d_in {
            return Err(MetricError::DimensionMismatch {
                expected: self.d_in,
                actual: x.len(),
            });
        }
        Ok(self.weights.chunks_exact(self.d_in).map(|row| dot(row, x)).collect())
    }

    /// Unit-norm embedding `W x / |W x|`.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>, MetricError> {
        Ok(self.embed_with_norm(x)?.0)
    }

    fn embed_with_norm(&self, x: &[f64]) -> Result<(Vec<f64>, f64), MetricError> {
        let mut v = self.project(x)?;
        let n = norm(&v);
        if n.is_infinite() {
            return Err(MetricError::NonFiniteProjection);
        }
        // Also catches a NaN norm.
        if !(n >= self.norm_epsilon) {
            return Err(MetricError::DegenerateNorm {
                norm: n,
                epsilon: self.norm_epsilon,
            });
        }
        v.iter_mut().for_each(|c| *c /= n);
        Ok((v, n))
    }
}

fn check_margin(margin: f64) -> Result<(), MetricError> {
    if margin.is_finite() && margin > 0.0 {
        Ok(())
    } else {
        Err(MetricError::Margin(margin))
    }
}

/// `max(0, |a - p|^2 - |a - n|^2 + margin)` on already-embedded vectors.
pub fn triplet_loss(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> Result<f64, MetricError> {
    check_margin(margin)?;
    for other in [positive, negative] {
        if other.len() != anchor.len() {
            return Err(MetricError::DimensionMismatch {
                expected: anchor.len(),
                actual: other.len(),
            });
        }
    }
    let raw = sq_dist(anchor, positive) - sq_dist(anchor, negative) + margin;
    // `f64::max` would turn NaN into 0.
    Ok(if raw > 0.0 || raw.is_nan() { raw } else { 0.0 })
}

/// Loss value together with `dL/dW` (row-major, same shape as the weights).
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    pub grad: Vec<f64>,
}

impl LossGradient {
    pub fn is_active(&self) -> bool {
        self.loss > 0.0
    }
}

/// Analytic gradient of the triplet loss with respect to every weight.
///
/// Returns an exact zero matrix whenever the hinge is not strictly active,
/// including at the boundary.
pub fn loss_gradient(
    model: &EmbeddingModel,
    x_a: &[f64],
    x_p: &[f64],
    x_n: &[f64],
) -> Result<LossGradient, MetricError> {
    let mut grad = vec![0.0; model.weights.len()];
    let loss = accumulate_gradient(model, [x_a, x_p, x_n], &mut grad)?;
    Ok(LossGradient { loss, grad })
}

/// Adds `dL/dW` for one triplet into `acc` and returns the loss.
fn accumulate_gradient(model: &EmbeddingModel, xs: [&[f64]; 3], acc: &mut [f64]) -> Result<f64, MetricError> {
    let (e_a, n_a) = model.embed_with_norm(xs[0])?;
    let (e_p, n_p) = model.embed_with_norm(xs[1])?;
    let (e_n, n_n) = model.embed_with_norm(xs[2])?;
    let loss = triplet_loss(&e_a, &e_p, &e_n, model.margin)?;
    if !(loss > 0.0) {
        return Ok(loss);
    }

    // dL/de for each of the three embeddings.
    let d = model.d_out;
    let mut g_a = vec![0.0; d];
    let mut g_p = vec![0.0; d];
    let mut g_n = vec![0.0; d];
    for i in 0..d {
        g_a[i] = 2.0 * (e_n[i] - e_p[i]);
        g_p[i] = 2.0 * (e_p[i] - e_a[i]);
        g_n[i] = 2.0 * (e_a[i] - e_n[i]);
    }

    // Through the normalization: dL/dv = (g - e (e . g)) / |v|.
    let back = |g: &mut [f64], e: &[f64], n: f64| {
        let eg = dot(e, g);
        for (gi, ei) in g.iter_mut().zip(e) {
            *gi = (*gi - ei * eg) / n;
        }
    };
    back(&mut g_a, &e_a, n_a);
    back(&mut g_p, &e_p, n_p);
    back(&mut g_n, &e_n, n_n);

    // dL/dW = sum_k dL/dv_k x_k^T.
    for (i, row) in acc.chunks_exact_mut(model.d_in).enumerate() {
        let (ca, cp, cn) = (g_a[i], g_p[i], g_n[i]);
        for (j, w) in row.iter_mut().enumerate() {
            *w += ca * xs[0][j] + cp * xs[1][j] + cn * xs[2][j];
        }
    }
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub d_out: usize,
    /// Fixed step size; zero leaves the initialization untouched.
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Initial weights are N(0, (init_scale / sqrt(d_in))^2).
    pub init_scale: f64,
    pub norm_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d_out: DEFAULT_D_OUT,
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 16,
            seed: 0,
            init_scale: 1.0,
            norm_epsilon: DEFAULT_NORM_EPSILON,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), MetricError> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(MetricError::Config("learning_rate must be finite and >= 0"));
        }
        if self.epochs == 0 {
            return Err(MetricError::Config("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(MetricError::Config("batch_size must be >= 1"));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return Err(MetricError::Config("init_scale must be finite and > 0"));
        }
        Ok(())
    }
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    /// Mean loss over the usable triplets of each epoch, measured before each
    /// batch's update.
    pub mean_loss: Vec<f64>,
    /// Fraction of usable triplets with an active hinge.
    pub active_fraction: Vec<f64>,
    /// Triplet evaluations skipped by the degenerate-norm guard, summed over epochs.
    pub skipped_degenerate: usize,
}

/// Seeded Gaussian initialization, stream 0 of the config seed.
pub fn init_model(d_in: usize, cfg: &TrainConfig, margin: f64) -> Result<EmbeddingModel, MetricError> {
    if cfg.d_out == 0 || cfg.d_out > d_in {
        return Err(MetricError::Shape { d_in, d_out: cfg.d_out });
    }
    let std_dev = cfg.init_scale / libm::sqrt(d_in as f64);
    let normal = Normal::new(0.0, std_dev).map_err(|_| MetricError::Config("init_scale must be finite and > 0"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    let weights = (0..cfg.d_out * d_in).map(|_| normal.sample(&mut rng)).collect();
    EmbeddingModel::new(d_in, cfg.d_out, weights, margin, cfg.norm_epsilon)
}

/// Trains an embedding over `raw` descriptors with mini-batch gradient descent.
///
/// Each epoch reshuffles the triplet list (stream 1 of the config seed) and
/// cuts it into batches. Within a batch, gradients are summed in ascending
/// triplet order and the mean is applied with the fixed learning rate, so a
/// given input and config always produce bit-identical weights.
pub fn train<D: AsRef<[f64]>>(
    raw: &[D],
    triplets: &[Triplet],
    cfg: &TrainConfig,
    margin: f64,
) -> Result<(EmbeddingModel, TrainLog), MetricError> {
    cfg.validate()?;
    check_margin(margin)?;
    if triplets.is_empty() {
        return Err(MetricError::NoTriplets);
    }
    let d_in = raw.first().map(|x| x.as_ref().len()).ok_or(MetricError::NoTriplets)?;
    if let Some(bad) = raw.iter().find(|x| x.as_ref().len() != d_in) {
        return Err(MetricError::DimensionMismatch {
            expected: d_in,
            actual: bad.as_ref().len(),
        });
    }
    for (t, tr) in triplets.iter().enumerate() {
        for index in [tr.anchor, tr.positive, tr.negative] {
            if index >= raw.len() {
                return Err(MetricError::TripletIndex {
                    triplet: t,
                    index,
                    len: raw.len(),
                });
            }
        }
    }

    let mut model = init_model(d_in, cfg, margin)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut order: Vec<usize> = (0..triplets.len()).collect();
    let mut acc = vec![0.0; model.weights.len()];
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut log = TrainLog::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut used, mut active) = (0.0, 0usize, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend_from_slice(chunk);
            batch.sort_unstable();
            acc.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_used = 0usize;
            for &t in &batch {
                let tr = triplets[t];
                let xs = [raw[tr.anchor].as_ref(), raw[tr.positive].as_ref(), raw[tr.negative].as_ref()];
                match accumulate_gradient(&model, xs, &mut acc) {
                    Ok(loss) => {
                        loss_sum += loss;
                        batch_used += 1;
                        if loss > 0.0 {
                            active += 1;
                        }
                    }
                    Err(MetricError::DegenerateNorm { .. }) => log.skipped_degenerate += 1,
                    Err(MetricError::NonFiniteProjection) => return Err(MetricError::NonFiniteLoss { epoch }),
                    Err(e) => return Err(e),
                }
            }
            used += batch_used;
            if batch_used > 0 && cfg.learning_rate > 0.0 {
                let step = cfg.learning_rate / batch_used as f64;
                for (w, g) in model.weights.iter_mut().zip(&acc) {
                    *w -= step * g;
                }
                if model.weights.iter().any(|w| !w.is_finite()) {
                    return Err(MetricError::NonFiniteLoss { epoch });
                }
            }
        }
        if used == 0 {
            return Err(MetricError::NoUsableTriplets {
                skipped: log.skipped_degenerate,
            });
        }
        let mean = loss_sum / used as f64;
        if !mean.is_finite() {
            return Err(MetricError::NonFiniteLoss { epoch });
        }
        log.mean_loss.push(mean);
        log.active_fraction.push(active as f64 / used as f64);
    }
    Ok((model, log))
}
