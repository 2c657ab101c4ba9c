//! End-to-end trainable pipeline: front-end, statistics pooling, a linear
//! two-class classifier and SGD with projection onto the filter constraints.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::filterbank::{
    apply_filterbank, build_filter_matrix, clamp_params, filterbank_backward, log_backward,
    log_compress, FilterGrads, FilterbankMatrix, FilterbankParams,
};
use crate::signal::{spectrogram, PowerSpectrogram, StftConfig, Waveform};
use crate::{Error, Label, Result};

/// Log filterbank energies, one row per filter and one column per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub utterance_id: String,
}

impl FeatureMatrix {
    pub fn n_filters(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }
}

/// Pre-emphasis, framing, power spectrum, filterbank and log compression.
pub fn extract_features(
    x: &Waveform,
    cfg: &StftConfig,
    params: &FilterbankParams,
    eps: f64,
) -> Result<FeatureMatrix> {
    let spec = spectrogram(x, cfg)?;
    let matrix = build_filter_matrix(params, &spec.bin_freqs);
    Ok(FeatureMatrix {
        values: log_compress(&apply_filterbank(&spec, &matrix)?, eps),
        utterance_id: String::new(),
    })
}

/// Per-filter mean over time followed by per-filter population standard deviation.
pub fn stats_pool(features: &Array2<f64>) -> Vec<f64> {
    let t = features.ncols() as f64;
    let means: Vec<f64> = features.rows().into_iter().map(|r| r.sum() / t).collect();
    let stds = features
        .rows()
        .into_iter()
        .zip(&means)
        .map(|(r, &m)| (r.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / t).sqrt());
    let mut out = means.clone();
    out.extend(stds);
    out
}

/// Routes `dL/d(embedding)` back to every feature value.
fn stats_pool_backward(features: &Array2<f64>, embedding: &[f64], grad: &[f64]) -> Array2<f64> {
    let n = features.nrows();
    let t = features.ncols() as f64;
    let mut out = Array2::zeros(features.dim());
    for (i, (row, mut g_row)) in features.rows().into_iter().zip(out.rows_mut()).enumerate() {
        let (mean, std) = (embedding[i], embedding[n + i]);
        let g_mean = grad[i] / t;
        // std is not differentiable at 0; its gradient is taken as 0 there.
        let g_std = if std > 0.0 {
            grad[n + i] / (t * std)
        } else {
            0.0
        };
        for (g, &v) in g_row.iter_mut().zip(row) {
            *g = g_mean + g_std * (v - mean);
        }
    }
    out
}

fn logits(embedding: &[f64], weights: &Array2<f64>) -> Result<[f64; 2]> {
    if weights.dim() != (embedding.len() + 1, 2) {
        return Err(Error::DimensionMismatch(format!(
            "classifier is {:?}, embedding has {} values",
            weights.dim(),
            embedding.len()
        )));
    }
    let bias = weights.row(embedding.len());
    let mut z = [bias[0], bias[1]];
    for (e, w) in embedding.iter().zip(weights.rows()) {
        z[0] += e * w[0];
        z[1] += e * w[1];
    }
    Ok(z)
}

fn softmax(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let (a, b) = ((z[0] - m).exp(), (z[1] - m).exp());
    [a / (a + b), b / (a + b)]
}

fn log_softmax(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
    [z[0] - lse, z[1] - lse]
}

/// Softmax over `(bonafide, spoof)` logits of a linear layer.
///
/// `weights` has one row per embedding value plus a final bias row, and one
/// column per class.
pub fn classify(embedding: &[f64], weights: &Array2<f64>) -> Result<[f64; 2]> {
    logits(embedding, weights).map(softmax)
}

pub fn cross_entropy(probs: [f64; 2], label: Label) -> f64 {
    -probs[label.index()].ln()
}

/// A training or evaluation utterance with its spectrogram precomputed.
///
/// The spectrogram does not depend on the learnable parameters, so it is
/// computed once per utterance.
#[derive(Debug, Clone)]
pub struct Example {
    pub utterance_id: String,
    pub label: Label,
    pub spectrogram: PowerSpectrogram,
}

impl Example {
    pub fn from_waveform(
        utterance_id: impl Into<String>,
        label: Label,
        x: &Waveform,
        cfg: &StftConfig,
    ) -> Result<Self> {
        Ok(Self {
            utterance_id: utterance_id.into(),
            label,
            spectrogram: spectrogram(x, cfg)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub frontend: FilterbankParams,
    /// `(2 * n_filters + 1) x 2`: pooled-embedding weights plus a bias row.
    pub classifier: Array2<f64>,
    /// Frozen standardization `(e - mean) / std` applied to the pooled
    /// embedding before the classifier. Identity unless fitted.
    pub embedding_mean: Vec<f64>,
    pub embedding_std: Vec<f64>,
    pub rng_seed: u64,
    pub step_count: u64,
}

impl ModelState {
    /// Fresh state with a zero classifier and identity standardization.
    pub fn new(frontend: FilterbankParams, rng_seed: u64) -> Self {
        let dim = 2 * frontend.n_filters();
        Self {
            frontend,
            classifier: Array2::zeros((dim + 1, 2)),
            embedding_mean: vec![0.0; dim],
            embedding_std: vec![1.0; dim],
            rng_seed,
            step_count: 0,
        }
    }

    fn standardize(&self, embedding: &[f64]) -> Vec<f64> {
        embedding
            .iter()
            .zip(self.embedding_mean.iter().zip(&self.embedding_std))
            .map(|(e, (m, s))| (e - m) / s)
            .collect()
    }
}

/// Fits the embedding standardization to `dataset` under the current front-end.
///
/// Raw pooled log-energies sit far from the origin while the class evidence
/// lives in small variations around it; without this a linear classifier
/// trained by plain SGD is badly conditioned. The statistics stay frozen
/// during training. Dimensions with (near) zero spread keep unit scale.
pub fn fit_embedding_norm(dataset: &[Example], state: &mut ModelState, eps: f64) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let matrix = build_filter_matrix(&state.frontend, &dataset[0].spectrogram.bin_freqs);
    let embeddings: Vec<Vec<f64>> = dataset
        .par_iter()
        .map(|ex| {
            let features = log_compress(&apply_filterbank(&ex.spectrogram, &matrix)?, eps);
            Ok(stats_pool(&features))
        })
        .collect::<Result<_>>()?;
    let n = embeddings.len() as f64;
    let dim = embeddings[0].len();
    for d in 0..dim {
        let mean = embeddings.iter().map(|e| e[d]).sum::<f64>() / n;
        let var = embeddings
            .iter()
            .map(|e| (e[d] - mean).powi(2))
            .sum::<f64>()
            / n;
        let std = var.sqrt();
        state.embedding_mean[d] = mean;
        state.embedding_std[d] = if std > 1e-9 { std } else { 1.0 };
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Step size for centers and bandwidths, which live in Hz. Their
    /// gradients are tiny compared to the classifier's, hence the large
    /// default.
    pub learning_rate_frontend: f64,
    pub learning_rate_classifier: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub freeze_frontend: bool,
    pub momentum: f64,
    pub log_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate_frontend: 100.0,
            learning_rate_classifier: 0.01,
            epochs: 20,
            batch_size: 8,
            freeze_frontend: false,
            momentum: 0.9,
            log_eps: crate::filterbank::DEFAULT_LOG_EPS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let lr_ok = |lr: f64| lr.is_finite() && lr >= 0.0;
        if !lr_ok(self.learning_rate_frontend) || !lr_ok(self.learning_rate_classifier) {
            return Err(Error::InvalidConfig(
                "learning rates must be finite and >= 0".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum {} is outside [0, 1)",
                self.momentum
            )));
        }
        if self.log_eps.is_nan() || self.log_eps <= 0.0 {
            return Err(Error::InvalidConfig("log_eps must be positive".into()));
        }
        Ok(())
    }
}

/// Gradients of the mean batch loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub classifier: Array2<f64>,
    pub frontend: FilterGrads,
    pub loss: f64,
}

struct Forward {
    energies: Array2<f64>,
    features: Array2<f64>,
    embedding: Vec<f64>,
    standardized: Vec<f64>,
    logits: [f64; 2],
}

fn forward(
    spec: &PowerSpectrogram,
    matrix: &FilterbankMatrix,
    state: &ModelState,
    eps: f64,
) -> Result<Forward> {
    let energies = apply_filterbank(spec, matrix)?;
    let features = log_compress(&energies, eps);
    let embedding = stats_pool(&features);
    if embedding.len() != state.embedding_mean.len() {
        return Err(Error::DimensionMismatch(format!(
            "embedding has {} values, standardization expects {}",
            embedding.len(),
            state.embedding_mean.len()
        )));
    }
    let standardized = state.standardize(&embedding);
    let logits = logits(&standardized, &state.classifier)?;
    Ok(Forward {
        energies,
        features,
        embedding,
        standardized,
        logits,
    })
}

fn example_loss(
    ex: &Example,
    matrix: &FilterbankMatrix,
    state: &ModelState,
    eps: f64,
) -> Result<f64> {
    let fwd = forward(&ex.spectrogram, matrix, state, eps)?;
    Ok(-log_softmax(fwd.logits)[ex.label.index()])
}

fn example_backward(
    ex: &Example,
    state: &ModelState,
    matrix: &FilterbankMatrix,
    eps: f64,
    with_frontend: bool,
) -> Result<Gradients> {
    let fwd = forward(&ex.spectrogram, matrix, state, eps)?;
    let log_probs = log_softmax(fwd.logits);
    let probs = [log_probs[0].exp(), log_probs[1].exp()];
    let mut dz = probs;
    dz[ex.label.index()] -= 1.0;

    let dim = fwd.embedding.len();
    let mut g_cls = Array2::zeros((dim + 1, 2));
    for (i, &e) in fwd.standardized.iter().enumerate() {
        g_cls[[i, 0]] = e * dz[0];
        g_cls[[i, 1]] = e * dz[1];
    }
    g_cls[[dim, 0]] = dz[0];
    g_cls[[dim, 1]] = dz[1];

    let frontend = if with_frontend {
        let g_emb: Vec<f64> = state
            .classifier
            .rows()
            .into_iter()
            .take(dim)
            .zip(&state.embedding_std)
            .map(|(w, s)| (w[0] * dz[0] + w[1] * dz[1]) / s)
            .collect();
        let g_features = stats_pool_backward(&fwd.features, &fwd.embedding, &g_emb);
        let g_energies = log_backward(&fwd.energies, &g_features, eps);
        filterbank_backward(&ex.spectrogram, &state.frontend, &g_energies)?
    } else {
        FilterGrads::zeros(state.frontend.n_filters())
    };

    Ok(Gradients {
        classifier: g_cls,
        frontend,
        loss: -log_probs[ex.label.index()],
    })
}

/// Exact gradients of the mean cross-entropy over `batch`.
///
/// Per-utterance passes run in parallel; their results are summed in batch
/// order so the outcome does not depend on scheduling.
pub fn backward_full(
    batch: &[&Example],
    state: &ModelState,
    freeze_frontend: bool,
    eps: f64,
) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let first = &batch[0].spectrogram.bin_freqs;
    let matrix = build_filter_matrix(&state.frontend, first);
    let per_example: Vec<Gradients> = batch
        .par_iter()
        .map(|ex| example_backward(ex, state, &matrix, eps, !freeze_frontend))
        .collect::<Result<_>>()?;

    let n = state.frontend.n_filters();
    let mut total = Gradients {
        classifier: Array2::zeros(state.classifier.dim()),
        frontend: FilterGrads::zeros(n),
        loss: 0.0,
    };
    for g in &per_example {
        total.classifier += &g.classifier;
        total.frontend.add_assign(&g.frontend);
        total.loss += g.loss;
    }
    let scale = 1.0 / batch.len() as f64;
    total.classifier *= scale;
    total.frontend.scale(scale);
    total.loss *= scale;
    Ok(total)
}

/// Mean cross-entropy over the whole dataset, in dataset order.
pub fn dataset_loss(dataset: &[Example], state: &ModelState, eps: f64) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let matrix = build_filter_matrix(&state.frontend, &dataset[0].spectrogram.bin_freqs);
    let losses: Vec<f64> = dataset
        .par_iter()
        .map(|ex| example_loss(ex, &matrix, state, eps))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / dataset.len() as f64)
}

/// Log-probability of the bona fide class.
pub fn bonafide_log_prob(spec: &PowerSpectrogram, state: &ModelState, eps: f64) -> Result<f64> {
    let matrix = build_filter_matrix(&state.frontend, &spec.bin_freqs);
    let fwd = forward(spec, &matrix, state, eps)?;
    Ok(log_softmax(fwd.logits)[Label::Bonafide.index()])
}

pub fn check_dataset(dataset: &[Example]) -> Result<()> {
    let first = dataset.first().ok_or(Error::EmptyDataset)?.label;
    if dataset.iter().all(|ex| ex.label == first) {
        return Err(Error::SingleClassDataset(first));
    }
    let grid = &dataset[0].spectrogram.bin_freqs;
    if dataset.iter().any(|ex| &ex.spectrogram.bin_freqs != grid) {
        return Err(Error::DimensionMismatch(
            "utterances were analysed on different frequency grids".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: ModelState,
    /// Mean training loss before the first epoch, then after each epoch.
    pub losses: Vec<f64>,
}

/// Stable argsort of the centers; applying it is equivalent to `sort_params`.
fn center_order(params: &FilterbankParams) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..params.n_filters()).collect();
    idx.sort_by(|&a, &b| params.centers[a].total_cmp(&params.centers[b]));
    idx
}

fn permute(v: &[f64], order: &[usize]) -> Vec<f64> {
    order.iter().map(|&i| v[i]).collect()
}

/// Mini-batch SGD with momentum. After every step the front-end is clamped
/// and, if enabled, sorted; momentum buffers follow the sort permutation.
pub fn train(dataset: &[Example], cfg: &TrainConfig, init: &ModelState) -> Result<TrainOutcome> {
    train_observed(dataset, cfg, init, |_| {})
}

/// [`train`], calling `on_step` with the state after every completed step.
pub fn train_observed(
    dataset: &[Example],
    cfg: &TrainConfig,
    init: &ModelState,
    mut on_step: impl FnMut(&ModelState),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dataset(dataset)?;
    let eps = cfg.log_eps;
    let n = init.frontend.n_filters();

    let mut state = init.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(state.rng_seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut vel_cls = Array2::<f64>::zeros(state.classifier.dim());
    let mut vel_c = vec![0.0; n];
    let mut vel_b = vec![0.0; n];

    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    losses.push(dataset_loss(dataset, &state, eps)?);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &dataset[i]).collect();
            let grads = backward_full(&batch, &state, cfg.freeze_frontend, eps)?;

            vel_cls *= cfg.momentum;
            vel_cls += &grads.classifier;
            state
                .classifier
                .scaled_add(-cfg.learning_rate_classifier, &vel_cls);

            if !cfg.freeze_frontend {
                let fe = &mut state.frontend;
                let lr = cfg.learning_rate_frontend;
                for i in 0..n {
                    vel_c[i] = cfg.momentum * vel_c[i] + grads.frontend.centers[i];
                    vel_b[i] = cfg.momentum * vel_b[i] + grads.frontend.bandwidths[i];
                    fe.centers[i] -= lr * vel_c[i];
                    fe.bandwidths[i] -= lr * vel_b[i];
                }
                *fe = clamp_params(fe);
                if fe.sort_enabled {
                    let perm = center_order(fe);
                    fe.centers = permute(&fe.centers, &perm);
                    fe.bandwidths = permute(&fe.bandwidths, &perm);
                    vel_c = permute(&vel_c, &perm);
                    vel_b = permute(&vel_b, &perm);
                }
            }
            state.step_count += 1;
            on_step(&state);
        }
        losses.push(dataset_loss(dataset, &state, eps)?);
    }
    Ok(TrainOutcome { state, losses })
}

/// Per-row time average of a feature matrix.
pub fn time_average(features: &Array2<f64>) -> Vec<f64> {
    features
        .mean_axis(Axis(1))
        .map(|m| m.to_vec())
        .unwrap_or_default()
}
