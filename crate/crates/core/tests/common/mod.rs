//! Independent reference implementations shared by the integration tests.
//!
//! Every oracle here recomputes a quantity the slow, obvious way so that the
//! library's fast path can be checked against it.

#![allow(dead_code)]

use std::f64::consts::PI;

use fastaudio::filterbank::{
    build_filter_matrix, filterbank_backward, init_mel_params, ClampBounds, FilterShape,
    FilterbankParams,
};
use fastaudio::metrics::ScoreSet;
use fastaudio::model::{backward_full, dataset_loss, fit_embedding_norm, Example, ModelState};
use fastaudio::signal::{
    power_spectrum, Frames, PowerSpectrogram, StftConfig, Waveform, WindowKind,
};
use fastaudio::Label;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-3;

/// `max_i |a_i - b_i| / max_i |b_i|`; 0 when both vectors vanish.
pub fn rel_err(analytic: &[f64], reference: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = reference.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

// ---------------------------------------------------------------------------
// DFT

/// O(n^2) power spectrum of the windowed, zero-padded frame.
pub fn naive_power(frame: &[f64], window: &[f64], n_fft: usize) -> Vec<f64> {
    (0..n_fft / 2 + 1)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, (&x, &w)) in frame.iter().zip(window).enumerate() {
                let arg = -2.0 * PI * (k * t) as f64 / n_fft as f64;
                re += x * w * arg.cos();
                im += x * w * arg.sin();
            }
            re * re + im * im
        })
        .collect()
}

/// One random frame (length <= 64) through `power_spectrum` and the naive
/// DFT. Returns the relative error.
pub fn dft_case(rng: &mut ChaCha8Rng) -> f64 {
    let frame_len = rng.random_range(1..=64);
    let n_fft = rng.random_range(frame_len..=64).max(2);
    let window = match rng.random_range(0..3) {
        0 => WindowKind::Hamming,
        1 => WindowKind::Hann,
        _ => WindowKind::Rectangular,
    };
    let frame: Vec<f64> = (0..frame_len)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let frames = Frames {
        data: Array2::from_shape_vec((1, frame_len), frame.clone()).unwrap(),
        sample_rate: 16000,
    };
    let cfg = StftConfig {
        n_fft,
        window,
        ..StftConfig::default()
    };
    let fast = power_spectrum(&frames, &cfg).unwrap();
    let slow = naive_power(&frame, &window.coefficients(frame_len), n_fft);
    rel_err(fast.values.row(0).as_slice().unwrap(), &slow)
}

// ---------------------------------------------------------------------------
// Finite differences

fn near_kink(params: &FilterbankParams, grid: &[f64], margin: f64) -> bool {
    params.shape == FilterShape::Triangular
        && params
            .centers
            .iter()
            .zip(&params.bandwidths)
            .any(|(&c, &b)| {
                grid.iter()
                    .any(|&f| [c - b, c, c + b].iter().any(|&k| (f - k).abs() < margin))
            })
}

fn shape_for(i: usize) -> FilterShape {
    if i.is_multiple_of(2) {
        FilterShape::Triangular
    } else {
        FilterShape::Gaussian
    }
}

/// Central differences of `loss` with respect to every center, then every
/// bandwidth.
fn fd_grads(params: &FilterbankParams, loss: impl Fn(&FilterbankParams) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.n_learnable());
    for which in 0..2 {
        for i in 0..params.n_filters() {
            let bump = |delta: f64| {
                let mut p = params.clone();
                let v = if which == 0 {
                    &mut p.centers[i]
                } else {
                    &mut p.bandwidths[i]
                };
                *v += delta;
                loss(&p)
            };
            out.push((bump(FD_STEP) - bump(-FD_STEP)) / (2.0 * FD_STEP));
        }
    }
    out
}

/// A random small filterbank applied to a random power spectrogram, with
/// `L = sum(G * M)` for a random upstream gradient `G`. Returns the relative
/// error of `filterbank_backward` against central differences. Triangle
/// configurations with a bin within `10 h` of a kink are redrawn.
pub fn filterbank_fd_case(rng: &mut ChaCha8Rng, index: usize) -> f64 {
    let shape = shape_for(index);
    loop {
        let n_fft = 2 * rng.random_range(4..=32);
        let sr = 16000;
        let n_filters = rng.random_range(1..=4);
        let n_frames = rng.random_range(1..=5);
        let clamp = ClampBounds::for_band(sr, n_fft);
        let centers = (0..n_filters)
            .map(|_| rng.random_range(100.0..7900.0))
            .collect();
        let bandwidths = (0..n_filters)
            .map(|_| rng.random_range(clamp.b_min..3000.0))
            .collect();
        let params = FilterbankParams::new(centers, bandwidths, 1.0, shape, clamp, false).unwrap();
        let grid = StftConfig {
            n_fft,
            ..StftConfig::default()
        }
        .bin_freqs(sr);
        if near_kink(&params, &grid, 10.0 * FD_STEP) {
            continue;
        }
        let spec = PowerSpectrogram {
            values: Array2::from_shape_fn((n_frames, grid.len()), |_| rng.random_range(0.0..10.0)),
            bin_freqs: grid.clone(),
        };
        let g = Array2::from_shape_fn((n_filters, n_frames), |_| rng.random_range(-1.0..1.0));
        let loss = |p: &FilterbankParams| {
            let w = build_filter_matrix(p, &grid).weights;
            (w.dot(&spec.values.t()) * &g).sum()
        };
        let analytic = filterbank_backward(&spec, &params, &g).unwrap();
        let analytic: Vec<f64> = analytic
            .centers
            .iter()
            .chain(&analytic.bandwidths)
            .copied()
            .collect();
        return rel_err(&analytic, &fd_grads(&params, loss));
    }
}

fn random_wave(rng: &mut ChaCha8Rng, n: usize) -> Waveform {
    let f = rng.random_range(200.0..7800.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    let samples = (0..n)
        .map(|t| {
            let z: f64 = StandardNormal.sample(rng);
            (0.4 * (2.0 * PI * f * t as f64 / 16000.0 + phase).sin() + 0.1 * z).clamp(-1.0, 1.0)
        })
        .collect();
    Waveform::new(samples, 16000).unwrap()
}

/// Random two-utterance batch and three-filter model. Returns the relative
/// error of the front-end gradients from `backward_full` against central
/// differences of the mean batch loss.
pub fn end_to_end_fd_case(rng: &mut ChaCha8Rng, index: usize) -> f64 {
    let shape = shape_for(index);
    let stft = StftConfig::default();
    let eps = 1e-6;
    loop {
        let batch: Vec<Example> = [Label::Bonafide, Label::Spoof]
            .into_iter()
            .enumerate()
            .map(|(i, label)| {
                let n = rng.random_range(800..1400);
                Example::from_waveform(format!("u{i}"), label, &random_wave(rng, n), &stft).unwrap()
            })
            .collect();
        let grid = batch[0].spectrogram.bin_freqs.clone();
        let mut fe = init_mel_params(
            3,
            0.0,
            8000.0,
            shape,
            ClampBounds::for_band(16000, 400),
            false,
        )
        .unwrap();
        for (c, b) in fe.centers.iter_mut().zip(fe.bandwidths.iter_mut()) {
            *c *= rng.random_range(0.8..1.2);
            *b *= rng.random_range(0.8..1.2);
        }
        if near_kink(&fe, &grid, 10.0 * FD_STEP) {
            continue;
        }
        let mut state = ModelState::new(fe, 0);
        for w in state.classifier.iter_mut() {
            *w = StandardNormal.sample(rng);
        }
        fit_embedding_norm(&batch, &mut state, eps).unwrap();

        let refs: Vec<&Example> = batch.iter().collect();
        let grads = backward_full(&refs, &state, false, eps).unwrap();
        let analytic: Vec<f64> = grads
            .frontend
            .centers
            .iter()
            .chain(&grads.frontend.bandwidths)
            .copied()
            .collect();
        let fd = fd_grads(&state.frontend, |p| {
            let mut s = state.clone();
            s.frontend = p.clone();
            dataset_loss(&batch, &s, eps).unwrap()
        });
        return rel_err(&analytic, &fd);
    }
}

// ---------------------------------------------------------------------------
// Metrics

/// Up to 8 scores per class drawn from the grid `{0, 1, ..., 9}`.
pub fn grid_scores(rng: &mut ChaCha8Rng) -> ScoreSet {
    let draw = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(1..=8);
        (0..n)
            .map(|_| rng.random_range(0..10) as f64)
            .collect::<Vec<_>>()
    };
    let bona = draw(rng);
    let spoof = draw(rng);
    ScoreSet::new(bona, spoof)
}

/// `(bona missed, spoof accepted)` at every threshold of a fixed, dense sweep
/// over the integer score grid: `-inf`, every half-integer, `+inf`.
fn brute_counts(scores: &ScoreSet) -> Vec<(usize, usize)> {
    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend((0..=10).map(|k| k as f64 - 0.5));
    thresholds.push(f64::INFINITY);
    thresholds
        .into_iter()
        .map(|s| {
            let missed = scores.bona_scores.iter().filter(|&&b| b < s).count();
            let accepted = scores.spoof_scores.iter().filter(|&&x| x >= s).count();
            (missed, accepted)
        })
        .collect()
}

/// EER by exhaustive search: the operating points closest to `FAR = FRR`;
/// when two distinct points straddle the crossing equally, their midpoints
/// are averaged.
pub fn brute_eer(scores: &ScoreSet) -> f64 {
    let nb = scores.bona_scores.len();
    let ns = scores.spoof_scores.len();
    let mut points = brute_counts(scores);
    points.dedup();
    let gap = |&(m, a): &(usize, usize)| ((a * nb) as i64 - (m * ns) as i64).unsigned_abs();
    let best = points.iter().map(gap).min().unwrap();
    let mid = |&(m, a): &(usize, usize)| (a as f64 / ns as f64 + m as f64 / nb as f64) / 2.0;
    let tied: Vec<f64> = points.iter().filter(|p| gap(p) == best).map(mid).collect();
    match tied.as_slice() {
        [one] => *one,
        [lo, hi] => (lo + hi) / 2.0,
        other => panic!("more than two tied operating points: {other:?}"),
    }
}

pub fn brute_min_tdcf(scores: &ScoreSet, beta: f64) -> f64 {
    let nb = scores.bona_scores.len() as f64;
    let ns = scores.spoof_scores.len() as f64;
    brute_counts(scores)
        .iter()
        .map(|&(m, a)| beta * (m as f64 / nb) + a as f64 / ns)
        .fold(f64::INFINITY, f64::min)
}
