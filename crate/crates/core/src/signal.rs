//! Waveform preprocessing and power-spectrum STFT.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Mono PCM signal normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidWaveform(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::InvalidWaveform(format!(
                "sample {i} = {} is outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Filtered signals such as the pre-emphasis output may leave [-1, 1].
    fn unbounded(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hamming,
    Hann,
    Rectangular,
}

impl WindowKind {
    /// Symmetric window of `len` samples.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        if len <= 1 {
            return vec![1.0; len];
        }
        let denom = (len - 1) as f64;
        (0..len)
            .map(|n| {
                let phase = 2.0 * PI * n as f64 / denom;
                match self {
                    WindowKind::Hamming => 0.54 - 0.46 * phase.cos(),
                    WindowKind::Hann => 0.5 - 0.5 * phase.cos(),
                    WindowKind::Rectangular => 1.0,
                }
            })
            .collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WindowKind::Hamming => "hamming",
            WindowKind::Hann => "hann",
            WindowKind::Rectangular => "rectangular",
        }
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hamming" => Ok(WindowKind::Hamming),
            "hann" => Ok(WindowKind::Hann),
            "rectangular" => Ok(WindowKind::Rectangular),
            other => Err(Error::InvalidConfig(format!("unknown window `{other}`"))),
        }
    }
}

/// Analysis settings shared by framing and the power spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig {
    pub win_length_ms: f64,
    pub hop_ms: f64,
    /// Transform size; the power spectrum has `n_fft / 2 + 1` bins.
    pub n_fft: usize,
    pub window: WindowKind,
    pub preemph_coeff: f64,
}

impl Default for StftConfig {
    /// 25 ms Hamming windows every 10 ms, 400-point FFT, pre-emphasis 0.97.
    fn default() -> Self {
        Self {
            win_length_ms: 25.0,
            hop_ms: 10.0,
            n_fft: 400,
            window: WindowKind::Hamming,
            preemph_coeff: 0.97,
        }
    }
}

impl StftConfig {
    pub fn win_samples(&self, sample_rate: u32) -> usize {
        (self.win_length_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Frequencies of the power-spectrum bins, `k * sample_rate / n_fft`.
    pub fn bin_freqs(&self, sample_rate: u32) -> Vec<f64> {
        bin_freqs(self.n_fft, sample_rate)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let win = self.win_samples(sample_rate);
        if win == 0 {
            return Err(Error::InvalidConfig(
                "window is shorter than one sample".into(),
            ));
        }
        if win > self.n_fft {
            return Err(Error::ConfigMismatch {
                frame_len: win,
                n_fft: self.n_fft,
            });
        }
        if self.hop_samples(sample_rate) == 0 {
            return Err(Error::InvalidConfig(
                "hop is shorter than one sample".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.preemph_coeff) {
            return Err(Error::InvalidConfig(format!(
                "pre-emphasis coefficient {} is outside [0, 1)",
                self.preemph_coeff
            )));
        }
        Ok(())
    }

    /// Number of frames produced for `n_samples` input samples.
    pub fn n_frames(&self, n_samples: usize, sample_rate: u32) -> usize {
        let win = self.win_samples(sample_rate);
        let hop = self.hop_samples(sample_rate);
        if n_samples < win || hop == 0 {
            0
        } else {
            (n_samples - win) / hop + 1
        }
    }
}

pub(crate) fn bin_freqs(n_fft: usize, sample_rate: u32) -> Vec<f64> {
    (0..n_fft / 2 + 1)
        .map(|k| k as f64 * sample_rate as f64 / n_fft as f64)
        .collect()
}

/// Frames of a signal, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    pub data: Array2<f64>,
    pub sample_rate: u32,
}

impl Frames {
    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn frame_len(&self) -> usize {
        self.data.ncols()
    }
}

/// `|STFT|^2`, one row per frame and one column per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrogram {
    pub values: Array2<f64>,
    pub bin_freqs: Vec<f64>,
}

impl PowerSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.values.ncols()
    }
}

/// First-order high-pass `y[t] = x[t] - alpha * x[t-1]`, with `y[0] = x[0]`.
pub fn pre_emphasize(x: &Waveform, alpha: f64) -> Waveform {
    let s = x.samples();
    let mut out = Vec::with_capacity(s.len());
    if let Some(&first) = s.first() {
        out.push(first);
        out.extend(s.windows(2).map(|w| w[1] - alpha * w[0]));
    }
    Waveform::unbounded(out, x.sample_rate())
}

/// Cuts the signal into overlapping windows; a trailing partial window is dropped.
pub fn frame_signal(x: &Waveform, cfg: &StftConfig) -> Result<Frames> {
    let sr = x.sample_rate();
    let win = cfg.win_samples(sr);
    let hop = cfg.hop_samples(sr);
    if win == 0 || hop == 0 {
        return Err(Error::InvalidConfig(
            "window and hop must be at least one sample".into(),
        ));
    }
    if x.len() < win {
        return Err(Error::SignalTooShort {
            len: x.len(),
            needed: win,
        });
    }
    let n = cfg.n_frames(x.len(), sr);
    let s = x.samples();
    let data = Array2::from_shape_fn((n, win), |(i, j)| s[i * hop + j]);
    Ok(Frames {
        data,
        sample_rate: sr,
    })
}

/// Windowed, zero-padded power spectrum of every frame.
pub fn power_spectrum(frames: &Frames, cfg: &StftConfig) -> Result<PowerSpectrogram> {
    let frame_len = frames.frame_len();
    let n_fft = cfg.n_fft;
    if frame_len > n_fft {
        return Err(Error::ConfigMismatch { frame_len, n_fft });
    }
    let window = cfg.window.coefficients(frame_len);
    let n_bins = n_fft / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);

    let mut values = Array2::zeros((frames.n_frames(), n_bins));
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for (frame, mut row) in frames.data.rows().into_iter().zip(values.rows_mut()) {
        for (slot, (&s, &w)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
            *slot = Complex::new(s * w, 0.0);
        }
        buf[frame_len..].fill(Complex::new(0.0, 0.0));
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (out, c) in row.iter_mut().zip(&buf) {
            *out = c.norm_sqr();
        }
    }
    Ok(PowerSpectrogram {
        values,
        bin_freqs: bin_freqs(n_fft, frames.sample_rate),
    })
}

/// Pre-emphasis, framing and power spectrum in one call.
pub fn spectrogram(x: &Waveform, cfg: &StftConfig) -> Result<PowerSpectrogram> {
    cfg.validate(x.sample_rate())?;
    let emphasized = pre_emphasize(x, cfg.preemph_coeff);
    let frames = frame_signal(&emphasized, cfg)?;
    power_spectrum(&frames, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(samples: &[f64]) -> Waveform {
        Waveform::new(samples.to_vec(), 16000).unwrap()
    }

    /// O(n^2) DFT of the zero-padded, unwindowed input.
    fn naive_power(x: &[f64], n_fft: usize) -> Vec<f64> {
        (0..=n_fft / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &v) in x.iter().enumerate() {
                    let a = -2.0 * PI * (k * n) as f64 / n_fft as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    fn rect_cfg(n_fft: usize) -> StftConfig {
        StftConfig {
            win_length_ms: 1.0,
            hop_ms: 1.0,
            n_fft,
            window: WindowKind::Rectangular,
            preemph_coeff: 0.0,
        }
    }

    #[test]
    fn waveform_rejects_out_of_range() {
        assert!(Waveform::new(vec![0.0, 1.5], 16000).is_err());
        assert!(Waveform::new(vec![f64::NAN], 16000).is_err());
        assert!(Waveform::new(vec![0.0], 0).is_err());
        assert!(Waveform::new(vec![-1.0, 1.0], 8000).is_ok());
    }

    #[test]
    fn pre_emphasis_examples() {
        let x = wave(&[0.3, -0.2, 0.9]);
        assert_eq!(pre_emphasize(&x, 0.0), x);

        let y = pre_emphasize(&wave(&[1.0, 1.0, 1.0]), 0.97);
        assert_eq!(y.samples()[0], 1.0);
        assert!((y.samples()[1] - 0.03).abs() < 1e-15);
        assert!((y.samples()[2] - 0.03).abs() < 1e-15);

        let y = pre_emphasize(&wave(&[1.0, 0.0, 0.0]), 0.5);
        assert_eq!(y.samples(), &[1.0, -0.5, 0.0]);

        assert!(pre_emphasize(&wave(&[]), 0.97).is_empty());
    }

    #[test]
    fn frame_counts() {
        let cfg = StftConfig::default();
        let f = frame_signal(&wave(&vec![0.0; 400]), &cfg).unwrap();
        assert_eq!(f.n_frames(), 1);
        let f = frame_signal(&wave(&vec![0.0; 560]), &cfg).unwrap();
        assert_eq!(f.n_frames(), 2);
        assert!(matches!(
            frame_signal(&wave(&vec![0.0; 399]), &cfg),
            Err(Error::SignalTooShort {
                len: 399,
                needed: 400
            })
        ));
    }

    #[test]
    fn frame_contents_follow_hop() {
        let samples: Vec<f64> = (0..600).map(|i| i as f64 / 1000.0).collect();
        let f = frame_signal(&wave(&samples), &StftConfig::default()).unwrap();
        for i in 0..f.n_frames() {
            for j in [0, 17, 399] {
                assert_eq!(f.data[[i, j]], samples[i * 160 + j]);
            }
        }
    }

    #[test]
    fn frame_count_sweep() {
        let cfg = StftConfig::default();
        let (win, hop) = (400usize, 160usize);
        for n in win..=win + 10 * hop {
            let f = frame_signal(&wave(&vec![0.0; n]), &cfg).unwrap();
            assert_eq!(f.n_frames(), (n - win) / hop + 1, "n = {n}");
        }
    }

    #[test]
    fn constant_frame_spectrum() {
        let x = Waveform::new(vec![1.0; 8], 8000).unwrap();
        let cfg = rect_cfg(8);
        let p = power_spectrum(&frame_signal(&x, &cfg).unwrap(), &cfg).unwrap();
        let row: Vec<f64> = p.values.row(0).to_vec();
        assert!((row[0] - 64.0).abs() < 1e-12);
        for v in &row[1..] {
            assert!(v.abs() < 1e-12);
        }
        assert_eq!(p.bin_freqs, vec![0.0, 1000.0, 2000.0, 3000.0, 4000.0]);
    }

    #[test]
    fn zero_frame_spectrum() {
        let cfg = StftConfig::default();
        let p = spectrogram(&wave(&vec![0.0; 800]), &cfg).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert_eq!(p.n_bins(), 201);
    }

    #[test]
    fn on_bin_sine_is_isolated() {
        let n = 32;
        let k0 = 5;
        let samples: Vec<f64> = (0..n)
            .map(|t| (2.0 * PI * (k0 * t) as f64 / n as f64).sin())
            .collect();
        let x = Waveform::new(samples.clone(), 32000).unwrap();
        let cfg = rect_cfg(n);
        let row = power_spectrum(&frame_signal(&x, &cfg).unwrap(), &cfg)
            .unwrap()
            .values
            .row(0)
            .to_vec();
        let oracle = naive_power(&samples, n);
        let max = oracle.iter().cloned().fold(0.0, f64::max);
        for (k, (&a, &b)) in row.iter().zip(&oracle).enumerate() {
            assert!((a - b).abs() <= 1e-9 * max);
            if k != k0 {
                assert!(a < 1e-9 * max, "bin {k}: {a}");
            }
        }
        assert!((row[k0] - (n * n) as f64 / 4.0).abs() < 1e-9);
    }

    #[test]
    fn oversized_frame_is_rejected() {
        let frames = Frames {
            data: Array2::zeros((1, 16)),
            sample_rate: 8000,
        };
        assert!(matches!(
            power_spectrum(&frames, &rect_cfg(8)),
            Err(Error::ConfigMismatch {
                frame_len: 16,
                n_fft: 8
            })
        ));
    }

    #[test]
    fn config_validation() {
        let cfg = StftConfig::default();
        assert!(cfg.validate(16000).is_ok());
        assert_eq!(cfg.win_samples(16000), 400);
        assert_eq!(cfg.hop_samples(16000), 160);
        let long = StftConfig {
            win_length_ms: 50.0,
            ..cfg.clone()
        };
        assert!(matches!(
            long.validate(16000),
            Err(Error::ConfigMismatch { .. })
        ));
        let bad = StftConfig {
            preemph_coeff: 1.0,
            ..cfg
        };
        assert!(bad.validate(16000).is_err());
    }

    #[test]
    fn hamming_endpoints() {
        let w = WindowKind::Hamming.coefficients(5);
        assert!((w[0] - 0.08).abs() < 1e-15);
        assert!((w[2] - 1.0).abs() < 1e-15);
        assert!((w[4] - 0.08).abs() < 1e-15);
    }
}
