//! Deterministic synthetic bona fide / spoof corpus.
//!
//! Bona fide utterances are a few formant-like sinusoids with random phases
//! and slight detuning, buried in white noise. Spoof utterances are built the
//! same way plus a weak tone at 0.9 x Nyquist, a high-frequency artifact that
//! a Mel filterbank resolves poorly because its upper filters are wide.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::protocol::{write_protocol, ProtocolRecord};
use super::wav::{quantize, write_wav};
use super::Split;
use crate::signal::Waveform;
use crate::{Error, Label, Result};

const PEAK: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Utterances per class and per split.
    pub n_per_class: usize,
    pub duration_s: f64,
    pub seed: u64,
    /// Amplitude of the spoof artifact relative to one formant component.
    pub artifact_gain: f64,
    pub formant_freqs: Vec<f64>,
    pub sample_rate: u32,
    /// Standard deviation of the white noise relative to one formant component.
    pub noise_level: f64,
    /// Maximum relative detuning of each formant, e.g. 0.02 for +-2 %.
    pub detune: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_class: 100,
            duration_s: 1.0,
            seed: 0,
            artifact_gain: 0.3,
            formant_freqs: vec![380.0, 1120.0, 2600.0],
            sample_rate: 16000,
            noise_level: 2.0,
            detune: 0.02,
        }
    }
}

impl SynthConfig {
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }

    pub fn artifact_freq(&self) -> f64 {
        0.9 * self.sample_rate as f64 / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.n_per_class == 0 {
            return Err(Error::InvalidConfig(
                "n_per_class must be at least 1".into(),
            ));
        }
        if self.sample_rate == 0 || self.n_samples() == 0 {
            return Err(Error::InvalidConfig(
                "corpus utterances would be empty".into(),
            ));
        }
        if self
            .formant_freqs
            .iter()
            .any(|&f| !(f > 0.0 && f < nyquist))
        {
            return Err(Error::InvalidConfig(
                "formants must lie in (0, nyquist)".into(),
            ));
        }
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.artifact_gain)
            || !finite_nonneg(self.noise_level)
            || !(0.0..1.0).contains(&self.detune)
        {
            return Err(Error::InvalidConfig(
                "artifact_gain and noise_level must be >= 0, detune in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

fn utterance(cfg: &SynthConfig, label: Label, rng: &mut ChaCha8Rng) -> Result<Waveform> {
    let sr = cfg.sample_rate as f64;
    let n = cfg.n_samples();
    let mut x = vec![0.0; n];

    let add_tone = |x: &mut [f64], freq: f64, amp: f64, phase: f64| {
        let w = 2.0 * PI * freq / sr;
        for (t, v) in x.iter_mut().enumerate() {
            *v += amp * (w * t as f64 + phase).sin();
        }
    };
    for &f in &cfg.formant_freqs {
        let detuned = f * (1.0 + rng.random_range(-1.0..=1.0) * cfg.detune);
        let phase = rng.random_range(0.0..2.0 * PI);
        add_tone(&mut x, detuned, 1.0, phase);
    }
    let artifact_phase = rng.random_range(0.0..2.0 * PI);
    if label == Label::Spoof {
        add_tone(
            &mut x,
            cfg.artifact_freq(),
            cfg.artifact_gain,
            artifact_phase,
        );
    }
    for v in &mut x {
        let z: f64 = StandardNormal.sample(rng);
        *v += cfg.noise_level * z;
    }

    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { PEAK / peak } else { 0.0 };
    let samples = x
        .into_iter()
        .map(|v| quantize(v * scale) as f64 / 32768.0)
        .collect();
    Waveform::new(samples, cfg.sample_rate)
}

/// Generates one split: `n_per_class` utterances of each class, alternating
/// bona fide and spoof. Samples are already quantized to 16 bits, so writing
/// and re-reading them is lossless.
pub fn generate_split(cfg: &SynthConfig, split: Split) -> Result<Vec<(Waveform, ProtocolRecord)>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(split as u64);
    let tag = match split {
        Split::Train => 'T',
        Split::Eval => 'E',
    };
    (0..2 * cfg.n_per_class)
        .map(|i| {
            let label = if i % 2 == 0 {
                Label::Bonafide
            } else {
                Label::Spoof
            };
            let wave = utterance(cfg, label, &mut rng)?;
            let record = ProtocolRecord {
                speaker_id: format!("SYN_{:04}", i / 2),
                utterance_id: format!("SYN_{tag}_{i:05}"),
                system_id: match label {
                    Label::Bonafide => "-".into(),
                    Label::Spoof => "HF1".into(),
                },
                key: label,
            };
            Ok((wave, record))
        })
        .collect()
}

/// Training split of the corpus.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<(Waveform, ProtocolRecord)>> {
    generate_split(cfg, Split::Train)
}

/// Counts of utterances written per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusCounts {
    pub train: usize,
    pub eval: usize,
}

/// Writes both splits and their protocol files under `dir`.
pub fn write_corpus(dir: impl AsRef<Path>, cfg: &SynthConfig) -> Result<CorpusCounts> {
    let dir = dir.as_ref();
    let mut counts = [0usize; 2];
    for (slot, split) in [Split::Train, Split::Eval].into_iter().enumerate() {
        let split_dir = dir.join(split.name());
        fs::create_dir_all(&split_dir).map_err(|e| Error::io(&split_dir, e))?;
        let items = generate_split(cfg, split)?;
        for (wave, rec) in &items {
            write_wav(split.wav_path(dir, &rec.utterance_id), wave)?;
        }
        let records: Vec<ProtocolRecord> = items.into_iter().map(|(_, r)| r).collect();
        write_protocol(split.protocol_path(dir), &records)?;
        counts[slot] = records.len();
    }
    Ok(CorpusCounts {
        train: counts[0],
        eval: counts[1],
    })
}
