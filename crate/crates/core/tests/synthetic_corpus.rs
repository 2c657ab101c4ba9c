use fastaudio::dataio::{generate_synthetic, SynthConfig};
use fastaudio::signal::{frame_signal, power_spectrum, StftConfig};
use fastaudio::Label;

/// Mean power above 0.8 x Nyquist per utterance class.
fn high_band_energy(cfg: &SynthConfig) -> (f64, f64) {
    let stft = StftConfig {
        preemph_coeff: 0.0,
        ..StftConfig::default()
    };
    let cutoff = 0.8 * cfg.sample_rate as f64 / 2.0;
    let mut sums = [0.0; 2];
    for (wave, rec) in generate_synthetic(cfg).unwrap() {
        let spec = power_spectrum(&frame_signal(&wave, &stft).unwrap(), &stft).unwrap();
        let energy: f64 = spec
            .values
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .zip(&spec.bin_freqs)
                    .filter(|(_, &f)| f > cutoff)
                    .map(|(p, _)| p)
                    .sum::<f64>()
            })
            .sum();
        sums[rec.key.index()] += energy;
    }
    (sums[Label::Bonafide.index()], sums[Label::Spoof.index()])
}

#[test]
fn spoof_has_more_high_band_energy() {
    let cfg = SynthConfig {
        n_per_class: 10,
        noise_level: 0.0,
        ..SynthConfig::default()
    };
    let (bona, spoof) = high_band_energy(&cfg);
    assert!(spoof > bona, "bona {bona} spoof {spoof}");
}

#[test]
fn spoof_has_more_high_band_energy_with_default_noise() {
    let (bona, spoof) = high_band_energy(&SynthConfig {
        n_per_class: 20,
        ..SynthConfig::default()
    });
    assert!(spoof > bona, "bona {bona} spoof {spoof}");
}

#[test]
fn artifact_only_touches_spoof_utterances() {
    let base = SynthConfig {
        n_per_class: 4,
        duration_s: 0.1,
        ..SynthConfig::default()
    };
    let with = generate_synthetic(&base).unwrap();
    let without = generate_synthetic(&SynthConfig {
        artifact_gain: 0.0,
        ..base
    })
    .unwrap();
    for ((a, rec), (b, _)) in with.iter().zip(&without) {
        match rec.key {
            Label::Bonafide => assert_eq!(a, b),
            Label::Spoof => assert_ne!(a, b),
        }
    }
}
