//! Flat `key=value` run configuration.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use fastaudio::dataio::SynthConfig;
use fastaudio::filterbank::{init_mel_params, ClampBounds, FilterShape, FilterbankParams};
use fastaudio::metrics::TdcfParams;
use fastaudio::model::TrainConfig;
use fastaudio::signal::{StftConfig, WindowKind};

use crate::CliError;

/// Which front-end to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Mel filterbank, frozen.
    Fixed,
    FastaudioTri,
    FastaudioGauss,
    /// Triangular filters kept in ascending center order.
    FastaudioSort,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Fixed => "fixed",
            Variant::FastaudioTri => "fastaudio-tri",
            Variant::FastaudioGauss => "fastaudio-gauss",
            Variant::FastaudioSort => "fastaudio-sort",
        }
    }

    pub fn shape(self) -> FilterShape {
        match self {
            Variant::FastaudioGauss => FilterShape::Gaussian,
            _ => FilterShape::Triangular,
        }
    }

    pub fn sorted(self) -> bool {
        self == Variant::FastaudioSort
    }

    pub fn frozen(self) -> bool {
        self == Variant::Fixed
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "fixed" => Ok(Variant::Fixed),
            "fastaudio-tri" => Ok(Variant::FastaudioTri),
            "fastaudio-gauss" => Ok(Variant::FastaudioGauss),
            "fastaudio-sort" => Ok(Variant::FastaudioSort),
            other => Err(CliError::Config(format!(
                "unknown variant `{other}` (expected fixed, fastaudio-tri, fastaudio-gauss or fastaudio-sort)"
            ))),
        }
    }
}

/// Every knob of a run. `None` means "derive from the sample rate and FFT size".
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    pub seed: u64,
    pub sample_rate: u32,

    pub win_length_ms: f64,
    pub hop_ms: f64,
    pub n_fft: usize,
    pub window: WindowKind,
    pub preemph_coeff: f64,

    pub n_filters: usize,
    pub f_min: f64,
    pub f_max: Option<f64>,
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub b_min: Option<f64>,
    pub b_max: Option<f64>,

    pub learning_rate_frontend: f64,
    pub learning_rate_classifier: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub log_eps: f64,

    pub beta: f64,

    pub n_per_class: usize,
    pub duration_s: f64,
    pub artifact_gain: f64,
    pub noise_level: f64,
    pub detune: f64,
    pub formant_freqs: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let stft = StftConfig::default();
        let train = TrainConfig::default();
        let synth = SynthConfig::default();
        Self {
            variant: Variant::FastaudioTri,
            seed: 0,
            sample_rate: synth.sample_rate,
            win_length_ms: stft.win_length_ms,
            hop_ms: stft.hop_ms,
            n_fft: stft.n_fft,
            window: stft.window,
            preemph_coeff: stft.preemph_coeff,
            n_filters: 40,
            f_min: 0.0,
            f_max: None,
            c_min: None,
            c_max: None,
            b_min: None,
            b_max: None,
            learning_rate_frontend: train.learning_rate_frontend,
            learning_rate_classifier: train.learning_rate_classifier,
            epochs: train.epochs,
            batch_size: train.batch_size,
            momentum: train.momentum,
            log_eps: train.log_eps,
            beta: TdcfParams::default().beta,
            n_per_class: synth.n_per_class,
            duration_s: synth.duration_s,
            artifact_gain: synth.artifact_gain,
            noise_level: synth.noise_level,
            detune: synth.detune,
            formant_freqs: synth.formant_freqs,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("bad value for `{key}`: `{value}`")))
}

fn parse_opt(key: &str, value: &str) -> Result<Option<f64>, CliError> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn show_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |v| v.to_string())
}

impl RunConfig {
    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key.trim() {
            "variant" => self.variant = v.parse()?,
            "seed" => self.seed = parse(key, v)?,
            "sample_rate" => self.sample_rate = parse(key, v)?,
            "win_length_ms" => self.win_length_ms = parse(key, v)?,
            "hop_ms" => self.hop_ms = parse(key, v)?,
            "n_fft" => self.n_fft = parse(key, v)?,
            "window" => self.window = parse(key, v)?,
            "preemph_coeff" => self.preemph_coeff = parse(key, v)?,
            "n_filters" => self.n_filters = parse(key, v)?,
            "f_min" => self.f_min = parse(key, v)?,
            "f_max" => self.f_max = parse_opt(key, v)?,
            "c_min" => self.c_min = parse_opt(key, v)?,
            "c_max" => self.c_max = parse_opt(key, v)?,
            "b_min" => self.b_min = parse_opt(key, v)?,
            "b_max" => self.b_max = parse_opt(key, v)?,
            "learning_rate_frontend" => self.learning_rate_frontend = parse(key, v)?,
            "learning_rate_classifier" => self.learning_rate_classifier = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "momentum" => self.momentum = parse(key, v)?,
            "log_eps" => self.log_eps = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "n_per_class" => self.n_per_class = parse(key, v)?,
            "duration_s" => self.duration_s = parse(key, v)?,
            "artifact_gain" => self.artifact_gain = parse(key, v)?,
            "noise_level" => self.noise_level = parse(key, v)?,
            "detune" => self.detune = parse(key, v)?,
            "formant_freqs" => {
                self.formant_freqs = v
                    .split(',')
                    .map(|f| parse(key, f.trim()))
                    .collect::<Result<_, _>>()?
            }
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` string as given to `--set`.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got `{pair}`")))?;
        self.set(k, v)
    }

    /// Applies every assignment in a config file body. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_pair(line)
                .map_err(|e| CliError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Every key, in a form [`RunConfig::from_text`] reads back unchanged.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").expect("writing to a String");
        kv("variant", self.variant.to_string());
        kv("seed", self.seed.to_string());
        kv("sample_rate", self.sample_rate.to_string());
        kv("win_length_ms", self.win_length_ms.to_string());
        kv("hop_ms", self.hop_ms.to_string());
        kv("n_fft", self.n_fft.to_string());
        kv("window", self.window.to_string());
        kv("preemph_coeff", self.preemph_coeff.to_string());
        kv("n_filters", self.n_filters.to_string());
        kv("f_min", self.f_min.to_string());
        kv("f_max", show_opt(self.f_max));
        kv("c_min", show_opt(self.c_min));
        kv("c_max", show_opt(self.c_max));
        kv("b_min", show_opt(self.b_min));
        kv("b_max", show_opt(self.b_max));
        kv(
            "learning_rate_frontend",
            self.learning_rate_frontend.to_string(),
        );
        kv(
            "learning_rate_classifier",
            self.learning_rate_classifier.to_string(),
        );
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("momentum", self.momentum.to_string());
        kv("log_eps", self.log_eps.to_string());
        kv("beta", self.beta.to_string());
        kv("n_per_class", self.n_per_class.to_string());
        kv("duration_s", self.duration_s.to_string());
        kv("artifact_gain", self.artifact_gain.to_string());
        kv("noise_level", self.noise_level.to_string());
        kv("detune", self.detune.to_string());
        let formants: Vec<String> = self.formant_freqs.iter().map(|f| f.to_string()).collect();
        kv("formant_freqs", formants.join(","));
        s
    }

    pub fn stft(&self) -> StftConfig {
        StftConfig {
            win_length_ms: self.win_length_ms,
            hop_ms: self.hop_ms,
            n_fft: self.n_fft,
            window: self.window,
            preemph_coeff: self.preemph_coeff,
        }
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            n_per_class: self.n_per_class,
            duration_s: self.duration_s,
            seed: self.seed,
            artifact_gain: self.artifact_gain,
            formant_freqs: self.formant_freqs.clone(),
            sample_rate: self.sample_rate,
            noise_level: self.noise_level,
            detune: self.detune,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            learning_rate_frontend: self.learning_rate_frontend,
            learning_rate_classifier: self.learning_rate_classifier,
            epochs: self.epochs,
            batch_size: self.batch_size,
            freeze_frontend: self.variant.frozen(),
            momentum: self.momentum,
            log_eps: self.log_eps,
        }
    }

    pub fn tdcf(&self) -> TdcfParams {
        TdcfParams { beta: self.beta }
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    pub fn clamp(&self) -> ClampBounds {
        let band = ClampBounds::for_band(self.sample_rate, self.n_fft);
        ClampBounds {
            c_min: self.c_min.unwrap_or(band.c_min),
            c_max: self.c_max.unwrap_or(band.c_max),
            b_min: self.b_min.unwrap_or(band.b_min),
            b_max: self.b_max.unwrap_or(band.b_max),
        }
    }

    /// Mel-initialized front-end for the selected variant.
    pub fn init_frontend(&self) -> Result<FilterbankParams, CliError> {
        let f_max = self.f_max.unwrap_or(self.nyquist());
        if f_max > self.nyquist() {
            return Err(CliError::Config(format!(
                "f_max {f_max} is above the Nyquist frequency {}",
                self.nyquist()
            )));
        }
        Ok(init_mel_params(
            self.n_filters,
            self.f_min,
            f_max,
            self.variant.shape(),
            self.clamp(),
            self.variant.sorted(),
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn edited_round_trips() {
        let mut cfg = RunConfig::default();
        for pair in [
            "variant=fastaudio-gauss",
            "seed=42",
            "b_min=55.5",
            "window=hann",
            "formant_freqs=300, 900.25",
            "learning_rate_frontend=0.1",
        ] {
            cfg.set_pair(pair).unwrap();
        }
        assert_eq!(cfg.formant_freqs, vec![300.0, 900.25]);
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = RunConfig::from_text("# header\n\nseed=3  # trailing\n  epochs = 2\n").unwrap();
        assert_eq!((cfg.seed, cfg.epochs), (3, 2));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_text("speed=3").is_err());
        assert!(RunConfig::from_text("seed=minus one").is_err());
        assert!(RunConfig::from_text("variant=fbank").is_err());
        assert!(RunConfig::from_text("no equals sign").is_err());
    }

    #[test]
    fn variant_flags() {
        assert!(Variant::Fixed.frozen());
        assert!(Variant::FastaudioSort.sorted());
        assert_eq!(Variant::FastaudioGauss.shape(), FilterShape::Gaussian);
        for v in [
            "fixed",
            "fastaudio-tri",
            "fastaudio-gauss",
            "fastaudio-sort",
        ] {
            assert_eq!(v.parse::<Variant>().unwrap().as_str(), v);
        }
    }

    #[test]
    fn derived_bounds_follow_the_band() {
        let mut cfg = RunConfig::default();
        cfg.set("sample_rate", "8000").unwrap();
        let fe = cfg.init_frontend().unwrap();
        assert_eq!(fe.clamp.c_max, 4000.0);
        assert_eq!(fe.clamp.b_min, 20.0);
        cfg.set("f_max", "6000").unwrap();
        assert!(cfg.init_frontend().is_err());
    }
}
