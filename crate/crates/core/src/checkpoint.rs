//! Plain-text model checkpoints.
//!
//! One `key=value` pair per line. Arrays are written as whitespace-separated
//! numbers after the `=`. Floats use Rust's shortest round-trip formatting,
//! so a save/load cycle reproduces every value bit for bit.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

use crate::filterbank::{ClampBounds, FilterbankParams};
use crate::model::ModelState;
use crate::signal::StftConfig;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to score new audio with a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub sample_rate: u32,
    pub stft: StftConfig,
    pub log_eps: f64,
    pub state: ModelState,
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let fe = &self.state.frontend;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").expect("writing to a String");
        kv("format_version", FORMAT_VERSION.to_string());
        kv("sample_rate", self.sample_rate.to_string());
        kv("win_length_ms", self.stft.win_length_ms.to_string());
        kv("hop_ms", self.stft.hop_ms.to_string());
        kv("n_fft", self.stft.n_fft.to_string());
        kv("window", self.stft.window.to_string());
        kv("preemph_coeff", self.stft.preemph_coeff.to_string());
        kv("log_eps", self.log_eps.to_string());
        kv("shape", fe.shape.to_string());
        kv("sort_enabled", fe.sort_enabled.to_string());
        kv("gain", fe.gain().to_string());
        kv("c_min", fe.clamp.c_min.to_string());
        kv("c_max", fe.clamp.c_max.to_string());
        kv("b_min", fe.clamp.b_min.to_string());
        kv("b_max", fe.clamp.b_max.to_string());
        kv("rng_seed", self.state.rng_seed.to_string());
        kv("step_count", self.state.step_count.to_string());
        kv("n_filters", fe.n_filters().to_string());
        kv("centers", join(fe.centers.iter().copied()));
        kv("bandwidths", join(fe.bandwidths.iter().copied()));
        kv("classifier", join(self.state.classifier.iter().copied()));
        kv(
            "embedding_mean",
            join(self.state.embedding_mean.iter().copied()),
        );
        kv(
            "embedding_std",
            join(self.state.embedding_std.iter().copied()),
        );
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let f = Fields::parse(text, path)?;
        let version: u32 = f.value("format_version")?;
        if version != FORMAT_VERSION {
            return Err(f.error(
                "format_version",
                format!("unsupported format version {version}"),
            ));
        }
        let stft = StftConfig {
            win_length_ms: f.value("win_length_ms")?,
            hop_ms: f.value("hop_ms")?,
            n_fft: f.value("n_fft")?,
            window: f.value("window")?,
            preemph_coeff: f.value("preemph_coeff")?,
        };
        let clamp = ClampBounds {
            c_min: f.value("c_min")?,
            c_max: f.value("c_max")?,
            b_min: f.value("b_min")?,
            b_max: f.value("b_max")?,
        };
        let n_filters: usize = f.value("n_filters")?;
        let centers = f.array("centers")?;
        let bandwidths = f.array("bandwidths")?;
        if centers.len() != n_filters || bandwidths.len() != n_filters {
            return Err(f.error("centers", format!("expected {n_filters} filters")));
        }
        let frontend = FilterbankParams::new(
            centers,
            bandwidths,
            f.value("gain")?,
            f.value("shape")?,
            clamp,
            f.value("sort_enabled")?,
        )?;
        let classifier = Array2::from_shape_vec((2 * n_filters + 1, 2), f.array("classifier")?)
            .map_err(|_| {
                f.error(
                    "classifier",
                    format!("classifier needs {} values", 2 * (2 * n_filters + 1)),
                )
            })?;
        let embedding_mean = f.array("embedding_mean")?;
        let embedding_std = f.array("embedding_std")?;
        if embedding_mean.len() != 2 * n_filters || embedding_std.len() != 2 * n_filters {
            return Err(f.error(
                "embedding_mean",
                format!("expected {} values", 2 * n_filters),
            ));
        }
        Ok(Self {
            sample_rate: f.value("sample_rate")?,
            stft,
            log_eps: f.value("log_eps")?,
            state: ModelState {
                frontend,
                classifier,
                embedding_mean,
                embedding_std,
                rng_seed: f.value("rng_seed")?,
                step_count: f.value("step_count")?,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

/// Parsed `key=value` lines with their line numbers.
struct Fields<'a> {
    map: HashMap<&'a str, (usize, &'a str)>,
    path: &'a Path,
}

impl<'a> Fields<'a> {
    fn parse(text: &'a str, path: &'a Path) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: "expected key=value".into(),
                });
            };
            if map.insert(k.trim(), (i + 1, v.trim())).is_some() {
                return Err(Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: format!("duplicate key `{k}`"),
                });
            }
        }
        Ok(Self { map, path })
    }

    fn error(&self, key: &str, reason: String) -> Error {
        Error::MalformedLine {
            path: self.path.to_path_buf(),
            line: self.map.get(key).map_or(0, |e| e.0),
            reason,
        }
    }

    fn raw(&self, key: &str) -> Result<&'a str> {
        self.map
            .get(key)
            .map(|e| e.1)
            .ok_or_else(|| self.error(key, format!("missing key `{key}`")))
    }

    fn value<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.raw(key)?;
        v.parse()
            .map_err(|_| self.error(key, format!("bad value for `{key}`: `{v}`")))
    }

    fn array(&self, key: &str) -> Result<Vec<f64>> {
        self.raw(key)?
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| self.error(key, format!("bad number `{t}` in `{key}`")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::{init_mel_params, FilterShape};
    use proptest::prelude::*;

    fn sample(seed: u64, jitter: &[f64]) -> Checkpoint {
        let mut fe = init_mel_params(
            4,
            0.0,
            8000.0,
            FilterShape::Gaussian,
            ClampBounds::for_band(16000, 400),
            true,
        )
        .unwrap();
        for (c, j) in fe.centers.iter_mut().zip(jitter) {
            *c += j;
        }
        let mut state = ModelState::new(fe, seed);
        for (w, j) in state.classifier.iter_mut().zip(jitter.iter().cycle()) {
            *w = j / 7.0;
        }
        state.step_count = 123;
        state.embedding_mean[1] = jitter[0];
        state.embedding_std[2] = 0.5 + jitter[0].abs();
        Checkpoint {
            sample_rate: 16000,
            stft: StftConfig::default(),
            log_eps: 1e-6,
            state,
        }
    }

    #[test]
    fn text_layout() {
        let text = sample(5, &[0.1]).to_text();
        assert!(text.starts_with("format_version=1\n"));
        assert!(text.contains("\nshape=gaussian\n"));
        assert!(text.contains("\nlog_eps=0.000001\n"));
        assert!(text
            .lines()
            .any(|l| l.starts_with("centers=") && l.split_whitespace().count() == 4));
    }

    #[test]
    fn rejects_damaged_files() {
        let p = Path::new("ckpt");
        let good = sample(1, &[0.0]).to_text();
        let missing = good.replace("hop_ms=10\n", "");
        assert!(matches!(
            Checkpoint::from_text(&missing, p),
            Err(Error::MalformedLine { .. })
        ));
        let version = good.replace("format_version=1", "format_version=9");
        assert!(Checkpoint::from_text(&version, p).is_err());
        let short = good.replace("n_filters=4", "n_filters=5");
        assert!(Checkpoint::from_text(&short, p).is_err());
        assert!(Checkpoint::from_text("garbage", p).is_err());
    }

    proptest! {
        #[test]
        fn round_trips_exactly(seed in any::<u64>(), jitter in prop::collection::vec(-1e3..1e3f64, 1..9)) {
            let ck = sample(seed, &jitter);
            let back = Checkpoint::from_text(&ck.to_text(), Path::new("ckpt")).unwrap();
            prop_assert_eq!(back, ck);
        }
    }
}
