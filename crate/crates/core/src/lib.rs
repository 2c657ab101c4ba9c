//! Learnable constrained filterbank front-end for spoof speech detection.
//!
//! The pipeline follows the STFT branch of a classic FBank extractor:
//!
//! ```text
//! waveform -> pre-emphasis -> framing -> |STFT|^2 -> filterbank -> log
//! ```
//!
//! except that the filterbank is parameterized per filter by a center
//! frequency and a bandwidth (both in Hz) which are trained jointly with a
//! small statistics-pooling classifier. Constraints are enforced by
//! projection after every optimizer step: clamping into fixed bounds and,
//! optionally, sorting the filters by center frequency.
//!
//! The [`metrics`] module provides the two anti-spoofing scores used to
//! compare front-ends: the equal error rate and the minimum normalized
//! tandem detection cost function.

pub mod checkpoint;
pub mod dataio;
mod error;
pub mod filterbank;
pub mod metrics;
pub mod model;
pub mod signal;

pub use error::{Error, Result};

use std::fmt;
use std::str::FromStr;

/// Ground-truth class of an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Bonafide,
    Spoof,
}

impl Label {
    /// Column of this class in the classifier output.
    pub fn index(self) -> usize {
        match self {
            Label::Bonafide => 0,
            Label::Spoof => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bonafide => "bonafide",
            Label::Spoof => "spoof",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "bonafide" => Ok(Label::Bonafide),
            "spoof" => Ok(Label::Spoof),
            _ => Err(()),
        }
    }
}
