//! File formats and corpus generation.
//!
//! Corpus directories written by [`synth::write_corpus`] and read by the CLI
//! look like this:
//!
//! ```text
//! <dir>/train_protocol.txt
//! <dir>/train/<utterance_id>.wav
//! <dir>/eval_protocol.txt
//! <dir>/eval/<utterance_id>.wav
//! ```

pub mod protocol;
pub mod synth;
pub mod text;
pub mod wav;

pub use protocol::{parse_protocol, ProtocolRecord};
pub use synth::{generate_synthetic, write_corpus, SynthConfig};
pub use wav::{read_wav, write_wav};

use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
        }
    }

    pub fn protocol_path(self, dir: &Path) -> PathBuf {
        dir.join(format!("{}_protocol.txt", self.name()))
    }

    pub fn wav_path(self, dir: &Path, utterance_id: &str) -> PathBuf {
        dir.join(self.name()).join(format!("{utterance_id}.wav"))
    }
}
