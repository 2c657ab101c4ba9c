use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use fastaudio::checkpoint::Checkpoint;
use fastaudio::dataio::text::{read_scores, write_features, write_scores};
use fastaudio::dataio::{parse_protocol, read_wav, write_corpus, ProtocolRecord, Split};
use fastaudio::filterbank::build_filter_matrix;
use fastaudio::metrics::{MetricReport, ScoreSet, TdcfParams};
use fastaudio::model::{
    bonafide_log_prob, extract_features, fit_embedding_norm, train as train_model, Example,
    ModelState,
};
use fastaudio::signal::{spectrogram, StftConfig, Waveform};
use fastaudio::{Error, Label};

use crate::{CliError, RunConfig};

type Result<T> = std::result::Result<T, CliError>;

fn stdout_err(e: std::io::Error) -> CliError {
    Error::io("<stdout>", e).into()
}

fn read_checked(path: &Path, sample_rate: u32) -> Result<Waveform> {
    let wave = read_wav(path)?;
    if wave.sample_rate() != sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: sample_rate,
            found: wave.sample_rate(),
        }
        .into());
    }
    Ok(wave)
}

fn load_split(
    dir: &Path,
    split: Split,
    sample_rate: u32,
    stft: &StftConfig,
) -> Result<(Vec<ProtocolRecord>, Vec<Example>)> {
    let records = parse_protocol(split.protocol_path(dir))?;
    let examples = records
        .iter()
        .map(|r| {
            let wave = read_checked(&split.wav_path(dir, &r.utterance_id), sample_rate)?;
            Ok(Example::from_waveform(&r.utterance_id, r.key, &wave, stft)?)
        })
        .collect::<Result<_>>()?;
    Ok((records, examples))
}

pub fn synth(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let counts = write_corpus(dir, &cfg.synth())?;
    writeln!(out, "train={}\neval={}", counts.train, counts.eval).map_err(stdout_err)
}

pub fn extract(cfg: &RunConfig, wav: &Path, checkpoint: Option<&Path>, path: &Path) -> Result<()> {
    let (sample_rate, stft, frontend, eps) = match checkpoint {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            (ck.sample_rate, ck.stft, ck.state.frontend, ck.log_eps)
        }
        None => (
            cfg.sample_rate,
            cfg.stft(),
            cfg.init_frontend()?,
            cfg.log_eps,
        ),
    };
    let wave = read_checked(wav, sample_rate)?;
    let features = extract_features(&wave, &stft, &frontend, eps)?;
    write_features(path, &features.values)?;
    Ok(())
}

pub fn train(cfg: &RunConfig, data_dir: &Path, path: &Path, out: &mut dyn Write) -> Result<()> {
    let stft = cfg.stft();
    stft.validate(cfg.sample_rate)?;
    let (_, dataset) = load_split(data_dir, Split::Train, cfg.sample_rate, &stft)?;
    let mut init = ModelState::new(cfg.init_frontend()?, cfg.seed);
    let train_cfg = cfg.train();
    fit_embedding_norm(&dataset, &mut init, train_cfg.log_eps)?;
    let outcome = train_model(&dataset, &train_cfg, &init)?;
    for (epoch, loss) in outcome.losses.iter().enumerate() {
        writeln!(out, "epoch={epoch} loss={loss}").map_err(stdout_err)?;
    }
    Checkpoint {
        sample_rate: cfg.sample_rate,
        stft,
        log_eps: train_cfg.log_eps,
        state: outcome.state,
    }
    .save(path)?;
    Ok(())
}

/// One line per eval utterance, in protocol order.
pub fn score(checkpoint: &Path, data_dir: &Path, path: &Path) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let records = parse_protocol(Split::Eval.protocol_path(data_dir))?;
    let scores = records
        .iter()
        .map(|r| {
            let wave = read_checked(
                &Split::Eval.wav_path(data_dir, &r.utterance_id),
                ck.sample_rate,
            )?;
            let spec = spectrogram(&wave, &ck.stft)?;
            Ok((
                r.utterance_id.clone(),
                bonafide_log_prob(&spec, &ck.state, ck.log_eps)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    write_scores(path, &scores)?;
    Ok(())
}

pub fn eval(scores: &Path, protocol: &Path, beta: f64, out: &mut dyn Write) -> Result<()> {
    let scored = read_scores(scores)?;
    let labels: std::collections::HashMap<String, Label> = parse_protocol(protocol)?
        .into_iter()
        .map(|r| (r.utterance_id, r.key))
        .collect();
    let mut set = ScoreSet::default();
    for (utt, s) in scored {
        match labels.get(&utt) {
            Some(Label::Bonafide) => set.bona_scores.push(s),
            Some(Label::Spoof) => set.spoof_scores.push(s),
            None => {
                return Err(CliError::Mismatch(format!(
                    "utterance `{utt}` is not in {}",
                    protocol.display()
                )))
            }
        }
    }
    let report = MetricReport::compute(&set, TdcfParams { beta })?;
    writeln!(out, "{report}").map_err(stdout_err)
}

pub fn export_filters(cfg: &RunConfig, checkpoint: Option<&Path>, path: &Path) -> Result<()> {
    let (grid, frontend) = match checkpoint {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            (ck.stft.bin_freqs(ck.sample_rate), ck.state.frontend)
        }
        None => (cfg.stft().bin_freqs(cfg.sample_rate), cfg.init_frontend()?),
    };
    let matrix = build_filter_matrix(&frontend, &grid);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    matrix
        .write_csv(BufWriter::new(file))
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}
