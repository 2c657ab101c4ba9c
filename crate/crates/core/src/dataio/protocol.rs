//! Countermeasure protocol files: five whitespace-separated fields per line,
//! `speaker utterance - system key`.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::{Error, Label, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolRecord {
    pub speaker_id: String,
    pub utterance_id: String,
    /// Attack system, `-` for bona fide speech.
    pub system_id: String,
    pub key: Label,
}

impl fmt::Display for ProtocolRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} - {} {}",
            self.speaker_id, self.utterance_id, self.system_id, self.key
        )
    }
}

/// Parses protocol text; `path` is only used in error messages.
pub fn parse_protocol_str(text: &str, path: &Path) -> Result<Vec<ProtocolRecord>> {
    let malformed = |line: usize, reason: String| Error::MalformedLine {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let &[speaker, utterance, _, system, key] = fields.as_slice() else {
            return Err(malformed(
                i + 1,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        };
        let key = key
            .parse::<Label>()
            .map_err(|_| malformed(i + 1, format!("unknown key `{key}`")))?;
        out.push(ProtocolRecord {
            speaker_id: speaker.to_string(),
            utterance_id: utterance.to_string(),
            system_id: system.to_string(),
            key,
        });
    }
    Ok(out)
}

pub fn parse_protocol(path: impl AsRef<Path>) -> Result<Vec<ProtocolRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_protocol_str(&text, path)
}

pub fn write_protocol(path: impl AsRef<Path>, records: &[ProtocolRecord]) -> Result<()> {
    let path = path.as_ref();
    let text: String = records.iter().map(|r| format!("{r}\n")).collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<ProtocolRecord>> {
        parse_protocol_str(text, Path::new("p.txt"))
    }

    #[test]
    fn parses_examples() {
        let r = parse("LA_0079 LA_T_1138215 - - bonafide\n").unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].speaker_id, "LA_0079");
        assert_eq!(r[0].utterance_id, "LA_T_1138215");
        assert_eq!(r[0].system_id, "-");
        assert_eq!(r[0].key, Label::Bonafide);

        let r = parse("\nX U - A07 spoof\n\n").unwrap();
        assert_eq!(r[0].system_id, "A07");
        assert_eq!(r[0].key, Label::Spoof);

        let r = parse("X U - A07 SPOOF").unwrap();
        assert_eq!(r[0].key, Label::Spoof);
    }

    #[test]
    fn reports_line_numbers() {
        match parse("a b - - bonafide\nX U - A07 genuine\n") {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse("a b c d\n"),
            Err(Error::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            parse("a b c d e f\n"),
            Err(Error::MalformedLine { .. })
        ));
    }

    #[test]
    fn display_round_trips() {
        let rec = ProtocolRecord {
            speaker_id: "S1".into(),
            utterance_id: "U1".into(),
            system_id: "A01".into(),
            key: Label::Spoof,
        };
        assert_eq!(rec.to_string(), "S1 U1 - A01 spoof");
        assert_eq!(parse(&rec.to_string()).unwrap(), vec![rec]);
    }
}
