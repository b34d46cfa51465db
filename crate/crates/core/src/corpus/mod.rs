//! Transcripts, books, labels and fold assignment.

mod folds;
pub mod synthetic;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textproc::{self, EntitySpan};

pub use folds::{stratified_folds, transcript_folds, FoldAssignment};
pub use synthetic::generate_synthetic_corpus;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate turn ({transcript_id}, {turn_id})")]
    DuplicateKey {
        line: usize,
        transcript_id: String,
        turn_id: String,
    },
    #[error("invalid book: {0}")]
    InvalidBook(String),
    #[error("turn ({transcript_id}, {turn_id}) has no gold label")]
    Unlabeled {
        transcript_id: String,
        turn_id: String,
    },
    #[error("cannot build {k} folds: {reason}")]
    Folds { k: usize, reason: String },
    #[error("synthetic corpus needs at least 30 turns, asked for {0}")]
    TooSmall(usize),
}

/// Ordinal specificity: low < medium < high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SpecificityLabel {
    Low = 0,
    Medium = 1,
    High = 2,
}

impl SpecificityLabel {
    pub const ALL: [SpecificityLabel; 3] = [
        SpecificityLabel::Low,
        SpecificityLabel::Medium,
        SpecificityLabel::High,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpecificityLabel::Low => "low",
            SpecificityLabel::Medium => "med",
            SpecificityLabel::High => "high",
        }
    }
}

impl fmt::Display for SpecificityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpecificityLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(SpecificityLabel::Low),
            "med" => Ok(SpecificityLabel::Medium),
            "high" => Ok(SpecificityLabel::High),
            _ => Err(format!("label {s:?} is not one of low, med, high")),
        }
    }
}

impl From<SpecificityLabel> for String {
    fn from(l: SpecificityLabel) -> String {
        l.as_str().to_string()
    }
}

impl TryFrom<String> for SpecificityLabel {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TurnKey {
    pub transcript_id: String,
    pub turn_id: String,
}

impl fmt::Display for TurnKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.transcript_id, self.turn_id)
    }
}

/// One turn at talk.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub transcript_id: String,
    pub turn_id: String,
    pub speaker_id: String,
    pub text: String,
    pub gold_label: Option<SpecificityLabel>,
    /// Second annotator's label, used only for agreement statistics.
    pub second_label: Option<SpecificityLabel>,
    /// Externally computed specificity score in [0, 1].
    pub external_score: Option<f64>,
    pub external_pos: Option<Vec<String>>,
    pub external_entities: Option<Vec<EntitySpan>>,
}

impl Turn {
    pub fn new(transcript_id: &str, turn_id: &str, speaker_id: &str, text: &str) -> Self {
        Turn {
            transcript_id: transcript_id.to_string(),
            turn_id: turn_id.to_string(),
            speaker_id: speaker_id.to_string(),
            text: text.to_string(),
            gold_label: None,
            second_label: None,
            external_score: None,
            external_pos: None,
            external_entities: None,
        }
    }

    pub fn with_label(mut self, label: SpecificityLabel) -> Self {
        self.gold_label = Some(label);
        self
    }

    pub fn key(&self) -> TurnKey {
        TurnKey {
            transcript_id: self.transcript_id.clone(),
            turn_id: self.turn_id.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.text.trim().is_empty() {
            return Err("text is empty".into());
        }
        if let Some(s) = self.external_score {
            if !(0.0..=1.0).contains(&s) {
                return Err(format!("score out of range: {s}"));
            }
        }
        let needs_tokens = self.external_pos.is_some() || self.external_entities.is_some();
        if needs_tokens {
            let n = textproc::tokenize(&self.text).len();
            if let Some(pos) = &self.external_pos {
                if pos.len() != n {
                    return Err(format!("pos has {} tags but text has {n} tokens", pos.len()));
                }
            }
            if let Some(ents) = &self.external_entities {
                textproc::validate_spans(ents, n)?;
            }
        }
        Ok(())
    }
}

/// Wire format of one transcript line.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TurnRecord {
    transcript_id: String,
    turn_id: String,
    speaker_id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pos: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entities: Option<Vec<EntitySpan>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label2: Option<String>,
}

impl TurnRecord {
    fn into_turn(self) -> Result<Turn, String> {
        let parse = |l: Option<String>| l.map(|s| s.parse::<SpecificityLabel>()).transpose();
        let turn = Turn {
            gold_label: parse(self.label)?,
            second_label: parse(self.label2)?,
            transcript_id: self.transcript_id,
            turn_id: self.turn_id,
            speaker_id: self.speaker_id,
            text: self.text,
            external_score: self.score,
            external_pos: self.pos,
            external_entities: self.entities,
        };
        turn.validate()?;
        Ok(turn)
    }

    fn from_turn(t: &Turn) -> Self {
        TurnRecord {
            transcript_id: t.transcript_id.clone(),
            turn_id: t.turn_id.clone(),
            speaker_id: t.speaker_id.clone(),
            text: t.text.clone(),
            label: t.gold_label.map(String::from),
            score: t.external_score,
            pos: t.external_pos.clone(),
            entities: t.external_entities.clone(),
            label2: t.second_label.map(String::from),
        }
    }
}

/// Parses JSON-lines transcript records. Blank lines are skipped.
pub fn parse_transcripts<R: BufRead>(reader: R) -> Result<Vec<Turn>, CorpusError> {
    let mut turns = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TurnRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
        let turn = record.into_turn().map_err(|message| CorpusError::Malformed {
            line: lineno,
            message,
        })?;
        if !seen.insert(turn.key()) {
            return Err(CorpusError::DuplicateKey {
                line: lineno,
                transcript_id: turn.transcript_id,
                turn_id: turn.turn_id,
            });
        }
        turns.push(turn);
    }
    Ok(turns)
}

pub fn load_transcripts(path: &Path) -> Result<Vec<Turn>, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_transcripts(BufReader::new(file))
}

/// Writes turns in the canonical record form, one JSON object per line.
pub fn write_transcripts<W: Write>(turns: &[Turn], mut out: W) -> io::Result<()> {
    for t in turns {
        serde_json::to_writer(&mut out, &TurnRecord::from_turn(t))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn transcripts_to_string(turns: &[Turn]) -> String {
    let mut buf = Vec::new();
    write_transcripts(turns, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterName {
    pub first: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last: Option<String>,
    #[serde(default)]
    pub nicknames: Vec<String>,
}

impl CharacterName {
    /// Every surface form a mention may take.
    pub fn forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.first.as_str())
            .chain(self.last.as_deref())
            .chain(self.nicknames.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Book {
    pub title: String,
    pub characters: Vec<CharacterName>,
    pub summary_text: String,
    pub summary_sentences: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BookRecord {
    title: String,
    #[serde(default)]
    characters: Vec<CharacterName>,
    #[serde(default)]
    summary: Option<String>,
}

impl Book {
    pub fn new(title: &str, characters: Vec<CharacterName>, summary: &str) -> Result<Self, CorpusError> {
        if summary.trim().is_empty() {
            return Err(CorpusError::InvalidBook("missing summary".into()));
        }
        for c in &characters {
            if c.first.trim().is_empty() {
                return Err(CorpusError::InvalidBook("character with empty first name".into()));
            }
            for name in std::iter::once(&c.first).chain(c.last.as_ref()) {
                if textproc::tokenize(name).len() != 1 {
                    return Err(CorpusError::InvalidBook(format!(
                        "character name {name:?} is not a single token"
                    )));
                }
            }
        }
        Ok(Book {
            title: title.to_string(),
            characters,
            summary_text: summary.to_string(),
            summary_sentences: textproc::split_sentences(summary),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let rec: BookRecord = serde_json::from_str(text).map_err(|e| CorpusError::Malformed {
            line: e.line(),
            message: e.to_string(),
        })?;
        let summary = rec
            .summary
            .ok_or_else(|| CorpusError::InvalidBook("missing summary".into()))?;
        Book::new(&rec.title, rec.characters, &summary)
    }

    pub fn to_json(&self) -> String {
        let rec = BookRecord {
            title: self.title.clone(),
            characters: self.characters.clone(),
            summary: Some(self.summary_text.clone()),
        };
        serde_json::to_string_pretty(&rec).expect("book serializes")
    }
}

pub fn load_book(path: &Path) -> Result<Book, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Book::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(extra: &str) -> String {
        format!(r#"{{"transcript_id":"T1","turn_id":"1","speaker_id":"S1","text":"I did not like Biff"{extra}}}"#)
    }

    #[test]
    fn three_records_in_order() {
        let text = [
            line(r#","label":"low""#),
            line(r#","label":"med""#).replace("\"1\"", "\"2\""),
            line(r#","label":"high""#).replace("\"1\"", "\"3\""),
        ]
        .join("\n");
        let turns = parse_transcripts(text.as_bytes()).unwrap();
        assert_eq!(turns.len(), 3);
        let ids: Vec<&str> = turns.iter().map(|t| t.turn_id.as_str()).collect();
        assert_eq!(ids, vec!["1", "2", "3"]);
        assert_eq!(turns[2].gold_label.unwrap().ordinal(), 2);
    }

    #[test]
    fn score_out_of_range() {
        let err = parse_transcripts(line(r#","score":1.3"#).as_bytes()).unwrap_err();
        assert!(err.to_string().contains("score out of range"), "{err}");
    }

    #[test]
    fn unknown_label_rejected() {
        let err = parse_transcripts(line(r#","label":"medium""#).as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 1, .. }));
    }

    #[test]
    fn duplicate_key_rejected() {
        let text = format!("{}\n{}", line(""), line(""));
        assert!(matches!(
            parse_transcripts(text.as_bytes()),
            Err(CorpusError::DuplicateKey { line: 2, .. })
        ));
    }

    #[test]
    fn malformed_json_reports_line() {
        let text = format!("{}\n\n{{not json", line(""));
        assert!(matches!(
            parse_transcripts(text.as_bytes()),
            Err(CorpusError::Malformed { line: 3, .. })
        ));
    }

    #[test]
    fn empty_text_rejected() {
        let rec = r#"{"transcript_id":"T","turn_id":"1","speaker_id":"S","text":"   "}"#;
        assert!(parse_transcripts(rec.as_bytes()).is_err());
    }

    #[test]
    fn pos_length_checked() {
        assert!(parse_transcripts(line(r#","pos":["PRP","VBD"]"#).as_bytes()).is_err());
        let ok = line(r#","pos":["PRP","VBD","RB","VB","NNP"]"#);
        assert!(parse_transcripts(ok.as_bytes()).is_ok());
    }

    #[test]
    fn entities_checked() {
        let ok = line(r#","entities":[{"start":4,"end":5,"category":"PERSON"}]"#);
        let turns = parse_transcripts(ok.as_bytes()).unwrap();
        assert_eq!(turns[0].external_entities.as_ref().unwrap().len(), 1);
        let bad = line(r#","entities":[{"start":4,"end":9,"category":"PERSON"}]"#);
        assert!(parse_transcripts(bad.as_bytes()).is_err());
    }

    #[test]
    fn load_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        fs::write(&path, line(r#","label":"high""#)).unwrap();
        let turns = load_transcripts(&path).unwrap();
        assert_eq!(turns[0].gold_label, Some(SpecificityLabel::High));
        assert!(matches!(
            load_transcripts(&dir.path().join("missing.jsonl")),
            Err(CorpusError::Io { .. })
        ));
    }

    #[test]
    fn book_structure() {
        let json = r#"{"title":"Death of a Salesman",
            "characters":[{"first":"Willy","last":"Loman","nicknames":[]},{"first":"Biff","nicknames":["Biffo"]}],
            "summary":"Willy Loman is a salesman. He has two sons. Biff is the elder."}"#;
        let book = Book::from_json(json).unwrap();
        assert_eq!(book.characters.len(), 2);
        assert_eq!(book.summary_sentences.len(), 3);
    }

    #[test]
    fn book_degenerate_cases() {
        let book = Book::from_json(r#"{"title":"X","characters":[],"summary":"One sentence only."}"#).unwrap();
        assert!(book.characters.is_empty());
        assert_eq!(book.summary_sentences.len(), 1);
        assert!(matches!(
            Book::from_json(r#"{"title":"X","characters":[]}"#),
            Err(CorpusError::InvalidBook(_))
        ));
        assert!(matches!(
            Book::from_json(r#"{"title":"X","characters":[{"first":" "}],"summary":"S."}"#),
            Err(CorpusError::InvalidBook(_))
        ));
    }

    #[test]
    fn book_json_roundtrip() {
        let book = synthetic::synthetic_book();
        assert_eq!(Book::from_json(&book.to_json()).unwrap(), book);
    }

    fn arb_turn() -> impl Strategy<Value = Turn> {
        (
            "[a-z]{1,4}",
            "[0-9]{1,3}",
            "[A-Za-z ,.!?']{0,40}[a-z]",
            proptest::option::of(0usize..3),
            proptest::option::of(0.0f64..=1.0),
        )
            .prop_map(|(tid, uid, text, label, score)| {
                let mut t = Turn::new(&tid, &uid, "S", &text);
                t.gold_label = label.and_then(SpecificityLabel::from_ordinal);
                t.external_score = score;
                t
            })
    }

    proptest! {
        #[test]
        fn ingestion_roundtrip(mut turns in proptest::collection::vec(arb_turn(), 0..8)) {
            let mut seen = HashSet::new();
            turns.retain(|t| seen.insert(t.key()));
            let text = transcripts_to_string(&turns);
            let back = parse_transcripts(text.as_bytes()).unwrap();
            prop_assert_eq!(&back, &turns);
            prop_assert_eq!(transcripts_to_string(&back), text);
        }
    }
}
