//! NLI examples, label schemes, and their on-disk formats.
//!
//! The canonical interchange format is JSONL, one example per line:
//!
//! ```text
//! {"id":"h1","premise":"...","hypothesis":"...","label":"entailment","heuristic":"lexical_overlap"}
//! ```
//!
//! Labels are stored lowercase; `non-entailment` is normalized to
//! `non_entailment` on read.

mod embeddings;
mod tsv;

pub use embeddings::{decode_payload, ids_path, join, load_embeddings, write_embeddings, AlignedView, EmbeddingMatrix};
pub use tsv::convert_tsv;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate example id \"{0}\"")]
    DuplicateId(String),
    #[error("line {line}: label \"{label}\" is not part of the {scheme} scheme")]
    LabelNotInScheme {
        line: usize,
        label: String,
        scheme: LabelScheme,
    },
    #[error("line {line}: heuristic tags are only allowed in two_class corpora")]
    HeuristicUnderThreeClass { line: usize },
    #[error("embedding file {path}: bad magic bytes {found:?}")]
    BadMagic { path: PathBuf, found: [u8; 4] },
    #[error("embedding file {path}: header declares {expected} payload bytes, found {found}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("embedding file {path}: non-finite value at row {row}, column {col}")]
    NonFinite { path: PathBuf, row: usize, col: usize },
    #[error("embedding ids {path}: expected {expected} ids, found {found}")]
    IdCountMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("embedding matrix has no row for example id \"{0}\"")]
    MissingId(String),
    #[error("invalid embedding matrix: {0}")]
    InvalidMatrix(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Entailment,
    Neutral,
    Contradiction,
    NonEntailment,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Neutral => "neutral",
            Label::Contradiction => "contradiction",
            Label::NonEntailment => "non_entailment",
        }
    }

    /// Title-cased name used in rendered tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Label::Entailment => "Entailment",
            Label::Neutral => "Neutral",
            Label::Contradiction => "Contradiction",
            Label::NonEntailment => "Non-entailment",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "entailment" => Ok(Label::Entailment),
            "neutral" => Ok(Label::Neutral),
            "contradiction" => Ok(Label::Contradiction),
            "non_entailment" => Ok(Label::NonEntailment),
            other => Err(format!("unknown label \"{other}\"")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScheme {
    ThreeClass,
    TwoClass,
}

impl LabelScheme {
    /// Labels in class-index order. Index `i` here is class `i` in every
    /// classifier trained by this crate.
    pub fn labels(self) -> &'static [Label] {
        match self {
            LabelScheme::ThreeClass => &[Label::Entailment, Label::Neutral, Label::Contradiction],
            LabelScheme::TwoClass => &[Label::Entailment, Label::NonEntailment],
        }
    }

    pub fn num_classes(self) -> usize {
        self.labels().len()
    }

    pub fn contains(self, label: Label) -> bool {
        self.labels().contains(&label)
    }

    pub fn class_index(self, label: Label) -> Option<usize> {
        self.labels().iter().position(|&l| l == label)
    }
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelScheme::ThreeClass => "three_class",
            LabelScheme::TwoClass => "two_class",
        })
    }
}

impl FromStr for LabelScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "three_class" | "3" => Ok(LabelScheme::ThreeClass),
            "two_class" | "2" => Ok(LabelScheme::TwoClass),
            other => Err(format!("unknown label scheme \"{other}\"")),
        }
    }
}

/// The three HANS heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    LexicalOverlap,
    Subsequence,
    Constituent,
}

impl Heuristic {
    pub const ALL: [Heuristic; 3] = [
        Heuristic::LexicalOverlap,
        Heuristic::Subsequence,
        Heuristic::Constituent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Heuristic::LexicalOverlap => "lexical_overlap",
            Heuristic::Subsequence => "subsequence",
            Heuristic::Constituent => "constituent",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "lexical_overlap" => Ok(Heuristic::LexicalOverlap),
            "subsequence" => Ok(Heuristic::Subsequence),
            "constituent" => Ok(Heuristic::Constituent),
            other => Err(format!("unknown heuristic \"{other}\"")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heuristic: Option<Heuristic>,
}

/// Wire form of an [`Example`]; labels are parsed leniently.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExample {
    id: String,
    premise: String,
    hypothesis: String,
    label: String,
    #[serde(default)]
    heuristic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub scheme: LabelScheme,
    pub examples: Vec<Example>,
}

impl Corpus {
    /// Builds a corpus, enforcing every per-example invariant. `line` numbers
    /// in errors are 1-based positions in `examples`.
    pub fn new(name: impl Into<String>, scheme: LabelScheme, examples: Vec<Example>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(examples.len());
        for (i, ex) in examples.iter().enumerate() {
            validate_example(ex, scheme, i + 1)?;
            if !seen.insert(ex.id.as_str()) {
                return Err(CorpusError::DuplicateId(ex.id.clone()));
            }
        }
        Ok(Corpus {
            name: name.into(),
            scheme,
            examples,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.id.as_str())
    }

    /// Class index of every example's gold label under the corpus scheme.
    pub fn gold_indices(&self) -> Vec<usize> {
        self.examples
            .iter()
            .map(|e| {
                self.scheme
                    .class_index(e.label)
                    .expect("corpus invariant: labels belong to the scheme")
            })
            .collect()
    }

    /// Keeps only examples whose id is in `ids`, preserving corpus order.
    pub fn retain_ids(&self, ids: &HashSet<&str>) -> Corpus {
        Corpus {
            name: self.name.clone(),
            scheme: self.scheme,
            examples: self
                .examples
                .iter()
                .filter(|e| ids.contains(e.id.as_str()))
                .cloned()
                .collect(),
        }
    }
}

fn validate_example(ex: &Example, scheme: LabelScheme, line: usize) -> Result<()> {
    let malformed = |message: &str| CorpusError::Malformed {
        line,
        message: message.to_string(),
    };
    if ex.id.is_empty() {
        return Err(malformed("empty id"));
    }
    if ex.premise.is_empty() {
        return Err(malformed("empty premise"));
    }
    if ex.hypothesis.is_empty() {
        return Err(malformed("empty hypothesis"));
    }
    if !scheme.contains(ex.label) {
        return Err(CorpusError::LabelNotInScheme {
            line,
            label: ex.label.to_string(),
            scheme,
        });
    }
    if ex.heuristic.is_some() && scheme == LabelScheme::ThreeClass {
        return Err(CorpusError::HeuristicUnderThreeClass { line });
    }
    Ok(())
}

/// Parses JSONL text into a corpus. Blank lines are skipped but still count
/// toward reported line numbers.
pub fn parse_corpus(name: &str, text: &str, scheme: LabelScheme) -> Result<Corpus> {
    parse_lines(name, text.lines().map(|l| Ok(l.to_string())), scheme)
}

fn parse_lines<I>(name: &str, lines: I, scheme: LabelScheme) -> Result<Corpus>
where
    I: Iterator<Item = Result<String>>,
{
    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawExample = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let label = raw.label.parse::<Label>().map_err(|_| CorpusError::LabelNotInScheme {
            line: line_no,
            label: raw.label.clone(),
            scheme,
        })?;
        let heuristic = match raw.heuristic.as_deref() {
            None => None,
            Some(h) => Some(h.parse::<Heuristic>().map_err(|message| CorpusError::Malformed {
                line: line_no,
                message,
            })?),
        };
        let ex = Example {
            id: raw.id,
            premise: raw.premise,
            hypothesis: raw.hypothesis,
            label,
            heuristic,
        };
        validate_example(&ex, scheme, line_no)?;
        if !seen.insert(ex.id.clone()) {
            return Err(CorpusError::DuplicateId(ex.id));
        }
        examples.push(ex);
    }
    Ok(Corpus {
        name: name.to_string(),
        scheme,
        examples,
    })
}

/// Reads a JSONL corpus. The corpus name is the file stem.
pub fn ingest_corpus(path: &Path, scheme: LabelScheme) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let lines = BufReader::new(file)
        .lines()
        .map(|l| l.map_err(|e| CorpusError::io(path, e)));
    parse_lines(&name, lines, scheme)
}

/// Serializes a corpus as JSONL (one compact object per line, file order).
pub fn corpus_to_jsonl(corpus: &Corpus) -> String {
    let mut out = String::new();
    for ex in &corpus.examples {
        out.push_str(&serde_json::to_string(ex).expect("examples always serialize"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(corpus_to_jsonl(corpus).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CorpusError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HANS_LINE: &str = r#"{"id":"h1","premise":"The banker near the judge saw the actor.","hypothesis":"The banker saw the actor.","label":"entailment","heuristic":"lexical_overlap"}"#;

    #[test]
    fn parses_hans_style_line() {
        let c = parse_corpus("hans", HANS_LINE, LabelScheme::TwoClass).unwrap();
        assert_eq!(c.len(), 1);
        let ex = &c.examples[0];
        assert_eq!(ex.id, "h1");
        assert_eq!(ex.premise, "The banker near the judge saw the actor.");
        assert_eq!(ex.label, Label::Entailment);
        assert_eq!(ex.heuristic, Some(Heuristic::LexicalOverlap));
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        let c = parse_corpus("e", "", LabelScheme::ThreeClass).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn duplicate_id_is_named() {
        let text = concat!(
            r#"{"id":"a","premise":"p","hypothesis":"h","label":"neutral"}"#,
            "\n",
            r#"{"id":"a","premise":"p2","hypothesis":"h2","label":"entailment"}"#
        );
        let err = parse_corpus("d", text, LabelScheme::ThreeClass).unwrap_err();
        assert!(matches!(&err, CorpusError::DuplicateId(id) if id == "a"));
        assert!(err.to_string().contains("\"a\""));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{}\n\n{{not json", r#"{"id":"a","premise":"p","hypothesis":"h","label":"neutral"}"#);
        match parse_corpus("m", &text, LabelScheme::ThreeClass).unwrap_err() {
            CorpusError::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn label_outside_scheme_rejected() {
        let line = r#"{"id":"a","premise":"p","hypothesis":"h","label":"non-entailment"}"#;
        assert!(matches!(
            parse_corpus("x", line, LabelScheme::ThreeClass),
            Err(CorpusError::LabelNotInScheme { line: 1, .. })
        ));
        let c = parse_corpus("x", line, LabelScheme::TwoClass).unwrap();
        assert_eq!(c.examples[0].label, Label::NonEntailment);
    }

    #[test]
    fn heuristic_under_three_class_rejected() {
        let line = r#"{"id":"a","premise":"p","hypothesis":"h","label":"neutral","heuristic":"subsequence"}"#;
        assert!(matches!(
            parse_corpus("x", line, LabelScheme::ThreeClass),
            Err(CorpusError::HeuristicUnderThreeClass { line: 1 })
        ));
    }

    #[test]
    fn empty_fields_rejected() {
        let line = r#"{"id":"","premise":"p","hypothesis":"h","label":"neutral"}"#;
        assert!(parse_corpus("x", line, LabelScheme::ThreeClass).is_err());
        let line = r#"{"id":"a","premise":"","hypothesis":"h","label":"neutral"}"#;
        assert!(parse_corpus("x", line, LabelScheme::ThreeClass).is_err());
    }

    #[test]
    fn labels_normalize_to_lowercase() {
        assert_eq!("Non-Entailment".parse::<Label>().unwrap(), Label::NonEntailment);
        assert_eq!("CONTRADICTION".parse::<Label>().unwrap(), Label::Contradiction);
        assert_eq!(
            serde_json::to_string(&Label::NonEntailment).unwrap(),
            "\"non_entailment\""
        );
    }

    #[test]
    fn jsonl_reparse_is_identical() {
        let c = parse_corpus("hans", HANS_LINE, LabelScheme::TwoClass).unwrap();
        let again = parse_corpus("hans", &corpus_to_jsonl(&c), LabelScheme::TwoClass).unwrap();
        assert_eq!(c, again);
    }
}
