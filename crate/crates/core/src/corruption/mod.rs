//! Character-level corruption of content words.

use std::collections::HashSet;
use std::ops::Range;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, Example};
use crate::hashing::{fnv1a64, mix64};

pub const STOPWORDS_ID: &str = "en-v1";
const STOPWORDS_EN_V1: &str = include_str!("../../data/stopwords-en-v1.txt");
pub const DEFAULT_WORD_RATE: f64 = 0.3;

#[derive(Debug, Error)]
pub enum CorruptionError {
    #[error("word rate must lie in (0, 1], got {0}")]
    BadRate(f64),
    #[error("charset needs at least two distinct characters")]
    BadCharset,
    #[error("unknown stopword list \"{0}\"")]
    UnknownStopwords(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T> = std::result::Result<T, CorruptionError>;

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_EN_V1
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Insert,
    Substitute,
    Swap,
    Delete,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Insert => "insert",
            Strategy::Substitute => "substitute",
            Strategy::Swap => "swap",
            Strategy::Delete => "delete",
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "insert" => Ok(Strategy::Insert),
            "substitute" => Ok(Strategy::Substitute),
            "swap" => Ok(Strategy::Swap),
            "delete" => Ok(Strategy::Delete),
            other => Err(format!("unknown corruption strategy \"{other}\"")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionConfig {
    pub strategy: Strategy,
    pub word_rate: f64,
    pub seed: u64,
    pub stopwords: String,
    /// Characters used by insert and substitute.
    pub charset: Vec<char>,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig {
            strategy: Strategy::Insert,
            word_rate: DEFAULT_WORD_RATE,
            seed: 0,
            stopwords: STOPWORDS_ID.to_string(),
            charset: ('a'..='z').collect(),
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.word_rate > 0.0 && self.word_rate <= 1.0) {
            return Err(CorruptionError::BadRate(self.word_rate));
        }
        let distinct: HashSet<char> = self.charset.iter().copied().collect();
        if distinct.len() < 2 {
            return Err(CorruptionError::BadCharset);
        }
        if self.stopwords != STOPWORDS_ID {
            return Err(CorruptionError::UnknownStopwords(self.stopwords.clone()));
        }
        Ok(())
    }

    /// Number of words to corrupt among `n` content words.
    pub fn words_to_corrupt(&self, n: usize) -> usize {
        if n == 0 {
            0
        } else {
            ((self.word_rate * n as f64).round() as usize).clamp(1, n)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentWord<'a> {
    pub token: &'a str,
    /// Byte range of the token in the source text.
    pub span: Range<usize>,
    /// Position among all whitespace-separated tokens.
    pub index: usize,
}

/// Lowercased token with leading and trailing punctuation removed;
/// apostrophes are kept.
fn normalize(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
        .to_lowercase()
}

/// Whitespace tokens with at least two alphabetic characters whose
/// normalized form is not a stopword.
pub fn content_words(text: &str) -> Vec<ContentWord<'_>> {
    let mut out = Vec::new();
    let mut index = 0;
    let mut start = None;
    let bounds = text.char_indices().chain(std::iter::once((text.len(), ' ')));
    for (i, c) in bounds {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                let token = &text[s..i];
                let alpha = token.chars().filter(|c| c.is_alphabetic()).count();
                if alpha >= 2 && !is_stopword(&normalize(token)) {
                    out.push(ContentWord {
                        token,
                        span: s..i,
                        index,
                    });
                }
                index += 1;
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// A single character edit; positions count chars, not bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum CharOp {
    Insert { position: usize, ch: char },
    Substitute { position: usize, ch: char },
    Swap { position: usize },
    Delete { position: usize },
}

/// Applies `op` to `word`. Out-of-range positions leave the word unchanged.
pub fn apply_op(word: &str, op: CharOp) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    match op {
        CharOp::Insert { position, ch } if position <= chars.len() => chars.insert(position, ch),
        CharOp::Substitute { position, ch } if position < chars.len() => chars[position] = ch,
        CharOp::Swap { position } if position + 1 < chars.len() => chars.swap(position, position + 1),
        CharOp::Delete { position } if position < chars.len() => {
            chars.remove(position);
        }
        _ => {}
    }
    chars.into_iter().collect()
}

fn pick_other<R: Rng>(rng: &mut R, charset: &[char], not: char) -> char {
    let others: Vec<char> = charset.iter().copied().filter(|&c| c != not).collect();
    *others.choose(rng).expect("validated charset has two distinct chars")
}

/// Draws an edit that changes `word`.
fn draw_op<R: Rng>(rng: &mut R, word: &str, strategy: Strategy, charset: &[char]) -> CharOp {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    let strategy = match strategy {
        Strategy::Swap | Strategy::Delete if n < 2 => Strategy::Insert,
        s => s,
    };
    match strategy {
        Strategy::Insert => CharOp::Insert {
            position: rng.gen_range(0..=n),
            ch: *charset.choose(rng).expect("non-empty charset"),
        },
        Strategy::Substitute => {
            let position = rng.gen_range(0..n);
            CharOp::Substitute {
                position,
                ch: pick_other(rng, charset, chars[position]),
            }
        }
        Strategy::Delete => CharOp::Delete {
            position: rng.gen_range(0..n),
        },
        Strategy::Swap => {
            let first = rng.gen_range(0..n - 1);
            if chars[first] != chars[first + 1] {
                return CharOp::Swap { position: first };
            }
            let pairs: Vec<usize> = (0..n - 1).filter(|&i| chars[i] != chars[i + 1]).collect();
            match pairs.choose(rng) {
                Some(&position) => CharOp::Swap { position },
                None => draw_op(rng, word, Strategy::Substitute, charset),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordEdit {
    /// Position among whitespace-separated tokens.
    pub index: usize,
    pub original: String,
    pub corrupted: String,
    #[serde(flatten)]
    pub op: CharOp,
}

fn corrupt_with<R: Rng>(text: &str, config: &CorruptionConfig, rng: &mut R) -> (String, Vec<WordEdit>) {
    let words = content_words(text);
    let k = config.words_to_corrupt(words.len());
    if k == 0 {
        return (text.to_string(), Vec::new());
    }
    let mut chosen = index::sample(rng, words.len(), k).into_vec();
    chosen.sort_unstable();
    let mut edits = Vec::with_capacity(k);
    let mut out = String::with_capacity(text.len() + k);
    let mut cursor = 0;
    for i in chosen {
        let w = &words[i];
        let op = draw_op(rng, w.token, config.strategy, &config.charset);
        let corrupted = apply_op(w.token, op);
        debug_assert_ne!(corrupted, w.token);
        out.push_str(&text[cursor..w.span.start]);
        out.push_str(&corrupted);
        cursor = w.span.end;
        edits.push(WordEdit {
            index: w.index,
            original: w.token.to_string(),
            corrupted,
            op,
        });
    }
    out.push_str(&text[cursor..]);
    (out, edits)
}

/// Corrupts `max(1, round(rate * n))` of the `n` content words in `text`,
/// seeded by `config.seed` alone.
pub fn corrupt(text: &str, config: &CorruptionConfig) -> Result<(String, Vec<WordEdit>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(corrupt_with(text, config, &mut rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Premise,
    Hypothesis,
}

impl Field {
    fn tag(self) -> u64 {
        fnv1a64(match self {
            Field::Premise => b"premise",
            Field::Hypothesis => b"hypothesis",
        })
    }
}

/// Seed for one field of one example: `seed ⊕ hash(id) ⊕ tag`, mixed.
pub fn field_seed(seed: u64, id: &str, field: Field) -> u64 {
    mix64(seed ^ fnv1a64(id.as_bytes()) ^ field.tag())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub id: String,
    pub premise: Vec<WordEdit>,
    pub hypothesis: Vec<WordEdit>,
}

pub fn corrupt_example(example: &Example, config: &CorruptionConfig) -> Result<(Example, CorruptionRecord)> {
    config.validate()?;
    let run = |text: &str, field| {
        let mut rng = ChaCha8Rng::seed_from_u64(field_seed(config.seed, &example.id, field));
        corrupt_with(text, config, &mut rng)
    };
    let (premise, p_edits) = run(&example.premise, Field::Premise);
    let (hypothesis, h_edits) = run(&example.hypothesis, Field::Hypothesis);
    Ok((
        Example {
            premise,
            hypothesis,
            ..example.clone()
        },
        CorruptionRecord {
            id: example.id.clone(),
            premise: p_edits,
            hypothesis: h_edits,
        },
    ))
}

/// Corrupts both fields of every example; ids and labels are untouched.
pub fn corrupt_corpus(corpus: &Corpus, config: &CorruptionConfig) -> Result<(Corpus, Vec<CorruptionRecord>)> {
    config.validate()?;
    let mut examples = Vec::with_capacity(corpus.len());
    let mut records = Vec::with_capacity(corpus.len());
    for ex in &corpus.examples {
        let (e, r) = corrupt_example(ex, config)?;
        examples.push(e);
        records.push(r);
    }
    Ok((Corpus::new(corpus.name.clone(), corpus.scheme, examples)?, records))
}

pub fn records_to_jsonl(records: &[CorruptionRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(strategy: Strategy, rate: f64, seed: u64) -> CorruptionConfig {
        CorruptionConfig {
            strategy,
            word_rate: rate,
            seed,
            ..Default::default()
        }
    }

    fn tokens(text: &str) -> Vec<&str> {
        content_words(text).iter().map(|w| w.token).collect()
    }

    #[test]
    fn content_word_rule() {
        assert_eq!(tokens("do it now, think' bout it later"), vec!["now,", "think'", "bout", "later"]);
        assert!(tokens("").is_empty());
        assert_eq!(tokens("a I ok"), vec!["ok"]);
        assert_eq!(tokens("The cat"), vec!["cat"]);
        let w = &content_words("  xx  yy")[1];
        assert_eq!((w.span.clone(), w.index), (6..8, 1));
    }

    #[test]
    fn stopword_list_is_frozen() {
        for w in ["do", "it", "the", "i'm"] {
            assert!(is_stopword(w), "{w}");
        }
        for w in ["now", "later", "ok", "think"] {
            assert!(!is_stopword(w), "{w}");
        }
        assert_eq!(stopwords().len(), 176);
    }

    #[test]
    fn worked_insert() {
        assert_eq!(apply_op("think'", CharOp::Insert { position: 0, ch: 'y' }), "ythink'");
        assert_eq!(apply_op("ab", CharOp::Swap { position: 0 }), "ba");
        assert_eq!(apply_op("ab", CharOp::Delete { position: 1 }), "a");
        assert_eq!(apply_op("ab", CharOp::Substitute { position: 1, ch: 'z' }), "az");
    }

    #[test]
    fn swap_on_two_letters_is_forced() {
        for seed in 0..20 {
            let (out, edits) = corrupt("ab", &cfg(Strategy::Swap, 0.3, seed)).unwrap();
            assert_eq!(out, "ba");
            assert_eq!(edits[0].op, CharOp::Swap { position: 0 });
        }
    }

    #[test]
    fn swap_falls_back_to_substitute_on_repeated_letters() {
        let (out, edits) = corrupt("zzzz", &cfg(Strategy::Swap, 1.0, 3)).unwrap();
        assert_ne!(out, "zzzz");
        assert!(matches!(edits[0].op, CharOp::Substitute { .. }));
    }

    #[test]
    fn count_rule() {
        let text = "alpha bravo charlie delta echo foxtrot golf hotel india juliet";
        let (_, edits) = corrupt(text, &cfg(Strategy::Insert, 0.3, 1)).unwrap();
        assert_eq!(edits.len(), 3);
        let (_, edits) = corrupt("alpha", &cfg(Strategy::Insert, 0.3, 1)).unwrap();
        assert_eq!(edits.len(), 1);
        let (_, edits) = corrupt(text, &cfg(Strategy::Delete, 1.0, 1)).unwrap();
        assert_eq!(edits.len(), 10);
    }

    #[test]
    fn untouched_text_is_byte_identical() {
        let text = "The  doctor,\tsaw the   lawyer.";
        let (out, edits) = corrupt(text, &cfg(Strategy::Substitute, 0.3, 9)).unwrap();
        assert_eq!(edits.len(), 1);
        let orig: Vec<&str> = text.split(char::is_whitespace).collect();
        let new: Vec<&str> = out.split(char::is_whitespace).collect();
        assert_eq!(orig.len(), new.len());
        let changed: Vec<usize> = (0..orig.len()).filter(|&i| orig[i] != new[i]).collect();
        assert_eq!(changed.len(), 1);
    }

    #[test]
    fn no_content_words() {
        let (out, edits) = corrupt("it is a", &cfg(Strategy::Insert, 0.3, 0)).unwrap();
        assert_eq!(out, "it is a");
        assert!(edits.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(matches!(corrupt("x", &cfg(Strategy::Insert, 0.0, 0)), Err(CorruptionError::BadRate(_))));
        assert!(corrupt("x", &cfg(Strategy::Insert, 1.5, 0)).is_err());
        let mut c = cfg(Strategy::Insert, 0.3, 0);
        c.charset = vec!['a', 'a'];
        assert!(matches!(corrupt("x", &c), Err(CorruptionError::BadCharset)));
    }

    #[test]
    fn field_seeds_differ() {
        assert_ne!(field_seed(1, "a", Field::Premise), field_seed(1, "a", Field::Hypothesis));
        assert_ne!(field_seed(1, "a", Field::Premise), field_seed(1, "b", Field::Premise));
    }
}
