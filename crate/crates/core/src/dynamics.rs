//! Training-dynamics logs: the per-epoch gold-class probability and
//! correctness of every training example.
//!
//! On disk this is JSONL, one line per `(epoch, example)`:
//!
//! ```text
//! {"epoch":0,"id":"a","gold_prob":0.91,"correct":true}
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("example \"{id}\" has {found} epochs, expected {expected}")]
    InconsistentEpochs {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("example \"{id}\" epoch {epoch}: gold probability {value} outside [0, 1]")]
    ProbabilityOutOfRange { id: String, epoch: usize, value: f64 },
    #[error("example \"{id}\" has two records for epoch {epoch}")]
    DuplicateEntry { id: String, epoch: usize },
    #[error("example \"{id}\" is missing epoch {epoch}")]
    MissingEpoch { id: String, epoch: usize },
    #[error("duplicate example id \"{0}\"")]
    DuplicateId(String),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub gold_prob: f64,
    pub correct: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct LogLine<'a> {
    epoch: usize,
    #[serde(borrow)]
    id: std::borrow::Cow<'a, str>,
    gold_prob: f64,
    correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsLog {
    ids: Vec<String>,
    records: Vec<Vec<EpochRecord>>,
}

impl DynamicsLog {
    /// A log over `ids` with no epochs recorded yet.
    pub fn new(ids: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(DynamicsError::DuplicateId(id.clone()));
            }
        }
        let records = vec![Vec::new(); ids.len()];
        Ok(DynamicsLog { ids, records })
    }

    /// Builds a log from per-example epoch sequences, validating every invariant.
    pub fn from_records(ids: Vec<String>, records: Vec<Vec<EpochRecord>>) -> Result<Self> {
        let mut log = Self::new(ids)?;
        if records.len() != log.ids.len() {
            return Err(DynamicsError::Malformed {
                line: 0,
                message: format!("{} ids but {} record sequences", log.ids.len(), records.len()),
            });
        }
        let expected = records.first().map_or(0, Vec::len);
        for (id, seq) in log.ids.iter().zip(&records) {
            if seq.len() != expected {
                return Err(DynamicsError::InconsistentEpochs {
                    id: id.clone(),
                    expected,
                    found: seq.len(),
                });
            }
            check_probs(id, seq)?;
        }
        log.records = records;
        Ok(log)
    }

    /// Appends one epoch; `epoch[i]` belongs to `ids()[i]`.
    pub fn push_epoch(&mut self, epoch: &[EpochRecord]) -> Result<()> {
        if epoch.len() != self.ids.len() {
            return Err(DynamicsError::Malformed {
                line: 0,
                message: format!("epoch has {} records for {} ids", epoch.len(), self.ids.len()),
            });
        }
        let e = self.epochs();
        for (id, r) in self.ids.iter().zip(epoch) {
            if !(0.0..=1.0).contains(&r.gold_prob) {
                return Err(DynamicsError::ProbabilityOutOfRange {
                    id: id.clone(),
                    epoch: e,
                    value: r.gold_prob,
                });
            }
        }
        for (seq, r) in self.records.iter_mut().zip(epoch) {
            seq.push(*r);
        }
        Ok(())
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of recorded epochs (shared by every example).
    pub fn epochs(&self) -> usize {
        self.records.first().map_or(0, Vec::len)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[EpochRecord])> {
        self.ids.iter().map(String::as_str).zip(self.records.iter().map(Vec::as_slice))
    }

    /// Epoch-major JSONL.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for epoch in 0..self.epochs() {
            for (id, seq) in self.iter() {
                let line = LogLine {
                    epoch,
                    id: id.into(),
                    gold_prob: seq[epoch].gold_prob,
                    correct: seq[epoch].correct,
                };
                out.push_str(&serde_json::to_string(&line).expect("serializable"));
                out.push('\n');
            }
        }
        out
    }

    /// Parses JSONL in any line order. Example order is first appearance.
    pub fn parse_jsonl(text: &str) -> Result<Self> {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut ids = Vec::new();
        let mut slots: Vec<Vec<Option<EpochRecord>>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine = serde_json::from_str(line).map_err(|e| DynamicsError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            if !parsed.gold_prob.is_finite() || !(0.0..=1.0).contains(&parsed.gold_prob) {
                return Err(DynamicsError::ProbabilityOutOfRange {
                    id: parsed.id.into_owned(),
                    epoch: parsed.epoch,
                    value: parsed.gold_prob,
                });
            }
            let k = match index.get(parsed.id.as_ref()) {
                Some(&k) => k,
                None => {
                    let k = ids.len();
                    index.insert(parsed.id.to_string(), k);
                    ids.push(parsed.id.to_string());
                    slots.push(Vec::new());
                    k
                }
            };
            let seq = &mut slots[k];
            if seq.len() <= parsed.epoch {
                seq.resize(parsed.epoch + 1, None);
            }
            if seq[parsed.epoch].is_some() {
                return Err(DynamicsError::DuplicateEntry {
                    id: parsed.id.into_owned(),
                    epoch: parsed.epoch,
                });
            }
            seq[parsed.epoch] = Some(EpochRecord {
                gold_prob: parsed.gold_prob,
                correct: parsed.correct,
            });
        }
        let expected = slots.iter().map(Vec::len).max().unwrap_or(0);
        let mut records = Vec::with_capacity(slots.len());
        for (id, seq) in ids.iter().zip(slots) {
            if seq.len() != expected {
                return Err(DynamicsError::InconsistentEpochs {
                    id: id.clone(),
                    expected,
                    found: seq.iter().filter(|r| r.is_some()).count(),
                });
            }
            let mut full = Vec::with_capacity(expected);
            for (epoch, r) in seq.into_iter().enumerate() {
                full.push(r.ok_or_else(|| DynamicsError::MissingEpoch {
                    id: id.clone(),
                    epoch,
                })?);
            }
            records.push(full);
        }
        Self::from_records(ids, records)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| DynamicsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_jsonl(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|source| DynamicsError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn check_probs(id: &str, seq: &[EpochRecord]) -> Result<()> {
    for (epoch, r) in seq.iter().enumerate() {
        if !r.gold_prob.is_finite() || !(0.0..=1.0).contains(&r.gold_prob) {
            return Err(DynamicsError::ProbabilityOutOfRange {
                id: id.to_string(),
                epoch,
                value: r.gold_prob,
            });
        }
    }
    Ok(())
}
