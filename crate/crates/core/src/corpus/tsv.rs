//! MNLI-style tab-separated input.
//!
//! The header row names the columns. `premise`, `hypothesis` and `label` are
//! required; `id` and `heuristic` are optional. Without an `id` column, ids
//! are the zero-based data row index. Common MNLI/HANS header spellings
//! (`sentence1`, `gold_label`, ...) are accepted as aliases.

use std::path::Path;

use super::{Corpus, CorpusError, Example, Heuristic, Label, LabelScheme, Result};

fn column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
}

/// Converts TSV text to a corpus. Quotes are not interpreted.
pub fn convert_tsv_str(name: &str, text: &str, scheme: LabelScheme) -> Result<Corpus> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let missing = |what: &str| CorpusError::Malformed {
        line: 1,
        message: format!("header has no {what} column"),
    };
    let premise_col = column(&headers, &["premise", "sentence1"]).ok_or_else(|| missing("premise"))?;
    let hypothesis_col =
        column(&headers, &["hypothesis", "sentence2"]).ok_or_else(|| missing("hypothesis"))?;
    let label_col = column(&headers, &["label", "gold_label"]).ok_or_else(|| missing("label"))?;
    let id_col = column(&headers, &["id", "pairid", "pairID"]);
    let heuristic_col = column(&headers, &["heuristic"]);

    let mut examples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| CorpusError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let field = |col: usize| -> Result<&str> {
            record.get(col).ok_or_else(|| CorpusError::Malformed {
                line,
                message: format!("missing column {}", col + 1),
            })
        };
        let label_text = field(label_col)?;
        let label = label_text
            .parse::<Label>()
            .map_err(|_| CorpusError::LabelNotInScheme {
                line,
                label: label_text.to_string(),
                scheme,
            })?;
        let heuristic = match heuristic_col.and_then(|c| record.get(c)) {
            Some(h) if !h.trim().is_empty() => Some(
                h.parse::<Heuristic>()
                    .map_err(|message| CorpusError::Malformed { line, message })?,
            ),
            _ => None,
        };
        let id = match id_col {
            Some(c) => field(c)?.to_string(),
            None => row.to_string(),
        };
        examples.push(Example {
            id,
            premise: field(premise_col)?.to_string(),
            hypothesis: field(hypothesis_col)?.to_string(),
            label,
            heuristic,
        });
    }
    Corpus::new(name, scheme, examples).map_err(|e| match e {
        // Corpus::new counts data rows from 1; the header shifts them by one.
        CorpusError::Malformed { line, message } => CorpusError::Malformed {
            line: line + 1,
            message,
        },
        CorpusError::LabelNotInScheme {
            line,
            label,
            scheme,
        } => CorpusError::LabelNotInScheme {
            line: line + 1,
            label,
            scheme,
        },
        CorpusError::HeuristicUnderThreeClass { line } => {
            CorpusError::HeuristicUnderThreeClass { line: line + 1 }
        }
        other => other,
    })
}

pub fn convert_tsv(path: &Path, scheme: LabelScheme) -> Result<Corpus> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    convert_tsv_str(&name, &text, scheme)
}
