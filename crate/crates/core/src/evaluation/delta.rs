//! Per-class accuracy changes between two reports, rendered as a
//! corruption × label × model table.

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalReport, Result};
use crate::corpus::{Label, LabelScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDelta {
    pub label: Label,
    /// `after − before`, in percentage points.
    pub points: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub corpus: String,
    pub rows: Vec<LabelDelta>,
}

impl DeltaReport {
    pub fn points(&self, label: Label) -> Option<f64> {
        self.rows.iter().find(|r| r.label == label).map(|r| r.points)
    }
}

/// Signed delta to two decimals with one trailing zero dropped:
/// `+18.2`, `+13.78`, `-28.89`, `+0.0`.
pub fn format_delta(points: f64) -> String {
    let cents = (points * 100.0).round() as i64;
    let sign = if cents < 0 { '-' } else { '+' };
    let abs = cents.unsigned_abs();
    let mut s = format!("{sign}{}.{:02}", abs / 100, abs % 100);
    if s.ends_with('0') {
        s.pop();
    }
    s
}

/// Per-class differences; both reports must be three_class over the same
/// gold composition.
pub fn delta_report(before: &EvalReport, after: &EvalReport) -> Result<DeltaReport> {
    if before.scheme != after.scheme {
        return Err(EvalError::SchemeMismatch(before.scheme, after.scheme));
    }
    if before.scheme != LabelScheme::ThreeClass {
        return Err(EvalError::Incompatible("delta reports need three_class reports".into()));
    }
    let mut rows = Vec::with_capacity(3);
    for (b, a) in before.per_label.iter().zip(&after.per_label) {
        if b.label != a.label || b.n != a.n {
            return Err(EvalError::Incompatible(format!(
                "gold {} subsets differ ({} vs {} examples)",
                b.label, b.n, a.n
            )));
        }
        match (b.accuracy, a.accuracy) {
            (Some(x), Some(y)) => rows.push(LabelDelta {
                label: b.label,
                points: (y - x) * 100.0,
            }),
            _ => {
                return Err(EvalError::Incompatible(format!("no gold {} examples", b.label)));
            }
        }
    }
    if rows.len() != 3 {
        return Err(EvalError::Incompatible("reports lack per-label accuracies".into()));
    }
    Ok(DeltaReport {
        corpus: before.corpus.clone(),
        rows,
    })
}

/// One corruption strategy: a delta report per model column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaBlock {
    /// Two-word names are split across the first two rows.
    pub strategy: String,
    pub reports: Vec<DeltaReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub columns: Vec<String>,
    pub blocks: Vec<DeltaBlock>,
}

const LABEL_ROWS: [Label; 3] = [Label::Entailment, Label::Neutral, Label::Contradiction];

impl DeltaTable {
    pub fn render(&self) -> String {
        let mut header = vec!["Corruption".to_string(), "Labels".to_string()];
        header.extend(self.columns.iter().cloned());
        let mut rows = vec![header];
        for block in &self.blocks {
            let (first, rest) = match block.strategy.split_once(' ') {
                Some((a, b)) => (a.to_string(), b.to_string()),
                None => (block.strategy.clone(), String::new()),
            };
            for (i, label) in LABEL_ROWS.into_iter().enumerate() {
                let lead = match i {
                    0 => first.clone(),
                    1 => rest.clone(),
                    _ => String::new(),
                };
                let mut row = vec![lead, label.display_name().to_string()];
                for r in &block.reports {
                    row.push(r.points(label).map(format_delta).unwrap_or_default());
                }
                rows.push(row);
            }
        }
        let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
        let widths: Vec<usize> = (0..cols)
            .map(|j| rows.iter().filter_map(|r| r.get(j)).map(|c| c.chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in &rows {
            let line: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(j, c)| format!("{:<w$}", c, w = widths[j]))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::SubsetAccuracy;

    fn report(e: f64, n: f64, c: f64) -> EvalReport {
        let sub = |label, a| SubsetAccuracy {
            label,
            n: 100,
            correct: 0,
            accuracy: Some(a),
        };
        EvalReport {
            corpus: "hard".into(),
            scheme: LabelScheme::ThreeClass,
            n: 300,
            accuracy: 0.0,
            per_label: vec![sub(Label::Entailment, e), sub(Label::Neutral, n), sub(Label::Contradiction, c)],
            headline: 0.0,
            headline_note: None,
            per_heuristic: vec![],
        }
    }

    #[test]
    fn formatting() {
        assert_eq!(format_delta(18.2), "+18.2");
        assert_eq!(format_delta(13.78), "+13.78");
        assert_eq!(format_delta(-28.89), "-28.89");
        assert_eq!(format_delta(0.0), "+0.0");
        assert_eq!(format_delta(-0.001), "+0.0");
        assert_eq!(format_delta(35.5), "+35.5");
        assert_eq!(format_delta(-1.6), "-1.6");
        assert_eq!(format_delta(100.0), "+100.0");
    }

    #[test]
    fn worked_deltas() {
        let d = delta_report(&report(0.50, 0.3, 0.40), &report(0.682, 0.4378, 0.1111)).unwrap();
        let f: Vec<String> = d.rows.iter().map(|r| format_delta(r.points)).collect();
        assert_eq!(f, ["+18.2", "+13.78", "-28.89"]);
        let same = delta_report(&report(0.1, 0.2, 0.3), &report(0.1, 0.2, 0.3)).unwrap();
        assert!(same.rows.iter().all(|r| r.points == 0.0));
    }

    #[test]
    fn table_layout() {
        let d = delta_report(&report(0.50, 0.3, 0.40), &report(0.682, 0.4378, 0.1111)).unwrap();
        let t = DeltaTable {
            columns: vec!["BERT".into()],
            blocks: vec![DeltaBlock {
                strategy: "Character insert".into(),
                reports: vec![d],
            }],
        };
        let expected = "\
Corruption  Labels         BERT
Character   Entailment     +18.2
insert      Neutral        +13.78
            Contradiction  -28.89
";
        assert_eq!(t.render(), expected);
    }

    #[test]
    fn scheme_checks() {
        let mut two = report(0.5, 0.5, 0.5);
        two.scheme = LabelScheme::TwoClass;
        assert!(matches!(delta_report(&report(0.5, 0.5, 0.5), &two), Err(EvalError::SchemeMismatch(..))));
        assert!(delta_report(&two, &two).is_err());
    }
}
