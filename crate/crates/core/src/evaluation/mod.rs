//! Accuracy reports, the two-label collapse, and before/after deltas.

mod delta;

pub use delta::{delta_report, format_delta, DeltaBlock, DeltaReport, DeltaTable};

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Heuristic, Label, LabelScheme};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no prediction for example \"{0}\"")]
    MissingPrediction(String),
    #[error("duplicate prediction for \"{0}\"")]
    DuplicatePrediction(String),
    #[error("prediction {label} for \"{id}\" is not a {scheme} label")]
    LabelNotInScheme { id: String, label: Label, scheme: LabelScheme },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("scheme mismatch: {0} vs {1}")]
    SchemeMismatch(LabelScheme, LabelScheme),
    #[error("{0}")]
    Incompatible(String),
    #[error("nothing to aggregate")]
    NoReports,
    #[error("reading predictions")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// 3-class → 2-class: neutral and contradiction become non-entailment.
pub fn collapse_labels(label: Label) -> Label {
    match label {
        Label::Entailment => Label::Entailment,
        Label::Neutral | Label::Contradiction | Label::NonEntailment => Label::NonEntailment,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<Vec<f64>>,
}

/// Predicted labels keyed by example id, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Predictions {
    items: Vec<Prediction>,
    index: HashMap<String, usize>,
}

impl Predictions {
    pub fn new(items: Vec<Prediction>) -> Result<Self> {
        let mut index = HashMap::with_capacity(items.len());
        for (i, p) in items.iter().enumerate() {
            if index.insert(p.id.clone(), i).is_some() {
                return Err(EvalError::DuplicatePrediction(p.id.clone()));
            }
        }
        Ok(Predictions { items, index })
    }

    pub fn get(&self, id: &str) -> Option<&Prediction> {
        self.index.get(id).map(|&i| &self.items[i])
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Prediction> {
        self.items.iter()
    }

    pub fn parse_jsonl(text: &str) -> Result<Self> {
        let mut items = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            #[derive(Deserialize)]
            struct Raw {
                id: String,
                label: String,
                #[serde(default)]
                logits: Option<Vec<f64>>,
            }
            let raw: Raw = serde_json::from_str(line).map_err(|e| EvalError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            let label = raw.label.parse().map_err(|message| EvalError::Malformed { line: i + 1, message })?;
            items.push(Prediction {
                id: raw.id,
                label,
                logits: raw.logits,
            });
        }
        Predictions::new(items)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Predictions::parse_jsonl(&fs::read_to_string(path)?)
    }

    pub fn to_jsonl(&self) -> String {
        self.items
            .iter()
            .map(|p| serde_json::to_string(p).expect("serializable") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetAccuracy {
    pub label: Label,
    pub n: usize,
    pub correct: usize,
    /// `None` when the subset is empty.
    pub accuracy: Option<f64>,
}

impl SubsetAccuracy {
    fn new(label: Label, n: usize, correct: usize) -> Self {
        SubsetAccuracy {
            label,
            n,
            correct,
            accuracy: (n > 0).then(|| correct as f64 / n as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicReport {
    pub heuristic: Heuristic,
    pub per_label: Vec<SubsetAccuracy>,
    pub headline: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub corpus: String,
    pub scheme: LabelScheme,
    pub n: usize,
    pub accuracy: f64,
    /// Accuracy per gold label, in scheme order. Predictions are collapsed
    /// first under two_class.
    pub per_label: Vec<SubsetAccuracy>,
    /// Plain accuracy under three_class; the mean of the per-label
    /// accuracies under two_class.
    pub headline: f64,
    /// Set when a gold subset was empty and the headline used the others.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub headline_note: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_heuristic: Vec<HeuristicReport>,
}

impl EvalReport {
    pub fn label_accuracy(&self, label: Label) -> Option<f64> {
        self.per_label.iter().find(|s| s.label == label).and_then(|s| s.accuracy)
    }

    /// Aligned text table with percentages to two decimals.
    pub fn to_text(&self) -> String {
        let pct = |a: Option<f64>| a.map_or("n/a".to_string(), |v| format!("{:.2}", v * 100.0));
        let mut rows: Vec<[String; 3]> = vec![
            ["subset".into(), "n".into(), "accuracy".into()],
            ["all".into(), self.n.to_string(), pct(Some(self.accuracy))],
        ];
        for s in &self.per_label {
            rows.push([s.label.as_str().into(), s.n.to_string(), pct(s.accuracy)]);
        }
        for h in &self.per_heuristic {
            for s in &h.per_label {
                rows.push([format!("{}/{}", h.heuristic, s.label), s.n.to_string(), pct(s.accuracy)]);
            }
        }
        rows.push(["headline".into(), String::new(), pct(Some(self.headline))]);
        let mut out = format!("{} ({})\n", self.corpus, self.scheme);
        out.push_str(&render_rows(&rows));
        if let Some(note) = &self.headline_note {
            out.push_str(&format!("note: {note}\n"));
        }
        out
    }
}

/// Left-aligned first column, right-aligned others, two spaces between.
pub(crate) fn render_rows<const N: usize>(rows: &[[String; N]]) -> String {
    let mut widths = [0usize; N];
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (j, c) in r.iter().enumerate() {
            if j == 0 {
                line.push_str(&format!("{:<w$}", c, w = widths[0]));
            } else {
                line.push_str(&format!("  {:>w$}", c, w = widths[j]));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Mean of the defined subset accuracies and a note if any were empty.
fn average(subsets: &[SubsetAccuracy]) -> (Option<f64>, Option<String>) {
    let defined: Vec<f64> = subsets.iter().filter_map(|s| s.accuracy).collect();
    let empty: Vec<&str> = subsets.iter().filter(|s| s.n == 0).map(|s| s.label.as_str()).collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let note = (!empty.is_empty()).then(|| format!("no gold {} examples; headline averages the remaining labels", empty.join(", ")));
    (mean, note)
}

pub fn evaluate(corpus: &Corpus, preds: &Predictions) -> Result<EvalReport> {
    let scheme = corpus.scheme;
    let labels = scheme.labels();
    let mut counts = vec![(0usize, 0usize); labels.len()];
    let mut by_heuristic: Vec<(Heuristic, Vec<(usize, usize)>)> = Vec::new();
    let mut correct_total = 0;
    for ex in &corpus.examples {
        let p = preds.get(&ex.id).ok_or_else(|| EvalError::MissingPrediction(ex.id.clone()))?;
        let predicted = match scheme {
            LabelScheme::TwoClass => collapse_labels(p.label),
            LabelScheme::ThreeClass => p.label,
        };
        if !scheme.contains(predicted) {
            return Err(EvalError::LabelNotInScheme {
                id: ex.id.clone(),
                label: p.label,
                scheme,
            });
        }
        let k = scheme.class_index(ex.label).expect("corpus invariant");
        let hit = usize::from(predicted == ex.label);
        counts[k].0 += 1;
        counts[k].1 += hit;
        correct_total += hit;
        if let (LabelScheme::TwoClass, Some(h)) = (scheme, ex.heuristic) {
            let slot = match by_heuristic.iter().position(|(x, _)| *x == h) {
                Some(i) => i,
                None => {
                    by_heuristic.push((h, vec![(0, 0); labels.len()]));
                    by_heuristic.len() - 1
                }
            };
            by_heuristic[slot].1[k].0 += 1;
            by_heuristic[slot].1[k].1 += hit;
        }
    }
    by_heuristic.sort_by_key(|(h, _)| *h);

    let subsets = |c: &[(usize, usize)]| -> Vec<SubsetAccuracy> {
        labels.iter().zip(c).map(|(&l, &(n, k))| SubsetAccuracy::new(l, n, k)).collect()
    };
    let per_label = subsets(&counts);
    let n = corpus.len();
    let accuracy = if n == 0 { 0.0 } else { correct_total as f64 / n as f64 };
    let (headline, headline_note) = match scheme {
        LabelScheme::ThreeClass => (accuracy, None),
        LabelScheme::TwoClass => {
            let (mean, note) = average(&per_label);
            (mean.unwrap_or(0.0), note)
        }
    };
    let per_heuristic = by_heuristic
        .into_iter()
        .map(|(heuristic, c)| {
            let per_label = subsets(&c);
            let headline = average(&per_label).0;
            HeuristicReport {
                heuristic,
                per_label,
                headline,
            }
        })
        .collect();
    Ok(EvalReport {
        corpus: corpus.name.clone(),
        scheme,
        n,
        accuracy,
        per_label,
        headline,
        headline_note,
        per_heuristic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scheme: LabelScheme,
    pub runs: usize,
    pub metrics: Vec<MetricSummary>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and population std of each metric across runs.
pub fn aggregate_runs(reports: &[EvalReport]) -> Result<RunSummary> {
    let first = reports.first().ok_or(EvalError::NoReports)?;
    for r in &reports[1..] {
        if r.scheme != first.scheme {
            return Err(EvalError::SchemeMismatch(first.scheme, r.scheme));
        }
    }
    let names: HashSet<&str> = reports.iter().map(|r| r.corpus.as_str()).collect();
    if names.len() > 1 {
        return Err(EvalError::Incompatible(format!("reports cover different corpora: {names:?}")));
    }
    let mut metrics = Vec::new();
    let mut push = |metric: String, values: Vec<f64>| {
        if values.len() == reports.len() {
            let (mean, std) = mean_std(&values);
            metrics.push(MetricSummary { metric, mean, std });
        }
    };
    push("accuracy".into(), reports.iter().map(|r| r.accuracy).collect());
    push("headline".into(), reports.iter().map(|r| r.headline).collect());
    for &label in first.scheme.labels() {
        push(
            format!("accuracy/{}", label.as_str()),
            reports.iter().filter_map(|r| r.label_accuracy(label)).collect(),
        );
    }
    Ok(RunSummary {
        scheme: first.scheme,
        runs: reports.len(),
        metrics,
    })
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut rows = vec![["metric".to_string(), "mean".to_string(), "std".to_string()]];
        for m in &self.metrics {
            rows.push([m.metric.clone(), format!("{:.2}", m.mean * 100.0), format!("{:.2}", m.std * 100.0)]);
        }
        format!("{} runs ({})\n{}", self.runs, self.scheme, render_rows(&rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Example;

    fn ex(id: &str, label: Label, h: Option<Heuristic>) -> Example {
        Example {
            id: id.into(),
            premise: "p".into(),
            hypothesis: "h".into(),
            label,
            heuristic: h,
        }
    }

    fn preds(pairs: &[(&str, Label)]) -> Predictions {
        Predictions::new(
            pairs
                .iter()
                .map(|(id, l)| Prediction {
                    id: id.to_string(),
                    label: *l,
                    logits: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn two_class() -> Corpus {
        use Label::*;
        let lo = Some(Heuristic::LexicalOverlap);
        let sub = Some(Heuristic::Subsequence);
        Corpus::new(
            "hans",
            LabelScheme::TwoClass,
            vec![
                ex("e1", Entailment, lo),
                ex("e2", Entailment, lo),
                ex("e3", Entailment, sub),
                ex("n1", NonEntailment, lo),
                ex("n2", NonEntailment, sub),
                ex("n3", NonEntailment, sub),
            ],
        )
        .unwrap()
    }

    #[test]
    fn collapse() {
        assert_eq!(collapse_labels(Label::Contradiction), Label::NonEntailment);
        assert_eq!(collapse_labels(Label::Neutral), Label::NonEntailment);
        assert_eq!(collapse_labels(Label::Entailment), Label::Entailment);
    }

    #[test]
    fn all_entailment_is_chance() {
        let c = two_class();
        let p = preds(&c.ids().map(|id| (id, Label::Entailment)).collect::<Vec<_>>());
        let r = evaluate(&c, &p).unwrap();
        assert_eq!(r.headline, 0.5);
        assert_eq!(r.label_accuracy(Label::Entailment), Some(1.0));
        assert_eq!(r.label_accuracy(Label::NonEntailment), Some(0.0));
    }

    #[test]
    fn hand_counted_headline() {
        use Label::*;
        let c = two_class();
        let p = preds(&[
            ("e1", Entailment),
            ("e2", Entailment),
            ("e3", Entailment),
            ("n1", Contradiction),
            ("n2", Entailment),
            ("n3", Entailment),
        ]);
        let r = evaluate(&c, &p).unwrap();
        assert!((r.headline - (1.0 + 1.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(r.per_heuristic.len(), 2);
        let lo = &r.per_heuristic[0];
        assert_eq!(lo.heuristic, Heuristic::LexicalOverlap);
        assert_eq!((lo.per_label[1].n, lo.per_label[1].correct), (1, 1));
        assert!(r.to_text().contains("headline"));
    }

    #[test]
    fn perfect_three_class() {
        use Label::*;
        let c = Corpus::new(
            "m",
            LabelScheme::ThreeClass,
            vec![ex("a", Entailment, None), ex("b", Neutral, None), ex("c", Contradiction, None)],
        )
        .unwrap();
        let r = evaluate(&c, &preds(&[("a", Entailment), ("b", Neutral), ("c", Contradiction)])).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.headline, 1.0);
        assert!(r.per_label.iter().all(|s| s.accuracy == Some(1.0)));
        let bad = preds(&[("a", NonEntailment), ("b", Neutral), ("c", Contradiction)]);
        assert!(matches!(evaluate(&c, &bad), Err(EvalError::LabelNotInScheme { .. })));
    }

    #[test]
    fn empty_subset_is_flagged() {
        let c = Corpus::new("x", LabelScheme::TwoClass, vec![ex("a", Label::Entailment, None)]).unwrap();
        let r = evaluate(&c, &preds(&[("a", Label::Entailment)])).unwrap();
        assert_eq!(r.headline, 1.0);
        assert!(r.headline_note.is_some());
        assert_eq!(r.label_accuracy(Label::NonEntailment), None);
    }

    #[test]
    fn missing_and_duplicate_predictions() {
        let c = two_class();
        assert!(matches!(evaluate(&c, &preds(&[("e1", Label::Entailment)])), Err(EvalError::MissingPrediction(id)) if id == "e2"));
        let dup = vec![
            Prediction { id: "a".into(), label: Label::Entailment, logits: None },
            Prediction { id: "a".into(), label: Label::Neutral, logits: None },
        ];
        assert!(matches!(Predictions::new(dup), Err(EvalError::DuplicatePrediction(_))));
    }

    #[test]
    fn predictions_jsonl_round_trip() {
        let text = "{\"id\":\"a\",\"label\":\"entailment\"}\n{\"id\":\"b\",\"label\":\"non-entailment\",\"logits\":[0.5,1.5]}\n";
        let p = Predictions::parse_jsonl(text).unwrap();
        assert_eq!(p.get("b").unwrap().label, Label::NonEntailment);
        let back = Predictions::parse_jsonl(&p.to_jsonl()).unwrap();
        assert_eq!(back, p);
        assert!(matches!(Predictions::parse_jsonl("{\"id\":1}"), Err(EvalError::Malformed { line: 1, .. })));
    }

    fn report(acc: f64) -> EvalReport {
        EvalReport {
            corpus: "c".into(),
            scheme: LabelScheme::ThreeClass,
            n: 10,
            accuracy: acc,
            per_label: vec![],
            headline: acc,
            headline_note: None,
            per_heuristic: vec![],
        }
    }

    #[test]
    fn aggregate() {
        let s = aggregate_runs(&[report(0.84), report(0.84), report(0.84)]).unwrap();
        assert_eq!((s.metrics[0].mean, s.metrics[0].std), (0.84, 0.0));
        let s = aggregate_runs(&[report(0.5), report(0.7)]).unwrap();
        assert!((s.metrics[0].mean - 0.6).abs() < 1e-15);
        assert!((s.metrics[0].std - 0.1).abs() < 1e-15);
        let s = aggregate_runs(&[report(0.3)]).unwrap();
        assert_eq!((s.metrics[1].mean, s.metrics[1].std), (0.3, 0.0));
        assert!(matches!(aggregate_runs(&[]), Err(EvalError::NoReports)));
        let mut two = report(0.5);
        two.scheme = LabelScheme::TwoClass;
        assert!(matches!(aggregate_runs(&[report(0.5), two]), Err(EvalError::SchemeMismatch(..))));
    }
}
