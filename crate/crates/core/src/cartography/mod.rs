//! Data maps from training dynamics.
//!
//! Each example gets a confidence (mean gold-class probability over epochs),
//! a variability (population standard deviation of that probability) and a
//! correctness (fraction of epochs predicted correctly). Examples are then
//! split into hard (lowest confidence), ambiguous (highest variability among
//! the rest) and easy (everything else).

mod curriculum;

pub use curriculum::{curriculum_order, Curriculum, CurriculumSchedule, EasyPick, Phase, Source};

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::DynamicsLog;

#[derive(Debug, Error, PartialEq)]
pub enum CartographyError {
    #[error("example \"{id}\" has {found} epochs, expected {expected}")]
    InconsistentEpochs {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("dynamics log has examples but no recorded epochs")]
    NoEpochs,
    #[error("fraction {name} = {value} must lie in {range}")]
    BadFraction {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("invalid schedule: {0}")]
    BadSchedule(String),
    #[error("the {0} category is empty but a positive fraction of it was requested")]
    EmptyCategory(&'static str),
    #[error("map CSV line {line}: {message}")]
    MalformedMap { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, CartographyError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartographyPoint {
    pub id: String,
    pub confidence: f64,
    pub variability: f64,
    pub correctness: f64,
}

/// One point per example, in log order.
pub fn compute_map(log: &DynamicsLog) -> Result<Vec<CartographyPoint>> {
    let expected = log.epochs();
    if expected == 0 && !log.is_empty() {
        return Err(CartographyError::NoEpochs);
    }
    log.iter()
        .map(|(id, seq)| {
            if seq.len() != expected {
                return Err(CartographyError::InconsistentEpochs {
                    id: id.to_string(),
                    expected,
                    found: seq.len(),
                });
            }
            let e = expected as f64;
            let confidence = seq.iter().map(|r| r.gold_prob).sum::<f64>() / e;
            let variance = seq
                .iter()
                .map(|r| (r.gold_prob - confidence).powi(2))
                .sum::<f64>()
                / e;
            let correctness = seq.iter().filter(|r| r.correct).count() as f64 / e;
            Ok(CartographyPoint {
                id: id.to_string(),
                confidence,
                variability: variance.sqrt(),
                correctness,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankKey {
    ConfidenceAsc,
    ConfidenceDesc,
    VariabilityDesc,
}

impl FromStr for RankKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "confidence_asc" => Ok(RankKey::ConfidenceAsc),
            "confidence_desc" => Ok(RankKey::ConfidenceDesc),
            "variability_desc" => Ok(RankKey::VariabilityDesc),
            other => Err(format!("unknown rank key \"{other}\"")),
        }
    }
}

fn compare(key: RankKey, a: &CartographyPoint, b: &CartographyPoint) -> Ordering {
    let primary = match key {
        RankKey::ConfidenceAsc => a.confidence.total_cmp(&b.confidence),
        RankKey::ConfidenceDesc => b.confidence.total_cmp(&a.confidence),
        RankKey::VariabilityDesc => b.variability.total_cmp(&a.variability),
    };
    primary.then_with(|| a.id.cmp(&b.id))
}

fn sorted<'a>(points: impl IntoIterator<Item = &'a CartographyPoint>, key: RankKey) -> Vec<&'a CartographyPoint> {
    let mut v: Vec<&CartographyPoint> = points.into_iter().collect();
    v.sort_by(|a, b| compare(key, a, b));
    v
}

/// Total order on ids by `key`; ties broken by id.
pub fn rank(points: &[CartographyPoint], key: RankKey) -> Vec<String> {
    sorted(points, key).into_iter().map(|p| p.id.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub hard_q: f64,
    pub ambiguous_q: f64,
    /// Highest confidence assigned to `hard`.
    pub hard_max_confidence: Option<f64>,
    /// Lowest variability assigned to `ambiguous`.
    pub ambiguous_min_variability: Option<f64>,
}

/// Disjoint cover of the map. Each list is in its own rank order: easy by
/// confidence descending, ambiguous by variability descending, hard by
/// confidence ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub easy: Vec<String>,
    pub ambiguous: Vec<String>,
    pub hard: Vec<String>,
    pub thresholds: Thresholds,
}

pub const DEFAULT_HARD_Q: f64 = 0.33;
pub const DEFAULT_AMBIGUOUS_Q: f64 = 0.33;

fn check_open_fraction(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(CartographyError::BadFraction {
            name,
            value,
            range: "(0, 1)",
        })
    }
}

/// `floor(n * q)`, computed so that exact products like `100 * 0.17` do not
/// lose an element to representation error.
pub(crate) fn fraction_count(n: usize, q: f64) -> usize {
    let raw = n as f64 * q;
    let nearest = raw.round();
    if (raw - nearest).abs() <= 1e-9 * raw.abs().max(1.0) {
        nearest as usize
    } else {
        raw.floor() as usize
    }
}

/// Sequential assignment: the bottom `floor(n * hard_q)` by confidence are
/// hard; of the remainder, the top `floor(n * ambiguous_q)` by variability are
/// ambiguous; the rest are easy.
pub fn partition(points: &[CartographyPoint], hard_q: f64, ambiguous_q: f64) -> Result<Partition> {
    check_open_fraction("hard_q", hard_q)?;
    check_open_fraction("ambiguous_q", ambiguous_q)?;
    let n = points.len();
    let by_conf = sorted(points, RankKey::ConfidenceAsc);
    let n_hard = fraction_count(n, hard_q);
    let hard: Vec<&CartographyPoint> = by_conf[..n_hard].to_vec();
    let rest = &by_conf[n_hard..];

    let by_var = sorted(rest.iter().copied(), RankKey::VariabilityDesc);
    let n_amb = fraction_count(n, ambiguous_q).min(by_var.len());
    let ambiguous: Vec<&CartographyPoint> = by_var[..n_amb].to_vec();
    let easy = sorted(by_var[n_amb..].iter().copied(), RankKey::ConfidenceDesc);

    let thresholds = Thresholds {
        hard_q,
        ambiguous_q,
        hard_max_confidence: hard.last().map(|p| p.confidence),
        ambiguous_min_variability: ambiguous.last().map(|p| p.variability),
    };
    let ids = |v: &[&CartographyPoint]| v.iter().map(|p| p.id.clone()).collect::<Vec<_>>();
    Ok(Partition {
        easy: ids(&easy),
        ambiguous: ids(&ambiguous),
        hard: ids(&hard),
        thresholds,
    })
}

/// `id,confidence,variability,correctness` with a header row.
pub fn map_to_csv(points: &[CartographyPoint]) -> String {
    let mut out = String::from("id,confidence,variability,correctness\n");
    for p in points {
        let id = if p.id.contains([',', '"', '\n']) {
            format!("\"{}\"", p.id.replace('"', "\"\""))
        } else {
            p.id.clone()
        };
        writeln!(out, "{},{},{},{}", id, p.confidence, p.variability, p.correctness).unwrap();
    }
    out
}

pub fn map_from_csv(text: &str) -> Result<Vec<CartographyPoint>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<CartographyPoint>().enumerate() {
        let p = rec.map_err(|e| CartographyError::MalformedMap {
            line: i + 2,
            message: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::EpochRecord;

    fn log_of(seqs: &[(&str, &[f64])]) -> DynamicsLog {
        DynamicsLog::from_records(
            seqs.iter().map(|(id, _)| id.to_string()).collect(),
            seqs.iter()
                .map(|(_, ps)| {
                    ps.iter()
                        .map(|&p| EpochRecord {
                            gold_prob: p,
                            correct: p >= 0.5,
                        })
                        .collect()
                })
                .collect(),
        )
        .unwrap()
    }

    fn pt(id: &str, confidence: f64, variability: f64) -> CartographyPoint {
        CartographyPoint {
            id: id.into(),
            confidence,
            variability,
            correctness: 0.0,
        }
    }

    #[test]
    fn worked_map_values() {
        let map = compute_map(&log_of(&[("a", &[0.9, 0.8, 1.0]), ("b", &[0.5, 0.5, 0.5])])).unwrap();
        assert!((map[0].confidence - 0.9).abs() < 1e-12);
        // sqrt(((0)^2 + 0.1^2 + 0.1^2) / 3) = sqrt(0.02 / 3)
        assert!((map[0].variability - 0.081_649_658_092_772_6).abs() < 1e-12);
        assert_eq!(map[0].correctness, 1.0);
        assert_eq!(map[1].confidence, 0.5);
        assert_eq!(map[1].variability, 0.0);
    }

    #[test]
    fn single_epoch() {
        let map = compute_map(&log_of(&[("a", &[0.7])])).unwrap();
        assert_eq!(map[0].confidence, 0.7);
        assert_eq!(map[0].variability, 0.0);
    }

    #[test]
    fn rank_examples() {
        let pts = [pt("a", 0.9, 0.0), pt("b", 0.1, 0.3)];
        assert_eq!(rank(&pts, RankKey::ConfidenceDesc), ["a", "b"]);
        assert_eq!(rank(&pts, RankKey::VariabilityDesc), ["b", "a"]);
        let ties = [pt("b", 0.5, 0.0), pt("a", 0.5, 0.0)];
        assert_eq!(rank(&ties, RankKey::ConfidenceDesc), ["a", "b"]);
        assert_eq!(rank(&ties, RankKey::ConfidenceAsc), ["a", "b"]);
    }

    #[test]
    fn hard_is_lowest_confidence() {
        let pts: Vec<_> = (0..10).map(|i| pt(&format!("p{i}"), i as f64 / 10.0, 0.0)).collect();
        let part = partition(&pts, 0.3, 0.2).unwrap();
        assert_eq!(part.hard, ["p0", "p1", "p2"]);
        assert_eq!(part.ambiguous.len(), 2);
        assert_eq!(part.easy.len(), 5);
        assert_eq!(part.thresholds.hard_max_confidence, Some(0.2));
    }

    #[test]
    fn identical_points_split_by_id() {
        let pts: Vec<_> = (0..10).map(|i| pt(&format!("p{i}"), 0.5, 0.1)).collect();
        let part = partition(&pts, 0.3, 0.3).unwrap();
        assert_eq!(part.hard, ["p0", "p1", "p2"]);
        assert_eq!(part.ambiguous, ["p3", "p4", "p5"]);
        assert_eq!(part.easy, ["p6", "p7", "p8", "p9"]);
    }

    #[test]
    fn single_point_floor_rule() {
        let part = partition(&[pt("only", 0.2, 0.0)], 0.3, 0.3).unwrap();
        assert!(part.hard.is_empty());
        assert!(part.ambiguous.is_empty());
        assert_eq!(part.easy, ["only"]);
    }

    #[test]
    fn fractions_validated() {
        assert!(partition(&[], 0.0, 0.3).is_err());
        assert!(partition(&[], 0.3, 1.0).is_err());
    }

    #[test]
    fn fraction_count_is_floor_without_representation_loss() {
        assert_eq!(fraction_count(100, 0.17), 17);
        assert_eq!(fraction_count(10_000, 0.33), 3300);
        assert_eq!(fraction_count(50, 0.01), 0);
        assert_eq!(fraction_count(1, 0.3), 0);
        assert_eq!(fraction_count(7, 0.5), 3);
    }

    #[test]
    fn csv_round_trip() {
        let pts = vec![pt("a", 0.25, 0.125), pt("b,c", 1.0, 0.0)];
        assert_eq!(map_from_csv(&map_to_csv(&pts)).unwrap(), pts);
    }
}
