//! Easy-warmup-then-hard curricula.
//!
//! Phase 0 is a slice of the easy region repeated for a few passes. Each
//! following phase holds the top `f` fraction of the chosen source (hard or
//! ambiguous), hardest first. Phases are cumulative, so phase `i` is a prefix
//! of phase `i + 1`.

use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{fraction_count, CartographyError, Partition, Result};
use crate::random::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Hard,
    Ambiguous,
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "hard" => Ok(Source::Hard),
            "ambiguous" => Ok(Source::Ambiguous),
            other => Err(format!("unknown curriculum source \"{other}\"")),
        }
    }
}

/// How the warmup slice is drawn from the easy region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum EasyPick {
    /// Highest-confidence easy examples.
    Top,
    /// Seeded uniform subset of the easy region.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    pub easy_fraction: f64,
    pub easy_epochs: usize,
    pub hard_fractions: Vec<f64>,
    pub source: Source,
    pub easy_pick: EasyPick,
    /// Prepend the warmup slice to every later phase.
    pub include_easy: bool,
}

pub const DEFAULT_HARD_FRACTIONS: [f64; 8] = [0.01, 0.05, 0.10, 0.17, 0.25, 0.33, 0.50, 0.75];

impl Default for CurriculumSchedule {
    fn default() -> Self {
        CurriculumSchedule {
            easy_fraction: 0.25,
            easy_epochs: 2,
            hard_fractions: DEFAULT_HARD_FRACTIONS.to_vec(),
            source: Source::Hard,
            easy_pick: EasyPick::Top,
            include_easy: false,
        }
    }
}

impl CurriculumSchedule {
    pub fn validate(&self) -> Result<()> {
        let in_range = |f: f64| f > 0.0 && f <= 1.0;
        if !in_range(self.easy_fraction) {
            return Err(CartographyError::BadFraction {
                name: "easy_fraction",
                value: self.easy_fraction,
                range: "(0, 1]",
            });
        }
        if self.easy_epochs == 0 {
            return Err(CartographyError::BadSchedule("easy_epochs must be at least 1".into()));
        }
        if let Some(&f) = self.hard_fractions.iter().find(|&&f| !in_range(f)) {
            return Err(CartographyError::BadFraction {
                name: "hard_fractions",
                value: f,
                range: "(0, 1]",
            });
        }
        if self.hard_fractions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CartographyError::BadSchedule(format!(
                "fractions must be strictly increasing: {:?}",
                self.hard_fractions
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub fraction: f64,
    /// Passes over `ids` that make up this phase.
    pub passes: usize,
    /// Training order; an id appears once per pass.
    pub ids: Vec<String>,
    /// The requested fraction floored to zero ids.
    pub truncated: bool,
}

impl Phase {
    pub fn unique_len(&self) -> usize {
        self.ids.len() / self.passes.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub schedule: CurriculumSchedule,
    pub phases: Vec<Phase>,
    pub warnings: Vec<String>,
}

/// Builds the phase list. Partition lists must be in the rank order that
/// [`super::partition`] produces.
pub fn curriculum_order(partition: &Partition, schedule: &CurriculumSchedule) -> Result<Curriculum> {
    schedule.validate()?;
    let mut warnings = Vec::new();

    if partition.easy.is_empty() {
        return Err(CartographyError::EmptyCategory("easy"));
    }
    let n_easy = fraction_count(partition.easy.len(), schedule.easy_fraction);
    let warmup: Vec<String> = match schedule.easy_pick {
        EasyPick::Top => partition.easy[..n_easy].to_vec(),
        EasyPick::Random { seed } => {
            let mut rng = stream_rng(seed, "curriculum-easy");
            let mut picked = index::sample(&mut rng, partition.easy.len(), n_easy).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| partition.easy[i].clone()).collect()
        }
    };
    let easy_truncated = n_easy == 0;
    if easy_truncated {
        warnings.push(format!(
            "easy fraction {} of {} ids floors to 0",
            schedule.easy_fraction,
            partition.easy.len()
        ));
    }
    let mut phases = vec![Phase {
        name: "easy".into(),
        fraction: schedule.easy_fraction,
        passes: schedule.easy_epochs,
        ids: warmup.iter().cycle().take(warmup.len() * schedule.easy_epochs).cloned().collect(),
        truncated: easy_truncated,
    }];

    let (name, source) = match schedule.source {
        Source::Hard => ("hard", &partition.hard),
        Source::Ambiguous => ("ambiguous", &partition.ambiguous),
    };
    if source.is_empty() && !schedule.hard_fractions.is_empty() {
        return Err(CartographyError::EmptyCategory(name));
    }
    for &f in &schedule.hard_fractions {
        let count = fraction_count(source.len(), f);
        let truncated = count == 0;
        if truncated {
            warnings.push(format!("{name} fraction {f} of {} ids floors to 0", source.len()));
        }
        let mut ids = if schedule.include_easy { warmup.clone() } else { Vec::new() };
        ids.extend_from_slice(&source[..count]);
        phases.push(Phase {
            name: format!("{name}@{f}"),
            fraction: f,
            passes: 1,
            ids,
            truncated,
        });
    }
    Ok(Curriculum {
        schedule: schedule.clone(),
        phases,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::super::Thresholds;
    use super::*;

    fn part(easy: usize, hard: usize) -> Partition {
        Partition {
            easy: (0..easy).map(|i| format!("e{i}")).collect(),
            ambiguous: vec!["a0".into()],
            hard: (1..=hard).map(|i| format!("h{i}")).collect(),
            thresholds: Thresholds {
                hard_q: 0.33,
                ambiguous_q: 0.33,
                hard_max_confidence: None,
                ambiguous_min_variability: None,
            },
        }
    }

    #[test]
    fn hard_prefix() {
        let sched = CurriculumSchedule {
            hard_fractions: vec![0.05],
            ..Default::default()
        };
        let c = curriculum_order(&part(4, 100), &sched).unwrap();
        assert_eq!(c.phases[1].ids, ["h1", "h2", "h3", "h4", "h5"]);
    }

    #[test]
    fn easy_warmup_repeats() {
        let c = curriculum_order(&part(8, 10), &CurriculumSchedule::default()).unwrap();
        let warm = &c.phases[0];
        assert_eq!(warm.unique_len(), 2);
        assert_eq!(warm.ids, ["e0", "e1", "e0", "e1"]);
        assert_eq!(warm.passes, 2);
    }

    #[test]
    fn floor_to_zero_warns() {
        let sched = CurriculumSchedule {
            hard_fractions: vec![0.01],
            ..Default::default()
        };
        let c = curriculum_order(&part(4, 50), &sched).unwrap();
        assert!(c.phases[1].ids.is_empty());
        assert!(c.phases[1].truncated);
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn ambiguous_source_and_include_easy() {
        let sched = CurriculumSchedule {
            hard_fractions: vec![1.0],
            source: Source::Ambiguous,
            include_easy: true,
            ..Default::default()
        };
        let c = curriculum_order(&part(4, 3), &sched).unwrap();
        assert_eq!(c.phases[1].ids, ["e0", "a0"]);
    }

    #[test]
    fn random_easy_pick_is_seeded() {
        let sched = CurriculumSchedule {
            easy_pick: EasyPick::Random { seed: 3 },
            ..Default::default()
        };
        let a = curriculum_order(&part(40, 10), &sched).unwrap();
        let b = curriculum_order(&part(40, 10), &sched).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.phases[0].unique_len(), 10);
    }

    #[test]
    fn invalid_schedules() {
        let p = part(4, 4);
        let bad = |s: CurriculumSchedule| curriculum_order(&p, &s).is_err();
        assert!(bad(CurriculumSchedule {
            hard_fractions: vec![0.5, 0.5],
            ..Default::default()
        }));
        assert!(bad(CurriculumSchedule {
            hard_fractions: vec![1.5],
            ..Default::default()
        }));
        assert!(bad(CurriculumSchedule {
            easy_fraction: 0.0,
            ..Default::default()
        }));
        let mut empty_hard = part(4, 0);
        empty_hard.hard.clear();
        assert_eq!(
            curriculum_order(&empty_hard, &CurriculumSchedule::default()).unwrap_err(),
            CartographyError::EmptyCategory("hard")
        );
    }
}
