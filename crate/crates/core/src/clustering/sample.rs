//! Subsampling: a uniform control and the cluster-exhaustion sampler.
//!
//! The diverse sampler visits clusters round-robin in a seeded order and takes
//! one unused point per visit, so small clusters run dry first and the
//! smallest samples touch the most clusters.

use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClusterError, Result};
use crate::cartography::fraction_count;
use crate::random::stream_rng;

/// Order in which points are drawn from inside one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WithinOrder {
    Random,
    /// Closest to the centroid first.
    Centroid,
}

impl FromStr for WithinOrder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "random" => Ok(WithinOrder::Random),
            "centroid" => Ok(WithinOrder::Centroid),
            other => Err(format!("unknown within-cluster order \"{other}\"")),
        }
    }
}

/// Full diverse ordering of all points; every diverse sample is a prefix.
fn diverse_order(
    assignments: &[usize],
    k: usize,
    distances: Option<&[f64]>,
    seed: u64,
    within: WithinOrder,
) -> Result<Vec<usize>> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &a) in assignments.iter().enumerate() {
        if a >= k {
            return Err(ClusterError::BadAssignment { index: i, value: a, k });
        }
        members[a].push(i);
    }
    let mut rng = stream_rng(seed, "diverse");
    let mut cluster_order: Vec<usize> = (0..k).collect();
    cluster_order.shuffle(&mut rng);
    for m in members.iter_mut() {
        match (within, distances) {
            (WithinOrder::Centroid, Some(d)) => {
                m.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
            }
            (WithinOrder::Centroid, None) => {
                return Err(ClusterError::BadPlan(
                    "centroid order needs point-to-centroid distances".into(),
                ))
            }
            (WithinOrder::Random, _) => m.shuffle(&mut rng),
        }
    }
    let mut cursors = vec![0usize; k];
    let mut out = Vec::with_capacity(assignments.len());
    while out.len() < assignments.len() {
        for &c in &cluster_order {
            if cursors[c] < members[c].len() {
                out.push(members[c][cursors[c]]);
                cursors[c] += 1;
            }
        }
    }
    Ok(out)
}

/// Round-robin over clusters until `n_target` points are taken.
pub fn diverse_sample(
    assignments: &[usize],
    k: usize,
    distances: Option<&[f64]>,
    n_target: usize,
    seed: u64,
    within: WithinOrder,
) -> Result<Vec<usize>> {
    if n_target > assignments.len() {
        return Err(ClusterError::TargetTooLarge {
            requested: n_target,
            available: assignments.len(),
        });
    }
    let mut order = diverse_order(assignments, k, distances, seed, within)?;
    order.truncate(n_target);
    Ok(order)
}

/// Uniform sample without replacement: the first `n_target` entries of a
/// seeded permutation of `0..n_total`.
pub fn random_sample(n_total: usize, n_target: usize, seed: u64) -> Result<Vec<usize>> {
    if n_target > n_total {
        return Err(ClusterError::TargetTooLarge {
            requested: n_target,
            available: n_total,
        });
    }
    let mut rng = stream_rng(seed, "random-sample");
    let mut all: Vec<usize> = (0..n_total).collect();
    all.shuffle(&mut rng);
    all.truncate(n_target);
    Ok(all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    Random,
    Diverse,
}

impl FromStr for SampleMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "random" => Ok(SampleMode::Random),
            "diverse" => Ok(SampleMode::Diverse),
            other => Err(format!("unknown sample mode \"{other}\"")),
        }
    }
}

/// Nested subsamples at increasing fractions of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub mode: SampleMode,
    pub fractions: Vec<f64>,
    pub seed: u64,
    pub within: WithinOrder,
}

impl SamplePlan {
    /// 10%, 20%, ..., 100%.
    pub fn default_fractions() -> Vec<f64> {
        (1..=10).map(|i| i as f64 / 10.0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return Err(ClusterError::BadPlan(format!(
                "fractions must lie in (0, 1]: {:?}",
                self.fractions
            )));
        }
        if self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ClusterError::BadPlan(format!(
                "fractions must be strictly increasing: {:?}",
                self.fractions
            )));
        }
        Ok(())
    }

    /// One index list per fraction, each a prefix of the next. `clusters`
    /// (assignments, k, distances) is required in diverse mode.
    pub fn run(
        &self,
        n_total: usize,
        clusters: Option<(&[usize], usize, Option<&[f64]>)>,
    ) -> Result<Vec<(f64, Vec<usize>)>> {
        self.validate()?;
        let order = match self.mode {
            SampleMode::Random => random_sample(n_total, n_total, self.seed)?,
            SampleMode::Diverse => {
                let (assignments, k, distances) = clusters.ok_or_else(|| {
                    ClusterError::BadPlan("diverse sampling needs cluster assignments".into())
                })?;
                if assignments.len() != n_total {
                    return Err(ClusterError::BadPlan(format!(
                        "{} assignments for {n_total} points",
                        assignments.len()
                    )));
                }
                diverse_order(assignments, k, distances, self.seed, self.within)?
            }
        };
        Ok(self
            .fractions
            .iter()
            .map(|&f| (f, order[..fraction_count(n_total, f)].to_vec()))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(sample: &[usize], assignments: &[usize], k: usize) -> Vec<usize> {
        let mut c = vec![0; k];
        for &i in sample {
            c[assignments[i]] += 1;
        }
        c
    }

    #[test]
    fn balanced_round_robin() {
        let a = [0, 0, 0, 1, 1, 1];
        for seed in 0..10 {
            let s = diverse_sample(&a, 2, None, 4, seed, WithinOrder::Random).unwrap();
            assert_eq!(counts(&s, &a, 2), vec![2, 2]);
        }
    }

    #[test]
    fn small_cluster_exhausted_first() {
        let a = [0, 1, 1, 1, 1, 1];
        for seed in 0..10 {
            let s = diverse_sample(&a, 2, None, 4, seed, WithinOrder::Random).unwrap();
            assert_eq!(counts(&s, &a, 2), vec![1, 3]);
        }
    }

    #[test]
    fn full_target_is_everything() {
        let a = [2, 0, 1, 1, 0, 2, 2];
        let mut s = diverse_sample(&a, 3, None, 7, 4, WithinOrder::Random).unwrap();
        s.sort_unstable();
        assert_eq!(s, (0..7).collect::<Vec<_>>());
        assert!(diverse_sample(&a, 3, None, 8, 4, WithinOrder::Random).is_err());
    }

    #[test]
    fn centroid_order_takes_closest() {
        let a = [0, 0, 0];
        let d = [3.0, 1.0, 2.0];
        let s = diverse_sample(&a, 1, Some(&d), 3, 0, WithinOrder::Centroid).unwrap();
        assert_eq!(s, vec![1, 2, 0]);
        assert!(diverse_sample(&a, 1, None, 1, 0, WithinOrder::Centroid).is_err());
    }

    #[test]
    fn random_sample_contract() {
        let mut p = random_sample(5, 5, 1).unwrap();
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2, 3, 4]);
        assert!(random_sample(5, 0, 1).unwrap().is_empty());
        assert_eq!(random_sample(100, 10, 7).unwrap(), random_sample(100, 10, 7).unwrap());
        assert!(random_sample(3, 4, 0).is_err());
    }

    #[test]
    fn plan_is_nested() {
        let a: Vec<usize> = (0..50).map(|i| i % 7).collect();
        let plan = SamplePlan {
            mode: SampleMode::Diverse,
            fractions: SamplePlan::default_fractions(),
            seed: 3,
            within: WithinOrder::Random,
        };
        let out = plan.run(50, Some((&a, 7, None))).unwrap();
        assert_eq!(out.len(), 10);
        assert_eq!(out[0].1.len(), 5);
        assert_eq!(out[9].1.len(), 50);
        for w in out.windows(2) {
            assert!(w[1].1.starts_with(&w[0].1));
        }
        // 5 points from 7 clusters: all distinct clusters.
        let c = counts(&out[0].1, &a, 7);
        assert!(c.iter().all(|&x| x <= 1));
    }
}
