//! Embedded invariant checks, runnable without any input files.

use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::cartography::{compute_map, curriculum_order, partition, CurriculumSchedule, Partition};
use crate::clustering::{diverse_sample, WithinOrder};
use crate::corpus::{decode_payload, Corpus, EmbeddingMatrix, Example, Label, LabelScheme};
use crate::corruption::{apply_op, CharOp};
use crate::dynamics::{DynamicsLog, EpochRecord};
use crate::evaluation::{evaluate, format_delta, Prediction, Predictions};
use crate::hex::{hex_project, hex_project_with_cache};
use crate::random::{gaussian, stream_rng};
use crate::tensor::gradcheck::{central_difference, max_relative_error};
use crate::tensor::{softmax, AdapterBlock, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| gaussian(rng)).collect()).expect("sized")
}

fn hex_worked_values() -> Result<String, String> {
    let g = Matrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
    let a = Matrix::from_vec(2, 1, vec![3.0, 4.0]).unwrap();
    for (lambda, want) in [(0.0, [0.0, 4.0]), (1.0, [1.5, 4.0])] {
        let l = hex_project(&a, &g, lambda).map_err(|e| e.to_string())?;
        let err = l.data().iter().zip(want).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        ensure(err <= 1e-12, || format!("lambda {lambda}: got {:?}", l.data()))?;
    }
    Ok("[[0],[4]] and [[1.5],[4]]".into())
}

fn hex_orthogonality() -> Result<String, String> {
    let mut rng = stream_rng(0, "selftest-hex");
    for _ in 0..50 {
        let c = rng.gen_range(2..=8);
        let b = rng.gen_range(c.max(4)..=64);
        let a = random(b, c, &mut rng);
        let g = random(b, c, &mut rng);
        let l = hex_project(&a, &g, 0.0).map_err(|e| e.to_string())?;
        let bound = 1e-6 * g.frobenius_norm() * a.frobenius_norm();
        let gl = g.t_matmul(&l).unwrap().max_abs();
        ensure(gl <= bound, || format!("{b}x{c}: |G^T L| = {gl:e} > {bound:e}"))?;
    }
    Ok("50 random pairs".into())
}

fn hex_gradient() -> Result<String, String> {
    let mut rng = stream_rng(1, "selftest-hex-grad");
    let (a, g, gbar) = (random(5, 3, &mut rng), random(5, 3, &mut rng), random(5, 3, &mut rng));
    let lambda = 0.1;
    let loss = |a: &Matrix, g: &Matrix| -> f64 {
        let l = hex_project(a, g, lambda).unwrap();
        l.data().iter().zip(gbar.data()).map(|(x, y)| x * y).sum()
    };
    let grad = hex_project_with_cache(&a, &g, lambda)
        .and_then(|p| p.backward(&a, &g, &gbar))
        .map_err(|e| e.to_string())?;
    let na = central_difference(a.data(), 1e-6, |v| loss(&Matrix::from_vec(5, 3, v.to_vec()).unwrap(), &g));
    let ng = central_difference(g.data(), 1e-6, |v| loss(&a, &Matrix::from_vec(5, 3, v.to_vec()).unwrap()));
    let err = max_relative_error(grad.d_f_a.data(), &na).max(max_relative_error(grad.d_f_g.data(), &ng));
    ensure(err <= 1e-4, || format!("relative error {err:e}"))?;
    Ok(format!("max relative error {err:.1e}"))
}

fn softmax_rows() -> Result<String, String> {
    let mut rng = stream_rng(2, "selftest-softmax");
    let logits = random(64, 5, &mut rng).scale(30.0);
    let p = softmax(&logits);
    for i in 0..p.rows() {
        let s: f64 = p.row(i).iter().sum();
        ensure((s - 1.0).abs() <= 1e-12, || format!("row {i} sums to {s}"))?;
    }
    Ok("64 rows".into())
}

fn adapter_identity() -> Result<String, String> {
    let mut rng = stream_rng(3, "selftest-adapter");
    let block = AdapterBlock::new(32, 16, &mut rng).map_err(|e| e.to_string())?;
    let x = random(4, 32, &mut rng);
    let y = block.forward(&x).map_err(|e| e.to_string())?;
    ensure(y == x, || "zero-initialized adapter changed its input".into())?;
    Ok("exact".into())
}

fn random_log(rng: &mut impl Rng, n: usize, epochs: usize) -> DynamicsLog {
    let ids = (0..n).map(|i| format!("x{i}")).collect();
    let records = (0..n)
        .map(|_| {
            (0..epochs)
                .map(|_| EpochRecord {
                    gold_prob: rng.gen(),
                    correct: rng.gen(),
                })
                .collect()
        })
        .collect();
    DynamicsLog::from_records(ids, records).expect("valid log")
}

fn cartography_oracle() -> Result<String, String> {
    let mut rng = stream_rng(4, "selftest-carto");
    for _ in 0..50 {
        let epochs = rng.gen_range(1..8);
        let log = random_log(&mut rng, 20, epochs);
        let map = compute_map(&log).map_err(|e| e.to_string())?;
        for (p, (_, recs)) in map.iter().zip(log.iter()) {
            let probs: Vec<f64> = recs.iter().map(|r| r.gold_prob).collect();
            let (mean, std) = crate::evaluation::mean_std(&probs);
            ensure((p.confidence - mean).abs() <= 1e-12 && (p.variability - std).abs() <= 1e-12, || {
                format!("{}: ({}, {}) vs ({mean}, {std})", p.id, p.confidence, p.variability)
            })?;
        }
        let part = partition(&map, rng.gen_range(0.01..0.6), rng.gen_range(0.01..0.4)).map_err(|e| e.to_string())?;
        check_cover(&part, map.len())?;
    }
    Ok("50 random logs".into())
}

fn check_cover(p: &Partition, n: usize) -> Result<(), String> {
    let mut all: Vec<&String> = p.easy.iter().chain(&p.ambiguous).chain(&p.hard).collect();
    let total = all.len();
    all.sort();
    all.dedup();
    ensure(total == n && all.len() == n, || format!("partition covers {} of {n} ids ({total} listed)", all.len()))
}

fn curriculum_counts() -> Result<String, String> {
    let hard: Vec<String> = (0..10_000).map(|i| format!("h{i:05}")).collect();
    let part = Partition {
        easy: vec!["e".into()],
        ambiguous: Vec::new(),
        hard,
        thresholds: crate::cartography::Thresholds {
            hard_q: 0.33,
            ambiguous_q: 0.33,
            hard_max_confidence: None,
            ambiguous_min_variability: None,
        },
    };
    let c = curriculum_order(&part, &CurriculumSchedule::default()).map_err(|e| e.to_string())?;
    let sizes: Vec<usize> = c.phases.iter().skip(1).map(|p| p.unique_len()).collect();
    let want = [100, 500, 1000, 1700, 2500, 3300, 5000, 7500];
    ensure(sizes == want, || format!("phase sizes {sizes:?}"))?;
    Ok("100..7500".into())
}

fn diverse_counts() -> Result<String, String> {
    let assignments = [0, 1, 1, 1, 1, 1];
    for seed in 0..10 {
        let s = diverse_sample(&assignments, 2, None, 4, seed, WithinOrder::Random).map_err(|e| e.to_string())?;
        let small = s.iter().filter(|&&i| assignments[i] == 0).count();
        ensure(small == 1 && s.len() == 4, || format!("seed {seed}: {s:?}"))?;
    }
    Ok("(1, 3)".into())
}

fn corruption_example() -> Result<String, String> {
    let out = apply_op("think'", CharOp::Insert { position: 0, ch: 'y' });
    ensure(out == "ythink'", || format!("got {out}"))?;
    Ok(out)
}

fn chance_headline() -> Result<String, String> {
    let examples = [("a", Label::Entailment), ("b", Label::NonEntailment), ("c", Label::NonEntailment)]
        .iter()
        .map(|(id, label)| Example {
            id: id.to_string(),
            premise: "p".into(),
            hypothesis: "h".into(),
            label: *label,
            heuristic: None,
        })
        .collect();
    let corpus = Corpus::new("chance", LabelScheme::TwoClass, examples).map_err(|e| e.to_string())?;
    let preds = Predictions::new(
        corpus
            .ids()
            .map(|id| Prediction {
                id: id.to_string(),
                label: Label::Entailment,
                logits: None,
            })
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let r = evaluate(&corpus, &preds).map_err(|e| e.to_string())?;
    ensure(r.headline == 0.5, || format!("headline {}", r.headline))?;
    Ok("50.00".into())
}

fn delta_format() -> Result<String, String> {
    let got: Vec<String> = [18.2, 13.78, -28.89, 0.0].into_iter().map(format_delta).collect();
    ensure(got == ["+18.2", "+13.78", "-28.89", "+0.0"], || format!("{got:?}"))?;
    Ok(got.join(" "))
}

fn embedding_bytes() -> Result<String, String> {
    let m = EmbeddingMatrix::new(vec!["a".into()], 1, vec![0.5]).map_err(|e| e.to_string())?;
    let bytes = m.to_bytes();
    ensure(bytes[12..] == [0x00, 0x00, 0x00, 0x3f], || format!("payload {:?}", &bytes[12..]))?;
    let (r, c, data) = decode_payload(Path::new("<memory>"), &bytes).map_err(|e| e.to_string())?;
    ensure((r, c, data) == (1, 1, vec![0.5]), || "round trip differs".into())?;
    Ok("EMB1 round trip".into())
}

const CHECKS: &[(&str, Check)] = &[
    ("hex_worked_values", hex_worked_values),
    ("hex_orthogonality", hex_orthogonality),
    ("hex_gradient", hex_gradient),
    ("softmax_row_sums", softmax_rows),
    ("adapter_zero_init_identity", adapter_identity),
    ("cartography_oracle", cartography_oracle),
    ("curriculum_counts", curriculum_counts),
    ("diverse_sample_counts", diverse_counts),
    ("corruption_example", corruption_example),
    ("chance_headline", chance_headline),
    ("delta_format", delta_format),
    ("embedding_bytes", embedding_bytes),
];

pub fn run_selftest() -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|(name, check)| {
            let (passed, detail) = match std::panic::catch_unwind(check) {
                Ok(Ok(d)) => (true, d),
                Ok(Err(d)) => (false, d),
                Err(_) => (false, "panicked".to_string()),
            };
            CheckResult { name, passed, detail }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for r in run_selftest() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
