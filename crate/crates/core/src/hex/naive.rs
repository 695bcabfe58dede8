//! Hashed bag-of-words features for the naive branch.
//!
//! Layout of a `dim`-wide vector: slots `0..dim-1` hold signed hashed unigram
//! counts of premise (`p:` namespace) and hypothesis (`h:` namespace) tokens,
//! L2-normalized as a block; the last slot holds the raw lexical-overlap
//! fraction, which is left unscaled.

use std::collections::HashSet;

use crate::hashing::{fnv1a64, mix64};
use crate::tensor::Matrix;

pub const DEFAULT_NAIVE_DIM: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NaiveFeaturizer {
    pub dim: usize,
    pub seed: u64,
}

impl Default for NaiveFeaturizer {
    fn default() -> Self {
        NaiveFeaturizer {
            dim: DEFAULT_NAIVE_DIM,
            seed: 0,
        }
    }
}

/// Lowercased runs of alphanumerics and apostrophes.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Fraction of hypothesis tokens that also occur in the premise.
pub fn overlap_fraction(premise: &[String], hypothesis: &[String]) -> f64 {
    if hypothesis.is_empty() {
        return 0.0;
    }
    let p: HashSet<&str> = premise.iter().map(String::as_str).collect();
    hypothesis.iter().filter(|t| p.contains(t.as_str())).count() as f64 / hypothesis.len() as f64
}

impl NaiveFeaturizer {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= 2, "naive feature dimension must be at least 2");
        NaiveFeaturizer { dim, seed }
    }

    fn slot(&self, namespace: &str, token: &str) -> (usize, f64) {
        let mut key = String::with_capacity(namespace.len() + token.len());
        key.push_str(namespace);
        key.push_str(token);
        let h = mix64(fnv1a64(key.as_bytes()) ^ self.seed);
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        ((h % (self.dim as u64 - 1)) as usize, sign)
    }

    pub fn features(&self, premise: &str, hypothesis: &str) -> Vec<f64> {
        let p = tokenize(premise);
        let h = tokenize(hypothesis);
        let mut out = vec![0.0; self.dim];
        for (ns, toks) in [("p:", &p), ("h:", &h)] {
            for t in toks {
                let (i, s) = self.slot(ns, t);
                out[i] += s;
            }
        }
        let last = self.dim - 1;
        let norm = out[..last].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out[..last].iter_mut().for_each(|v| *v /= norm);
        }
        out[last] = overlap_fraction(&p, &h);
        out
    }

    pub fn matrix<'a>(&self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Matrix {
        let mut data = Vec::new();
        let mut rows = 0;
        for (p, h) in pairs {
            data.extend(self.features(p, h));
            rows += 1;
        }
        Matrix::from_vec(rows, self.dim, data).expect("rows of equal width")
    }
}
