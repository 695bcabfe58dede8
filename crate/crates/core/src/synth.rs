//! Synthetic biased NLI-like data for exercising the whole pipeline.
//!
//! Every example has a "true" coordinate whose sign always matches the label
//! and a "spurious" coordinate whose sign matches it with probability
//! `bias_strength`. The spurious sign also drives the text: when it points to
//! entailment the hypothesis copies premise words, otherwise it shares none.
//!
//! Three splits are produced: `train` (biased), `anti` (spurious sign always
//! inverted) and `probe` (spurious sign independent of the label, balanced).

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{write_corpus, write_embeddings, Corpus, CorpusError, EmbeddingMatrix, Example, Heuristic, Label, LabelScheme};
use crate::random::{gaussian, stream_rng};
use crate::tensor::Matrix;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("need n >= 10, got {0}")]
    TooSmall(usize),
    #[error("need d >= 2, got {0}")]
    TooNarrow(usize),
    #[error("bias strength must lie in [0, 1], got {0}")]
    BadBias(f64),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("writing synthetic data")]
    Io(#[from] std::io::Error),
    #[error("writing metadata")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SynthError>;

const PREMISE_WORDS: usize = 6;
const HYPOTHESIS_WORDS: usize = 4;
const VOCAB: usize = 400;
const SYLLABLES: [&str; 10] = ["ba", "ko", "li", "mu", "ne", "ra", "si", "to", "vu", "ze"];

fn word(k: usize) -> String {
    format!("{}{}{}", SYLLABLES[k % 10], SYLLABLES[(k / 10) % 10], SYLLABLES[(k / 100) % 10])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthMeta {
    pub id: String,
    pub split: String,
    pub label: Label,
    pub true_coord: f64,
    /// +1 when the spurious feature points to entailment, -1 otherwise.
    pub spurious: i8,
}

#[derive(Debug, Clone)]
pub struct SynthSplit {
    pub corpus: Corpus,
    /// `d`-wide rows: true coordinate, spurious coordinate, noise.
    pub main: EmbeddingMatrix,
    pub premise: EmbeddingMatrix,
    /// `premise + main`, so the pair difference recovers the main row.
    pub hypothesis: EmbeddingMatrix,
    pub meta: Vec<SynthMeta>,
}

impl SynthSplit {
    pub fn gold(&self) -> Vec<usize> {
        self.corpus.gold_indices()
    }

    /// Spurious sign as a class index: 0 for entailment-like, 1 otherwise.
    pub fn spurious_classes(&self) -> Vec<usize> {
        self.meta.iter().map(|m| usize::from(m.spurious < 0)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub train: SynthSplit,
    pub anti: SynthSplit,
    pub probe: SynthSplit,
}

/// How often the spurious sign agrees with the label.
#[derive(Clone, Copy)]
enum Agreement {
    Rate(f64),
    Never,
}

fn make_split(name: &str, n: usize, d: usize, agreement: Agreement, seed: u64) -> Result<SynthSplit> {
    let mut rng = stream_rng(seed, &format!("synth-{name}"));
    // Labels alternate; within each label an exact share agrees.
    let mut agrees = vec![false; n];
    for class in 0..2 {
        let mut idx: Vec<usize> = (class..n).step_by(2).collect();
        let k = match agreement {
            Agreement::Rate(r) => (r * idx.len() as f64).round() as usize,
            Agreement::Never => 0,
        };
        idx.shuffle(&mut rng);
        for &i in &idx[..k] {
            agrees[i] = true;
        }
    }

    let mut examples = Vec::with_capacity(n);
    let mut meta = Vec::with_capacity(n);
    let mut main = Vec::with_capacity(n * d);
    let mut premise = Vec::with_capacity(n * d);
    let vocab: Vec<usize> = (0..VOCAB).collect();
    for (i, &agree) in agrees.iter().enumerate() {
        let label = if i % 2 == 0 { Label::Entailment } else { Label::NonEntailment };
        let y: f64 = if label == Label::Entailment { 1.0 } else { -1.0 };
        let s = if agree { y } else { -y };
        let t = y * (0.1 + 0.5 * gaussian(&mut rng).abs());
        let mut row = vec![t, s + 0.1 * gaussian(&mut rng)];
        row.extend((2..d).map(|_| gaussian(&mut rng)));
        for v in &row {
            premise.push(gaussian(&mut rng));
            main.push(*v);
        }

        let p_words: Vec<usize> = vocab.choose_multiple(&mut rng, PREMISE_WORDS).copied().collect();
        let h_words: Vec<usize> = if s > 0.0 {
            p_words.choose_multiple(&mut rng, HYPOTHESIS_WORDS).copied().collect()
        } else {
            let rest: Vec<usize> = vocab.iter().copied().filter(|w| !p_words.contains(w)).collect();
            rest.choose_multiple(&mut rng, HYPOTHESIS_WORDS).copied().collect()
        };
        let sentence = |ws: &[usize]| {
            let mut text = ws.iter().map(|&w| word(w)).collect::<Vec<_>>().join(" ");
            text.push('.');
            text
        };
        let id = format!("{name}-{i:05}");
        examples.push(Example {
            id: id.clone(),
            premise: sentence(&p_words),
            hypothesis: sentence(&h_words),
            label,
            heuristic: Some(Heuristic::LexicalOverlap),
        });
        meta.push(SynthMeta {
            id,
            split: name.to_string(),
            label,
            true_coord: t,
            spurious: if s > 0.0 { 1 } else { -1 },
        });
    }

    let ids: Vec<String> = meta.iter().map(|m| m.id.clone()).collect();
    let main_m = Matrix::from_vec(n, d, main).expect("n·d values");
    let premise_m = Matrix::from_vec(n, d, premise).expect("n·d values");
    let hyp_m = premise_m.add(&main_m).expect("same shape");
    Ok(SynthSplit {
        corpus: Corpus::new(name, LabelScheme::TwoClass, examples)?,
        main: EmbeddingMatrix::from_matrix(ids.clone(), &main_m)?,
        premise: EmbeddingMatrix::from_matrix(ids.clone(), &premise_m)?,
        hypothesis: EmbeddingMatrix::from_matrix(ids, &hyp_m)?,
        meta,
    })
}

/// `n` training rows and `max(n / 2, 10)` rows in each evaluation split.
pub fn synth_demo(seed: u64, n: usize, d: usize, bias_strength: f64) -> Result<SynthData> {
    if n < 10 {
        return Err(SynthError::TooSmall(n));
    }
    if d < 2 {
        return Err(SynthError::TooNarrow(d));
    }
    if !(0.0..=1.0).contains(&bias_strength) {
        return Err(SynthError::BadBias(bias_strength));
    }
    let m = (n / 2).max(10);
    Ok(SynthData {
        train: make_split("train", n, d, Agreement::Rate(bias_strength), seed)?,
        anti: make_split("anti", m, d, Agreement::Never, seed)?,
        probe: make_split("probe", m, d, Agreement::Rate(0.5), seed)?,
    })
}

impl SynthData {
    pub fn splits(&self) -> [&SynthSplit; 3] {
        [&self.train, &self.anti, &self.probe]
    }

    /// Writes `<split>.jsonl`, `<split>.{main,premise,hypothesis}.emb` (with
    /// id sidecars) and a combined `meta.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut meta = csv::Writer::from_path(dir.join("meta.csv"))?;
        for split in self.splits() {
            let name = &split.corpus.name;
            let p = dir.join(format!("{name}.jsonl"));
            write_corpus(&split.corpus, &p)?;
            written.push(p);
            for (kind, emb) in [("main", &split.main), ("premise", &split.premise), ("hypothesis", &split.hypothesis)] {
                let p = dir.join(format!("{name}.{kind}.emb"));
                write_embeddings(emb, &p)?;
                written.push(p);
            }
            for m in &split.meta {
                meta.serialize(m)?;
            }
        }
        meta.flush()?;
        written.push(dir.join("meta.csv"));
        Ok(written)
    }
}
