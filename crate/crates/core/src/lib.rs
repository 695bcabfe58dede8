//! Desk-scale toolkit for probing dataset bias and out-of-distribution
//! generalization in NLI-style classification.
//!
//! Everything here operates on precomputed sentence embeddings and
//! training-dynamics logs: no pretrained encoder is ever run.
//!
//! * [`corpus`]: examples, label schemes, the `EMB1` embedding format.
//! * [`tensor`]: dense matrices, MLP probes, adapter blocks, AdamW.
//! * [`dynamics`] and [`cartography`]: data maps, partitions, curricula.
//! * [`clustering`]: k-means and cluster-exhaustion subsampling.
//! * [`hex`]: orthogonal-projection debiasing with a naive text branch.
//! * [`corruption`]: character-level corruption of content words.
//! * [`evaluation`]: accuracy reports, two-label collapse, delta tables.
//! * [`synth`]: synthetic biased datasets for end-to-end runs.

pub mod cartography;
pub mod clustering;
pub mod corpus;
pub mod corruption;
pub mod dynamics;
pub mod evaluation;
pub mod hashing;
pub mod hex;
pub mod random;
pub mod selftest;
pub mod synth;
pub mod tensor;

pub use corpus::{Corpus, EmbeddingMatrix, Example, Heuristic, Label, LabelScheme};
pub use dynamics::DynamicsLog;
pub use tensor::Matrix;
