//! The `EMB1` dense embedding format.
//!
//! Layout: `b"EMB1"`, `u32` LE row count `n`, `u32` LE column count `d`,
//! then `n * d` little-endian `f32` values in row-major order. Row ids live in
//! a sidecar `<stem>.ids` file, UTF-8, one id per line.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Corpus, CorpusError, Example, Result};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, cols: usize, data: Vec<f32>) -> Result<Self> {
        let rows = ids.len();
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(CorpusError::InvalidMatrix(format!(
                "{rows} ids x {cols} columns does not match {} values",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(CorpusError::InvalidMatrix(format!(
                "non-finite value at row {}, column {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(EmbeddingMatrix {
            ids,
            rows,
            cols,
            data,
        })
    }

    /// Narrows a `Matrix` to `f32` storage.
    pub fn from_matrix(ids: Vec<String>, m: &Matrix) -> Result<Self> {
        if ids.len() != m.rows() {
            return Err(CorpusError::InvalidMatrix(format!(
                "{} ids for a matrix with {} rows",
                ids.len(),
                m.rows()
            )));
        }
        Self::new(ids, m.cols(), m.data().iter().map(|&v| v as f32).collect())
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Widens to the `f64` matrix used for all computation.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(
            self.rows,
            self.cols,
            self.data.iter().map(|&v| f64::from(v)).collect(),
        )
        .expect("shape checked at construction")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

/// `<stem>.ids` next to the matrix file.
pub fn ids_path(path: &Path) -> PathBuf {
    path.with_extension("ids")
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    fs::write(path, m.to_bytes()).map_err(|e| CorpusError::io(path, e))?;
    let mut ids = String::new();
    for id in &m.ids {
        ids.push_str(id);
        ids.push('\n');
    }
    let sidecar = ids_path(path);
    fs::write(&sidecar, ids).map_err(|e| CorpusError::io(&sidecar, e))
}

/// Decodes the binary payload; `path` is only used for error messages.
pub fn decode_payload(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < HEADER_LEN {
        let mut found = [0u8; 4];
        let n = bytes.len().min(4);
        found[..n].copy_from_slice(&bytes[..n]);
        if &found != MAGIC {
            return Err(CorpusError::BadMagic {
                path: path.to_path_buf(),
                found,
            });
        }
        return Err(CorpusError::SizeMismatch {
            path: path.to_path_buf(),
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(CorpusError::BadMagic {
            path: path.to_path_buf(),
            found: magic,
        });
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = rows as u64 * cols as u64 * 4;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != expected {
        return Err(CorpusError::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            found: payload.len() as u64,
        });
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(CorpusError::NonFinite {
                path: path.to_path_buf(),
                row: i / cols,
                col: i % cols,
            });
        }
        data.push(v);
    }
    Ok((rows, cols, data))
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = fs::read(path).map_err(|e| CorpusError::io(path, e))?;
    let (rows, cols, data) = decode_payload(path, &bytes)?;
    let sidecar = ids_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| CorpusError::io(&sidecar, e))?;
    let ids: Vec<String> = text.lines().map(str::to_string).collect();
    if ids.len() != rows {
        return Err(CorpusError::IdCountMismatch {
            path: sidecar,
            expected: rows,
            found: ids.len(),
        });
    }
    Ok(EmbeddingMatrix {
        ids,
        rows,
        cols,
        data,
    })
}

/// Examples paired with their embedding rows, in corpus order.
#[derive(Debug)]
pub struct AlignedView<'a> {
    pairs: Vec<(&'a Example, &'a [f32])>,
    cols: usize,
}

impl<'a> AlignedView<'a> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'a Example, &'a [f32])> + '_ {
        self.pairs.iter().copied()
    }

    /// Stacks the aligned rows into an `n x d` matrix.
    pub fn to_matrix(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.pairs.len() * self.cols);
        for (_, row) in &self.pairs {
            data.extend(row.iter().map(|&v| f64::from(v)));
        }
        Matrix::from_vec(self.pairs.len(), self.cols, data).expect("rows share width")
    }
}

/// Aligns `m` to `corpus`. Fails on the first corpus id with no row.
pub fn join<'a>(corpus: &'a Corpus, m: &'a EmbeddingMatrix) -> Result<AlignedView<'a>> {
    let index: HashMap<&str, usize> = m
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let pairs = corpus
        .examples
        .iter()
        .map(|ex| {
            index
                .get(ex.id.as_str())
                .map(|&i| (ex, m.row(i)))
                .ok_or_else(|| CorpusError::MissingId(ex.id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AlignedView {
        pairs,
        cols: m.cols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, LabelScheme};

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn two_by_three_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.emb");
        let m = EmbeddingMatrix::new(ids(&["a", "b"]), 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5]).unwrap();
        write_embeddings(&m, &p).unwrap();
        let back = load_embeddings(&p).unwrap();
        assert_eq!(back.rows(), 2);
        assert_eq!(back.cols(), 3);
        assert_eq!(back, m);
        assert_eq!(fs::read_to_string(dir.path().join("m.ids")).unwrap(), "a\nb\n");
    }

    #[test]
    fn empty_matrix_is_header_only() {
        let m = EmbeddingMatrix::new(vec![], 4, vec![]).unwrap();
        let bytes = m.to_bytes();
        assert_eq!(bytes.len(), 12);
        assert_eq!(&bytes[..4], b"EMB1");
    }

    #[test]
    fn half_is_little_endian() {
        let m = EmbeddingMatrix::new(ids(&["x"]), 1, vec![0.5]).unwrap();
        assert_eq!(&m.to_bytes()[12..], &[0x00, 0x00, 0x00, 0x3F]);
    }

    #[test]
    fn short_payload_is_size_mismatch() {
        let mut bytes = b"EMB1".to_vec();
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 20]);
        assert!(matches!(
            decode_payload(Path::new("x"), &bytes),
            Err(CorpusError::SizeMismatch { expected: 24, found: 20, .. })
        ));
    }

    #[test]
    fn wrong_magic_rejected() {
        let bytes = b"EMB2\0\0\0\0\0\0\0\0".to_vec();
        assert!(matches!(
            decode_payload(Path::new("x"), &bytes),
            Err(CorpusError::BadMagic { .. })
        ));
    }

    #[test]
    fn nan_rejected_on_load() {
        let mut bytes = b"EMB1".to_vec();
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode_payload(Path::new("x"), &bytes),
            Err(CorpusError::NonFinite { row: 0, col: 1, .. })
        ));
    }

    fn corpus(ids: &[&str]) -> Corpus {
        let examples = ids
            .iter()
            .map(|id| Example {
                id: id.to_string(),
                premise: "p".into(),
                hypothesis: "h".into(),
                label: Label::Neutral,
                heuristic: None,
            })
            .collect();
        Corpus::new("t", LabelScheme::ThreeClass, examples).unwrap()
    }

    #[test]
    fn join_follows_corpus_order() {
        let m = EmbeddingMatrix::new(ids(&["b", "a"]), 1, vec![2.0, 1.0]).unwrap();
        let c = corpus(&["a", "b"]);
        let view = join(&c, &m).unwrap();
        let got: Vec<(&str, f32)> = view.iter().map(|(e, r)| (e.id.as_str(), r[0])).collect();
        assert_eq!(got, vec![("a", 1.0), ("b", 2.0)]);
    }

    #[test]
    fn join_names_missing_id() {
        let m = EmbeddingMatrix::new(ids(&["a"]), 1, vec![1.0]).unwrap();
        let c = corpus(&["a", "c"]);
        assert!(matches!(join(&c, &m), Err(CorpusError::MissingId(id)) if id == "c"));
    }

    #[test]
    fn join_empty_corpus() {
        let m = EmbeddingMatrix::new(ids(&["a"]), 1, vec![1.0]).unwrap();
        let c = corpus(&[]);
        assert!(join(&c, &m).unwrap().is_empty());
    }
}
