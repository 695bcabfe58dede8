//! Head parameters on disk: one `EMB1` matrix per tensor plus `head.json`
//! with the layer shapes and λ. Weights are stored as f32.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HexError, HexHead, Result};
use crate::corpus::{load_embeddings, write_embeddings, EmbeddingMatrix};
use crate::tensor::{Linear, Matrix, MlpParams};

#[derive(Debug, Serialize, Deserialize)]
struct HeadMeta {
    dim: usize,
    classes: usize,
    lambda: f64,
    main_layers: usize,
    naive_layers: usize,
}

fn io_err(e: impl ToString) -> HexError {
    HexError::Io(e.to_string())
}

fn write_matrix(dir: &Path, name: &str, m: &Matrix) -> Result<()> {
    let ids = (0..m.rows()).map(|i| i.to_string()).collect();
    let emb = EmbeddingMatrix::from_matrix(ids, m).map_err(io_err)?;
    write_embeddings(&emb, &dir.join(format!("{name}.emb"))).map_err(io_err)
}

fn read_matrix(dir: &Path, name: &str) -> Result<Matrix> {
    Ok(load_embeddings(&dir.join(format!("{name}.emb"))).map_err(io_err)?.to_matrix())
}

fn write_linear(dir: &Path, name: &str, l: &Linear) -> Result<()> {
    write_matrix(dir, &format!("{name}_weight"), &l.weight)?;
    let bias = Matrix::from_vec(1, l.bias.len(), l.bias.clone()).map_err(io_err)?;
    write_matrix(dir, &format!("{name}_bias"), &bias)
}

fn read_linear(dir: &Path, name: &str) -> Result<Linear> {
    let weight = read_matrix(dir, &format!("{name}_weight"))?;
    let bias = read_matrix(dir, &format!("{name}_bias"))?;
    if bias.rows() != 1 || bias.cols() != weight.cols() {
        return Err(HexError::Io(format!("{name}: bias shape {:?}", bias.shape())));
    }
    Ok(Linear {
        weight,
        bias: bias.into_data(),
    })
}

/// Writes `head.json` and the tensor files into `dir`, which must exist.
pub fn save_head(head: &HexHead, dir: &Path) -> Result<()> {
    let meta = HeadMeta {
        dim: head.dim(),
        classes: head.classes(),
        lambda: head.lambda(),
        main_layers: head.main.layers.len(),
        naive_layers: head.naive.layers.len(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(io_err)?;
    fs::write(dir.join("head.json"), json + "\n").map_err(io_err)?;
    for (i, l) in head.main.layers.iter().enumerate() {
        write_linear(dir, &format!("main_{i}"), l)?;
    }
    for (i, l) in head.naive.layers.iter().enumerate() {
        write_linear(dir, &format!("naive_{i}"), l)?;
    }
    write_linear(dir, "classifier", &head.classifier)
}

pub fn load_head(dir: &Path) -> Result<HexHead> {
    let text = fs::read_to_string(dir.join("head.json")).map_err(io_err)?;
    let meta: HeadMeta = serde_json::from_str(&text).map_err(io_err)?;
    let main = (0..meta.main_layers)
        .map(|i| read_linear(dir, &format!("main_{i}")))
        .collect::<Result<Vec<_>>>()?;
    let naive = (0..meta.naive_layers)
        .map(|i| read_linear(dir, &format!("naive_{i}")))
        .collect::<Result<Vec<_>>>()?;
    let head = HexHead::from_parts(
        MlpParams::from_layers(main)?,
        MlpParams::from_layers(naive)?,
        read_linear(dir, "classifier")?,
        meta.lambda,
    )?;
    if head.dim() != meta.dim || head.classes() != meta.classes {
        return Err(HexError::Io("head.json disagrees with tensor shapes".into()));
    }
    Ok(head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::stream_rng;

    #[test]
    fn round_trip_within_f32() {
        let head = HexHead::new(5, 4, 3, 2, 2e-4, &mut stream_rng(1, "io")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_head(&head, dir.path()).unwrap();
        let back = load_head(dir.path()).unwrap();
        assert_eq!(back.lambda(), head.lambda());
        let diff = back.classifier.weight.sub(&head.classifier.weight).unwrap().max_abs();
        assert!(diff < 1e-6);
        assert_eq!(back.main.layers.len(), 2);
    }

    #[test]
    fn missing_dir_is_an_error() {
        assert!(load_head(Path::new("/nonexistent/hex")).is_err());
    }
}
