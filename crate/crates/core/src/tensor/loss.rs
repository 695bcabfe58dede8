use super::{shape_err, Matrix, Result, TensorError};

/// Numerically stable `log softmax` of one row.
pub fn log_softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Mean softmax cross-entropy and its gradient `(softmax - onehot) / n`.
/// An empty batch has zero loss.
pub fn cross_entropy_loss(logits: &Matrix, gold: &[usize]) -> Result<(f64, Matrix)> {
    let (n, c) = logits.shape();
    if gold.len() != n {
        return Err(shape_err("cross_entropy_loss", format!("{n} labels"), gold.len()));
    }
    if let Some((row, &class)) = gold.iter().enumerate().find(|(_, &g)| g >= c) {
        return Err(TensorError::ClassOutOfRange {
            row,
            class,
            classes: c,
        });
    }
    if n == 0 {
        return Ok((0.0, Matrix::zeros(0, c)));
    }
    let scale = 1.0 / n as f64;
    let mut grad = Matrix::zeros(n, c);
    let mut loss = 0.0;
    for (i, &g) in gold.iter().enumerate() {
        let logp = log_softmax_row(logits.row(i));
        loss -= logp[g];
        let grow = grad.row_mut(i);
        for (j, lp) in logp.iter().enumerate() {
            grow[j] = lp.exp() * scale;
        }
        grow[g] -= scale;
    }
    Ok((loss * scale, grad))
}
