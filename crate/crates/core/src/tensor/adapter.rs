use rand::Rng;

use super::mlp::relu;
use super::{shape_err, Linear, Matrix, Parameters, Result, TensorError};

pub const DEFAULT_REDUCTION: usize = 16;

/// Residual bottleneck: `x + up(relu(down(x)))`, with `down: d -> d/r`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterBlock {
    pub down: Linear,
    pub up: Linear,
    pub residual: bool,
}

#[derive(Debug, Clone)]
pub struct AdapterTrace {
    input: Matrix,
    down_out: Matrix,
    hidden: Matrix,
}

impl AdapterBlock {
    /// Bottleneck width for input width `dim` and reduction factor `r`.
    pub fn bottleneck_dim(dim: usize, reduction: usize) -> Result<usize> {
        if dim == 0 || reduction == 0 {
            return Err(TensorError::InvalidConfig(format!(
                "adapter needs positive width and reduction, got d={dim}, r={reduction}"
            )));
        }
        let m = dim / reduction;
        if m == 0 {
            return Err(TensorError::InvalidConfig(format!(
                "reduction {reduction} leaves an empty bottleneck for width {dim}"
            )));
        }
        Ok(m)
    }

    /// Both projections zero: the identity map when `residual` is on.
    pub fn zeros(dim: usize, reduction: usize, residual: bool) -> Result<Self> {
        let m = Self::bottleneck_dim(dim, reduction)?;
        Ok(AdapterBlock {
            down: Linear::zeros(dim, m),
            up: Linear::zeros(m, dim),
            residual,
        })
    }

    /// Glorot down-projection and zero up-projection, so a fresh residual
    /// adapter starts as the identity.
    pub fn new<R: Rng + ?Sized>(dim: usize, reduction: usize, rng: &mut R) -> Result<Self> {
        let m = Self::bottleneck_dim(dim, reduction)?;
        Ok(AdapterBlock {
            down: Linear::glorot(dim, m, rng),
            up: Linear::zeros(m, dim),
            residual: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.down.input_dim()
    }

    pub fn zeros_like(&self) -> Self {
        AdapterBlock {
            down: self.down.zeros_like(),
            up: self.up.zeros_like(),
            residual: self.residual,
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_trace(x)?.0)
    }

    pub fn forward_trace(&self, x: &Matrix) -> Result<(Matrix, AdapterTrace)> {
        if x.cols() != self.dim() {
            return Err(shape_err("adapter_forward", self.dim(), x.cols()));
        }
        let down_out = self.down.forward(x)?;
        let hidden = down_out.map(relu);
        let mut out = self.up.forward(&hidden)?;
        if self.residual {
            out.add_assign(x)?;
        }
        Ok((
            out,
            AdapterTrace {
                input: x.clone(),
                down_out,
                hidden,
            },
        ))
    }

    pub fn backward(&self, trace: &AdapterTrace, dy: &Matrix) -> Result<(AdapterBlock, Matrix)> {
        let (g_up, mut d_hidden) = self.up.backward(&trace.hidden, dy)?;
        for (d, &z) in d_hidden.data_mut().iter_mut().zip(trace.down_out.data()) {
            if z <= 0.0 {
                *d = 0.0;
            }
        }
        let (g_down, mut dx) = self.down.backward(&trace.input, &d_hidden)?;
        if self.residual {
            dx.add_assign(dy)?;
        }
        Ok((
            AdapterBlock {
                down: g_down,
                up: g_up,
                residual: self.residual,
            },
            dx,
        ))
    }
}

impl Parameters for AdapterBlock {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.down.weight.data(),
            &self.down.bias,
            self.up.weight.data(),
            &self.up.bias,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.down.weight.data_mut(),
            &mut self.down.bias,
            self.up.weight.data_mut(),
            &mut self.up.bias,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::{central_difference, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_init_is_exact_identity() {
        let a = AdapterBlock::zeros(32, 16, true).unwrap();
        let x = sample(3, 32, 1);
        assert_eq!(a.forward(&x).unwrap(), x);
    }

    #[test]
    fn residual_off_zero_weights_is_bias_path() {
        let mut a = AdapterBlock::zeros(16, 16, false).unwrap();
        a.down.bias = vec![0.7];
        a.up.bias = (0..16).map(|i| i as f64 * 0.1).collect();
        let out = a.forward(&sample(2, 16, 2)).unwrap();
        for i in 0..2 {
            assert_eq!(out.row(i), a.up.bias.as_slice());
        }
    }

    #[test]
    fn bottleneck_rounds_down() {
        assert_eq!(AdapterBlock::bottleneck_dim(40, 16).unwrap(), 2);
        assert!(AdapterBlock::bottleneck_dim(8, 16).is_err());
    }

    #[test]
    fn gradient_check_2x16_r16() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = AdapterBlock::new(16, 16, &mut rng).unwrap();
        a.up = Linear::glorot(1, 16, &mut rng);
        a.down.bias = vec![0.3];
        let x = sample(2, 16, 6);
        let r = sample(2, 16, 7);
        let objective = |a: &AdapterBlock, x: &Matrix| -> f64 {
            let y = a.forward(x).unwrap();
            y.data().iter().zip(r.data()).map(|(p, q)| p * q).sum()
        };
        let (_, trace) = a.forward_trace(&x).unwrap();
        let (g, dx) = a.backward(&trace, &r).unwrap();
        let flat: Vec<f64> = a.tensors().concat();
        let numeric = central_difference(&flat, 1e-5, |p| {
            let mut b = a.clone();
            let mut off = 0;
            for t in b.tensors_mut() {
                let n = t.len();
                t.copy_from_slice(&p[off..off + n]);
                off += n;
            }
            objective(&b, &x)
        });
        assert!(max_relative_error(&g.tensors().concat(), &numeric) <= 1e-6);
        let numeric_x = central_difference(x.data(), 1e-5, |p| {
            objective(&a, &Matrix::from_vec(2, 16, p.to_vec()).unwrap())
        });
        assert!(max_relative_error(dx.data(), &numeric_x) <= 1e-6);
    }
}
