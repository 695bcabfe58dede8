use rand::Rng;

use super::{shape_err, Matrix, Result};

/// Affine layer `y = x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Linear {
            weight: Matrix::zeros(input, output),
            bias: vec![0.0; output],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let data = (0..input * output).map(|_| rng.gen_range(-limit..=limit)).collect();
        Linear {
            weight: Matrix::from_vec(input, output, data).expect("shape"),
            bias: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(shape_err("Linear::forward", self.input_dim(), x.cols()));
        }
        let mut y = x.matmul(&self.weight)?;
        y.add_row_vector(&self.bias)?;
        Ok(y)
    }

    /// Returns `(grad, dx)` for upstream gradient `dy`, where `x` is the
    /// forward input.
    pub fn backward(&self, x: &Matrix, dy: &Matrix) -> Result<(Linear, Matrix)> {
        let dw = x.t_matmul(dy)?;
        let db = dy.column_sums();
        let dx = dy.matmul_t(&self.weight)?;
        Ok((Linear { weight: dw, bias: db }, dx))
    }

    pub fn zeros_like(&self) -> Linear {
        Linear::zeros(self.input_dim(), self.output_dim())
    }

    pub fn accumulate(&mut self, other: &Linear) {
        self.weight.add_assign(&other.weight).expect("same shape");
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }
}
