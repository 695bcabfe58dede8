//! The regularized orthogonal projection and its gradient.
//!
//! With `S = F_Gᵀ F_G + λI` (C×C), the projected logits are
//! `F_L = F_A − F_G S⁻¹ F_Gᵀ F_A`. `S` is factored once by Cholesky and
//! reused for the backward solve.

use super::{HexError, Result};
use crate::tensor::{shape_err, Matrix};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub(crate) fn factor(s: &Matrix) -> Result<Self> {
        let n = s.rows();
        let scale = (0..n).map(|i| s.get(i, i).abs()).fold(0.0, f64::max);
        let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = s.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if !(d > floor) {
                return Err(HexError::Singular { column: j, pivot: d });
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in j + 1..n {
                let mut v = s.get(i, j);
                for k in 0..j {
                    v -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, v / d);
            }
        }
        Ok(Cholesky { l })
    }

    /// Solves `S X = B` column by column.
    pub(crate) fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.l.rows();
        let mut x = b.clone();
        for c in 0..b.cols() {
            for i in 0..n {
                let mut v = x.get(i, c);
                for k in 0..i {
                    v -= self.l.get(i, k) * x.get(k, c);
                }
                x.set(i, c, v / self.l.get(i, i));
            }
            for i in (0..n).rev() {
                let mut v = x.get(i, c);
                for k in i + 1..n {
                    v -= self.l.get(k, i) * x.get(k, c);
                }
                x.set(i, c, v / self.l.get(i, i));
            }
        }
        x
    }
}

/// Forward result kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Projection {
    pub f_l: Matrix,
    /// `S⁻¹ F_Gᵀ F_A`.
    coef: Matrix,
    chol: Cholesky,
}

/// Gradients of a scalar loss with respect to the projection inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGrad {
    pub d_f_a: Matrix,
    pub d_f_g: Matrix,
    pub d_lambda: f64,
}

fn check(f_a: &Matrix, f_g: &Matrix, lambda: f64) -> Result<()> {
    if f_a.shape() != f_g.shape() {
        return Err(shape_err(
            "hex_project",
            format!("{:?}", f_a.shape()),
            format!("{:?}", f_g.shape()),
        )
        .into());
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(HexError::BadLambda(lambda));
    }
    Ok(())
}

pub fn hex_project_with_cache(f_a: &Matrix, f_g: &Matrix, lambda: f64) -> Result<Projection> {
    check(f_a, f_g, lambda)?;
    let c = f_a.cols();
    let mut s = f_g.t_matmul(f_g)?;
    for i in 0..c {
        s.set(i, i, s.get(i, i) + lambda);
    }
    let chol = Cholesky::factor(&s)?;
    let coef = chol.solve(&f_g.t_matmul(f_a)?);
    let f_l = f_a.sub(&f_g.matmul(&coef)?)?;
    Ok(Projection { f_l, coef, chol })
}

/// `F_L = (I − F_G (F_Gᵀ F_G + λI)⁻¹ F_Gᵀ) F_A`.
pub fn hex_project(f_a: &Matrix, f_g: &Matrix, lambda: f64) -> Result<Matrix> {
    Ok(hex_project_with_cache(f_a, f_g, lambda)?.f_l)
}

impl Projection {
    /// Backpropagates `d_f_l` (the loss gradient at `F_L`).
    pub fn backward(&self, f_a: &Matrix, f_g: &Matrix, d_f_l: &Matrix) -> Result<ProjectionGrad> {
        if d_f_l.shape() != self.f_l.shape() {
            return Err(shape_err(
                "Projection::backward",
                format!("{:?}", self.f_l.shape()),
                format!("{:?}", d_f_l.shape()),
            )
            .into());
        }
        let x = &self.coef;
        let w = self.chol.solve(&f_g.t_matmul(d_f_l)?);
        let d_f_a = d_f_l.sub(&f_g.matmul(&w)?)?;
        let sym = x.matmul_t(&w)?.add(&w.matmul_t(x)?)?;
        let d_f_g = f_g
            .matmul(&sym)?
            .sub(&d_f_l.matmul_t(x)?)?
            .sub(&f_a.matmul_t(&w)?)?;
        let d_lambda = w.data().iter().zip(x.data()).map(|(a, b)| a * b).sum();
        Ok(ProjectionGrad {
            d_f_a,
            d_f_g,
            d_lambda,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian, stream_rng};
    use crate::tensor::gradcheck::{central_difference, max_relative_error};

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = stream_rng(seed, "proj-test");
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| gaussian(&mut rng)).collect()).unwrap()
    }

    #[test]
    fn worked_values() {
        let g = col(&[1.0, 0.0]);
        let a = col(&[3.0, 4.0]);
        let close = |m: Matrix, want: [f64; 2]| {
            m.data().iter().zip(want).all(|(x, y)| (x - y).abs() <= 1e-12)
        };
        assert!(close(hex_project(&a, &g, 0.0).unwrap(), [0.0, 4.0]));
        // 3 · 1/(1 + 1) = 1.5 is removed from the first row.
        assert!(close(hex_project(&a, &g, 1.0).unwrap(), [1.5, 4.0]));
    }

    #[test]
    fn orthogonal_input_is_fixed() {
        let g = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]).unwrap();
        let a = Matrix::from_rows(&[[0.0, 0.0], [0.0, 0.0], [2.0, -1.0], [5.0, 3.0]]).unwrap();
        let l = hex_project(&a, &g, 0.0).unwrap();
        assert!(l.sub(&a).unwrap().max_abs() <= 1e-9);
    }

    #[test]
    fn singular_at_zero_lambda() {
        let g = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        let a = random(3, 2, 1);
        assert!(matches!(hex_project(&a, &g, 0.0), Err(HexError::Singular { .. })));
        assert!(hex_project(&a, &g, 1e-4).is_ok());
    }

    #[test]
    fn errors() {
        let a = random(3, 2, 1);
        assert!(matches!(hex_project(&a, &random(3, 3, 2), 0.1), Err(HexError::Tensor(_))));
        assert!(matches!(hex_project(&a, &a, -1.0), Err(HexError::BadLambda(_))));
        assert!(matches!(hex_project(&a, &a, f64::NAN), Err(HexError::BadLambda(_))));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (seed, lambda) in [(1u64, 0.3), (2, 1e-2), (3, 2.0)] {
            let a = random(6, 3, seed);
            let g = random(6, 3, seed + 100);
            let gbar = random(6, 3, seed + 200);
            let loss = |a: &Matrix, g: &Matrix, lam: f64| -> f64 {
                let l = hex_project(a, g, lam).unwrap();
                l.data().iter().zip(gbar.data()).map(|(x, y)| x * y).sum()
            };
            let p = hex_project_with_cache(&a, &g, lambda).unwrap();
            let grad = p.backward(&a, &g, &gbar).unwrap();

            let num_a = central_difference(a.data(), 1e-6, |v| {
                loss(&Matrix::from_vec(6, 3, v.to_vec()).unwrap(), &g, lambda)
            });
            let num_g = central_difference(g.data(), 1e-6, |v| {
                loss(&a, &Matrix::from_vec(6, 3, v.to_vec()).unwrap(), lambda)
            });
            let num_l = central_difference(&[lambda], 1e-6, |v| loss(&a, &g, v[0]));
            assert!(max_relative_error(grad.d_f_a.data(), &num_a) <= 1e-6);
            assert!(max_relative_error(grad.d_f_g.data(), &num_g) <= 1e-6);
            assert!(max_relative_error(&[grad.d_lambda], &num_l) <= 1e-6);
        }
    }
}
