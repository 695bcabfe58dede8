//! Two-branch classifier whose training logits pass through the projection.

use rand::Rng;

use super::project::{hex_project_with_cache, Projection};
use super::Result;
use crate::tensor::{cross_entropy_loss, shape_err, Linear, Matrix, MlpParams, MlpTrace, Parameters};

/// Smallest λ the trainable parameter may reach.
pub const LAMBDA_FLOOR: f64 = 1e-8;
pub const DEFAULT_LAMBDA: f64 = 1e-4;

/// Main branch `x_main → U`, naive branch `x_naive → V`, and a classifier `f`
/// over `[U, V]`. λ is stored as its logarithm so it stays positive under
/// gradient steps.
#[derive(Debug, Clone, PartialEq)]
pub struct HexHead {
    pub main: MlpParams,
    pub naive: MlpParams,
    pub classifier: Linear,
    pub log_lambda: f64,
}

/// Logits from one forward pass.
#[derive(Debug, Clone)]
pub struct HexOutput {
    pub f_a: Matrix,
    pub f_g: Matrix,
    pub f_l: Matrix,
}

struct Trace {
    main: MlpTrace,
    naive: MlpTrace,
    joint_in: Matrix,
    naive_in: Matrix,
    out: HexOutput,
    projection: Projection,
}

impl HexHead {
    /// Glorot-initialized head; each branch has one hidden layer of width `dim`.
    pub fn new<R: Rng + ?Sized>(
        main_dim: usize,
        naive_dim: usize,
        dim: usize,
        classes: usize,
        lambda: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(HexHead {
            main: MlpParams::new(&[main_dim, dim, dim], rng)?,
            naive: MlpParams::new(&[naive_dim, dim, dim], rng)?,
            classifier: Linear::glorot(2 * dim, classes, rng),
            log_lambda: lambda.max(LAMBDA_FLOOR).ln(),
        })
    }

    pub fn from_parts(main: MlpParams, naive: MlpParams, classifier: Linear, lambda: f64) -> Result<Self> {
        let dim = main.output_dim();
        if naive.output_dim() != dim {
            return Err(shape_err("HexHead: naive width", dim, naive.output_dim()).into());
        }
        if classifier.input_dim() != 2 * dim {
            return Err(shape_err("HexHead: classifier input", 2 * dim, classifier.input_dim()).into());
        }
        Ok(HexHead {
            main,
            naive,
            classifier,
            log_lambda: lambda.max(LAMBDA_FLOOR).ln(),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.log_lambda.exp()
    }

    pub fn dim(&self) -> usize {
        self.main.output_dim()
    }

    pub fn classes(&self) -> usize {
        self.classifier.output_dim()
    }

    pub fn zeros_like(&self) -> HexHead {
        HexHead {
            main: self.main.zeros_like(),
            naive: self.naive.zeros_like(),
            classifier: self.classifier.zeros_like(),
            log_lambda: 0.0,
        }
    }

    fn check_batch(&self, x_main: &Matrix, x_naive: &Matrix) -> Result<()> {
        if x_main.rows() != x_naive.rows() {
            return Err(shape_err("hex_forward: batch rows", x_main.rows(), x_naive.rows()).into());
        }
        Ok(())
    }

    fn trace(&self, x_main: &Matrix, x_naive: &Matrix) -> Result<Trace> {
        self.check_batch(x_main, x_naive)?;
        let main = self.main.forward_trace(x_main)?;
        let naive = self.naive.forward_trace(x_naive)?;
        let u = main.logits();
        let v = naive.logits();
        let joint_in = Matrix::hcat(&[u, v])?;
        let naive_in = Matrix::hcat(&[&Matrix::zeros(u.rows(), u.cols()), v])?;
        let f_a = self.classifier.forward(&joint_in)?;
        let f_g = self.classifier.forward(&naive_in)?;
        let projection = hex_project_with_cache(&f_a, &f_g, self.lambda())?;
        let out = HexOutput {
            f_l: projection.f_l.clone(),
            f_a,
            f_g,
        };
        Ok(Trace {
            main,
            naive,
            joint_in,
            naive_in,
            out,
            projection,
        })
    }

    /// `F_A = f([U, V])`, `F_G = f([0, V])`, `F_L` their projection.
    pub fn forward(&self, x_main: &Matrix, x_naive: &Matrix) -> Result<HexOutput> {
        Ok(self.trace(x_main, x_naive)?.out)
    }

    /// Inference logits `f([U, 0])`; the naive branch is never evaluated.
    pub fn infer(&self, x_main: &Matrix) -> Result<Matrix> {
        let u = self.main.forward(x_main)?;
        let joint = Matrix::hcat(&[&u, &Matrix::zeros(u.rows(), u.cols())])?;
        Ok(self.classifier.forward(&joint)?)
    }

    /// Cross-entropy on `F_L` plus `naive_weight` times cross-entropy on
    /// `F_G`, with gradients for every parameter including `log_lambda`.
    pub fn loss_and_grad(
        &self,
        x_main: &Matrix,
        x_naive: &Matrix,
        gold: &[usize],
        naive_weight: f64,
    ) -> Result<(f64, HexHead)> {
        let t = self.trace(x_main, x_naive)?;
        let (loss_l, d_f_l) = cross_entropy_loss(&t.out.f_l, gold)?;
        let grad = t.projection.backward(&t.out.f_a, &t.out.f_g, &d_f_l)?;
        let mut d_f_g = grad.d_f_g;
        let mut loss = loss_l;
        if naive_weight != 0.0 {
            let (loss_g, d_g) = cross_entropy_loss(&t.out.f_g, gold)?;
            loss += naive_weight * loss_g;
            d_f_g.add_assign(&d_g.scale(naive_weight))?;
        }

        let (mut g_clf, d_joint) = self.classifier.backward(&t.joint_in, &grad.d_f_a)?;
        let (g_clf_naive, d_naive_in) = self.classifier.backward(&t.naive_in, &d_f_g)?;
        g_clf.accumulate(&g_clf_naive);

        let dim = self.dim();
        let d_u = d_joint.column_slice(0, dim);
        let mut d_v = d_joint.column_slice(dim, 2 * dim);
        d_v.add_assign(&d_naive_in.column_slice(dim, 2 * dim))?;
        let (g_main, _) = self.main.backward(&t.main, &d_u)?;
        let (g_naive, _) = self.naive.backward(&t.naive, &d_v)?;

        Ok((
            loss,
            HexHead {
                main: g_main,
                naive: g_naive,
                classifier: g_clf,
                log_lambda: grad.d_lambda * self.lambda(),
            },
        ))
    }
}

impl Parameters for HexHead {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.main.tensors();
        out.extend(self.naive.tensors());
        out.push(self.classifier.weight.data());
        out.push(&self.classifier.bias);
        out.push(std::slice::from_ref(&self.log_lambda));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.main.tensors_mut();
        out.extend(self.naive.tensors_mut());
        out.push(self.classifier.weight.data_mut());
        out.push(&mut self.classifier.bias);
        out.push(std::slice::from_mut(&mut self.log_lambda));
        out
    }

    /// λ is excluded from weight decay.
    fn decay_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.tensors().len()];
        *mask.last_mut().expect("non-empty") = false;
        mask
    }
}
