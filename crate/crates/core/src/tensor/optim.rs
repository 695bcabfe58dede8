use super::{shape_err, Result, TensorError};

/// Flat view of a model's trainable tensors, in a fixed order.
///
/// Gradients are represented by a value of the same type, so
/// `grads.tensors()` lines up with `params.tensors_mut()` index by index.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    /// Whether decoupled weight decay applies to each tensor.
    fn decay_mask(&self) -> Vec<bool> {
        vec![true; self.tensors().len()]
    }

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// AdamW moments. Shapes are fixed by the first step.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: AdamWConfig) -> Self {
        OptimizerState {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let mask = params.decay_mask();
        let g = grads.tensors();
        let mut p = params.tensors_mut();
        self.apply(&mut p, &g, &mask)
    }

    /// One decoupled-weight-decay Adam update. On a shape mismatch or a
    /// non-finite gradient nothing is modified.
    pub fn apply(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], decay: &[bool]) -> Result<()> {
        if params.len() != grads.len() || decay.len() != params.len() {
            return Err(shape_err("adamw_step", format!("{} tensors", params.len()), grads.len()));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(shape_err("adamw_step", format!("tensor {i} len {}", p.len()), g.len()));
            }
        }
        if self.first.is_empty() && self.step == 0 {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        } else if self.first.len() != params.len()
            || self.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len())
        {
            return Err(shape_err(
                "adamw_step",
                "parameter shapes seen on the first step",
                "different shapes",
            ));
        }
        if let Some(tensor) = grads.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(TensorError::NonFiniteGradient { tensor });
        }

        let c = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            let wd = if decay[i] { c.weight_decay } else { 0.0 };
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                p[j] -= c.lr * wd * p[j];
                p[j] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}
