use rand::Rng;

use super::{shape_err, Linear, Matrix, Parameters, Result, TensorError};

/// Feed-forward stack: ReLU between layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Linear>,
}

/// Intermediate values from [`MlpParams::forward_trace`].
#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// Input to each layer (post-activation of the previous one).
    pub inputs: Vec<Matrix>,
    /// Pre-activation output of each layer; the last is the logits.
    pub outputs: Vec<Matrix>,
}

impl MlpTrace {
    pub fn logits(&self) -> &Matrix {
        self.outputs.last().expect("at least one layer")
    }
}

impl MlpParams {
    /// `sizes = [input, hidden.., output]`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(TensorError::InvalidConfig(format!(
                "MLP layer sizes must have at least two positive entries, got {sizes:?}"
            )));
        }
        let layers = sizes.windows(2).map(|w| Linear::glorot(w[0], w[1], rng)).collect();
        Ok(MlpParams { layers })
    }

    pub fn from_layers(layers: Vec<Linear>) -> Result<Self> {
        if layers.is_empty() {
            return Err(TensorError::InvalidConfig("MLP needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(shape_err(
                    "MlpParams::from_layers",
                    pair[0].output_dim(),
                    pair[1].input_dim(),
                ));
            }
        }
        Ok(MlpParams { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_dim()
    }

    pub fn zeros_like(&self) -> MlpParams {
        MlpParams {
            layers: self.layers.iter().map(Linear::zeros_like).collect(),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h)?;
            if i + 1 < self.layers.len() {
                h = h.map(relu);
            }
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: &Matrix) -> Result<MlpTrace> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h)?;
            inputs.push(h);
            h = if i + 1 < self.layers.len() {
                z.map(relu)
            } else {
                z.clone()
            };
            outputs.push(z);
        }
        Ok(MlpTrace { inputs, outputs })
    }

    /// Gradients of all parameters and of the input, given `d_out` w.r.t. the
    /// final layer output.
    pub fn backward(&self, trace: &MlpTrace, d_out: &Matrix) -> Result<(MlpParams, Matrix)> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_out.clone();
        for i in (0..self.layers.len()).rev() {
            if i + 1 < self.layers.len() {
                let z = &trace.outputs[i];
                for (d, &zv) in delta.data_mut().iter_mut().zip(z.data()) {
                    if zv <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let (g, dx) = self.layers[i].backward(&trace.inputs[i], &delta)?;
            grads.push(g);
            delta = dx;
        }
        grads.reverse();
        Ok((MlpParams { layers: grads }, delta))
    }

    pub fn accumulate(&mut self, other: &MlpParams) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.accumulate(b);
        }
    }
}

#[inline]
pub(crate) fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

impl Parameters for MlpParams {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
            .collect()
    }
}
