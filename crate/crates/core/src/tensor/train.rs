use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    cross_entropy_loss, shape_err, softmax, AdamWConfig, AdapterBlock, Matrix, MlpParams,
    OptimizerState, Parameters, Result, TensorError,
};
use crate::dynamics::{DynamicsLog, EpochRecord};
use crate::random::stream_rng;

/// Classifier over fixed features: an optional residual adapter in front of
/// an MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub adapter: Option<AdapterBlock>,
    pub mlp: MlpParams,
}

impl Probe {
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        match &self.adapter {
            Some(a) => self.mlp.forward(&a.forward(x)?),
            None => self.mlp.forward(x),
        }
    }

    /// Loss and parameter gradients for one batch.
    pub fn loss_and_grad(&self, x: &Matrix, gold: &[usize]) -> Result<(f64, Probe)> {
        let (h, adapter_trace) = match &self.adapter {
            Some(a) => {
                let (h, t) = a.forward_trace(x)?;
                (h, Some(t))
            }
            None => (x.clone(), None),
        };
        let trace = self.mlp.forward_trace(&h)?;
        let (loss, d_logits) = cross_entropy_loss(trace.logits(), gold)?;
        let (g_mlp, d_h) = self.mlp.backward(&trace, &d_logits)?;
        let g_adapter = match (&self.adapter, adapter_trace) {
            (Some(a), Some(t)) => Some(a.backward(&t, &d_h)?.0),
            _ => None,
        };
        Ok((
            loss,
            Probe {
                adapter: g_adapter,
                mlp: g_mlp,
            },
        ))
    }
}

impl Parameters for Probe {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.adapter.as_ref().map(|a| a.tensors()).unwrap_or_default();
        out.extend(self.mlp.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.adapter.as_mut().map(|a| a.tensors_mut()).unwrap_or_default();
        out.extend(self.mlp.tensors_mut());
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Hidden layer widths; empty means a linear classifier.
    pub hidden: Vec<usize>,
    pub classes: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    /// Reduction factor of a residual adapter on the input, if any.
    pub adapter_reduction: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![512],
            classes: 3,
            epochs: 10,
            batch_size: 32,
            optimizer: AdamWConfig::default(),
            adapter_reduction: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub probe: Probe,
    pub log: DynamicsLog,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Updates skipped because of a non-finite gradient.
    pub skipped_steps: usize,
}

pub fn predict_classes(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn accuracy(pred: &[usize], gold: &[usize]) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    pred.iter().zip(gold).filter(|(p, g)| p == g).count() as f64 / gold.len() as f64
}

/// Gold-class probability and correctness of every row.
pub(crate) fn epoch_records(logits: &Matrix, gold: &[usize]) -> Vec<EpochRecord> {
    let probs = softmax(logits);
    let pred = predict_classes(logits);
    gold.iter()
        .enumerate()
        .map(|(i, &g)| EpochRecord {
            gold_prob: probs.get(i, g).clamp(0.0, 1.0),
            correct: pred[i] == g,
        })
        .collect()
}

/// Shuffled row order for `epoch`, seeded with `seed + epoch`.
pub(crate) fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(epoch as u64));
    order.shuffle(&mut rng);
    order
}

/// Mini-batch AdamW training of a [`Probe`], recording the gold-class
/// probability of every example after each epoch.
pub fn train_mlp(
    config: &TrainConfig,
    features: &Matrix,
    gold: &[usize],
    ids: &[String],
    seed: u64,
) -> Result<TrainOutcome> {
    let n = features.rows();
    if gold.len() != n || ids.len() != n {
        return Err(shape_err(
            "train_mlp",
            format!("{n} labels and ids"),
            format!("{} labels, {} ids", gold.len(), ids.len()),
        ));
    }
    if config.classes < 2 {
        return Err(TensorError::InvalidConfig("need at least two classes".into()));
    }
    if config.batch_size == 0 {
        return Err(TensorError::InvalidConfig("batch size must be positive".into()));
    }
    if let Some((row, &class)) = gold.iter().enumerate().find(|(_, &g)| g >= config.classes) {
        return Err(TensorError::ClassOutOfRange {
            row,
            class,
            classes: config.classes,
        });
    }

    let mut init_rng = stream_rng(seed, "probe-init");
    let adapter = match config.adapter_reduction {
        Some(r) => Some(AdapterBlock::new(features.cols(), r, &mut init_rng)?),
        None => None,
    };
    let mut sizes = vec![features.cols()];
    sizes.extend(&config.hidden);
    sizes.push(config.classes);
    let mut probe = Probe {
        adapter,
        mlp: MlpParams::new(&sizes, &mut init_rng)?,
    };
    let mut log = DynamicsLog::new(ids.to_vec())
        .map_err(|e| TensorError::InvalidConfig(e.to_string()))?;
    let mut opt = OptimizerState::new(config.optimizer);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut skipped_steps = 0;

    for epoch in 0..config.epochs {
        let order = epoch_order(n, seed, epoch);
        let mut total = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let x = features.select_rows(idx);
            let g: Vec<usize> = idx.iter().map(|&i| gold[i]).collect();
            let (loss, grads) = probe.loss_and_grad(&x, &g)?;
            if !loss.is_finite() {
                return Err(TensorError::Diverged { epoch, batch, loss });
            }
            total += loss * idx.len() as f64;
            match opt.step(&mut probe, &grads) {
                Ok(()) => {}
                Err(TensorError::NonFiniteGradient { .. }) => skipped_steps += 1,
                Err(e) => return Err(e),
            }
        }
        epoch_losses.push(if n == 0 { 0.0 } else { total / n as f64 });
        let logits = probe.forward(features)?;
        if !logits.is_finite() {
            return Err(TensorError::Diverged {
                epoch,
                batch: usize::MAX,
                loss: f64::NAN,
            });
        }
        log.push_epoch(&epoch_records(&logits, gold))
            .map_err(|e| TensorError::InvalidConfig(e.to_string()))?;
    }

    Ok(TrainOutcome {
        probe,
        log,
        epoch_losses,
        skipped_steps,
    })
}
