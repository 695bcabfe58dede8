use super::head::{HexHead, DEFAULT_LAMBDA, LAMBDA_FLOOR};
use super::{HexError, Result};
use crate::dynamics::DynamicsLog;
use crate::random::stream_rng;
use crate::tensor::{epoch_order, epoch_records, shape_err, AdamWConfig, Matrix, OptimizerState, TensorError};

/// λ values above this are reported: larger values did not help in practice.
pub const LAMBDA_WARN: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct HexConfig {
    /// Width of U and V.
    pub dim: usize,
    pub classes: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    /// Initial λ.
    pub lambda: f64,
    /// Keep λ fixed instead of learning it.
    pub fixed_lambda: bool,
    /// Weight of the auxiliary cross-entropy on `F_G`; 0 trains on `F_L` only.
    pub naive_weight: f64,
}

impl Default for HexConfig {
    fn default() -> Self {
        HexConfig {
            dim: 64,
            classes: 3,
            epochs: 10,
            batch_size: 32,
            optimizer: AdamWConfig::default(),
            lambda: DEFAULT_LAMBDA,
            fixed_lambda: false,
            naive_weight: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HexOutcome {
    pub head: HexHead,
    /// Per-epoch dynamics of the inference logits `f([U, 0])`.
    pub log: DynamicsLog,
    pub epoch_losses: Vec<f64>,
    /// λ at initialization and after every epoch.
    pub lambda_trajectory: Vec<f64>,
    pub skipped_steps: usize,
}

impl HexOutcome {
    /// Whether λ ever exceeded [`LAMBDA_WARN`].
    pub fn lambda_flagged(&self) -> bool {
        self.lambda_trajectory.iter().any(|&l| l > LAMBDA_WARN * (1.0 + 1e-9))
    }

    pub fn lambda_csv(&self) -> String {
        let mut out = String::from("epoch,lambda\n");
        for (e, l) in self.lambda_trajectory.iter().enumerate() {
            out.push_str(&format!("{e},{l:e}\n"));
        }
        out
    }
}

/// Mini-batch AdamW on the projected logits. Rows of `x_main`, `x_naive`,
/// `gold` and `ids` are aligned.
pub fn train_hex(
    config: &HexConfig,
    x_main: &Matrix,
    x_naive: &Matrix,
    gold: &[usize],
    ids: &[String],
    seed: u64,
) -> Result<HexOutcome> {
    let n = x_main.rows();
    if x_naive.rows() != n || gold.len() != n || ids.len() != n {
        return Err(shape_err(
            "train_hex",
            format!("{n} rows everywhere"),
            format!(
                "{} naive rows, {} labels, {} ids",
                x_naive.rows(),
                gold.len(),
                ids.len()
            ),
        )
        .into());
    }
    if config.classes < 2 || config.batch_size == 0 || config.dim == 0 {
        return Err(TensorError::InvalidConfig(
            "need at least two classes and positive batch size and width".into(),
        )
        .into());
    }
    if !(config.lambda > 0.0) || !config.lambda.is_finite() {
        return Err(HexError::BadLambda(config.lambda));
    }
    if let Some((row, &class)) = gold.iter().enumerate().find(|(_, &g)| g >= config.classes) {
        return Err(TensorError::ClassOutOfRange {
            row,
            class,
            classes: config.classes,
        }
        .into());
    }

    let mut rng = stream_rng(seed, "hex-init");
    let mut head = HexHead::new(
        x_main.cols(),
        x_naive.cols(),
        config.dim,
        config.classes,
        config.lambda,
        &mut rng,
    )?;
    let log_floor = LAMBDA_FLOOR.ln();
    let mut log = DynamicsLog::new(ids.to_vec()).map_err(|e| TensorError::InvalidConfig(e.to_string()))?;
    let mut opt = OptimizerState::new(config.optimizer);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut lambda_trajectory = vec![head.lambda()];
    let mut skipped_steps = 0;

    for epoch in 0..config.epochs {
        let mut total = 0.0;
        for (batch, idx) in epoch_order(n, seed, epoch).chunks(config.batch_size).enumerate() {
            let xm = x_main.select_rows(idx);
            let xn = x_naive.select_rows(idx);
            let g: Vec<usize> = idx.iter().map(|&i| gold[i]).collect();
            let (loss, mut grads) = match head.loss_and_grad(&xm, &xn, &g, config.naive_weight) {
                Ok(r) => r,
                Err(HexError::Singular { column, pivot }) => {
                    return Err(HexError::Solver {
                        epoch,
                        batch,
                        column,
                        pivot,
                    })
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(TensorError::Diverged { epoch, batch, loss }.into());
            }
            if config.fixed_lambda {
                grads.log_lambda = 0.0;
            }
            total += loss * idx.len() as f64;
            match opt.step(&mut head, &grads) {
                Ok(()) => {}
                Err(TensorError::NonFiniteGradient { .. }) => skipped_steps += 1,
                Err(e) => return Err(e.into()),
            }
            head.log_lambda = head.log_lambda.max(log_floor);
            // An overflowing λ is divergence too, even with a finite loss.
            if !head.lambda().is_finite() {
                return Err(TensorError::Diverged { epoch, batch, loss }.into());
            }
        }
        epoch_losses.push(if n == 0 { 0.0 } else { total / n as f64 });
        lambda_trajectory.push(head.lambda());
        let logits = head.infer(x_main)?;
        if !logits.is_finite() {
            return Err(TensorError::Diverged {
                epoch,
                batch: usize::MAX,
                loss: f64::NAN,
            }
            .into());
        }
        log.push_epoch(&epoch_records(&logits, gold))
            .map_err(|e| TensorError::InvalidConfig(e.to_string()))?;
    }

    Ok(HexOutcome {
        head,
        log,
        epoch_losses,
        lambda_trajectory,
        skipped_steps,
    })
}
