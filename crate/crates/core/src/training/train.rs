use std::fmt;
use std::str::FromStr;

use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{LossKind, Objective};
use super::optim::AdamW;
use super::schedule::stlr;
use crate::encoding::{EncodedInput, GenreVector};
use crate::error::{Error, Result};
use crate::metrics::roc_auc;
use crate::model::{backward, forward, forward_train, Mode, Parameters};
use crate::rng::{derive_seed, sub_rng};

/// Samples per gradient work unit. Units are reduced in index order, so
/// results do not depend on the number of threads.
const CHUNK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopMetric {
    ValLoss,
    RocAuc,
}

impl fmt::Display for StopMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopMetric::ValLoss => "val-loss",
            StopMetric::RocAuc => "roc-auc",
        })
    }
}

impl FromStr for StopMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "val-loss" | "val_loss" | "loss" => Ok(StopMetric::ValLoss),
            "roc-auc" | "roc_auc" | "auc" => Ok(StopMetric::RocAuc),
            other => Err(Error::invalid(format!("unknown stop metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Upper bound; early stopping may end training sooner.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub warmup_fraction: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub loss: LossKind,
    pub focal_gamma: f64,
    pub pos_weight: f64,
    pub patience: usize,
    pub stop_metric: StopMetric,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 4,
            batch_size: 32,
            learning_rate: 1e-3,
            warmup_fraction: 0.1,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-6,
            loss: LossKind::WeightedBce,
            focal_gamma: 2.0,
            pos_weight: 1.0,
            patience: 2,
            stop_metric: StopMetric::ValLoss,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.epochs == 0 || self.batch_size == 0 {
            return fail("epochs and batch size must be positive".into());
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return fail(format!("warmup fraction {} outside (0, 1)", self.warmup_fraction));
        }
        if !(self.pos_weight > 0.0) {
            return fail(format!("pos_weight {} must be positive", self.pos_weight));
        }
        if !(self.learning_rate > 0.0) {
            return fail(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.focal_gamma >= 0.0) {
            return fail(format!("focal gamma {} must be non-negative", self.focal_gamma));
        }
        Ok(())
    }

    pub fn objective(&self) -> Objective {
        Objective {
            kind: self.loss,
            pos_weight: self.pos_weight,
            gamma: self.focal_gamma,
        }
    }
}

/// One encoded input with a label per target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub input: EncodedInput,
    pub genre: Option<GenreVector>,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub steps: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_roc_auc: Option<f64>,
    pub learning_rate: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochSummary>,
    /// Learning rate used at each optimizer step.
    pub lr_trace: Vec<f64>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub early_stopped: bool,
}

impl TrainHistory {
    /// One JSON object per epoch.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("summary serializes") + "\n")
            .collect()
    }
}

/// Eval-mode probabilities for every target of every sample, in order.
pub fn predict(params: &Parameters, samples: &[TrainSample]) -> Result<Vec<Vec<f64>>> {
    samples
        .par_iter()
        .map(|s| forward(params, &s.input, s.genre.as_ref(), Mode::Eval).map(|o| o.probabilities))
        .collect()
}

/// Mean eval-mode loss per target, and ROC AUC when both classes occur.
pub fn evaluate(params: &Parameters, samples: &[TrainSample], objective: &Objective) -> Result<(f64, Option<f64>)> {
    let probs: Vec<f64> = predict(params, samples)?.into_iter().flatten().collect();
    let labels: Vec<f64> = samples.iter().flat_map(|s| s.labels.iter().copied()).collect();
    let loss = objective.loss(&probs, &labels)?;
    let binary: Vec<bool> = labels.iter().map(|&y| y >= 0.5).collect();
    Ok((loss, roc_auc(&probs, &binary).ok()))
}

fn check_samples(samples: &[TrainSample], what: &str) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::invalid(format!("{what} split is empty")));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.labels.len() != s.input.target_positions().len() {
            return Err(Error::Shape(format!(
                "{what} sample {i}: {} labels for {} targets",
                s.labels.len(),
                s.input.target_positions().len()
            )));
        }
    }
    Ok(())
}

struct ChunkResult {
    loss: f64,
    targets: usize,
    grads: Parameters,
}

fn chunk_gradient(
    params: &Parameters,
    samples: &[TrainSample],
    indices: &[usize],
    objective: &Objective,
    seed: u64,
    epoch: usize,
) -> Result<ChunkResult> {
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    let mut targets = 0;
    for &i in indices {
        let s = &samples[i];
        let mode = Mode::Train {
            seed: derive_seed(seed, &format!("dropout/{epoch}/{i}")),
        };
        let (out, cache) = forward_train(params, &s.input, s.genre.as_ref(), mode)?;
        let mut dlogits = Vec::with_capacity(out.logits.len());
        for (&z, &y) in out.logits.iter().zip(&s.labels) {
            let (l, g) = objective.loss_and_grad(z, y);
            loss += l;
            dlogits.push(g);
        }
        targets += dlogits.len();
        backward(params, &cache, &dlogits, &mut grads);
    }
    Ok(ChunkResult { loss, targets, grads })
}

/// Trains a copy of `params` and returns the parameters of the best
/// validation epoch.
pub fn train(
    params: &Parameters,
    config: &TrainConfig,
    train_data: &[TrainSample],
    val_data: &[TrainSample],
) -> Result<(Parameters, TrainHistory)> {
    train_with_observer(params, config, train_data, val_data, &mut |_| {})
}

/// As [`train`], calling `observer` after every epoch.
pub fn train_with_observer(
    params: &Parameters,
    config: &TrainConfig,
    train_data: &[TrainSample],
    val_data: &[TrainSample],
    observer: &mut dyn FnMut(&EpochSummary),
) -> Result<(Parameters, TrainHistory)> {
    config.validate()?;
    check_samples(train_data, "training")?;
    check_samples(val_data, "validation")?;
    let objective = config.objective();
    let batches_per_epoch = train_data.len().div_ceil(config.batch_size);
    let total_steps = config.epochs * batches_per_epoch;

    let mut params = params.clone();
    let mut opt = AdamW::new(&params, config.beta1, config.beta2, config.eps, config.weight_decay);
    let mut history = TrainHistory {
        epochs: Vec::new(),
        lr_trace: Vec::with_capacity(total_steps),
        stopped_epoch: 0,
        best_epoch: 0,
        early_stopped: false,
    };
    let mut best: Option<(f64, Parameters)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut step = 0;

    for epoch in 1..=config.epochs {
        let mut rng = sub_rng(config.seed, &format!("train/shuffle/{epoch}"));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_targets = 0;
        let mut lr = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            step += 1;
            lr = stlr(step, total_steps, config.warmup_fraction, config.learning_rate)?;
            let parts: Vec<Result<ChunkResult>> = batch
                .par_chunks(CHUNK)
                .map(|idx| chunk_gradient(&params, train_data, idx, &objective, config.seed, epoch))
                .collect();
            let mut grads = params.zeros_like();
            let mut loss = 0.0;
            let mut targets = 0;
            for part in parts {
                let part = part?;
                grads.add_scaled(&part.grads, 1.0);
                loss += part.loss;
                targets += part.targets;
            }
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    loss,
                    step,
                    lr,
                    batch: batch_idx,
                });
            }
            grads.scale(1.0 / targets.max(1) as f64);
            opt.step(&mut params, &grads, lr);
            history.lr_trace.push(lr);
            epoch_loss += loss;
            epoch_targets += targets;
        }

        let (val_loss, val_auc) = evaluate(&params, val_data, &objective)?;
        let score = match config.stop_metric {
            StopMetric::ValLoss => val_loss,
            StopMetric::RocAuc => -val_auc.ok_or_else(|| {
                Error::UndefinedMetric("validation split needs both classes for ROC AUC stopping".into())
            })?,
        };
        let improved = best.as_ref().is_none_or(|(b, _)| score < *b);
        if improved {
            best = Some((score, params.clone()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
        }
        let summary = EpochSummary {
            epoch,
            steps: step,
            train_loss: epoch_loss / epoch_targets.max(1) as f64,
            val_loss,
            val_roc_auc: val_auc,
            learning_rate: lr,
            improved,
        };
        info!(
            "epoch {epoch}: train loss {:.4}, val loss {:.4}, val auc {}",
            summary.train_loss,
            val_loss,
            val_auc.map_or("n/a".to_string(), |a| format!("{a:.4}"))
        );
        observer(&summary);
        history.epochs.push(summary);
        history.stopped_epoch = epoch;
        if since_best >= config.patience.max(1) {
            history.early_stopped = epoch < config.epochs;
            break;
        }
    }
    let (_, best_params) = best.expect("at least one epoch ran");
    Ok((best_params, history))
}
