use ndarray::{ArrayView2, ArrayView3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{adam_step, clip_gradients, AdamState, TrainingConfig};
use super::TrainError;
use crate::nn::{argmax, evaluate_batch, loss_and_gradients, ModelConfig, NnError, Parameters};
use crate::text::{pad_batch, EncodedPair, TokenId};

/// Correct and total counts of non-PAD positions whose argmax matches the
/// gold token.
pub fn token_matches(
    logits: ArrayView3<'_, f64>,
    tgt_out: ArrayView2<'_, TokenId>,
    tgt_mask: ArrayView2<'_, bool>,
) -> (usize, usize) {
    let (mut correct, mut total) = (0, 0);
    for ((b, t), &keep) in tgt_mask.indexed_iter() {
        if keep {
            total += 1;
            if argmax(logits.slice(ndarray::s![b, t, ..])) == tgt_out[[b, t]] {
                correct += 1;
            }
        }
    }
    (correct, total)
}

/// Teacher-forced token accuracy over non-PAD target positions.
pub fn token_accuracy(
    logits: ArrayView3<'_, f64>,
    tgt_out: ArrayView2<'_, TokenId>,
    tgt_mask: ArrayView2<'_, bool>,
) -> Result<f64, TrainError> {
    match token_matches(logits, tgt_out, tgt_mask) {
        (_, 0) => Err(TrainError::EmptyMask),
        (c, n) => Ok(c as f64 / n as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub valid_token_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch of the returned parameters; 0 before any epoch ends.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

pub const REPORT_HEADER: &str = "epoch\ttrain_loss\tvalid_loss\tvalid_accuracy";

impl TrainReport {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    /// Tab-separated epoch log with trailing summary lines.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6}\n",
                e.epoch, e.train_loss, e.valid_loss, e.valid_token_accuracy
            ));
        }
        out.push_str(&format!("# best_epoch={}\n# stopped_early={}\n", self.best_epoch, self.stopped_early));
        out
    }
}

/// Result of a completed training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best validation epoch.
    pub params: Parameters,
    pub report: TrainReport,
}

/// Dropout-off loss and accuracy over a corpus, in batches.
pub fn evaluate_pairs(
    params: &Parameters,
    model: &ModelConfig,
    pairs: &[EncodedPair],
    batch_size: usize,
) -> Result<(f64, f64), TrainError> {
    let (mut loss_sum, mut correct, mut total) = (0.0, 0, 0);
    for chunk in pairs.chunks(batch_size.max(1)) {
        let batch = pad_batch(chunk);
        let (loss, logits) = evaluate_batch(params, model, &batch)?;
        let (c, n) = token_matches(logits.view(), batch.tgt_out_ids.view(), batch.tgt_mask.view());
        loss_sum += loss * n as f64;
        correct += c;
        total += n;
    }
    if total == 0 {
        return Err(TrainError::EmptyMask);
    }
    Ok((loss_sum / total as f64, correct as f64 / total as f64))
}

/// Runs the training loop from `Parameters::init(model, cfg.seed)`.
pub fn train(
    model: &ModelConfig,
    train_pairs: &[EncodedPair],
    valid_pairs: &[EncodedPair],
    cfg: &TrainingConfig,
) -> Result<TrainOutcome, TrainError> {
    train_with(model, Parameters::init(model, cfg.seed), train_pairs, valid_pairs, cfg, |_, _, _| Ok(()))
}

/// Runs the training loop from `initial`, calling `on_epoch` after every
/// validation with the record, whether it improved, and the current
/// parameters.
///
/// Each epoch shuffles the training pairs, then for every batch runs a
/// dropout-on forward and backward pass, clips the gradients and takes an
/// Adam step. Training stops after `patience` epochs without a strict gain
/// in validation token accuracy.
pub fn train_with<F>(
    model: &ModelConfig,
    initial: Parameters,
    train_pairs: &[EncodedPair],
    valid_pairs: &[EncodedPair],
    cfg: &TrainingConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome, TrainError>
where
    F: FnMut(&EpochRecord, bool, &Parameters) -> Result<(), TrainError>,
{
    cfg.validate()?;
    model.validate()?;
    if train_pairs.is_empty() || valid_pairs.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(2);

    let mut params = initial;
    let mut state = AdamState::new(&params);
    let mut best = params.clone();
    let mut best_accuracy = f64::NEG_INFINITY;
    let mut report = TrainReport::default();
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train_pairs.len()).collect();

    let abort = |err: TrainError, best: &Parameters, report: &TrainReport| match err {
        TrainError::Nn(NnError::NonFiniteDetected(what)) => TrainError::NonFinite {
            what,
            best: Box::new(TrainOutcome { params: best.clone(), report: report.clone() }),
        },
        other => other,
    };

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut tokens) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let pairs: Vec<EncodedPair> = chunk.iter().map(|&i| train_pairs[i].clone()).collect();
            let batch = pad_batch(&pairs);
            let step = loss_and_gradients(&params, model, &batch, Some(&mut dropout_rng))
                .map_err(TrainError::from)
                .and_then(|(loss, mut grads)| {
                    clip_gradients(&mut grads, cfg.max_grad_norm);
                    adam_step(&mut params, &grads, &mut state, cfg).map(|_| loss)
                });
            let loss = step.map_err(|e| abort(e, &best, &report))?;
            let n = batch.target_tokens();
            loss_sum += loss * n as f64;
            tokens += n;
        }

        let (valid_loss, accuracy) =
            evaluate_pairs(&params, model, valid_pairs, cfg.batch_size).map_err(|e| abort(e, &best, &report))?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / tokens.max(1) as f64,
            valid_loss,
            valid_token_accuracy: accuracy,
        };
        let improved = accuracy > best_accuracy;
        log::info!(
            "epoch {epoch}: train loss {:.4}, valid loss {valid_loss:.4}, valid accuracy {accuracy:.4}{}",
            record.train_loss,
            if improved { " (best)" } else { "" }
        );
        if improved {
            best_accuracy = accuracy;
            best = params.clone();
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        report.epochs.push(record);
        on_epoch(report.epochs.last().expect("just pushed"), improved, &params)?;
        if stale >= cfg.patience {
            report.stopped_early = true;
            break;
        }
    }
    Ok(TrainOutcome { params: best, report })
}
