use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adam_step, AdamState, EarlyStopping, StopDecision, TrainConfig, TrainError};
use crate::data::{Sample, Split, WindowedDataset};
use crate::model::{ModelError, TransformerModel};
use crate::tensor::{Float, Tape, Tensor, TensorError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: Float,
    pub val_loss: Float,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub epochs: Vec<EpochLoss>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl LossCurve {
    pub fn best(&self) -> Option<&EpochLoss> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    /// `epoch,train_loss,val_loss`, shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,val_loss")?;
        for e in &self.epochs {
            writeln!(w, "{},{},{}", e.epoch, e.train_loss, e.val_loss)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

fn target_column(values: &[Float]) -> Result<Tensor, TensorError> {
    Tensor::matrix(values.len(), 1, values.to_vec())
}

/// Teacher-forced MSE of one sample and, if `with_grads`, the gradient of
/// every parameter in store order.
pub fn sample_loss_and_grads(
    model: &TransformerModel,
    sample: &Sample,
    with_grads: bool,
) -> Result<(Float, Option<Vec<Vec<Float>>>), ModelError> {
    let mut tape = Tape::new();
    let p = model.bind(&mut tape, with_grads);
    let window = tape.constant(sample.window.clone());
    let dec = tape.constant(target_column(&sample.decoder_input(model.config().target_index))?);
    let target = tape.constant(target_column(&sample.targets)?);
    let out = model.forward_on(&mut tape, &p, window, dec)?;
    let loss = tape.mse(out, target)?;
    let value = tape.value(loss).data()[0];
    if !with_grads {
        return Ok((value, None));
    }
    tape.backward(loss)?;
    let grads = p
        .vars()
        .iter()
        .zip(model.params().iter())
        .map(|(&v, (_, t))| tape.grad(v).map_or_else(|| vec![0.0; t.len()], <[Float]>::to_vec))
        .collect();
    Ok((value, Some(grads)))
}

/// Mean teacher-forced loss over a split; summed in sample order.
pub fn split_loss(model: &TransformerModel, samples: &[&Sample]) -> Result<Float, ModelError> {
    let losses: Vec<Float> = samples
        .par_iter()
        .map(|s| sample_loss_and_grads(model, s, false).map(|(l, _)| l))
        .collect::<Result<_, _>>()?;
    Ok(losses.iter().sum::<Float>() / losses.len() as Float)
}

fn non_finite(epoch: usize, batch: usize) -> impl Fn(ModelError) -> TrainError {
    move |e| match e {
        ModelError::Tensor(TensorError::NonFinite { op }) => TrainError::NonFinite {
            epoch,
            batch,
            detail: format!("{op} produced a non-finite value"),
        },
        other => TrainError::Model(other),
    }
}

pub fn fit(model: &mut TransformerModel, data: &WindowedDataset, cfg: &TrainConfig) -> Result<LossCurve, TrainError> {
    fit_with(model, data, cfg, |_| {})
}

/// Trains in place and leaves the model holding its best-validation weights.
///
/// Per-sample gradients within a batch are computed in parallel and summed
/// in sample order, so results do not depend on the thread count.
pub fn fit_with<F>(
    model: &mut TransformerModel,
    data: &WindowedDataset,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<LossCurve, TrainError>
where
    F: FnMut(&EpochLoss),
{
    cfg.validate()?;
    if model.config().horizon != data.horizon {
        return Err(TrainError::HorizonMismatch {
            model: model.config().horizon,
            data: data.horizon,
        });
    }
    let train = data.split(Split::Train);
    let val = data.split(Split::Val);
    for (split, s) in [(Split::Train, &train), (Split::Val, &val)] {
        if s.is_empty() {
            return Err(TrainError::EmptySplit(split));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.params());
    let mut stopper = EarlyStopping::new(cfg.early_stop_patience, cfg.min_delta);
    let mut best_params = model.params().clone();
    let mut curve = LossCurve::default();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        if cfg.shuffle_train {
            order.shuffle(&mut rng);
        }
        let mut sample_losses = vec![0.0; train.len()];
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results: Vec<(Float, Option<Vec<Vec<Float>>>)> = batch
                .par_iter()
                .map(|&i| sample_loss_and_grads(model, train[i], true))
                .collect::<Result<_, _>>()
                .map_err(non_finite(epoch, b))?;
            let scale = 1.0 / batch.len() as Float;
            let mut grads: Vec<Vec<Float>> = model.params().iter().map(|(_, t)| vec![0.0; t.len()]).collect();
            for (&i, (loss, g)) in batch.iter().zip(results) {
                sample_losses[i] = loss;
                for (acc, gi) in grads.iter_mut().zip(g.expect("requested gradients")) {
                    for (a, x) in acc.iter_mut().zip(gi) {
                        *a += x;
                    }
                }
            }
            grads.iter_mut().flatten().for_each(|g| *g *= scale);
            adam_step(model.params_mut(), &grads, &mut adam, cfg.learning_rate).map_err(|e| match e {
                TrainError::NonFinite { detail, .. } => TrainError::NonFinite { epoch, batch: b, detail },
                other => other,
            })?;
        }
        let train_loss = sample_losses.iter().sum::<Float>() / sample_losses.len() as Float;
        let val_loss = split_loss(model, &val).map_err(non_finite(epoch, 0))?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(TrainError::NonFinite {
                epoch,
                batch: 0,
                detail: format!("train loss {train_loss}, val loss {val_loss}"),
            });
        }
        let record = EpochLoss {
            epoch,
            train_loss,
            val_loss,
        };
        on_epoch(&record);
        log::info!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        curve.epochs.push(record);
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => {
                best_params = model.params().clone();
                curve.best_epoch = epoch;
            }
            StopDecision::Continue => {}
            StopDecision::Stop => {
                curve.stopped_early = true;
                break;
            }
        }
    }
    *model.params_mut() = best_params;
    Ok(curve)
}
