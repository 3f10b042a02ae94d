//! Minibatch SGD with a cosine learning-rate schedule.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::loss::backprop;
use super::TrainConfig;
use crate::classifier::MlpModel;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::clean_accuracy;
use crate::rng::{derive_stream_id, SeededStream};
use crate::scalar::Scalar;

const SHUFFLE_TAG: u64 = 0x5a1f;
const NOISE_TAG: u64 = 0x2015e;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Learning rate of the last step of the epoch.
    pub lr: f64,
    /// Per-example means over the epoch.
    pub ce: f64,
    pub reg: f64,
    pub total: f64,
    /// Noise-free accuracy on the training set after the epoch.
    pub train_acc: f64,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str = "epoch,lr,ce,reg,total,train_acc";

    pub fn to_csv(log: &[EpochLog]) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for e in log {
            let _ = writeln!(out, "{},{},{},{},{},{}", e.epoch, e.lr, e.ce, e.reg, e.total, e.train_acc);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Scalar> {
    pub model: MlpModel<T>,
    pub log: Vec<EpochLog>,
}

/// `lr_max · 0.5 · (1 + cos(π t / T))`.
pub fn cosine_lr(lr_max: f64, step: usize, total_steps: usize) -> f64 {
    if total_steps == 0 {
        return lr_max;
    }
    lr_max * 0.5 * (1.0 + (PI * step as f64 / total_steps as f64).cos())
}

fn shuffled(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = SeededStream::new(seed, derive_stream_id(&[SHUFFLE_TAG, epoch as u64])).cursor(0);
    for i in (1..n).rev() {
        let j = cursor.below(i as u64 + 1) as usize;
        order.swap(i, j);
    }
    order
}

/// Trains `model` on `data`. Noise for example `i` at step `t` comes from
/// its own stream keyed by `(seed, t, i)`, so runs are bit-reproducible.
pub fn train<T: Scalar>(mut model: MlpModel<T>, data: &Dataset<T>, config: &TrainConfig) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training set is empty"));
    }
    if data.dim() != model.sizes()[0] {
        return Err(Error::DimensionMismatch { expected: model.sizes()[0], got: data.dim() });
    }
    if let Some(&bad) = data.y.iter().find(|&&y| y >= model.sizes().last().copied().unwrap_or(0)) {
        return Err(Error::InvalidClass { label: bad, classes: *model.sizes().last().unwrap() });
    }

    let n = data.len();
    let per_epoch = n.div_ceil(config.batch_size);
    let total_steps = per_epoch * config.epochs;
    let mut log = Vec::with_capacity(config.epochs);
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        let order = shuffled(n, config.seed, epoch);
        let (mut ce, mut reg, mut total) = (0.0, 0.0, 0.0);
        let mut lr = config.lr_max;
        for batch in order.chunks(config.batch_size) {
            lr = cosine_lr(config.lr_max, step, total_steps);
            let mut grads = model.zero_gradients();
            for &i in batch {
                let stream = SeededStream::new(config.seed, derive_stream_id(&[NOISE_TAG, step as u64, i as u64]));
                let loss = backprop(&model, &data.x[i], data.y[i], config, &stream, &mut grads)?;
                if !loss.total.is_finite() {
                    return Err(Error::Divergence { epoch, step });
                }
                ce += loss.ce;
                reg += loss.reg;
                total += loss.total;
            }
            grads.scale(T::of(1.0 / batch.len() as f64));
            if grads.values().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, step });
            }
            model.apply_step(&grads, T::of(lr));
            if model.params().any(|p| !p.is_finite()) {
                return Err(Error::Divergence { epoch, step });
            }
            step += 1;
        }
        let m = n as f64;
        log.push(EpochLog {
            epoch,
            lr,
            ce: ce / m,
            reg: reg / m,
            total: total / m,
            train_acc: clean_accuracy(&model, data)?.value(),
        });
    }
    Ok(TrainOutcome { model, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::two_blobs;
    use crate::noise::NoiseSpec;
    use crate::training::Regularizer;

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_lr(0.2, 0, 10), 0.2);
        assert!((cosine_lr(0.2, 5, 10) - 0.1).abs() < 1e-15);
        assert!(cosine_lr(0.2, 10, 10).abs() < 1e-15);
    }

    #[test]
    fn shuffle_is_a_seeded_permutation() {
        let a = shuffled(50, 3, 1);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_eq!(a, shuffled(50, 3, 1));
        assert_ne!(a, shuffled(50, 3, 2));
    }

    #[test]
    fn zero_epochs_is_identity() {
        let data = two_blobs::<f64>(20, 4.0, 0.5, 1).unwrap();
        let model = MlpModel::init(&[2, 8, 2], 2).unwrap();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::new(NoiseSpec::gaussian(0.1).unwrap(), Regularizer::None) };
        let out = train(model.clone(), &data, &cfg).unwrap();
        assert_eq!(out.model, model);
        assert!(out.log.is_empty());
    }

    #[test]
    fn log_csv_shape() {
        let e = EpochLog { epoch: 0, lr: 0.1, ce: 0.5, reg: 0.0, total: 0.5, train_acc: 1.0 };
        assert_eq!(EpochLog::to_csv(&[e]), "epoch,lr,ce,reg,total,train_acc\n0,0.1,0.5,0,0.5,1\n");
    }

    #[test]
    fn huge_learning_rate_reports_divergence() {
        let data = two_blobs::<f64>(40, 4.0, 0.5, 1).unwrap();
        let model = MlpModel::init(&[2, 8, 2], 2).unwrap();
        let cfg = TrainConfig { lr_max: 1e300, epochs: 3, ..TrainConfig::new(NoiseSpec::gaussian(0.1).unwrap(), Regularizer::None) };
        assert!(matches!(train(model, &data, &cfg), Err(Error::Divergence { .. })));
    }
}
