use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{loss_ce, argmax, Architecture, Classifier, Pooling};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::signal::{noise_flood, stft, Spectrogram, TimeSeries};

/// Training-time augmentation: time-domain Gaussian noise before the STFT,
/// then one random time mask and one random frequency mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub noise_std: f64,
    /// Maximum masked run of windows.
    pub time_mask_max: usize,
    /// Maximum masked run of frequency bins.
    pub freq_mask_max: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { enabled: true, noise_std: 0.01, time_mask_max: 2, freq_mask_max: 8 }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    pub fn validate(&self, bins: usize, windows: usize) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        if self.time_mask_max >= windows || self.freq_mask_max >= bins {
            return Err(Error::invalid(
                "augment",
                format!("masks ({}, {}) must be smaller than spectrogram ({bins} bins, {windows} windows)", self.freq_mask_max, self.time_mask_max),
            ));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::invalid("augment.noise_std", "must be non-negative"));
        }
        Ok(())
    }
}

/// Apply `cfg` to `x` (whose clean spectrogram is `spec`).
pub fn augment(x: &TimeSeries, spec: &Spectrogram, cfg: &AugmentConfig, seed: u64) -> Result<Spectrogram> {
    if !cfg.enabled {
        return Ok(spec.clone());
    }
    let mut out = if cfg.noise_std > 0.0 {
        stft(&noise_flood(x, cfg.noise_std, crate::rng::mix(seed, 1))?, spec.fft_len(), spec.hop())?
    } else {
        spec.clone()
    };
    let mut rng = crate::rng::derive(seed, 2);
    let (bins, windows) = (out.bins(), out.windows());
    let tw = rng.random_range(0..=cfg.time_mask_max.min(windows));
    let t0 = rng.random_range(0..=windows - tw);
    let fw = rng.random_range(0..=cfg.freq_mask_max.min(bins));
    let f0 = rng.random_range(0..=bins - fw);
    for c in 0..2 {
        for f in 0..bins {
            for w in 0..windows {
                if (t0..t0 + tw).contains(&w) || (f0..f0 + fw).contains(&f) {
                    let i = out.index(c, f, w);
                    out.data_mut()[i] = 0.0;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub fft_len: usize,
    pub hop: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub pooling: Pooling,
    pub epochs: usize,
    /// Stop after this many epochs without a new best validation accuracy
    /// (0 trains for all `epochs`).
    pub patience: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub augment: AugmentConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            fft_len: 256,
            hop: 128,
            conv1_channels: 8,
            conv2_channels: 16,
            pooling: Pooling::Time,
            epochs: 8,
            patience: 2,
            lr: 0.02,
            momentum: 0.9,
            batch_size: 32,
            augment: AugmentConfig::default(),
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn architecture(&self, ds: &Dataset) -> Architecture {
        Architecture {
            input_len: ds.length(),
            sample_rate: ds.sample_rate(),
            fft_len: self.fft_len,
            hop: self.hop,
            conv1_channels: self.conv1_channels,
            conv2_channels: self.conv2_channels,
            num_classes: ds.num_classes(),
            pooling: self.pooling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean clean cross-entropy over the training set after the epoch.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub initial_train_loss: f64,
    pub initial_val_accuracy: f64,
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were returned; `None` keeps the initialization.
    pub best_epoch: Option<usize>,
}

impl TrainLog {
    pub fn best_val_accuracy(&self) -> f64 {
        match self.best_epoch {
            Some(e) => self.epochs[e].val_accuracy,
            None => self.initial_val_accuracy,
        }
    }
}

/// Mean clean loss and accuracy of `model` on `ds`.
pub fn evaluate(model: &Classifier, ds: &Dataset) -> Result<(f64, f64)> {
    let per: Vec<(f64, bool)> = ds
        .items()
        .par_iter()
        .map(|it| {
            let logits = model.forward(&it.signal)?;
            Ok((loss_ce(&logits, it.label), argmax(&logits) == it.label))
        })
        .collect::<Result<_>>()?;
    let n = per.len() as f64;
    Ok((per.iter().map(|p| p.0).sum::<f64>() / n, per.iter().filter(|p| p.1).count() as f64 / n))
}

/// Mini-batch SGD with momentum. Deterministic given `cfg.seed`; returns the
/// parameters with the best validation accuracy (earliest on ties).
pub fn train_classifier(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<(Classifier, TrainLog)> {
    if train.length() != val.length() || train.num_classes() != val.num_classes() || train.sample_rate() != val.sample_rate() {
        return Err(Error::invalid("val", "train and validation datasets are incompatible"));
    }
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) || !(0.0..1.0).contains(&cfg.momentum) {
        return Err(Error::invalid("train", "need batch_size >= 1, lr > 0 and momentum in [0, 1)"));
    }
    let arch = cfg.architecture(train);
    cfg.augment.validate(arch.bins(), arch.windows())?;
    let mut model = Classifier::new(arch, cfg.seed)?;
    let (initial_train_loss, _) = evaluate(&model, train)?;
    let (_, initial_val_accuracy) = evaluate(&model, val)?;
    let mut log = TrainLog { initial_train_loss, initial_val_accuracy, epochs: Vec::new(), best_epoch: None };
    let mut best = (initial_val_accuracy, model.params().to_vec());

    let specs: Vec<Spectrogram> = train.items().par_iter().map(|it| model.spectrogram(&it.signal)).collect::<Result<_>>()?;
    let mut velocity = vec![0.0; model.params().len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let epoch_seed = crate::rng::mix(cfg.seed, 1000 + epoch as u64);
        order.shuffle(&mut crate::rng::seeded(epoch_seed));
        for batch in order.chunks(cfg.batch_size) {
            let grads: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .map(|&i| {
                    let it = &train.items()[i];
                    let spec = augment(&it.signal, &specs[i], &cfg.augment, crate::rng::mix(epoch_seed, i as u64))?;
                    let mut g = vec![0.0; model.params().len()];
                    let loss = model.accumulate_param_grad(&spec, it.label, &mut g)?;
                    Ok((loss, g))
                })
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut total = vec![0.0; velocity.len()];
            for (loss, g) in &grads {
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                total.iter_mut().zip(g).for_each(|(t, v)| *t += v);
            }
            for ((v, p), g) in velocity.iter_mut().zip(model.params_mut().iter_mut()).zip(&total) {
                *v = cfg.momentum * *v + g * scale;
                *p -= cfg.lr * *v;
            }
        }
        let (train_loss, train_accuracy) = evaluate(&model, train)?;
        if !train_loss.is_finite() || model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        let (_, val_accuracy) = evaluate(&model, val)?;
        if val_accuracy > best.0 {
            best = (val_accuracy, model.params().to_vec());
            log.best_epoch = Some(epoch);
        }
        log.epochs.push(EpochLog { epoch, train_loss, train_accuracy, val_accuracy, wall_seconds: started.elapsed().as_secs_f64() });
        let since_best = match log.best_epoch {
            Some(b) => epoch - b,
            None => epoch + 1,
        };
        if cfg.patience > 0 && since_best >= cfg.patience {
            break;
        }
    }
    let model = Classifier::from_params(model.architecture().clone(), best.1, cfg.seed)?;
    Ok((model, log))
}
