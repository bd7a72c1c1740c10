//! Reference attacks: per-input FGSM, a DeepFool-driven universal
//! perturbation and white Gaussian noise.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{AttackTag, AttackVector};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{argmax, Classifier};
use crate::signal::TimeSeries;

/// `epsilon * sign(d CE / d x)`, with exact zeros where the gradient vanishes.
pub fn fgsm(model: &Classifier, x: &TimeSeries, label: usize, epsilon: f64) -> Result<TimeSeries> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", format!("{epsilon} must be finite and non-negative")));
    }
    let (_, g) = model.grad_input(x, label)?;
    let v = g
        .iter()
        .map(|&d| {
            if d > 0.0 {
                epsilon
            } else if d < 0.0 {
                -epsilon
            } else {
                0.0
            }
        })
        .collect();
    x.with_samples(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UapConfig {
    pub epochs: usize,
    /// Relative overshoot past the linearized decision boundary.
    pub overshoot: f64,
    /// Linearized steps spent on one example before moving on.
    pub max_iter: usize,
    /// Competing classes considered per step, by logit rank.
    pub candidates: usize,
    /// Radius of the L2 ball the perturbation is kept in.
    pub norm_budget: f64,
    /// Use at most this many training examples (0 = all).
    pub max_examples: usize,
    pub seed: u64,
}

impl Default for UapConfig {
    fn default() -> Self {
        Self { epochs: 5, overshoot: 0.02, max_iter: 10, candidates: 3, norm_budget: 3.0, max_examples: 300, seed: 11 }
    }
}

impl UapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.overshoot >= 0.0 && self.overshoot.is_finite()) {
            return Err(Error::config("overshoot", "must be non-negative"));
        }
        if !(self.norm_budget > 0.0 && self.norm_budget.is_finite()) {
            return Err(Error::config("norm_budget", "must be positive"));
        }
        if self.candidates == 0 {
            return Err(Error::config("candidates", "must be positive"));
        }
        Ok(())
    }
}

/// Smallest linearized step that carries `x` from class `label` across the
/// nearest of the top competing boundaries, or `None` once it is crossed.
pub(crate) fn deepfool(model: &Classifier, x: &TimeSeries, label: usize, cfg: &UapConfig) -> Result<Option<Vec<f64>>> {
    let mut r = vec![0.0; x.len()];
    let classes = model.architecture().num_classes;
    for _ in 0..cfg.max_iter {
        let xr = x.with_samples(x.samples().iter().zip(&r).map(|(a, b)| a + b).collect())?;
        let logits = model.forward(&xr)?;
        if argmax(&logits) != label {
            break;
        }
        let mut rivals: Vec<usize> = (0..classes).filter(|&k| k != label).collect();
        rivals.sort_by(|a, b| logits[*b].total_cmp(&logits[*a]));
        rivals.truncate(cfg.candidates);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for k in rivals {
            let mut w = vec![0.0; classes];
            w[k] = 1.0;
            w[label] = -1.0;
            let (_, g) = model.grad_logits(&xr, &w)?;
            let norm = g.iter().map(|d| d * d).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                continue;
            }
            let dist = (logits[label] - logits[k]) / norm;
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                let scale = (dist + 1e-6) / norm;
                best = Some((dist, g.into_iter().map(|d| d * scale).collect()));
            }
        }
        let Some((_, step)) = best else { break };
        r.iter_mut().zip(&step).for_each(|(a, d)| *a += d);
    }
    if r.iter().all(|v| *v == 0.0) {
        return Ok(None);
    }
    Ok(Some(r.into_iter().map(|v| v * (1.0 + cfg.overshoot)).collect()))
}

/// Universal perturbation: for every example it does not yet fool, add the
/// minimal linearized step that would, then project onto an L2 ball.
pub fn train_uap(model: &Classifier, train: &Dataset, cfg: &UapConfig) -> Result<AttackVector> {
    cfg.validate()?;
    let n = train.length();
    let mut rng = crate::rng::seeded(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    if cfg.max_examples > 0 && cfg.max_examples < order.len() {
        order.shuffle(&mut rng);
        order.truncate(cfg.max_examples);
    }
    let mut v = vec![0.0; n];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let item = &train.items()[i];
            let xv = item.signal.with_samples(item.signal.samples().iter().zip(&v).map(|(a, b)| a + b).collect())?;
            let Some(step) = deepfool(model, &xv, item.label, cfg)? else { continue };
            v.iter_mut().zip(&step).for_each(|(a, d)| *a += d);
            let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if vn > cfg.norm_budget {
                let s = cfg.norm_budget / vn;
                v.iter_mut().for_each(|a| *a *= s);
            }
        }
    }
    let config = serde_json::to_value(cfg)?;
    AttackVector::from_time(AttackTag::Uap, TimeSeries::new(v, train.sample_rate())?, config)
}

/// White Gaussian noise of unit expected power.
pub fn gaussian_noise_attack(len: usize, sample_rate: f64, seed: u64) -> Result<AttackVector> {
    let mut rng = crate::rng::seeded(seed);
    let v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
    AttackVector::from_time(AttackTag::Noise, TimeSeries::new(v, sample_rate)?, serde_json::json!({ "seed": seed }))
}
