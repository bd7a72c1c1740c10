//! Universal frequency-domain attack trained with random cyclic time shifts.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::spectrum_loss::{loss_and_weights, SpectrumPhase};
use super::{AttackTag, AttackVector};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::Classifier;
use crate::signal::{cyclic_time_shift, dft, fft_in_place, idft, idft_real, Complex, Spectrum, TimeSeries};

/// Which spectrum penalty schedule to train with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossSchedule {
    /// Linear penalty, then decibel penalty after `phase1_fraction` of epochs.
    TwoPhase,
    Phase1Only,
    /// No spectrum penalty at all.
    Off,
}

/// How one update combines the two terms of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// A step of length `alpha` along the normalized gradient of the whole
    /// objective.
    Joint,
    /// A step of length `alpha` along the cross-entropy gradient alone, then a
    /// per-bin penalty move at rate `alpha * beta` that stops at the cap.
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourierAttackConfig {
    pub epochs: usize,
    pub alpha: f64,
    pub beta: f64,
    pub phase1_fraction: f64,
    pub cap: f64,
    pub time_shift: bool,
    pub schedule: LossSchedule,
    pub step_rule: StepRule,
    /// Examples per update; 1 reproduces the per-example procedure.
    pub batch_size: usize,
    /// Use at most this many training examples (0 = all), chosen by a seeded shuffle.
    pub max_examples: usize,
    pub seed: u64,
}

impl Default for FourierAttackConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            alpha: 5.0,
            beta: 0.1,
            phase1_fraction: 0.8,
            cap: 2.0,
            time_shift: true,
            schedule: LossSchedule::TwoPhase,
            step_rule: StepRule::Split,
            batch_size: 16,
            max_examples: 300,
            seed: 7,
        }
    }
}

impl FourierAttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.phase1_fraction > 0.0 && self.phase1_fraction <= 1.0) {
            return Err(Error::config("phase1_fraction", "must lie in (0, 1]"));
        }
        if !(self.cap > 0.0 && self.cap.is_finite()) {
            return Err(Error::config("cap", "must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", "must be positive"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::config("beta", "must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        Ok(())
    }

    /// The tag matching this configuration's ablation toggles.
    pub fn tag(&self) -> AttackTag {
        match (self.schedule, self.time_shift) {
            (_, false) => AttackTag::FftNoTimeshift,
            (LossSchedule::TwoPhase, true) => AttackTag::Fft,
            (LossSchedule::Phase1Only, true) => AttackTag::FftPhase1Only,
            (LossSchedule::Off, true) => AttackTag::FftNoSpectrumLoss,
        }
    }

    /// Spectrum penalty in force during `epoch`.
    pub fn phase(&self, epoch: usize) -> Option<SpectrumPhase> {
        match self.schedule {
            LossSchedule::Off => None,
            LossSchedule::Phase1Only => Some(SpectrumPhase::Linear),
            LossSchedule::TwoPhase => {
                if (epoch as f64) < self.phase1_fraction * self.epochs as f64 {
                    Some(SpectrumPhase::Linear)
                } else {
                    Some(SpectrumPhase::Decibel)
                }
            }
        }
    }
}

/// Per-epoch means of the objective and its parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackEpochLog {
    pub epoch: usize,
    pub objective: f64,
    pub cross_entropy: f64,
    pub spectrum_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackTrainLog {
    pub epochs: Vec<AttackEpochLog>,
}

/// Value of `CE(y, f(x + Re idft V)) - beta * L_spectrum(x, x + v)` and its
/// gradient with respect to `V`; `re` of each gradient entry is the
/// derivative by `Re V_k`, `im` the derivative by `Im V_k`.
pub fn objective_and_gradient(
    model: &Classifier,
    x: &TimeSeries,
    label: usize,
    v_freq: &Spectrum,
    beta: f64,
    cap: f64,
    phase: Option<SpectrumPhase>,
) -> Result<(f64, f64, f64, Vec<Complex>)> {
    let p = objective_parts(model, x, label, v_freq, cap, phase, 0.0)?;
    let grad = p.ce_grad.iter().zip(&p.spec_grad).map(|(c, s)| c - s * beta).collect();
    Ok((p.ce - beta * p.spec_loss, p.ce, p.spec_loss, grad))
}

struct Parts {
    ce: f64,
    spec_loss: f64,
    ce_grad: Vec<Complex>,
    /// All zeros when no penalty is active or the cap holds.
    spec_grad: Vec<Complex>,
    /// Descent move on the penalty at `rate`, each bin clipped to its excess.
    spec_move: Vec<Complex>,
}

/// Cross-entropy and spectrum penalty with their gradients by `V`, kept apart.
fn objective_parts(
    model: &Classifier,
    x: &TimeSeries,
    label: usize,
    v_freq: &Spectrum,
    cap: f64,
    phase: Option<SpectrumPhase>,
    rate: f64,
) -> Result<Parts> {
    let n = x.len();
    if v_freq.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: v_freq.len() });
    }
    let v = idft(v_freq)?;
    let xv = x.with_samples(x.samples().iter().zip(&v).map(|(a, b)| a + b.re).collect())?;
    let (ce, g) = model.grad_input(&xv, label)?;
    let mut spec_loss = 0.0;
    let mut spec_time = vec![0.0; n];
    let mut spec_move = vec![Complex::new(0.0, 0.0); n];
    if let Some(phase) = phase {
        let reference: Vec<f64> = dft(x)?.coefficients().iter().map(|c| c.norm()).collect();
        let z = dft(&xv)?.into_coefficients();
        let (loss, w) = loss_and_weights(&reference, &z, cap, phase);
        spec_loss = loss;
        if loss > 0.0 {
            // d L / d xv = T Re(idft(w * Z)) = Re(sum_k w_k Z_k e^{+i..})
            let mut buf: Vec<Complex> = z.iter().zip(&w).map(|(zk, wk)| (zk * *wk).conj()).collect();
            fft_in_place(&mut buf);
            spec_time.iter_mut().zip(&buf).for_each(|(s, c)| *s = c.re);
            // With V conjugate-symmetric, Z = X + V exactly, so the descent
            // direction for bin k is -Z_k / |Z_k| at speed phi'(|Z_k|).
            for (k, m) in spec_move.iter_mut().enumerate() {
                let norm = z[k].norm();
                if w[k] > 0.0 {
                    let excess = norm - cap * reference[k];
                    *m = -z[k] / norm * (rate * w[k] * norm).min(excess);
                }
            }
        }
    }
    Ok(Parts { ce, spec_loss, ce_grad: time_grad_to_freq(&g), spec_grad: time_grad_to_freq(&spec_time), spec_move })
}

/// Chain rule through `v = Re idft V`: the gradient by `V` is `dft(g) / T`.
fn time_grad_to_freq(g: &[f64]) -> Vec<Complex> {
    let mut grad: Vec<Complex> = g.iter().map(|&r| Complex::new(r, 0.0)).collect();
    fft_in_place(&mut grad);
    let scale = 1.0 / g.len() as f64;
    grad.iter_mut().for_each(|c| *c *= scale);
    grad
}

fn unit(g: &[Complex]) -> Option<impl Iterator<Item = Complex> + '_> {
    let norm = g.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| g.iter().map(move |c| c / norm))
}

/// Learn a universal real perturbation by ascending the objective on its
/// Fourier coefficients, one step per batch of examples.
pub fn train_fourier_attack(model: &Classifier, train: &Dataset, cfg: &FourierAttackConfig) -> Result<(AttackVector, AttackTrainLog)> {
    cfg.validate()?;
    let arch = model.architecture();
    if train.length() != arch.input_len || train.sample_rate() != arch.sample_rate {
        return Err(Error::invalid("train", "dataset does not match the model input"));
    }
    if train.num_classes() != model.num_classes() {
        return Err(Error::invalid("train", "class count does not match the model"));
    }
    let n = train.length();
    let fs = train.sample_rate();
    let mut rng = crate::rng::seeded(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    if cfg.max_examples > 0 && cfg.max_examples < order.len() {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        order.truncate(cfg.max_examples);
        order.sort_unstable();
    }
    let period = n as f64 / fs;
    let mut v_freq = Spectrum::zeros(n, fs)?;
    let mut log = AttackTrainLog::default();
    let items = train.items();
    for epoch in 0..cfg.epochs {
        let phase = cfg.phase(epoch);
        let beta = if phase.is_some() { cfg.beta } else { 0.0 };
        let (mut sum_j, mut sum_ce, mut sum_s) = (0.0, 0.0, 0.0);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut ce_total = vec![Complex::new(0.0, 0.0); n];
            let mut spec_total = vec![Complex::new(0.0, 0.0); n];
            for (j, &i) in batch.iter().enumerate() {
                let item = &items[i];
                let example = b * cfg.batch_size + j;
                // Every example sees the attack at its own random shift; its
                // gradient is rotated back by the adjoint shift.
                let t = if cfg.time_shift { rng.random_range(0.0..period) } else { 0.0 };
                let shifted = if t == 0.0 { v_freq.clone() } else { cyclic_time_shift(&v_freq, t)? };
                let p = match objective_parts(model, &item.signal, item.label, &shifted, cfg.cap, phase, cfg.alpha * beta) {
                    Ok(p) if (p.ce - beta * p.spec_loss).is_finite() => p,
                    Ok(_) | Err(Error::NonFinite(_)) => return Err(Error::NonFiniteLoss { epoch, example }),
                    Err(e) => return Err(e),
                };
                sum_j += p.ce - beta * p.spec_loss;
                sum_ce += p.ce;
                sum_s += p.spec_loss;
                let back = |g: Vec<Complex>| -> Result<Vec<Complex>> {
                    if t == 0.0 {
                        return Ok(g);
                    }
                    Ok(cyclic_time_shift(&Spectrum::new(g, fs, false)?, -t)?.into_coefficients())
                };
                ce_total.iter_mut().zip(&back(p.ce_grad)?).for_each(|(a, g)| *a += g);
                if beta > 0.0 {
                    let part = match cfg.step_rule {
                        StepRule::Joint => p.spec_grad,
                        StepRule::Split => p.spec_move,
                    };
                    spec_total.iter_mut().zip(&back(part)?).for_each(|(a, g)| *a += g);
                }
            }
            let coeffs = v_freq.coefficients_mut();
            match cfg.step_rule {
                StepRule::Joint => {
                    ce_total.iter_mut().zip(&spec_total).for_each(|(c, g)| *c -= g * beta);
                    if let Some(dir) = unit(&ce_total) {
                        coeffs.iter_mut().zip(dir).for_each(|(v, d)| *v += d * cfg.alpha);
                    }
                }
                StepRule::Split => {
                    if let Some(dir) = unit(&ce_total) {
                        coeffs.iter_mut().zip(dir).for_each(|(v, d)| *v += d * cfg.alpha);
                    }
                    if beta > 0.0 {
                        let scale = 1.0 / batch.len() as f64;
                        coeffs.iter_mut().zip(&spec_total).for_each(|(v, g)| *v += g * scale);
                    }
                }
            }
            v_freq.enforce_conjugate_symmetry();
        }
        let m = order.len().max(1) as f64;
        log.epochs.push(AttackEpochLog { epoch, objective: sum_j / m, cross_entropy: sum_ce / m, spectrum_loss: sum_s / m });
    }
    let config = serde_json::to_value(cfg).map_err(Error::from)?;
    let attack = AttackVector::from_spectrum(cfg.tag(), v_freq, config)?;
    debug_assert_eq!(attack.v_time().len(), idft_real(attack.v_freq())?.len());
    Ok((attack, log))
}
