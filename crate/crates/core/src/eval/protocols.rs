use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{EvalReport, Protocol};
use super::roc::DistancePair;
use super::{asr, check_increasing, Filtered, Perturbation, Predict};
use crate::attack::AttackVector;
use crate::data::{Dataset, LabeledSignal};
use crate::error::{Error, Result};
use crate::rng::hash_samples;
use crate::nn::{softmax, train_classifier, Classifier, TrainConfig};
use crate::signal::{down_up_sample, lowpass, noise_flood, quantize_dequantize, TimeSeries};

/// ASR of one perturbation at every SNR of the grid.
pub fn asr_vs_snr<P: Predict + ?Sized>(
    model: &P,
    dataset: &Dataset,
    attack: Perturbation<'_>,
    snr_grid: &[f64],
    attack_tag: &str,
    model_tag: &str,
    seed: u64,
) -> Result<EvalReport> {
    check_increasing("snr_grid", snr_grid)?;
    let mut report = EvalReport::new(Protocol::AsrSnr).param("snr_grid", snr_grid);
    for &snr in snr_grid {
        let value = asr(model, dataset, |item| attack.apply(item, snr))?;
        report.push("asr", attack_tag, model_tag, snr, value, seed);
    }
    Ok(report)
}

/// ASR with the attack cyclically shifted by each `t` (seconds) of the grid.
pub fn time_invariance_sweep<P: Predict + ?Sized>(
    model: &P,
    dataset: &Dataset,
    attack: &AttackVector,
    shift_grid: &[f64],
    snr_db: f64,
    model_tag: &str,
    seed: u64,
) -> Result<EvalReport> {
    check_increasing("shift_grid", shift_grid)?;
    let period = attack.len() as f64 / attack.v_time().sample_rate();
    if shift_grid[0] < 0.0 || *shift_grid.last().unwrap() >= period {
        return Err(Error::invalid("shift_grid", format!("shifts must lie in [0, {period})")));
    }
    let tag = attack.tag().to_string();
    let mut report = EvalReport::new(Protocol::TimeShift).param("shift_grid", shift_grid).param("snr_db", snr_db);
    for &t in shift_grid {
        let v = attack.shifted(t)?;
        let value = asr(model, dataset, |item| Perturbation::Universal(&v).apply(item, snr_db))?;
        report.push("asr", &tag, model_tag, t, value, seed);
    }
    Ok(report)
}

/// `n` evenly spaced shifts over one period, starting at 0.
pub fn even_shifts(length: usize, sample_rate: f64, n: usize) -> Vec<f64> {
    let period = length as f64 / sample_rate;
    (0..n).map(|i| period * i as f64 / n as f64).collect()
}

/// A named perturbation taking part in the filtering protocol.
#[derive(Clone, Copy)]
pub struct AttackSource<'a> {
    pub tag: &'a str,
    pub perturbation: Perturbation<'a>,
}

/// SNR calibration at the highest cutoff so that every attack starts from a
/// comparable ASR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Calibration {
    pub target_asr: f64,
    pub tolerance: f64,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub max_steps: usize,
}

impl Default for Calibration {
    fn default() -> Self {
        Self { target_asr: 0.4, tolerance: 0.05, snr_min_db: -10.0, snr_max_db: 40.0, max_steps: 12 }
    }
}

impl Calibration {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.target_asr) || !(self.tolerance > 0.0) {
            return Err(Error::config("calibration", "target_asr must be in [0,1] and tolerance positive"));
        }
        if !(self.snr_min_db < self.snr_max_db) {
            return Err(Error::config("calibration", "snr_min_db must be below snr_max_db"));
        }
        Ok(())
    }

    /// Bisect on SNR (ASR falls as SNR grows). An attack that cannot reach the
    /// target even at `snr_min_db` is evaluated there.
    pub fn search<P: Predict + ?Sized>(&self, model: &P, dataset: &Dataset, attack: Perturbation<'_>) -> Result<(f64, f64)> {
        self.validate()?;
        let eval = |snr: f64| asr(model, dataset, |item| attack.apply(item, snr));
        let (mut lo, mut hi) = (self.snr_min_db, self.snr_max_db);
        let at_lo = eval(lo)?;
        if at_lo <= self.target_asr + self.tolerance {
            return Ok((lo, at_lo));
        }
        let at_hi = eval(hi)?;
        if at_hi >= self.target_asr - self.tolerance {
            return Ok((hi, at_hi));
        }
        let mut best = (lo, at_lo);
        for _ in 0..self.max_steps {
            let mid = 0.5 * (lo + hi);
            let value = eval(mid)?;
            if (value - self.target_asr).abs() < (best.1 - self.target_asr).abs() {
                best = (mid, value);
            }
            if (value - self.target_asr).abs() <= self.tolerance {
                return Ok((mid, value));
            }
            if value > self.target_asr {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(best)
    }
}

/// For each cutoff train `f_k` on low-passed data, then measure every attack
/// through `f_k(lowpass_k(x + a v))`. The highest cutoff anchors the SNR
/// calibration; without a calibration every attack runs at `snr_db`.
/// `unfiltered`, when given, stands in for the model at cutoffs at or above
/// Nyquist instead of training an identical one again.
#[allow(clippy::too_many_arguments)]
pub fn filtering_protocol(
    attacks: &[AttackSource<'_>],
    train: &Dataset,
    val: &Dataset,
    cutoff_grid: &[f64],
    train_cfg: &TrainConfig,
    unfiltered: Option<&Classifier>,
    calibration: Option<&Calibration>,
    snr_db: f64,
    seed: u64,
) -> Result<EvalReport> {
    check_increasing("cutoff_grid", cutoff_grid)?;
    let nyquist = train.sample_rate() / 2.0;
    if cutoff_grid[0] <= 0.0 || *cutoff_grid.last().unwrap() > nyquist {
        return Err(Error::invalid("cutoff_grid", format!("cutoffs must lie in (0, {nyquist}]")));
    }
    let mut report = EvalReport::new(Protocol::Filtering)
        .param("cutoff_grid", cutoff_grid)
        .param("calibration", calibration)
        .param("snr_db", snr_db);

    let mut models = Vec::with_capacity(cutoff_grid.len());
    for &k in cutoff_grid {
        if let (Some(m), true) = (unfiltered, k >= nyquist) {
            let (_, acc) = crate::nn::evaluate(m, val)?;
            report.push("benign_accuracy", "none", "f_k", k, acc, seed);
            models.push(m.clone());
            continue;
        }
        let filt = |ds: &Dataset| if k >= nyquist { Ok(ds.clone()) } else { ds.map_signals(|x| lowpass(x, k)) };
        let (train_k, val_k) = (filt(train)?, filt(val)?);
        let (model, _) = train_classifier(&train_k, &val_k, train_cfg)?;
        let (_, acc) = crate::nn::evaluate(&model, &val_k)?;
        report.push("benign_accuracy", "none", "f_k", k, acc, seed);
        models.push(model);
    }

    let top = Filtered { model: models.last().unwrap(), cutoff_hz: *cutoff_grid.last().unwrap() };
    for source in attacks {
        let snr = match calibration {
            Some(c) => c.search(&top, val, source.perturbation)?.0,
            None => snr_db,
        };
        report.push("snr_db", source.tag, "f_k", *cutoff_grid.last().unwrap(), snr, seed);
        for (model, &k) in models.iter().zip(cutoff_grid) {
            let fk = Filtered { model, cutoff_hz: k };
            let value = asr(&fk, val, |item| source.perturbation.apply(item, snr))?;
            report.push("asr", source.tag, "f_k", k, value, seed);
        }
    }
    Ok(report)
}

/// Input transformation used by the transform-and-compare detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    Identity,
    Quantize { bits: u32 },
    DownUp,
    NoiseFlood { sigma: f64 },
}

impl Transform {
    /// The three detector transforms with their default settings.
    pub const DEFAULTS: [Transform; 3] =
        [Transform::Quantize { bits: 8 }, Transform::DownUp, Transform::NoiseFlood { sigma: 0.01 }];

    pub fn name(&self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Quantize { .. } => "quantize",
            Transform::DownUp => "down_up",
            Transform::NoiseFlood { .. } => "noise_flood",
        }
    }

    pub fn apply(&self, x: &TimeSeries, seed: u64) -> Result<TimeSeries> {
        match *self {
            Transform::Identity => Ok(x.clone()),
            Transform::Quantize { bits } => quantize_dequantize(x, bits),
            Transform::DownUp => down_up_sample(x),
            Transform::NoiseFlood { sigma } => noise_flood(x, sigma, seed),
        }
    }
}

/// Which model output the detector compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSpace {
    #[default]
    Softmax,
    Logits,
}

/// Rank examples by a keyed content hash, so the choice does not depend on
/// dataset order. The first `n` become benign inputs and the next `n` are
/// attacked.
fn pick_examples<'d>(dataset: &'d Dataset, n_each: usize, seed: u64) -> Result<(Vec<(u64, &'d LabeledSignal)>, usize)> {
    let n = n_each.min(dataset.len() / 2);
    if n == 0 {
        return Err(Error::invalid("n_each", "need at least one benign and one adversarial input"));
    }
    let mut keyed: Vec<_> = dataset.items().iter().map(|it| (hash_samples(seed, it.signal.samples()), it)).collect();
    keyed.sort_by_key(|p| p.0);
    keyed.truncate(2 * n);
    Ok((keyed, n))
}

fn output<P: Predict + ?Sized>(model: &P, x: &TimeSeries, space: OutputSpace) -> Result<Vec<f64>> {
    let logits = model.logits(x)?;
    Ok(match space {
        OutputSpace::Softmax => softmax(&logits),
        OutputSpace::Logits => logits,
    })
}

/// L2 distances between model outputs on inputs and their transformed
/// versions, for benign and adversarial inputs. Uses at most half the dataset
/// per side when it is smaller than `2 n_each`.
#[allow(clippy::too_many_arguments)]
pub fn transform_compare<P: Predict + ?Sized>(
    model: &P,
    dataset: &Dataset,
    attack: Perturbation<'_>,
    transform: Transform,
    n_each: usize,
    seed: u64,
    snr_db: f64,
    space: OutputSpace,
) -> Result<DistancePair> {
    let (picked, n) = pick_examples(dataset, n_each, seed)?;
    let distances = picked
        .par_iter()
        .enumerate()
        .map(|(i, (key, item))| {
            let x = if i < n { item.signal.clone() } else { attack.apply(item, snr_db)? };
            let a = output(model, &x, space)?;
            let b = output(model, &transform.apply(&x, *key)?, space)?;
            Ok(a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    let (benign, adversarial) = distances.split_at(n);
    DistancePair::new(benign.to_vec(), adversarial.to_vec())
}

/// AUC of every transform for one attack, one row per transform.
#[allow(clippy::too_many_arguments)]
pub fn defense_auc<P: Predict + ?Sized>(
    model: &P,
    dataset: &Dataset,
    attack: Perturbation<'_>,
    transforms: &[Transform],
    n_each: usize,
    snr_db: f64,
    space: OutputSpace,
    attack_tag: &str,
    model_tag: &str,
    seed: u64,
) -> Result<EvalReport> {
    let mut report = EvalReport::new(Protocol::DefenseAuc)
        .param("transforms", transforms)
        .param("n_each", n_each)
        .param("snr_db", snr_db)
        .param("output_space", space);
    for t in transforms {
        let pair = transform_compare(model, dataset, attack, *t, n_each, seed, snr_db, space)?;
        let (auc, _) = super::roc::roc_auc(&pair)?;
        report.push(&format!("auc/{}", t.name()), attack_tag, model_tag, snr_db, auc, seed);
    }
    Ok(report)
}

impl<'a> AttackSource<'a> {
    pub fn universal(tag: &'a str, v: &'a TimeSeries) -> Self {
        Self { tag, perturbation: Perturbation::Universal(v) }
    }

    pub fn fgsm(tag: &'a str, model: &'a Classifier) -> Self {
        Self { tag, perturbation: Perturbation::Fgsm(model) }
    }
}
