//! Measurement protocols: ASR, SNR and time-shift sweeps, the filtering
//! protocol, transform-and-compare detection, and CER.

mod protocols;
mod report;
mod roc;

pub use protocols::{
    asr_vs_snr, defense_auc, even_shifts, filtering_protocol, time_invariance_sweep, transform_compare, AttackSource,
    Calibration, OutputSpace, Transform,
};
pub use report::{read_report, write_report, write_rows_csv, EvalReport, Protocol, ReportRow, REPORT_VERSION};
pub use roc::{cer, roc_auc, DistancePair, RocPoint};

use rayon::prelude::*;

use crate::data::{Dataset, LabeledSignal};
use crate::attack::fgsm;
use crate::error::{Error, Result};
use crate::nn::{argmax, Classifier};
use crate::signal::{lowpass, power, scale_to_snr, TimeSeries};

/// Anything that maps a signal to class scores.
pub trait Predict: Sync {
    fn logits(&self, x: &TimeSeries) -> Result<Vec<f64>>;

    fn predict(&self, x: &TimeSeries) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }
}

impl Predict for Classifier {
    fn logits(&self, x: &TimeSeries) -> Result<Vec<f64>> {
        self.forward(x)
    }
}

/// A model that low-passes its input first: `f_k(lowpass_k(x))`.
pub struct Filtered<'a, P: Predict + ?Sized> {
    pub model: &'a P,
    pub cutoff_hz: f64,
}

impl<P: Predict + ?Sized> Predict for Filtered<'_, P> {
    fn logits(&self, x: &TimeSeries) -> Result<Vec<f64>> {
        if self.cutoff_hz >= x.sample_rate() / 2.0 {
            return self.model.logits(x);
        }
        self.model.logits(&lowpass(x, self.cutoff_hz)?)
    }
}

/// Fraction of originally-correct predictions that the attack flips.
pub fn asr<P, F>(model: &P, dataset: &Dataset, apply_attack: F) -> Result<f64>
where
    P: Predict + ?Sized,
    F: Fn(&LabeledSignal) -> Result<TimeSeries> + Sync,
{
    let outcomes = dataset
        .items()
        .par_iter()
        .map(|item| {
            if model.predict(&item.signal)? != item.label {
                return Ok(None);
            }
            let adv = apply_attack(item)?;
            Ok(Some(model.predict(&adv)? != item.label))
        })
        .collect::<Result<Vec<_>>>()?;
    let correct = outcomes.iter().flatten().count();
    if correct == 0 {
        return Err(Error::UndefinedAsr);
    }
    let flipped = outcomes.iter().flatten().filter(|f| **f).count();
    Ok(flipped as f64 / correct as f64)
}

/// Where an adversarial perturbation comes from at evaluation time.
#[derive(Clone, Copy)]
pub enum Perturbation<'a> {
    /// One vector added to every input.
    Universal(&'a TimeSeries),
    /// The FGSM sign pattern computed per input on the given model.
    Fgsm(&'a Classifier),
}

impl Perturbation<'_> {
    /// The perturbed input `x + a v` with `a` chosen per example so that
    /// `snr_db(x, a v)` equals `snr_db`.
    pub fn apply(&self, item: &LabeledSignal, snr_db: f64) -> Result<TimeSeries> {
        let x = &item.signal;
        let v = match self {
            Perturbation::Universal(v) => (*v).clone(),
            Perturbation::Fgsm(model) => fgsm(model, x, item.label, 1.0)?,
        };
        if power(&v) == 0.0 {
            // a vanishing gradient leaves nothing to scale
            return Ok(x.clone());
        }
        x.add(&scale_to_snr(x, &v, snr_db)?)
    }
}

fn check_increasing(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(name, "grid is empty"));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(name, "grid must be finite and strictly increasing"));
    }
    Ok(())
}
