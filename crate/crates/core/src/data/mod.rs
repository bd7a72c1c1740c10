//! Labeled time-series datasets: a reproducible synthetic generator, PCM WAV
//! ingestion, stratified splits and a binary cache format.

mod cache;
mod split;
mod synth;
pub mod wav;

pub use cache::{load_dataset, save_dataset, DatasetHeader};
pub use split::split;
pub use synth::{generate_synthetic, SynthConfig};
pub use wav::load_wav_segments;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::TimeSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSignal {
    pub signal: TimeSeries,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
}

/// A set of equal-length, equal-rate labeled signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    items: Vec<LabeledSignal>,
    num_classes: usize,
    sample_rate: f64,
    length: usize,
    split: SplitTag,
}

impl Dataset {
    pub fn new(items: Vec<LabeledSignal>, num_classes: usize, split: SplitTag) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::invalid("items", "dataset is empty"))?;
        let length = first.signal.len();
        let sample_rate = first.signal.sample_rate();
        let mut seen = vec![false; num_classes];
        for (i, item) in items.iter().enumerate() {
            if item.label >= num_classes {
                return Err(Error::invalid("label", format!("item {i} has label {} >= {num_classes}", item.label)));
            }
            if item.signal.len() != length {
                return Err(Error::LengthMismatch { expected: length, got: item.signal.len() });
            }
            if item.signal.sample_rate() != sample_rate {
                return Err(Error::SampleRateMismatch { expected: sample_rate, got: item.signal.sample_rate() });
            }
            seen[item.label] = true;
        }
        if split == SplitTag::Train {
            if let Some(c) = seen.iter().position(|s| !s) {
                return Err(Error::invalid("items", format!("class {c} missing from training split")));
            }
        }
        Ok(Self { items, num_classes, sample_rate, length, split })
    }

    pub fn items(&self) -> &[LabeledSignal] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    /// Same items with every signal passed through `f`.
    pub fn map_signals<F>(&self, f: F) -> Result<Dataset>
    where
        F: Fn(&TimeSeries) -> Result<TimeSeries> + Sync,
    {
        use rayon::prelude::*;
        let items = self
            .items
            .par_iter()
            .map(|it| Ok(LabeledSignal { signal: f(&it.signal)?, label: it.label }))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(items, self.num_classes, self.split)
    }

    /// The first `n` items (all of them if `n >= len`).
    pub fn take(&self, n: usize) -> Result<Dataset> {
        let items = self.items.iter().take(n).cloned().collect();
        Dataset::new(items, self.num_classes, SplitTag::Val).map(|mut d| {
            d.split = self.split;
            d
        })
    }

    /// Mean power over all signals.
    pub fn mean_power(&self) -> f64 {
        self.items.iter().map(|it| crate::signal::power(&it.signal)).sum::<f64>() / self.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(label: usize, n: usize) -> LabeledSignal {
        LabeledSignal { signal: TimeSeries::new(vec![label as f64; n], 10.0).unwrap(), label }
    }

    #[test]
    fn validates_items() {
        assert!(Dataset::new(vec![item(0, 4), item(1, 4)], 2, SplitTag::Train).is_ok());
        assert!(Dataset::new(vec![item(0, 4), item(2, 4)], 2, SplitTag::Val).is_err());
        assert!(Dataset::new(vec![item(0, 4), item(1, 5)], 2, SplitTag::Val).is_err());
        assert!(Dataset::new(vec![item(0, 4)], 2, SplitTag::Train).is_err());
        assert!(Dataset::new(vec![item(0, 4)], 2, SplitTag::Val).is_ok());
        assert!(Dataset::new(vec![], 2, SplitTag::Val).is_err());
    }
}
