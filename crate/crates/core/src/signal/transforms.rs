//! Input transforms used by the transform-and-compare detector.

use rand_distr::{Distribution, Normal};

use super::{lowpass, TimeSeries};
use crate::error::{Error, Result};

/// Uniform quantization over `[min(x), max(x)]` into `2^bits` levels followed
/// by reconstruction. Exactly idempotent.
pub fn quantize_dequantize(x: &TimeSeries, bits: u32) -> Result<TimeSeries> {
    if bits == 0 || bits > 52 {
        return Err(Error::invalid("bits", format!("{bits} outside 1..=52")));
    }
    let (lo, hi) = x.samples().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo == hi {
        return Ok(x.clone());
    }
    let levels = ((1u64 << bits) - 1) as f64;
    let range = hi - lo;
    let step = range / levels;
    let out = x
        .samples()
        .iter()
        .map(|&v| {
            let q = ((v - lo) / step).round().clamp(0.0, levels);
            // pin the extremes so a second pass sees the same [lo, hi]
            if q == levels {
                hi
            } else {
                lo + (q / levels) * range
            }
        })
        .collect();
    x.with_samples(out)
}

/// Anti-alias at `f_s/4`, decimate by two, then linearly interpolate back to
/// the original length.
pub fn down_up_sample(x: &TimeSeries) -> Result<TimeSeries> {
    let n = x.len();
    if n < 4 {
        return Err(Error::invalid("x", format!("length {n} below minimum of 4")));
    }
    let filtered = lowpass(x, x.sample_rate() / 4.0)?;
    let decimated: Vec<f64> = filtered.samples().iter().step_by(2).copied().collect();
    let out = (0..n)
        .map(|i| {
            let j = i / 2;
            if i % 2 == 0 {
                decimated[j]
            } else if j + 1 < decimated.len() {
                0.5 * (decimated[j] + decimated[j + 1])
            } else {
                decimated[j]
            }
        })
        .collect();
    x.with_samples(out)
}

/// Add i.i.d. Gaussian noise with standard deviation `sigma`.
pub fn noise_flood(x: &TimeSeries, sigma: f64, seed: u64) -> Result<TimeSeries> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", format!("{sigma} must be finite and non-negative")));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid("sigma", e.to_string()))?;
    let mut rng = crate::rng::seeded(seed);
    x.with_samples(x.samples().iter().map(|v| v + normal.sample(&mut rng)).collect())
}
