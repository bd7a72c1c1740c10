use std::f64::consts::PI;

use super::TimeSeries;
use crate::error::{Error, Result};

/// Hamming-windowed sinc low-pass taps for a normalized cutoff, unit DC gain.
///
/// The length is `27 f_s / cutoff` (a Hamming transition band of roughly
/// `cutoff / 8`) rounded to an odd number and capped at `max_taps` (itself
/// forced odd).
pub fn lowpass_taps(cutoff_hz: f64, sample_rate: f64, max_taps: usize) -> Vec<f64> {
    let mut taps = (27.0 * sample_rate / cutoff_hz).round() as usize;
    if taps % 2 == 0 {
        taps += 1;
    }
    let mut cap = max_taps.max(1);
    if cap % 2 == 0 {
        cap -= 1;
    }
    let taps = taps.min(cap).max(1);
    let m = (taps / 2) as f64;
    let fc = cutoff_hz / sample_rate;
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let n = i as f64 - m;
            let sinc = if n == 0.0 { 2.0 * fc } else { (2.0 * PI * fc * n).sin() / (PI * n) };
            let window = if taps == 1 { 1.0 } else { 0.54 - 0.46 * (2.0 * PI * i as f64 / (taps - 1) as f64).cos() };
            sinc * window
        })
        .collect();
    let dc: f64 = h.iter().sum();
    for v in &mut h {
        *v /= dc;
    }
    h
}

/// Zero-phase FIR low-pass: the odd-length symmetric filter is centred on
/// each output sample, with mirror extension at the edges.
pub fn lowpass(x: &TimeSeries, cutoff_hz: f64) -> Result<TimeSeries> {
    let nyquist = x.sample_rate() / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz <= nyquist) {
        return Err(Error::invalid("cutoff_hz", format!("{cutoff_hz} outside (0, {nyquist}]")));
    }
    let h = lowpass_taps(cutoff_hz, x.sample_rate(), x.len() / 2);
    x.with_samples(convolve_centered(x.samples(), &h))
}

fn convolve_centered(x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = x.len() as isize;
    let half = (h.len() / 2) as isize;
    if h.len() == 1 {
        return x.iter().map(|v| v * h[0]).collect();
    }
    let reflect = |mut i: isize| -> usize {
        // whole-sample symmetric extension; repeat for very short inputs
        loop {
            if i < 0 {
                i = -i;
            } else if i >= n {
                i = 2 * (n - 1) - i;
            } else {
                return i as usize;
            }
            if n == 1 {
                return 0;
            }
        }
    };
    (0..n)
        .map(|i| {
            h.iter()
                .enumerate()
                .map(|(j, &w)| w * x[reflect(i + half - j as isize)])
                .sum()
        })
        .collect()
}
