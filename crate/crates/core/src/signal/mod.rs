//! Deterministic numerical core: Fourier transforms, time shifts, power and
//! SNR arithmetic, low-pass filtering, STFT and the defense transforms.

mod filter;
mod fourier;
mod stft;
mod transforms;

pub use filter::{lowpass, lowpass_taps};
pub use fourier::{cyclic_time_shift, dft, fft_in_place, idft, idft_real, ifft_in_place, Complex};
pub use stft::{hann_window, stft, stft_adjoint, Spectrogram};
pub use transforms::{down_up_sample, noise_flood, quantize_dequantize};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A real-valued sampled signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySignal);
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidSampleRate(sample_rate));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// New series with the same sample rate. Fails on non-finite samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.sample_rate)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.with_samples(self.samples.iter().map(|s| s * factor).collect())
    }

    /// Elementwise sum of two compatible series.
    pub fn add(&self, other: &TimeSeries) -> Result<Self> {
        self.check_compatible(other)?;
        self.with_samples(self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect())
    }

    pub fn check_compatible(&self, other: &TimeSeries) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: other.len() });
        }
        if self.sample_rate != other.sample_rate {
            return Err(Error::SampleRateMismatch { expected: self.sample_rate, got: other.sample_rate });
        }
        Ok(())
    }
}

/// Fourier coefficients of a length-T signal, bin k = 0..T-1.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coefficients: Vec<Complex>,
    sample_rate: f64,
    real_signal: bool,
}

impl Spectrum {
    pub fn new(coefficients: Vec<Complex>, sample_rate: f64, real_signal: bool) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::EmptySignal);
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidSampleRate(sample_rate));
        }
        if let Some(i) = coefficients.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { coefficients, sample_rate, real_signal })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Result<Self> {
        Self::new(vec![Complex::new(0.0, 0.0); len], sample_rate, true)
    }

    pub fn coefficients(&self) -> &[Complex] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex] {
        &mut self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<Complex> {
        self.coefficients
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn is_real_signal(&self) -> bool {
        self.real_signal
    }

    /// Frequency in Hz of bin `k`, signed (bins above T/2 are negative).
    pub fn bin_frequency(&self, k: usize) -> f64 {
        signed_bin(k, self.len()) as f64 * self.sample_rate / self.len() as f64
    }

    /// Largest deviation from `X[k] = conj(X[T-k])` with real DC/Nyquist.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.len();
        let c = &self.coefficients;
        let mut worst = c[0].im.abs();
        if n % 2 == 0 {
            worst = worst.max(c[n / 2].im.abs());
        }
        for k in 1..n {
            worst = worst.max((c[k] - c[n - k].conj()).norm());
        }
        worst
    }

    /// Project onto the conjugate-symmetric subspace and set the
    /// `real_signal` flag.
    pub fn enforce_conjugate_symmetry(&mut self) {
        let n = self.len();
        let c = &mut self.coefficients;
        c[0].im = 0.0;
        for k in 1..n.div_ceil(2) {
            let avg = (c[k] + c[n - k].conj()) * 0.5;
            c[k] = avg;
            c[n - k] = avg.conj();
        }
        if n % 2 == 0 {
            c[n / 2].im = 0.0;
        }
        self.real_signal = true;
    }
}

/// Signed frequency index: k for k <= T/2, k - T above.
pub(crate) fn signed_bin(k: usize, len: usize) -> i64 {
    if 2 * k <= len {
        k as i64
    } else {
        k as i64 - len as i64
    }
}

/// Mean squared sample value.
pub fn power(x: &TimeSeries) -> f64 {
    x.samples.iter().map(|s| s * s).sum::<f64>() / x.len() as f64
}

/// `10 log10(P_x / P_v)`.
pub fn snr_db(x: &TimeSeries, v: &TimeSeries) -> Result<f64> {
    if x.len() != v.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: v.len() });
    }
    let pv = power(v);
    if pv == 0.0 {
        return Err(Error::ZeroPowerAttack);
    }
    Ok(10.0 * (power(x) / pv).log10())
}

/// Rescale `v` so that `snr_db(x, result) == target_db`.
pub fn scale_to_snr(x: &TimeSeries, v: &TimeSeries, target_db: f64) -> Result<TimeSeries> {
    Ok(v.scaled(snr_scale_factor(x, v, target_db)?)?)
}

/// The factor `alpha` applied by [`scale_to_snr`].
pub fn snr_scale_factor(x: &TimeSeries, v: &TimeSeries, target_db: f64) -> Result<f64> {
    if !target_db.is_finite() {
        return Err(Error::invalid("target_db", "must be finite"));
    }
    if x.len() != v.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: v.len() });
    }
    let pv = power(v);
    if pv == 0.0 {
        return Err(Error::ZeroPowerAttack);
    }
    Ok((power(x) / pv).sqrt() * 10f64.powf(-target_db / 20.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec(), 8.0).unwrap()
    }

    #[test]
    fn rejects_bad_series() {
        assert!(matches!(TimeSeries::new(vec![], 1.0), Err(Error::EmptySignal)));
        assert!(matches!(TimeSeries::new(vec![1.0, f64::NAN], 1.0), Err(Error::NonFinite(1))));
        assert!(TimeSeries::new(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn power_examples() {
        assert_eq!(power(&ts(&[0.0; 5])), 0.0);
        assert!((power(&ts(&[0.7; 9])) - 0.49).abs() < 1e-15);
        assert_eq!(power(&ts(&[1.0, -1.0, 1.0, -1.0])), 1.0);
    }

    #[test]
    fn snr_examples() {
        let x = ts(&[1.0, -2.0, 3.0, 0.5]);
        let same = ts(&[-1.0, 2.0, -3.0, 0.5]);
        assert!(snr_db(&x, &same).unwrap().abs() < 1e-12);
        let tenth = x.scaled(0.1).unwrap();
        assert!((snr_db(&x, &tenth).unwrap() - 20.0).abs() < 1e-9);
        assert!(matches!(snr_db(&x, &ts(&[0.0; 4])), Err(Error::ZeroPowerAttack)));
        assert!(matches!(snr_db(&x, &ts(&[1.0; 3])), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn snr_scaling_law_offset() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(3);
        let x = ts(&(0..64).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
        let v = ts(&(0..64).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
        let base = snr_db(&x, &v).unwrap();
        let doubled = snr_db(&x, &v.scaled(2.0).unwrap()).unwrap();
        // 20 log10(2)
        assert!((doubled - base + 6.020_599_913_279_624).abs() < 1e-9);
    }

    #[test]
    fn scale_to_snr_examples() {
        let x = ts(&[1.0, -1.0, 1.0, -1.0]);
        let v = ts(&[-1.0, -1.0, 1.0, 1.0]);
        let a = snr_scale_factor(&x, &v, 10.0).unwrap();
        assert!((a - 10f64.powf(-0.5)).abs() < 1e-12);
        assert!((a - 0.316_227_766).abs() < 1e-8);
        let scaled = scale_to_snr(&x, &v, 10.0).unwrap();
        assert!((snr_db(&x, &scaled).unwrap() - 10.0).abs() < 1e-9);

        let x4 = ts(&[2.0, -2.0, 2.0, -2.0]);
        assert!((snr_scale_factor(&x4, &v, 0.0).unwrap() - 2.0).abs() < 1e-12);

        let current = snr_db(&x4, &v).unwrap();
        assert!((snr_scale_factor(&x4, &v, current).unwrap() - 1.0).abs() < 1e-12);

        assert!(scale_to_snr(&x, &v, f64::NEG_INFINITY).is_err());
        assert!(matches!(scale_to_snr(&x, &ts(&[0.0; 4]), 3.0), Err(Error::ZeroPowerAttack)));
    }

    #[test]
    fn symmetry_projection() {
        let mut s = Spectrum::new(
            vec![Complex::new(1.0, 0.3), Complex::new(2.0, 1.0), Complex::new(0.5, 0.5), Complex::new(4.0, 2.0)],
            4.0,
            false,
        )
        .unwrap();
        s.enforce_conjugate_symmetry();
        assert!(s.symmetry_residual() < 1e-15);
        assert_eq!(s.coefficients()[1], Complex::new(3.0, -0.5));
    }
}
