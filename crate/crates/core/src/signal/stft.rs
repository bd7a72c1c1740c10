use std::f64::consts::PI;

use super::{fft_in_place, ifft_in_place, Complex, TimeSeries};
use crate::error::{Error, Result};

/// Stacked real/imaginary STFT: shape `2 x F x W` with `F = fft_len/2 + 1`
/// one-sided bins and `W` windows, stored channel-major then bin-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<f64>,
    bins: usize,
    windows: usize,
    fft_len: usize,
    hop: usize,
}

impl Spectrogram {
    pub fn from_data(data: Vec<f64>, bins: usize, windows: usize, fft_len: usize, hop: usize) -> Result<Self> {
        if data.len() != 2 * bins * windows {
            return Err(Error::LengthMismatch { expected: 2 * bins * windows, got: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { data, bins, windows, fft_len, hop })
    }

    pub fn zeros(bins: usize, windows: usize, fft_len: usize, hop: usize) -> Self {
        Self { data: vec![0.0; 2 * bins * windows], bins, windows, fft_len, hop }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn windows(&self) -> usize {
        self.windows
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn shape(&self) -> [usize; 3] {
        [2, self.bins, self.windows]
    }

    #[inline]
    pub fn index(&self, channel: usize, bin: usize, window: usize) -> usize {
        (channel * self.bins + bin) * self.windows + window
    }

    pub fn get(&self, channel: usize, bin: usize, window: usize) -> f64 {
        self.data[self.index(channel, bin, window)]
    }
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos()).collect()
}

fn check_frame(len: usize, fft_len: usize, hop: usize) -> Result<usize> {
    if fft_len == 0 || hop == 0 {
        return Err(Error::invalid("fft_len/hop", "must be at least 1"));
    }
    if fft_len > len {
        return Err(Error::invalid("fft_len", format!("{fft_len} exceeds signal length {len}")));
    }
    Ok((len - fft_len) / hop + 1)
}

/// Hann-windowed short-time Fourier transform.
pub fn stft(x: &TimeSeries, fft_len: usize, hop: usize) -> Result<Spectrogram> {
    let windows = check_frame(x.len(), fft_len, hop)?;
    let bins = fft_len / 2 + 1;
    let window = hann_window(fft_len);
    let mut out = Spectrogram::zeros(bins, windows, fft_len, hop);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    let samples = x.samples();
    for w in 0..windows {
        let start = w * hop;
        for (m, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(samples[start + m] * window[m], 0.0);
        }
        fft_in_place(&mut buf);
        for f in 0..bins {
            let re = out.index(0, f, w);
            let im = out.index(1, f, w);
            out.data[re] = buf[f].re;
            out.data[im] = buf[f].im;
        }
    }
    Ok(out)
}

/// Adjoint of [`stft`]: maps a spectrogram-shaped cotangent back onto the
/// `len` time samples.
pub fn stft_adjoint(grad: &Spectrogram, len: usize) -> Result<Vec<f64>> {
    let fft_len = grad.fft_len;
    let windows = check_frame(len, fft_len, grad.hop)?;
    if windows != grad.windows || grad.bins != fft_len / 2 + 1 {
        return Err(Error::LengthMismatch { expected: windows, got: grad.windows });
    }
    let window = hann_window(fft_len);
    let mut out = vec![0.0; len];
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    for w in 0..windows {
        // re = sum x w cos, im = -sum x w sin, so
        // d/dx[m] = w[m] Re(sum_f (g_re + i g_im) e^{i 2 pi f m / L})
        for b in buf.iter_mut() {
            *b = Complex::new(0.0, 0.0);
        }
        for f in 0..grad.bins {
            buf[f] = Complex::new(grad.get(0, f, w), grad.get(1, f, w));
        }
        ifft_in_place(&mut buf);
        let start = w * grad.hop;
        for m in 0..fft_len {
            out[start + m] += window[m] * buf[m].re * fft_len as f64;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::seeded(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn window_count() {
        let x = TimeSeries::zeros(64, 1.0).unwrap();
        let s = stft(&x, 16, 8).unwrap();
        assert_eq!(s.shape(), [2, 9, 7]);
        assert!(s.data().iter().all(|&v| v == 0.0));
        assert!(stft(&x, 65, 8).is_err());
        assert!(stft(&x, 16, 0).is_err());
    }

    #[test]
    fn linear() {
        let x = TimeSeries::new(random(100, 1), 1.0).unwrap();
        let y = TimeSeries::new(random(100, 2), 1.0).unwrap();
        let sx = stft(&x, 32, 10).unwrap();
        let sy = stft(&y, 32, 10).unwrap();
        let s2 = stft(&x.scaled(2.0).unwrap(), 32, 10).unwrap();
        for (a, b) in s2.data().iter().zip(sx.data()) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
        let combo = x.scaled(0.5).unwrap().add(&y.scaled(-3.0).unwrap()).unwrap();
        let sc = stft(&combo, 32, 10).unwrap();
        for ((c, a), b) in sc.data().iter().zip(sx.data()).zip(sy.data()) {
            assert!((c - (0.5 * a - 3.0 * b)).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_sum() {
        let x = random(40, 5);
        let s = stft(&TimeSeries::new(x.clone(), 1.0).unwrap(), 12, 7).unwrap();
        let w = hann_window(12);
        for win in 0..s.windows() {
            for f in 0..s.bins() {
                let (mut re, mut im) = (0.0, 0.0);
                for m in 0..12 {
                    let th = 2.0 * PI * (f * m) as f64 / 12.0;
                    re += x[win * 7 + m] * w[m] * th.cos();
                    im -= x[win * 7 + m] * w[m] * th.sin();
                }
                assert!((s.get(0, f, win) - re).abs() < 1e-12);
                assert!((s.get(1, f, win) - im).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        // <stft(x), g> == <x, stft_adjoint(g)> for random x, g
        for (n, l, h) in [(64, 16, 8), (77, 13, 5), (50, 50, 3)] {
            let x = random(n, 11);
            let s = stft(&TimeSeries::new(x.clone(), 1.0).unwrap(), l, h).unwrap();
            let g = Spectrogram::from_data(random(s.data().len(), 12), s.bins(), s.windows(), l, h).unwrap();
            let lhs: f64 = s.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
            let back = stft_adjoint(&g, n).unwrap();
            let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn adjoint_matches_explicit_transpose() {
        let (n, l, h) = (20, 8, 4);
        let s0 = stft(&TimeSeries::zeros(n, 1.0).unwrap(), l, h).unwrap();
        let g = Spectrogram::from_data(random(s0.data().len(), 3), s0.bins(), s0.windows(), l, h).unwrap();
        let back = stft_adjoint(&g, n).unwrap();
        // column j of the STFT matrix is stft(e_j)
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = stft(&TimeSeries::new(e, 1.0).unwrap(), l, h).unwrap();
            let expected: f64 = col.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
            assert!((back[j] - expected).abs() < 1e-12);
        }
    }
}
