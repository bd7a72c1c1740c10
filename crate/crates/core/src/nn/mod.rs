//! Spectrogram classifier with exact reverse-mode gradients.
//!
//! `x -> STFT (2 x F x W) -> conv3x3/2 -> ReLU -> conv3x3/2 -> ReLU -> pool
//! -> dense -> logits`. Gradients are available with respect to the
//! parameters (training) and to the raw time samples (attacks).

mod checkpoint;
mod layers;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use train::{augment, evaluate, train_classifier, AugmentConfig, EpochLog, TrainConfig, TrainLog};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{hann_window, stft, stft_adjoint, Spectrogram, TimeSeries};
use layers::{conv_backward, conv_forward, ConvShape};

/// How the second convolution's feature map is reduced before the dense
/// layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// No pooling; the dense layer sees every (channel, bin, window) cell.
    Flatten,
    /// Average over windows, keeping (channel, bin).
    Time,
    /// Average over bins and windows, keeping channels.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_len: usize,
    pub sample_rate: f64,
    pub fft_len: usize,
    pub hop: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub num_classes: usize,
    pub pooling: Pooling,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    bins: usize,
    windows: usize,
    conv1: ConvShape,
    conv2: ConvShape,
    pooled: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wd: usize,
    bd: usize,
    total: usize,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.fft_len == 0 || self.hop == 0 || self.fft_len > self.input_len {
            return Err(Error::invalid("fft_len", format!("need 1 <= fft_len ({}) <= input_len ({})", self.fft_len, self.input_len)));
        }
        if self.conv1_channels == 0 || self.conv2_channels == 0 || self.num_classes < 2 {
            return Err(Error::invalid("channels", "conv channels must be positive and num_classes >= 2"));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidSampleRate(self.sample_rate));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    pub fn windows(&self) -> usize {
        (self.input_len - self.fft_len) / self.hop + 1
    }

    fn layout(&self) -> Layout {
        let bins = self.bins();
        let windows = self.windows();
        let conv1 = ConvShape { in_c: 2, in_h: bins, in_w: windows, out_c: self.conv1_channels };
        let conv2 = ConvShape { in_c: self.conv1_channels, in_h: conv1.out_h(), in_w: conv1.out_w(), out_c: self.conv2_channels };
        let pooled = match self.pooling {
            Pooling::Flatten => conv2.out_len(),
            Pooling::Time => conv2.out_c * conv2.out_h(),
            Pooling::Global => conv2.out_c,
        };
        let w1 = 0;
        let b1 = w1 + conv1.weight_len();
        let w2 = b1 + conv1.out_c;
        let b2 = w2 + conv2.weight_len();
        let wd = b2 + conv2.out_c;
        let bd = wd + pooled * self.num_classes;
        let total = bd + self.num_classes;
        Layout { bins, windows, conv1, conv2, pooled, w1, b1, w2, b2, wd, bd, total }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }

    /// Fixed input gain: unit-amplitude tones map to unit spectrogram peaks.
    fn input_scale(&self) -> f64 {
        2.0 / hann_window(self.fft_len).iter().sum::<f64>()
    }
}

/// Everything the backward pass needs from a forward pass.
struct Trace {
    input: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    pooled: Vec<f64>,
    logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    arch: Architecture,
    params: Vec<f64>,
    seed: u64,
}

impl Classifier {
    /// He-initialized convolutions, scaled-normal dense layer, zero biases.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let l = arch.layout();
        let mut params = vec![0.0; l.total];
        let mut rng = crate::rng::derive(seed, 0x1417);
        let mut fill = |range: std::ops::Range<usize>, std: f64| {
            let normal = Normal::new(0.0, std).expect("finite std");
            for p in &mut params[range] {
                *p = normal.sample(&mut rng);
            }
        };
        fill(l.w1..l.b1, (2.0 / (2 * 9) as f64).sqrt());
        fill(l.w2..l.b2, (2.0 / (l.conv2.in_c * 9) as f64).sqrt());
        fill(l.wd..l.bd, (1.0 / l.pooled as f64).sqrt());
        Ok(Self { arch, params, seed })
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>, seed: u64) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::LengthMismatch { expected: arch.param_count(), got: params.len() });
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { arch, params, seed })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes
    }

    /// Zero the dense layer (weights and bias) so every input maps to
    /// all-zero logits.
    pub fn zero_head(&mut self) {
        let l = self.arch.layout();
        self.params[l.wd..].iter_mut().for_each(|p| *p = 0.0);
    }

    /// Indices of all bias parameters.
    pub fn bias_indices(&self) -> Vec<usize> {
        let l = self.arch.layout();
        (l.b1..l.w2).chain(l.b2..l.wd).chain(l.bd..l.total).collect()
    }

    fn check_input(&self, x: &TimeSeries) -> Result<()> {
        if x.len() != self.arch.input_len {
            return Err(Error::LengthMismatch { expected: self.arch.input_len, got: x.len() });
        }
        Ok(())
    }

    pub fn spectrogram(&self, x: &TimeSeries) -> Result<Spectrogram> {
        self.check_input(x)?;
        stft(x, self.arch.fft_len, self.arch.hop)
    }

    fn trace(&self, spec: &Spectrogram) -> Trace {
        let l = self.arch.layout();
        let p = &self.params;
        let scale = self.arch.input_scale();
        let input: Vec<f64> = spec.data().iter().map(|v| v * scale).collect();
        let z1 = conv_forward(l.conv1, &input, &p[l.w1..l.b1], &p[l.b1..l.w2]);
        let a1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
        let z2 = conv_forward(l.conv2, &a1, &p[l.w2..l.b2], &p[l.b2..l.wd]);
        let (h2, w2) = (l.conv2.out_h(), l.conv2.out_w());
        let pooled: Vec<f64> = match self.arch.pooling {
            Pooling::Flatten => z2.iter().map(|v| v.max(0.0)).collect(),
            Pooling::Time => z2.chunks(w2).map(|row| row.iter().map(|v| v.max(0.0)).sum::<f64>() / w2 as f64).collect(),
            Pooling::Global => {
                z2.chunks(h2 * w2).map(|plane| plane.iter().map(|v| v.max(0.0)).sum::<f64>() / (h2 * w2) as f64).collect()
            }
        };
        let wd = &p[l.wd..l.bd];
        let logits = (0..self.arch.num_classes)
            .map(|c| p[l.bd + c] + wd[c * l.pooled..(c + 1) * l.pooled].iter().zip(&pooled).map(|(w, a)| w * a).sum::<f64>())
            .collect();
        Trace { input, z1, a1, z2, pooled, logits }
    }

    /// Backpropagate `dlogits`. Accumulates into `dparams` when given and
    /// returns the spectrogram gradient when `want_input` is set.
    fn backward(&self, tr: &Trace, dlogits: &[f64], dparams: Option<&mut [f64]>, want_input: bool) -> Option<Vec<f64>> {
        let l = self.arch.layout();
        let p = &self.params;
        let mut scratch;
        let dparams: &mut [f64] = match dparams {
            Some(d) => d,
            None => {
                scratch = vec![0.0; l.total];
                &mut scratch
            }
        };
        let wd = &p[l.wd..l.bd];
        let mut dpooled = vec![0.0; l.pooled];
        for (c, &g) in dlogits.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            dparams[l.bd + c] += g;
            let row = &wd[c * l.pooled..(c + 1) * l.pooled];
            let drow = &mut dparams[l.wd + c * l.pooled..l.wd + (c + 1) * l.pooled];
            for i in 0..l.pooled {
                drow[i] += g * tr.pooled[i];
                dpooled[i] += g * row[i];
            }
        }
        let (h2, w2) = (l.conv2.out_h(), l.conv2.out_w());
        let mut dz2 = vec![0.0; tr.z2.len()];
        for (i, dz) in dz2.iter_mut().enumerate() {
            if tr.z2[i] > 0.0 {
                *dz = match self.arch.pooling {
                    Pooling::Flatten => dpooled[i],
                    Pooling::Time => dpooled[i / w2] / w2 as f64,
                    Pooling::Global => dpooled[i / (h2 * w2)] / (h2 * w2) as f64,
                };
            }
        }
        let (conv1_grads, rest) = dparams[..l.wd].split_at_mut(l.w2);
        let (dw2, db2) = rest.split_at_mut(l.b2 - l.w2);
        let da1 = conv_backward(l.conv2, &tr.a1, &p[l.w2..l.b2], &dz2, dw2, db2, true).expect("input gradient requested");
        let dz1: Vec<f64> = da1.iter().zip(&tr.z1).map(|(g, z)| if *z > 0.0 { *g } else { 0.0 }).collect();
        let (d1w, d1b) = conv1_grads.split_at_mut(l.b1);
        let dinput = conv_backward(l.conv1, &tr.input, &p[l.w1..l.b1], &dz1, d1w, d1b, want_input);
        let scale = self.arch.input_scale();
        dinput.map(|mut d| {
            d.iter_mut().for_each(|v| *v *= scale);
            d
        })
    }

    pub fn forward_spectrogram(&self, spec: &Spectrogram) -> Result<Vec<f64>> {
        self.check_spectrogram(spec)?;
        Ok(self.trace(spec).logits)
    }

    fn check_spectrogram(&self, spec: &Spectrogram) -> Result<()> {
        let l = self.arch.layout();
        if spec.bins() != l.bins || spec.windows() != l.windows {
            return Err(Error::LengthMismatch { expected: 2 * l.bins * l.windows, got: spec.data().len() });
        }
        Ok(())
    }

    /// Logits for one input signal.
    pub fn forward(&self, x: &TimeSeries) -> Result<Vec<f64>> {
        let spec = self.spectrogram(x)?;
        Ok(self.trace(&spec).logits)
    }

    pub fn predict(&self, x: &TimeSeries) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    pub fn probabilities(&self, x: &TimeSeries) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward(x)?))
    }

    /// Cross-entropy loss and its exact gradient with respect to every time
    /// sample of `x`.
    pub fn grad_input(&self, x: &TimeSeries, label: usize) -> Result<(f64, Vec<f64>)> {
        self.check_label(label)?;
        let spec = self.spectrogram(x)?;
        let tr = self.trace(&spec);
        let (loss, dlogits) = loss_ce_grad(&tr.logits, label);
        let dspec = self.backward(&tr, &dlogits, None, true).expect("input gradient requested");
        let dspec = Spectrogram::from_data(dspec, spec.bins(), spec.windows(), spec.fft_len(), spec.hop())?;
        Ok((loss, stft_adjoint(&dspec, x.len())?))
    }

    /// Logits of `x` and the gradient of `weights . logits` with respect to
    /// every time sample.
    pub fn grad_logits(&self, x: &TimeSeries, weights: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if weights.len() != self.arch.num_classes {
            return Err(Error::LengthMismatch { expected: self.arch.num_classes, got: weights.len() });
        }
        let spec = self.spectrogram(x)?;
        let tr = self.trace(&spec);
        let dspec = self.backward(&tr, weights, None, true).expect("input gradient requested");
        let dspec = Spectrogram::from_data(dspec, spec.bins(), spec.windows(), spec.fft_len(), spec.hop())?;
        Ok((tr.logits.clone(), stft_adjoint(&dspec, x.len())?))
    }

    /// Loss and parameter gradient for one precomputed spectrogram,
    /// accumulated into `grad`.
    pub fn accumulate_param_grad(&self, spec: &Spectrogram, label: usize, grad: &mut [f64]) -> Result<f64> {
        self.check_label(label)?;
        self.check_spectrogram(spec)?;
        if grad.len() != self.params.len() {
            return Err(Error::LengthMismatch { expected: self.params.len(), got: grad.len() });
        }
        let tr = self.trace(spec);
        let (loss, dlogits) = loss_ce_grad(&tr.logits, label);
        self.backward(&tr, &dlogits, Some(grad), false);
        Ok(loss)
    }

    /// Summed loss and summed parameter gradient over a batch of signals.
    pub fn grad_params(&self, batch: &[(TimeSeries, usize)]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        for (x, y) in batch {
            let spec = self.spectrogram(x)?;
            total += self.accumulate_param_grad(&spec, *y, &mut grad)?;
        }
        Ok((total, grad))
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.arch.num_classes {
            return Err(Error::invalid("label", format!("{label} >= {}", self.arch.num_classes)));
        }
        Ok(())
    }
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-log softmax(logits)[label]`, computed stably.
pub fn loss_ce(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    (lse - logits[label]).max(0.0)
}

/// Loss and its gradient with respect to the logits (`softmax - onehot`).
pub fn loss_ce_grad(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let mut g = softmax(logits);
    g[label] -= 1.0;
    (loss_ce(logits, label), g)
}
