use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledSignal, SplitTag};
use crate::error::{Error, Result};
use crate::signal::{dft, idft_real, Complex, TimeSeries};

/// Multi-tone synthetic classes sharing one frequency band.
///
/// Each class owns `tone_count_per_class` bin-aligned tones drawn once from
/// the band. An example is the class tones with random phases and jittered
/// amplitudes, optionally gated by a burst envelope, plus a stationary set of
/// shared tones common to every class, band-limited background noise and a
/// white noise floor. Classes may also carry weak signature tones above the
/// band, drawn from `(band_high_hz, 0.9 * nyquist]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub examples_per_class: usize,
    pub val_per_class: usize,
    /// Samples per example (T).
    pub length: usize,
    pub sample_rate: f64,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub tone_count_per_class: usize,
    /// Minimum distance between any two tones, across classes.
    pub min_tone_spacing_hz: f64,
    pub tone_amplitude: f64,
    /// Weak per-class tones above the band.
    pub high_tone_count_per_class: usize,
    pub high_tone_amplitude: f64,
    /// Tones present in every class, ungated (a hum that carries no label).
    pub shared_tone_count: usize,
    pub shared_tone_amplitude: f64,
    /// Relative amplitude jitter: each tone is scaled by `1 + U(-j, j)`.
    pub amplitude_jitter: f64,
    /// Standard deviation of background noise confined to the band.
    pub band_noise_std: f64,
    /// Standard deviation of the white noise floor.
    pub noise_std: f64,
    /// Fraction of the clip covered by the tone burst; 1 disables the envelope.
    pub burst_fraction: f64,
    /// Burst onset jitter as a fraction of the clip length.
    pub onset_jitter: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            examples_per_class: 200,
            val_per_class: 50,
            length: 2048,
            sample_rate: 16_000.0,
            band_low_hz: 250.0,
            band_high_hz: 3000.0,
            tone_count_per_class: 3,
            min_tone_spacing_hz: 40.0,
            tone_amplitude: 0.2,
            high_tone_count_per_class: 2,
            high_tone_amplitude: 0.08,
            shared_tone_count: 2,
            shared_tone_amplitude: 0.5,
            amplitude_jitter: 0.3,
            band_noise_std: 0.1,
            noise_std: 0.002,
            burst_fraction: 0.6,
            onset_jitter: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate / 2.0;
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidSampleRate(self.sample_rate));
        }
        if !(self.band_low_hz > 0.0 && self.band_low_hz < self.band_high_hz && self.band_high_hz <= nyquist) {
            return Err(Error::invalid(
                "band",
                format!("need 0 < band_low ({}) < band_high ({}) <= {nyquist}", self.band_low_hz, self.band_high_hz),
            ));
        }
        if self.num_classes < 2 || self.examples_per_class == 0 || self.tone_count_per_class == 0 {
            return Err(Error::invalid("num_classes", "need >= 2 classes with >= 1 example and >= 1 tone"));
        }
        if self.length < 4 {
            return Err(Error::invalid("length", "must be at least 4"));
        }
        if !(self.burst_fraction > 0.0 && self.burst_fraction <= 1.0) || self.onset_jitter < 0.0 {
            return Err(Error::invalid("burst_fraction", "must be in (0, 1] with non-negative onset jitter"));
        }
        if self.amplitude_jitter < 0.0 || self.band_noise_std < 0.0 || self.noise_std < 0.0 || self.shared_tone_amplitude < 0.0 || self.high_tone_amplitude < 0.0 {
            return Err(Error::invalid("noise", "jitter and noise levels must be non-negative"));
        }
        Ok(())
    }

    fn bin_width(&self) -> f64 {
        self.sample_rate / self.length as f64
    }

    /// Per-class tone frequencies in Hz, drawn from the seed.
    pub fn class_tones(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self.tone_sets()?.class)
    }

    /// Per-class signature tones above the band.
    pub fn high_tones(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self.tone_sets()?.high)
    }

    /// Frequencies of the tones shared by all classes.
    pub fn shared_tones(&self) -> Result<Vec<f64>> {
        Ok(self.tone_sets()?.shared)
    }

    fn tone_sets(&self) -> Result<ToneSets> {
        self.validate()?;
        let df = self.bin_width();
        let lo = (self.band_low_hz / df).ceil() as usize;
        let hi = (self.band_high_hz / df).floor() as usize;
        if hi < lo {
            return Err(Error::invalid("band", "band contains no DFT bins"));
        }
        let min_gap = (self.min_tone_spacing_hz / df).ceil().max(1.0) as usize;
        let high_lo = hi + min_gap;
        let high_hi = (0.45 * self.sample_rate / df).floor() as usize;
        if self.high_tone_count_per_class > 0 && high_hi < high_lo {
            return Err(Error::invalid("band_high_hz", "no room for tones above the band"));
        }
        let mut rng = crate::rng::derive(self.seed, 0x70_4e5);
        let mut used: Vec<usize> = Vec::new();
        let mut tones = Vec::with_capacity(2 * self.num_classes + 1);
        let counts = std::iter::once((self.shared_tone_count, lo, hi))
            .chain(std::iter::repeat_n((self.tone_count_per_class, lo, hi), self.num_classes))
            .chain(std::iter::repeat_n((self.high_tone_count_per_class, high_lo, high_hi), self.num_classes));
        for (class, (count, lo, hi)) in counts.enumerate() {
            let mut mine = Vec::with_capacity(count);
            for _ in 0..count {
                let mut placed = false;
                for _ in 0..10_000 {
                    let k = rng.random_range(lo..=hi);
                    if used.iter().all(|&u| u.abs_diff(k) >= min_gap) {
                        used.push(k);
                        mine.push(k as f64 * df);
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    return Err(Error::invalid(
                        "min_tone_spacing_hz",
                        format!("cannot place {count} tones for set {class} in the band"),
                    ));
                }
            }
            mine.sort_by(f64::total_cmp);
            tones.push(mine);
        }
        let high = tones.split_off(self.num_classes + 1);
        let shared = tones.remove(0);
        Ok(ToneSets { shared, class: tones, high })
    }

    fn envelope(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.length;
        if self.burst_fraction >= 1.0 {
            return vec![1.0; n];
        }
        let burst = (self.burst_fraction * n as f64).round().max(2.0);
        let jitter = self.onset_jitter * n as f64;
        let offset = if jitter > 0.0 { rng.random_range(-jitter..=jitter) } else { 0.0 };
        let start = ((n as f64 - burst) / 2.0 + offset).clamp(0.0, n as f64 - burst);
        // Tukey window: flat top with raised-cosine 20% edges
        let ramp = (0.2 * burst).max(1.0);
        (0..n)
            .map(|t| {
                let u = t as f64 - start;
                if u < 0.0 || u > burst {
                    0.0
                } else if u < ramp {
                    0.5 - 0.5 * (PI * u / ramp).cos()
                } else if u > burst - ramp {
                    0.5 - 0.5 * (PI * (burst - u) / ramp).cos()
                } else {
                    1.0
                }
            })
            .collect()
    }

    fn example(&self, sets: &ToneSets, label: usize, seed: u64) -> Result<TimeSeries> {
        let n = self.length;
        let fs = self.sample_rate;
        let mut rng = crate::rng::seeded(seed);
        let env = self.envelope(&mut rng);
        let mut x = vec![0.0; n];
        let flat = vec![1.0; n];
        let gated = sets.class[label].iter().map(|&f| (f, self.tone_amplitude, &env));
        let high = sets.high[label].iter().map(|&f| (f, self.high_tone_amplitude, &env));
        let stationary = sets.shared.iter().map(|&f| (f, self.shared_tone_amplitude, &flat));
        for (f, amplitude, env) in gated.chain(high).chain(stationary) {
            let jitter = if self.amplitude_jitter > 0.0 {
                rng.random_range(-self.amplitude_jitter..=self.amplitude_jitter)
            } else {
                0.0
            };
            let amp = amplitude * (1.0 + jitter);
            let phase = rng.random_range(0.0..2.0 * PI);
            for (t, v) in x.iter_mut().enumerate() {
                *v += amp * (2.0 * PI * f * t as f64 / fs + phase).cos() * env[t];
            }
        }
        if self.band_noise_std > 0.0 {
            let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut spec = dft(&TimeSeries::new(white, fs)?)?;
            let mut kept = 0usize;
            for (k, c) in spec.coefficients_mut().iter_mut().enumerate() {
                let f = (k.min(n - k)) as f64 * fs / n as f64;
                if f >= self.band_low_hz && f <= self.band_high_hz {
                    kept += 1;
                } else {
                    *c = Complex::new(0.0, 0.0);
                }
            }
            let gain = if kept > 0 { self.band_noise_std * (n as f64 / kept as f64).sqrt() } else { 0.0 };
            let band = idft_real(&spec)?;
            for (v, b) in x.iter_mut().zip(band.samples()) {
                *v += gain * b;
            }
        }
        if self.noise_std > 0.0 {
            for v in &mut x {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += self.noise_std * z;
            }
        }
        TimeSeries::new(x, fs)
    }

    fn build(&self, sets: &ToneSets, per_class: usize, split: SplitTag) -> Result<Dataset> {
        let stream = match split {
            SplitTag::Train => 1,
            SplitTag::Val => 2,
        };
        let base = crate::rng::mix(self.seed, stream);
        let items = (0..self.num_classes * per_class)
            .into_par_iter()
            .map(|i| {
                let label = i % self.num_classes;
                let signal = self.example(sets, label, crate::rng::mix(base, i as u64))?;
                Ok(LabeledSignal { signal, label })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(items, self.num_classes, split)
    }
}

struct ToneSets {
    shared: Vec<f64>,
    class: Vec<Vec<f64>>,
    high: Vec<Vec<f64>>,
}

/// Generate the train and validation datasets for `cfg`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(Dataset, Dataset)> {
    let sets = cfg.tone_sets()?;
    let train = cfg.build(&sets, cfg.examples_per_class, SplitTag::Train)?;
    let val = cfg.build(&sets, cfg.val_per_class.max(1), SplitTag::Val)?;
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig { examples_per_class: 4, val_per_class: 2, length: 512, ..Default::default() }
    }

    #[test]
    fn rejects_bad_band() {
        let cfg = SynthConfig { band_high_hz: 9000.0, ..small() };
        assert!(generate_synthetic(&cfg).is_err());
        let cfg = SynthConfig { band_low_hz: 4000.0, band_high_hz: 3000.0, ..small() };
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn shape_and_determinism() {
        let cfg = small();
        let (train, val) = generate_synthetic(&cfg).unwrap();
        assert_eq!(train.len(), 40);
        assert_eq!(val.len(), 20);
        assert!(train.items().iter().all(|it| it.signal.len() == 512));
        let (again, val2) = generate_synthetic(&cfg).unwrap();
        assert_eq!(train, again);
        assert_eq!(val, val2);
        assert_ne!(train.items()[0].signal, val.items()[0].signal);
        let (other, _) = generate_synthetic(&SynthConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(train, other);
    }

    #[test]
    fn tones_distinct_and_in_band() {
        let cfg = SynthConfig::default();
        let tones = cfg.class_tones().unwrap();
        let mut all: Vec<f64> = tones.iter().flatten().copied().collect();
        assert!(all.iter().all(|&f| f >= cfg.band_low_hz && f <= cfg.band_high_hz));
        all.sort_by(f64::total_cmp);
        assert!(all.windows(2).all(|w| w[1] - w[0] >= cfg.min_tone_spacing_hz - 1e-9));
    }

    #[test]
    fn extra_tones_sit_where_configured() {
        let cfg = SynthConfig::default();
        let class: Vec<f64> = cfg.class_tones().unwrap().into_iter().flatten().collect();
        let high = cfg.high_tones().unwrap();
        assert_eq!(high.len(), cfg.num_classes);
        for h in &high {
            assert_eq!(h.len(), cfg.high_tone_count_per_class);
            assert!(h.iter().all(|&f| f > cfg.band_high_hz && f < cfg.sample_rate / 2.0));
        }
        let shared = cfg.shared_tones().unwrap();
        assert_eq!(shared.len(), cfg.shared_tone_count);
        for f in &shared {
            assert!(*f >= cfg.band_low_hz && *f <= cfg.band_high_hz);
            assert!(class.iter().all(|c| (c - f).abs() >= cfg.min_tone_spacing_hz - 1e-9));
        }
    }

    #[test]
    fn clean_examples_have_energy_only_at_class_tones() {
        let cfg = SynthConfig {
            examples_per_class: 1,
            amplitude_jitter: 0.0,
            band_noise_std: 0.0,
            noise_std: 0.0,
            burst_fraction: 1.0,
            high_tone_count_per_class: 0,
            shared_tone_count: 0,
            ..small()
        };
        let tones = cfg.class_tones().unwrap();
        let (train, _) = generate_synthetic(&cfg).unwrap();
        let df = cfg.sample_rate / cfg.length as f64;
        for it in train.items() {
            let spec = dft(&it.signal).unwrap();
            let n = cfg.length;
            for (k, c) in spec.coefficients().iter().enumerate() {
                let f = k.min(n - k) as f64 * df;
                let is_tone = tones[it.label].iter().any(|&t| (t - f).abs() < 1e-6);
                if is_tone {
                    assert!((c.norm() - cfg.tone_amplitude * n as f64 / 2.0).abs() < 1e-6);
                } else {
                    assert!(c.norm() < 1e-8, "class {} bin {k} has {}", it.label, c.norm());
                }
            }
        }
    }

    #[test]
    fn noiseless_nearest_centroid_is_perfect() {
        let cfg = SynthConfig { noise_std: 0.0, band_noise_std: 0.0, examples_per_class: 5, ..small() };
        let (train, _) = generate_synthetic(&cfg).unwrap();
        let mags: Vec<Vec<f64>> = train
            .items()
            .iter()
            .map(|it| dft(&it.signal).unwrap().coefficients().iter().map(|c| c.norm()).collect())
            .collect();
        let n = mags[0].len();
        let mut centroids = vec![vec![0.0; n]; cfg.num_classes];
        for (m, it) in mags.iter().zip(train.items()) {
            for (c, v) in centroids[it.label].iter_mut().zip(m) {
                *c += v / 5.0;
            }
        }
        for (m, it) in mags.iter().zip(train.items()) {
            let best = (0..cfg.num_classes)
                .min_by(|&a, &b| {
                    let da: f64 = centroids[a].iter().zip(m).map(|(c, v)| (c - v).powi(2)).sum();
                    let db: f64 = centroids[b].iter().zip(m).map(|(c, v)| (c - v).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            assert_eq!(best, it.label);
        }
    }

    #[test]
    fn band_noise_has_requested_level_and_band() {
        let cfg = SynthConfig {
            tone_amplitude: 0.0,
            high_tone_count_per_class: 0,
            shared_tone_count: 0,
            noise_std: 0.0,
            examples_per_class: 3,
            length: 4096,
            ..SynthConfig::default()
        };
        let (train, _) = generate_synthetic(&cfg).unwrap();
        let p = train.mean_power();
        assert!((p.sqrt() - cfg.band_noise_std).abs() < 0.1 * cfg.band_noise_std, "rms {}", p.sqrt());
        let spec = dft(&train.items()[0].signal).unwrap();
        let df = cfg.sample_rate / 4096.0;
        for (k, c) in spec.coefficients().iter().enumerate().take(2048) {
            let f = k as f64 * df;
            if f < cfg.band_low_hz - df || f > cfg.band_high_hz + df {
                assert!(c.norm() < 1e-9);
            }
        }
    }
}
