//! Attack synthesis: the universal Fourier attack and its baselines.

mod baselines;
mod fourier;
mod spectrum_loss;

pub use baselines::{fgsm, gaussian_noise_attack, train_uap, UapConfig};
pub use fourier::{objective_and_gradient, train_fourier_attack, AttackEpochLog, AttackTrainLog, FourierAttackConfig, LossSchedule, StepRule};
pub use spectrum_loss::{spectrum_loss_phase1, spectrum_loss_phase2, SpectrumPhase, PHASE2_EPS};

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{f64s_to_le, le_to_f64s, read_framed, write_framed};
use crate::signal::{dft, idft, idft_real, Complex, Spectrum, TimeSeries};

/// Provenance of an attack vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackTag {
    /// Full two-phase Fourier attack with time-shift augmentation.
    Fft,
    /// Fourier attack trained with the linear spectrum loss only.
    FftPhase1Only,
    /// Fourier attack without any spectrum loss.
    FftNoSpectrumLoss,
    /// Fourier attack trained at a fixed zero time shift.
    FftNoTimeshift,
    Uap,
    Noise,
    /// Per-input FGSM; never stored as a vector, used to tag reports.
    Fgsm,
}

impl AttackTag {
    pub const ALL: [AttackTag; 7] = [
        AttackTag::Fft,
        AttackTag::FftPhase1Only,
        AttackTag::FftNoSpectrumLoss,
        AttackTag::FftNoTimeshift,
        AttackTag::Uap,
        AttackTag::Noise,
        AttackTag::Fgsm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AttackTag::Fft => "fft",
            AttackTag::FftPhase1Only => "fft_phase1_only",
            AttackTag::FftNoSpectrumLoss => "fft_no_spectrum_loss",
            AttackTag::FftNoTimeshift => "fft_no_timeshift",
            AttackTag::Uap => "uap",
            AttackTag::Noise => "noise",
            AttackTag::Fgsm => "fgsm",
        }
    }

    pub fn is_universal(&self) -> bool {
        !matches!(self, AttackTag::Fgsm)
    }
}

impl fmt::Display for AttackTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = if s == "fft_no_spectrum" { "fft_no_spectrum_loss" } else { s };
        AttackTag::ALL
            .iter()
            .find(|t| t.as_str() == s)
            .copied()
            .ok_or_else(|| Error::invalid("variant", format!("unknown attack `{s}`")))
    }
}

/// A trained universal perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackVector {
    tag: AttackTag,
    v_freq: Spectrum,
    v_time: TimeSeries,
    config: serde_json::Value,
}

impl AttackVector {
    /// Build from a frequency-domain parameter; conjugate symmetry is
    /// enforced so the time-domain attack is real.
    pub fn from_spectrum(tag: AttackTag, mut v_freq: Spectrum, config: serde_json::Value) -> Result<Self> {
        v_freq.enforce_conjugate_symmetry();
        let v_time = idft_real(&v_freq)?;
        Ok(Self { tag, v_freq, v_time, config })
    }

    pub fn from_time(tag: AttackTag, v_time: TimeSeries, config: serde_json::Value) -> Result<Self> {
        let v_freq = dft(&v_time)?;
        Ok(Self { tag, v_freq, v_time, config })
    }

    pub fn tag(&self) -> AttackTag {
        self.tag
    }

    pub fn v_freq(&self) -> &Spectrum {
        &self.v_freq
    }

    pub fn v_time(&self) -> &TimeSeries {
        &self.v_time
    }

    pub fn config(&self) -> &serde_json::Value {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.v_time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_time.is_empty()
    }

    /// Largest imaginary part of `idft(v_freq)`.
    pub fn imaginary_residue(&self) -> Result<f64> {
        Ok(idft(&self.v_freq)?.iter().fold(0.0f64, |m, c| m.max(c.im.abs())))
    }

    /// The looped attack read from `t` seconds onwards.
    pub fn shifted(&self, t: f64) -> Result<TimeSeries> {
        idft_real(&crate::signal::cyclic_time_shift(&self.v_freq, t)?)
    }

    /// Fraction of spectral power at frequencies above `cutoff_hz`.
    pub fn power_fraction_above(&self, cutoff_hz: f64) -> f64 {
        let mut above = 0.0;
        let mut total = 0.0;
        for (k, c) in self.v_freq.coefficients().iter().enumerate() {
            let p = c.norm_sqr();
            total += p;
            if self.v_freq.bin_frequency(k).abs() > cutoff_hz {
                above += p;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            above / total
        }
    }
}

const MAGIC: &[u8; 8] = b"UFAATK01";
const VERSION: u32 = 1;

/// JSON header of the attack file; the payload is `length` interleaved
/// little-endian f64 (re, im) pairs of `v_freq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackHeader {
    pub version: u32,
    pub tag: AttackTag,
    pub length: usize,
    pub sample_rate: f64,
    pub config: serde_json::Value,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

pub fn save_attack(attack: &AttackVector, path: &Path, meta: BTreeMap<String, String>) -> Result<()> {
    let header = AttackHeader {
        version: VERSION,
        tag: attack.tag,
        length: attack.len(),
        sample_rate: attack.v_time.sample_rate(),
        config: attack.config.clone(),
        meta,
    };
    let mut payload = Vec::with_capacity(16 * attack.len());
    f64s_to_le(attack.v_freq.coefficients().iter().flat_map(|c| [c.re, c.im]), &mut payload);
    write_framed(path, MAGIC, &header, &payload)
}

pub fn load_attack(path: &Path) -> Result<(AttackVector, AttackHeader)> {
    let (header, payload): (AttackHeader, _) = read_framed(path, MAGIC)?;
    if header.version != VERSION {
        return Err(Error::format("version", format!("expected {VERSION}, found {}", header.version)));
    }
    if payload.len() != 16 * header.length {
        return Err(Error::format("v_freq", format!("expected {} bytes, found {}", 16 * header.length, payload.len())));
    }
    let values = le_to_f64s(&payload);
    let coeffs = values.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect();
    let spectrum = Spectrum::new(coeffs, header.sample_rate, true)?;
    let attack = AttackVector::from_spectrum(header.tag, spectrum, header.config.clone())?;
    Ok((attack, header))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_names_round_trip() {
        for t in AttackTag::ALL {
            assert_eq!(t.as_str().parse::<AttackTag>().unwrap(), t);
        }
        assert_eq!("fft_no_spectrum".parse::<AttackTag>().unwrap(), AttackTag::FftNoSpectrumLoss);
        assert!("pgd".parse::<AttackTag>().is_err());
    }

    #[test]
    fn file_round_trip() {
        let v = TimeSeries::new((0..32).map(|i| (i as f64 * 0.37).sin()).collect(), 100.0).unwrap();
        let a = AttackVector::from_time(AttackTag::Uap, v, serde_json::json!({"epochs": 2})).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("uap.atk");
        save_attack(&a, &p, BTreeMap::new()).unwrap();
        let (back, header) = load_attack(&p).unwrap();
        assert_eq!(header.tag, AttackTag::Uap);
        assert_eq!(header.config["epochs"], 2);
        for (x, y) in back.v_time().samples().iter().zip(a.v_time().samples()) {
            assert!((x - y).abs() < 1e-12);
        }
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(load_attack(&p).unwrap_err().to_string().contains("v_freq"));
    }

    #[test]
    fn power_fraction() {
        let n = 64;
        let fs = 64.0;
        let v = TimeSeries::new((0..n).map(|t| (2.0 * std::f64::consts::PI * 5.0 * t as f64 / fs).cos() + (2.0 * std::f64::consts::PI * 20.0 * t as f64 / fs).cos()).collect(), fs).unwrap();
        let a = AttackVector::from_time(AttackTag::Noise, v, serde_json::Value::Null).unwrap();
        assert!((a.power_fraction_above(10.0) - 0.5).abs() < 1e-12);
        assert!(a.power_fraction_above(30.0) < 1e-12);
    }
}

#[cfg(test)]
mod fourier_tests;
