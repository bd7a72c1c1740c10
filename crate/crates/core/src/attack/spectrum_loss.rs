//! Spectrum-matching penalties on `|DFT(x + v)|` against a cap multiple of
//! `|DFT(x)|`, on a linear scale (phase 1) or a decibel scale (phase 2).

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{dft, Complex, TimeSeries};

/// Reference bins below this magnitude are excluded from the dB penalty.
pub const PHASE2_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumPhase {
    Linear,
    Decibel,
}

/// Loss and per-bin weights `w_k = phi'(|Z_k|) / |Z_k|`, where the loss is
/// `sum_k phi(|Z_k|)`. The time-domain gradient is `T Re(idft(w * Z))`.
pub(crate) fn loss_and_weights(reference: &[f64], z: &[Complex], cap: f64, phase: SpectrumPhase) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let weights = reference
        .iter()
        .zip(z)
        .map(|(&a, zk)| {
            let m = zk.norm();
            let limit = cap * a;
            match phase {
                SpectrumPhase::Linear => {
                    if m > limit {
                        loss += m - limit;
                        1.0 / m
                    } else {
                        0.0
                    }
                }
                SpectrumPhase::Decibel => {
                    if a < PHASE2_EPS || m <= limit {
                        0.0
                    } else {
                        loss += 20.0 * (m / limit).log10();
                        20.0 / (LN_10 * m * m)
                    }
                }
            }
        })
        .collect();
    (loss, weights)
}

fn magnitudes(x: &TimeSeries, xv: &TimeSeries) -> Result<(Vec<f64>, Vec<Complex>)> {
    if x.len() != xv.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: xv.len() });
    }
    let reference = dft(x)?.coefficients().iter().map(|c| c.norm()).collect();
    Ok((reference, dft(xv)?.into_coefficients()))
}

fn check_cap(cap: f64) -> Result<()> {
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::invalid("cap", format!("{cap} must be positive")));
    }
    Ok(())
}

/// `sum_k ReLU(|DFT(xv)[k]| - cap |DFT(x)[k]|)`.
pub fn spectrum_loss_phase1(x: &TimeSeries, xv: &TimeSeries, cap: f64) -> Result<f64> {
    check_cap(cap)?;
    let (a, z) = magnitudes(x, xv)?;
    Ok(loss_and_weights(&a, &z, cap, SpectrumPhase::Linear).0)
}

/// `sum_k ReLU(20 log10(|DFT(xv)[k]| / (cap |DFT(x)[k]|)))` over bins with
/// `|DFT(x)[k]| >= 1e-12`.
pub fn spectrum_loss_phase2(x: &TimeSeries, xv: &TimeSeries, cap: f64) -> Result<f64> {
    check_cap(cap)?;
    let (a, z) = magnitudes(x, xv)?;
    Ok(loss_and_weights(&a, &z, cap, SpectrumPhase::Decibel).0)
}
