//! Universal, time-invariant, frequency-constrained adversarial attacks on
//! time-series classifiers, plus the evaluation battery used to measure them.
//!
//! The crate is organised bottom-up:
//!
//! - [`signal`]: Fourier transforms, phase-rotation time shifts, power/SNR
//!   arithmetic, FIR low-pass filtering, STFT and the defense transforms.
//! - [`data`]: synthetic multi-tone datasets, PCM WAV ingestion, splits and
//!   the binary dataset cache.
//! - [`nn`]: a small spectrogram CNN with exact reverse-mode gradients.
//! - [`attack`]: the universal Fourier attack and the FGSM / UAP / noise
//!   baselines.
//! - [`eval`]: ASR, SNR sweeps, time-shift sweeps, the filtering protocol,
//!   transform-and-compare detection with ROC/AUC, and CER.
//! - [`experiment`]: config-driven orchestration shared by the CLI and the
//!   acceptance suite.

pub mod attack;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod nn;
pub mod rng;
pub mod signal;

pub use attack::{AttackTag, AttackVector, FourierAttackConfig};
pub use data::{Dataset, LabeledSignal, SplitTag, SynthConfig};
pub use error::{Error, Result};
pub use eval::{DistancePair, EvalReport};
pub use nn::{Architecture, AugmentConfig, Classifier, TrainConfig, TrainLog};
pub use signal::{Spectrogram, Spectrum, TimeSeries};
