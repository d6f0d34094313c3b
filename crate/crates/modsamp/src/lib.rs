//! Simulation, measurement, and recovery toolkit for modulo sampling with
//! bandwidth-limited ADCs.
//!
//! The acquisition model folds a bandlimited input into a fixed dynamic range
//! `[-lambda, lambda)`, mixes the folded wave with a sampling-rate comb, and
//! low-pass filters it so that a converter limited to the sampling band sees
//! a signal it can actually track. The crate provides:
//!
//! - [`signal`]: sinc-series test signals, dense-grid surrogates for
//!   continuous-time waveforms, and brick-wall filtering.
//! - [`chain`]: the analog front end (modulo folding, comb generation,
//!   mixing, filtering) and the four acquisition channel variants.
//! - [`adc`]: mid-tread quantization and the fold-indicator word format.
//! - [`recovery`]: difference-rounding unwrapping, delay alignment, and
//!   bandlimited reconstruction.
//! - [`metrics`]: theoretical and empirical error decompositions.
//! - [`experiments`]: Monte-Carlo sweeps, capture-file I/O, and the CLI.
//!
//! # Example
//!
//! Fold a ramp that runs far beyond the converter range into
//! `[-1, 1)`, then recover it from the folded samples alone:
//!
//! ```
//! use modsamp::chain::{modulo_fold, ModuloSpec};
//! use modsamp::recovery::{unwrap, RecoveryConfig, UnwrapMode};
//! use modsamp::signal::SampleSequence;
//!
//! let spec = ModuloSpec::new(1.0).unwrap();
//! let truth: Vec<f64> = (0..40).map(|n| 0.3 * n as f64).collect();
//! let folded: Vec<f64> = truth.iter().map(|&x| modulo_fold(x, &spec)).collect();
//! assert!(folded.iter().all(|v| (-1.0..1.0).contains(v)));
//!
//! let folded = SampleSequence::new(folded, 1e-3, 0.0).unwrap();
//! let cfg = RecoveryConfig::new(1.0, UnwrapMode::Itoh).unwrap();
//! let recovered = unwrap(&folded, None, &cfg).unwrap();
//! for (got, want) in recovered.samples.values().iter().zip(&truth) {
//!     assert!((got - want).abs() < 1e-9);
//! }
//! ```

pub mod adc;
pub mod chain;
pub mod experiments;
mod fft;
pub mod metrics;
pub mod recovery;
pub mod signal;
