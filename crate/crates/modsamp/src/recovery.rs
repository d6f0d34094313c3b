//! Unfolding modulo samples back to the original signal: difference-rounding
//! unwrapping (optionally gated by the fold-indicator bit), integer delay
//! alignment, and bandlimited reconstruction.
//!
//! Unwrapping corrects each first difference by the multiple of `2 lambda`
//! that brings it into `[-lambda, lambda)` and accumulates. The correction
//! at a step is right exactly when the true signal moved by less than
//! `lambda` over that step; the gated mode additionally forces the
//! correction to zero wherever the fold indicator shows no fold, which makes
//! steps without folds exact regardless of their size.
//!
//! The absolute fold branch of the very first sample is unobservable from
//! folded data, so recovery is anchored at the first folded value and
//! results are compared modulo a global multiple of `2 lambda`.

use thiserror::Error;

use crate::signal::{digital_lowpass, SampleSequence, SignalError};

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("fold flags are required in gated mode")]
    MissingFlags,
    #[error("fold flags length {flags} does not match sample count {samples}")]
    FlagsLengthMismatch { flags: usize, samples: usize },
    #[error("post-filter cutoff is required for reconstruction")]
    MissingCutoff,
    #[error("sequences have different sample periods: {0:.6e} vs {1:.6e}")]
    PeriodMismatch(f64, f64),
    #[error("max lag {max_lag} too large for sequences of length {len}")]
    LagTooLarge { max_lag: usize, len: usize },
    #[error("alignment is degenerate: an input has no variance")]
    DegenerateAlignment,
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// How first differences are corrected during unwrapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnwrapMode {
    /// Round every first difference to the congruent value in
    /// `[-lambda, lambda)`.
    Itoh,
    /// As `Itoh`, but apply a correction only at samples whose fold
    /// indicator is set.
    ExtraBitGated,
}

/// Recovery parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryConfig {
    lambda: f64,
    mode: UnwrapMode,
    post_lpf_cutoff: Option<f64>,
    max_folds_per_step: u32,
}

impl RecoveryConfig {
    pub const DEFAULT_MAX_FOLDS_PER_STEP: u32 = 4;

    pub fn new(lambda: f64, mode: UnwrapMode) -> Result<Self, RecoveryError> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(RecoveryError::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            mode,
            post_lpf_cutoff: None,
            max_folds_per_step: Self::DEFAULT_MAX_FOLDS_PER_STEP,
        })
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Result<Self, RecoveryError> {
        if !cutoff.is_finite() || cutoff <= 0.0 {
            return Err(RecoveryError::InvalidParameter(format!(
                "cutoff must be positive, got {cutoff}"
            )));
        }
        self.post_lpf_cutoff = Some(cutoff);
        Ok(self)
    }

    pub fn with_max_folds_per_step(mut self, max: u32) -> Result<Self, RecoveryError> {
        if max == 0 {
            return Err(RecoveryError::InvalidParameter(
                "max folds per step must be at least 1".into(),
            ));
        }
        self.max_folds_per_step = max;
        Ok(self)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mode(&self) -> UnwrapMode {
        self.mode
    }

    pub fn post_lpf_cutoff(&self) -> Option<f64> {
        self.post_lpf_cutoff
    }

    pub fn max_folds_per_step(&self) -> u32 {
        self.max_folds_per_step
    }
}

/// Unwrapped sequence plus recovery bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Unwrapped {
    pub samples: SampleSequence,
    /// Steps whose fold correction hit the per-step clamp; a nonzero count
    /// flags inputs the bounded search cannot follow.
    pub clamped_steps: usize,
}

/// Cumulative unwrapping of folded samples.
///
/// The first sample passes through unchanged. Each difference
/// `d[n] = folded[n] - folded[n-1]` is corrected by `k * 2 lambda` with
/// `k = round(-d[n] / (2 lambda))`, clamped to the configured per-step
/// bound; in gated mode `k` is forced to zero when `flags[n]` is clear.
/// The output is the running sum of corrected differences on top of the
/// first sample.
pub fn unwrap(
    folded: &SampleSequence,
    flags: Option<&[bool]>,
    cfg: &RecoveryConfig,
) -> Result<Unwrapped, RecoveryError> {
    let gating = match (cfg.mode, flags) {
        (UnwrapMode::ExtraBitGated, None) => return Err(RecoveryError::MissingFlags),
        (UnwrapMode::ExtraBitGated, Some(f)) => {
            if f.len() != folded.len() {
                return Err(RecoveryError::FlagsLengthMismatch {
                    flags: f.len(),
                    samples: folded.len(),
                });
            }
            Some(f)
        }
        (UnwrapMode::Itoh, _) => None,
    };

    let two_lambda = 2.0 * cfg.lambda;
    let max_k = cfg.max_folds_per_step as i64;
    let values = folded.values();
    let mut out = Vec::with_capacity(values.len());
    let mut clamped = 0usize;
    // Accumulate the integer fold correction rather than the corrected
    // differences: out[n] = folded[n] + 2 lambda * sum(k), which keeps the
    // congruence with the folded samples exact and makes the no-correction
    // case the identity.
    let mut folds_total: i64 = 0;
    out.push(values[0]);
    for n in 1..values.len() {
        let d = values[n] - values[n - 1];
        let mut k = (-d / two_lambda).round() as i64;
        if let Some(f) = gating {
            if !f[n] {
                k = 0;
            }
        }
        if k.abs() > max_k {
            clamped += 1;
            k = k.clamp(-max_k, max_k);
        }
        folds_total += k;
        out.push(values[n] + two_lambda * folds_total as f64);
    }
    Ok(Unwrapped {
        samples: SampleSequence::from_parts(out, folded.period(), folded.t0()),
        clamped_steps: clamped,
    })
}

/// Result of aligning a candidate sequence against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Estimated integer delay of the candidate relative to the reference:
    /// `candidate[n] ~ reference[n - lag]`.
    pub lag: i64,
    /// Candidate shifted back by the lag and trimmed to the overlap.
    pub aligned: SampleSequence,
    /// Reference trimmed to the same overlap.
    pub reference: SampleSequence,
}

/// Estimate the integer delay maximizing zero-mean normalized
/// cross-correlation over `[-max_lag, max_lag]`, ties broken toward the
/// smaller |lag| (positive before negative).
pub fn align_delay(
    reference: &SampleSequence,
    candidate: &SampleSequence,
    max_lag: usize,
) -> Result<Alignment, RecoveryError> {
    let rel = (reference.period() - candidate.period()).abs() / reference.period();
    if rel > 1e-9 {
        return Err(RecoveryError::PeriodMismatch(
            reference.period(),
            candidate.period(),
        ));
    }
    let len = reference.len().min(candidate.len());
    if max_lag >= len / 2 {
        return Err(RecoveryError::LagTooLarge { max_lag, len });
    }
    let variance = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
    };
    if variance(reference.values()) <= 0.0 || variance(candidate.values()) <= 0.0 {
        return Err(RecoveryError::DegenerateAlignment);
    }

    let corr_at = |lag: i64| -> Option<f64> {
        let (cand, refer) = overlap(reference, candidate, lag, len);
        if cand.len() < 2 {
            return None;
        }
        let n = cand.len() as f64;
        let mc = cand.iter().sum::<f64>() / n;
        let mr = refer.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut vc = 0.0;
        let mut vr = 0.0;
        for (c, r) in cand.iter().zip(refer) {
            num += (c - mc) * (r - mr);
            vc += (c - mc) * (c - mc);
            vr += (r - mr) * (r - mr);
        }
        let denom = (vc * vr).sqrt();
        if denom <= 0.0 {
            None
        } else {
            Some(num / denom)
        }
    };

    // Visit lags in order of increasing |lag| and keep strict improvements,
    // so ties resolve to the smallest magnitude.
    let mut best: Option<(f64, i64)> = None;
    for mag in 0..=max_lag as i64 {
        for lag in if mag == 0 { vec![0] } else { vec![mag, -mag] } {
            if let Some(c) = corr_at(lag) {
                if best.is_none_or(|(bc, _)| c > bc) {
                    best = Some((c, lag));
                }
            }
        }
    }
    let (_, lag) = best.ok_or(RecoveryError::DegenerateAlignment)?;

    let (cand, refer) = overlap(reference, candidate, lag, len);
    let t0 = if lag >= 0 {
        reference.t0()
    } else {
        reference.t0() + (-lag) as f64 * reference.period()
    };
    Ok(Alignment {
        lag,
        aligned: SampleSequence::from_parts(cand.to_vec(), reference.period(), t0),
        reference: SampleSequence::from_parts(refer.to_vec(), reference.period(), t0),
    })
}

/// Overlapping windows for a given candidate lag:
/// `candidate[n + lag] <-> reference[n]`.
fn overlap<'a>(
    reference: &'a SampleSequence,
    candidate: &'a SampleSequence,
    lag: i64,
    len: usize,
) -> (&'a [f64], &'a [f64]) {
    // len = min of both lengths and |lag| < len/2, so the slices below are
    // always in bounds.
    let r = reference.values();
    let c = candidate.values();
    if lag >= 0 {
        let lag = lag as usize;
        let n = len - lag;
        (&c[lag..lag + n], &r[..n])
    } else {
        let lag = (-lag) as usize;
        let n = len - lag;
        (&c[..n], &r[lag..lag + n])
    }
}

/// Reconstruction output: the raw unwrapped sequence alongside its
/// band-limited version.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub raw: SampleSequence,
    pub filtered: SampleSequence,
}

/// Final reconstruction step: digital low-pass at the known maximum input
/// frequency. Requires the config to carry a cutoff.
pub fn reconstruct(
    unwrapped: &SampleSequence,
    cfg: &RecoveryConfig,
) -> Result<Reconstruction, RecoveryError> {
    let cutoff = cfg.post_lpf_cutoff.ok_or(RecoveryError::MissingCutoff)?;
    let filtered = digital_lowpass(unwrapped, cutoff)?;
    Ok(Reconstruction {
        raw: unwrapped.clone(),
        filtered,
    })
}
