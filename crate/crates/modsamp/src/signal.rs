//! Bandlimited sinc-series test signals and dense-grid surrogates for
//! continuous-time waveforms.
//!
//! A [`BandlimitedSignal`] is a finite series `x(t) = sum_i a_i sinc(t/T - i)`
//! with `i = 1..=n`, where `sinc(u) = sin(pi u) / (pi u)` and `T` is the
//! Nyquist period. Its continuous-time bandwidth is exactly `[-pi/T, pi/T]`
//! by construction. A [`DenseWaveform`] is a uniformly sampled high-resolution
//! stand-in for a continuous-time signal; the analog-chain operations treat it
//! as the ground truth "analog" waveform.

use std::f64::consts::PI;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fft::{self, EdgeRule};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dense grid capacity overflow: {n_samples} samples x {refine} refine")]
    CapacityOverflow { n_samples: usize, refine: usize },
    #[error("empty input")]
    Empty,
    #[error("cutoff {cutoff:.6e} rad/s exceeds grid Nyquist {nyquist:.6e} rad/s")]
    CutoffAboveNyquist { cutoff: f64, nyquist: f64 },
}

/// Normalized sinc, `sin(pi u) / (pi u)` with `sinc(0) = 1`.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-6 {
        sinc_near_zero(u)
    } else {
        (PI * u).sin() / (PI * u)
    }
}

/// Series expansion of sinc around zero; exact at `u = 0`.
fn sinc_near_zero(u: f64) -> f64 {
    let z = PI * u;
    let z2 = z * z;
    1.0 - z2 / 6.0 + z2 * z2 / 120.0
}

/// Finite sinc-series model of a bandlimited analog input.
#[derive(Debug, Clone, PartialEq)]
pub struct BandlimitedSignal {
    coeffs: Vec<f64>,
    nyquist_period: f64,
    duration: f64,
}

impl BandlimitedSignal {
    /// Build a signal from explicit series coefficients. The `i`-th
    /// coefficient weights the sinc centered at `(i + 1) * nyquist_period`.
    pub fn new(
        coeffs: Vec<f64>,
        nyquist_period: f64,
        duration: f64,
    ) -> Result<Self, SignalError> {
        if coeffs.is_empty() {
            return Err(SignalError::InvalidParameter(
                "signal needs at least one coefficient".into(),
            ));
        }
        if !coeffs.iter().all(|a| a.is_finite()) {
            return Err(SignalError::InvalidParameter(
                "signal coefficients must be finite".into(),
            ));
        }
        if !nyquist_period.is_finite() || nyquist_period <= 0.0 {
            return Err(SignalError::InvalidParameter(format!(
                "nyquist period must be positive, got {nyquist_period}"
            )));
        }
        if !duration.is_finite() || duration <= 0.0 {
            return Err(SignalError::InvalidParameter(format!(
                "duration must be positive, got {duration}"
            )));
        }
        Ok(Self {
            coeffs,
            nyquist_period,
            duration,
        })
    }

    /// Draw `n_terms` coefficients i.i.d. uniform on `[amp_low, amp_high]`
    /// from a deterministic generator; the same seed reproduces the signal
    /// bit for bit. The duration defaults to `(n_terms + 2) * nyquist_period`,
    /// covering every sinc center plus a one-period margin on each side.
    pub fn random(
        n_terms: usize,
        nyquist_period: f64,
        amp_low: f64,
        amp_high: f64,
        seed: u64,
    ) -> Result<Self, SignalError> {
        if n_terms == 0 {
            return Err(SignalError::InvalidParameter(
                "n_terms must be at least 1".into(),
            ));
        }
        if amp_low.partial_cmp(&amp_high) != Some(std::cmp::Ordering::Less) {
            return Err(SignalError::InvalidParameter(format!(
                "amplitude bounds must satisfy low < high, got [{amp_low}, {amp_high}]"
            )));
        }
        if nyquist_period.is_nan() || nyquist_period <= 0.0 {
            return Err(SignalError::InvalidParameter(format!(
                "nyquist period must be positive, got {nyquist_period}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(amp_low, amp_high);
        let coeffs: Vec<f64> = (0..n_terms).map(|_| dist.sample(&mut rng)).collect();
        let duration = (n_terms as f64 + 2.0) * nyquist_period;
        Self::new(coeffs, nyquist_period, duration)
    }

    /// Replace the evaluation window length.
    pub fn with_duration(mut self, duration: f64) -> Result<Self, SignalError> {
        if !duration.is_finite() || duration <= 0.0 {
            return Err(SignalError::InvalidParameter(format!(
                "duration must be positive, got {duration}"
            )));
        }
        self.duration = duration;
        Ok(self)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn n_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn nyquist_period(&self) -> f64 {
        self.nyquist_period
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Exact series value at time `t` (seconds). Linear in the coefficients.
    ///
    /// All terms share the phase `sin(pi t/T)` up to sign, so the series is
    /// evaluated with a single sine call: `sinc(u - i) = (-1)^i sin(pi u) /
    /// (pi (u - i))` with `u = t/T`, falling back to the series expansion
    /// when `u` is within 1e-6 of a center.
    pub fn evaluate(&self, t: f64) -> f64 {
        let u = t / self.nyquist_period;
        let sp = (PI * u).sin();
        let mut acc = 0.0;
        for (idx, &a) in self.coeffs.iter().enumerate() {
            let i = idx + 1;
            let w = u - i as f64;
            if w.abs() < 1e-6 {
                acc += a * sinc_near_zero(w);
            } else {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                acc += a * sign * sp / (PI * w);
            }
        }
        acc
    }

    /// Evaluate on a refined uniform grid: `values[k] = evaluate(t0 + k * dp)`
    /// with `dp = sample_period / refine`, for `n_samples * refine` points.
    ///
    /// Grid times are formed as `t0 + n*sample_period + r*dp` with
    /// `k = n*refine + r`, so every `refine`-th point lands exactly on the
    /// sample instants of a `refine = 1` rendering.
    pub fn render_dense(
        &self,
        sample_period: f64,
        refine: usize,
        t0: f64,
        n_samples: usize,
    ) -> Result<DenseWaveform, SignalError> {
        if refine == 0 {
            return Err(SignalError::InvalidParameter("refine must be >= 1".into()));
        }
        if n_samples < 2 {
            return Err(SignalError::InvalidParameter(
                "n_samples must be >= 2".into(),
            ));
        }
        if sample_period.is_nan() || sample_period <= 0.0 {
            return Err(SignalError::InvalidParameter(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        let total = n_samples
            .checked_mul(refine)
            .filter(|&t| t <= (isize::MAX as usize) / std::mem::size_of::<f64>())
            .ok_or(SignalError::CapacityOverflow { n_samples, refine })?;
        let dp = sample_period / refine as f64;
        let mut values = Vec::with_capacity(total);
        for n in 0..n_samples {
            let base = t0 + n as f64 * sample_period;
            for r in 0..refine {
                values.push(self.evaluate(base + r as f64 * dp));
            }
        }
        DenseWaveform::new(values, dp, t0)
    }
}

/// Uniformly sampled high-resolution surrogate for a continuous-time signal.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseWaveform {
    values: Vec<f64>,
    dense_period: f64,
    t0: f64,
}

impl DenseWaveform {
    pub fn new(values: Vec<f64>, dense_period: f64, t0: f64) -> Result<Self, SignalError> {
        if values.len() < 2 {
            return Err(SignalError::InvalidParameter(
                "dense waveform needs at least 2 samples".into(),
            ));
        }
        if !dense_period.is_finite() || dense_period <= 0.0 {
            return Err(SignalError::InvalidParameter(format!(
                "dense period must be positive, got {dense_period}"
            )));
        }
        Ok(Self {
            values,
            dense_period,
            t0,
        })
    }

    pub(crate) fn from_parts(values: Vec<f64>, dense_period: f64, t0: f64) -> Self {
        Self {
            values,
            dense_period,
            t0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dense_period(&self) -> f64 {
        self.dense_period
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dense_period
    }

    /// Largest absolute value on the grid. This is a grid approximation of
    /// the true sup-norm of the underlying continuous signal.
    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }
}

/// Uniformly sampled sequence at the converter rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSequence {
    values: Vec<f64>,
    period: f64,
    t0: f64,
}

impl SampleSequence {
    pub fn new(values: Vec<f64>, period: f64, t0: f64) -> Result<Self, SignalError> {
        if values.is_empty() {
            return Err(SignalError::Empty);
        }
        if !period.is_finite() || period <= 0.0 {
            return Err(SignalError::InvalidParameter(format!(
                "sample period must be positive, got {period}"
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(SignalError::InvalidParameter(
                "sample values must be finite".into(),
            ));
        }
        Ok(Self { values, period, t0 })
    }

    pub(crate) fn from_parts(values: Vec<f64>, period: f64, t0: f64) -> Self {
        Self { values, period, t0 }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn time_at(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.period
    }

    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }
}

/// Discrete-transform brick-wall low-pass on the dense grid: bins with
/// `|w| > cutoff` are zeroed, bins with `|w| <= cutoff` pass untouched.
///
/// The transform implies periodic extension of the waveform, so non-periodic
/// inputs leak near the window edges; error metrics in this crate are taken
/// on a guarded interior for that reason. Linear, and idempotent since the
/// kept bin set depends only on the grid and cutoff.
pub fn ideal_lowpass(w: &DenseWaveform, cutoff: f64) -> Result<DenseWaveform, SignalError> {
    let filtered = lowpass_values(w.values(), w.dense_period(), cutoff)?;
    Ok(DenseWaveform::from_parts(
        filtered,
        w.dense_period(),
        w.t0(),
    ))
}

/// Brick-wall low-pass of a sample sequence via its discrete transform.
pub fn digital_lowpass(s: &SampleSequence, cutoff: f64) -> Result<SampleSequence, SignalError> {
    let filtered = lowpass_values(s.values(), s.period(), cutoff)?;
    Ok(SampleSequence::from_parts(filtered, s.period(), s.t0()))
}

fn lowpass_values(values: &[f64], dt: f64, cutoff: f64) -> Result<Vec<f64>, SignalError> {
    if cutoff.is_nan() || cutoff <= 0.0 {
        return Err(SignalError::InvalidParameter(format!(
            "cutoff must be positive, got {cutoff}"
        )));
    }
    let nyquist = PI / dt;
    if cutoff > nyquist * (1.0 + fft::CUTOFF_REL_TOL) {
        return Err(SignalError::CutoffAboveNyquist { cutoff, nyquist });
    }
    Ok(fft::brickwall(values, dt, cutoff, EdgeRule::FullGain))
}
