//! Thin wrappers around `rustfft` for manipulating real-valued spectra.

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_forward(buf: &mut [Complex<f64>]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

pub(crate) fn fft_inverse(buf: &mut [Complex<f64>]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
}

/// Forward DFT of a real sequence.
pub(crate) fn spectrum_of(values: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    buf
}

/// Unnormalized inverse DFT; returns the real part divided by the length.
pub(crate) fn real_inverse(mut spec: Vec<Complex<f64>>) -> Vec<f64> {
    fft_inverse(&mut spec);
    let n = spec.len() as f64;
    spec.into_iter().map(|c| c.re / n).collect()
}

/// |angular frequency| in rad/s of DFT bin `j` for a length-`len` grid with
/// sample spacing `dt`.
pub(crate) fn bin_freq(j: usize, len: usize, dt: f64) -> f64 {
    let half = len / 2;
    let k = if j <= half {
        j as f64
    } else {
        len as f64 - j as f64
    };
    2.0 * std::f64::consts::PI * k / (len as f64 * dt)
}

/// Relative tolerance used when comparing a bin frequency against a cutoff.
pub(crate) const CUTOFF_REL_TOL: f64 = 1e-9;

/// Gain applied to spectral bins that sit exactly at the cutoff frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EdgeRule {
    /// Pass bins at the cutoff untouched.
    FullGain,
    /// Scale bins at the cutoff by one half. This is the convention under
    /// which mix-with-comb followed by the filter reproduces pointwise
    /// decimation exactly; the acquisition channels use it internally.
    HalfGain,
}

/// Zero every bin strictly above `cutoff`, applying `edge` to bins that land
/// on the cutoff itself (within [`CUTOFF_REL_TOL`] relative).
pub(crate) fn brickwall(values: &[f64], dt: f64, cutoff: f64, edge: EdgeRule) -> Vec<f64> {
    let n = values.len();
    let mut spec = spectrum_of(values);
    for (j, bin) in spec.iter_mut().enumerate() {
        let w = bin_freq(j, n, dt);
        if w > cutoff * (1.0 + CUTOFF_REL_TOL) {
            *bin = Complex::new(0.0, 0.0);
        } else if edge == EdgeRule::HalfGain && (w - cutoff).abs() <= cutoff * CUTOFF_REL_TOL {
            *bin *= 0.5;
        }
    }
    real_inverse(spec)
}
