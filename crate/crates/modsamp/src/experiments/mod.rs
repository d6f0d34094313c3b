//! Experiment harness: Monte-Carlo error sweeps over bit depths and
//! oversampling factors, single-trial waveform dumps, capture-file
//! ingestion and recovery, and the command-line interface.
//!
//! Sweeps are deterministic: trial `i` draws its signal from `seed + i`,
//! trials run in parallel, and rows are assembled in trial order, so
//! repeated runs with one configuration produce byte-identical output
//! files.

pub mod capture;
pub mod cli;
pub mod csvio;

use rayon::prelude::*;
use thiserror::Error;

use crate::adc::{quantize, AdcError, QuantizerSpec};
use crate::chain::{
    check_dense_step, comb_channel_samples, decimate, fold_waveform, ChainError, CombSpec,
    ModuloSpec,
};
use crate::fft::{self, EdgeRule};
use crate::metrics::{
    classical_mse_theory, filtered_residual_mse, lambda_rule, mod_hf_mse, modulo_q_mse_theory,
    ErrorBreakdown, MetricsError,
};
use crate::recovery::{unwrap, RecoveryConfig, RecoveryError, UnwrapMode};
use crate::signal::{BandlimitedSignal, DenseWaveform, SampleSequence, SignalError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit status for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Format { .. } => 2,
            _ => 1,
        }
    }
}

impl From<SignalError> for ExperimentError {
    fn from(e: SignalError) -> Self {
        ExperimentError::Parameter(e.to_string())
    }
}

impl From<ChainError> for ExperimentError {
    fn from(e: ChainError) -> Self {
        ExperimentError::Parameter(e.to_string())
    }
}

impl From<AdcError> for ExperimentError {
    fn from(e: AdcError) -> Self {
        ExperimentError::Parameter(e.to_string())
    }
}

impl From<RecoveryError> for ExperimentError {
    fn from(e: RecoveryError) -> Self {
        ExperimentError::Parameter(e.to_string())
    }
}

impl From<MetricsError> for ExperimentError {
    fn from(e: MetricsError) -> Self {
        ExperimentError::Parameter(e.to_string())
    }
}

/// Monte-Carlo sweep configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trials: u32,
    pub bits_list: Vec<u32>,
    pub of_list: Vec<f64>,
    pub comb_n: Option<u32>,
    pub n_terms: usize,
    pub nyquist_period: f64,
    pub amp_low: f64,
    pub amp_high: f64,
    pub seed: u64,
    pub refine: usize,
    pub guard: f64,
    pub extra_bit: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            bits_list: vec![6, 8],
            of_list: vec![4.0, 5.0, 6.0, 8.0, 10.0, 16.0, 32.0],
            comb_n: None,
            n_terms: 98,
            nyquist_period: 1e-4,
            amp_low: -0.5,
            amp_high: 0.5,
            seed: 1,
            refine: 64,
            guard: 0.1,
            extra_bit: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials < 1 {
            return Err(ExperimentError::Parameter("trials must be >= 1".into()));
        }
        if self.bits_list.is_empty() || self.of_list.is_empty() {
            return Err(ExperimentError::Parameter(
                "bits and oversampling lists must be non-empty".into(),
            ));
        }
        let min_bits = if self.extra_bit { 2 } else { 1 };
        if let Some(&b) = self.bits_list.iter().find(|&&b| b < min_bits || b > 24) {
            return Err(ExperimentError::Parameter(format!(
                "bits must be in {min_bits}..=24, got {b}"
            )));
        }
        if let Some(&of) = self.of_list.iter().find(|&&of| !of.is_finite() || of <= 2.0) {
            return Err(ExperimentError::Parameter(format!(
                "oversampling factors must exceed 2 for the fold threshold rule, got {of}"
            )));
        }
        if self.n_terms == 0 {
            return Err(ExperimentError::Parameter("n_terms must be >= 1".into()));
        }
        if !self.nyquist_period.is_finite() || self.nyquist_period <= 0.0 {
            return Err(ExperimentError::Parameter(format!(
                "nyquist period must be positive, got {}",
                self.nyquist_period
            )));
        }
        if self.amp_low.partial_cmp(&self.amp_high) != Some(std::cmp::Ordering::Less) {
            return Err(ExperimentError::Parameter(format!(
                "amplitude range must satisfy low < high, got [{}, {}]",
                self.amp_low, self.amp_high
            )));
        }
        if self.refine == 0 {
            return Err(ExperimentError::Parameter("refine must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.guard) {
            return Err(ExperimentError::Parameter(format!(
                "guard fraction must be in [0, 0.5), got {}",
                self.guard
            )));
        }
        Ok(())
    }
}

/// One sweep row: a trial's error decomposition at one (bits, of) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub trial: u32,
    pub breakdown: ErrorBreakdown,
}

/// All unquantized channel outputs for one (trial, oversampling) pair.
pub struct TrialChannels {
    pub truth: SampleSequence,
    pub ideal: SampleSequence,
    /// Band-limited modulo channel: comb-mixed when harmonics are
    /// configured, plain filter-then-sample otherwise.
    pub live: SampleSequence,
    pub fold_flags: Vec<bool>,
    pub lambda: f64,
    pub inf_norm: f64,
}

/// Run the acquisition channels once for a signal at one sampling rate.
pub fn run_trial_channels(
    signal: &BandlimitedSignal,
    of: f64,
    refine: usize,
    comb_n: Option<u32>,
) -> Result<TrialChannels, ExperimentError> {
    let ts = signal.nyquist_period() / of;
    let n_samples = (signal.duration() / ts).round() as usize;
    if n_samples < 10 {
        return Err(ExperimentError::Parameter(format!(
            "signal too short: {n_samples} samples at oversampling {of}"
        )));
    }
    let dense = signal.render_dense(ts, refine, 0.0, n_samples)?;
    let inf_norm = dense.inf_norm();
    let choice = lambda_rule(inf_norm, of)?;
    if choice.degenerate {
        return Err(ExperimentError::Parameter(
            "signal peak is zero; the fold threshold rule degenerates".into(),
        ));
    }
    let spec = ModuloSpec::new(choice.lambda)?;
    check_dense_step(&dense, &spec)?;
    let (folded, trace) = fold_waveform(&dense, &spec);
    let fold_flags = trace.at_sample_rate(refine);
    let truth = decimate(&dense, refine, ts);
    let ideal = decimate(&folded, refine, ts);
    let comb = CombSpec::new(comb_n.unwrap_or(0), ts)?;
    let live = comb_channel_samples(&folded, n_samples, refine, &comb, ts)?;
    Ok(TrialChannels {
        truth,
        ideal,
        live,
        fold_flags,
        lambda: choice.lambda,
        inf_norm,
    })
}

fn quantize_values(s: &SampleSequence, spec: &QuantizerSpec) -> SampleSequence {
    let values: Vec<f64> = s.values().iter().map(|&v| quantize(v, spec).value).collect();
    SampleSequence::from_parts(values, s.period(), s.t0())
}

/// Quantize, recover, and score one bit depth against the channel outputs.
pub fn breakdown_for_bits(
    channels: &TrialChannels,
    bits: u32,
    extra_bit: bool,
    guard: f64,
    nyquist_period: f64,
    of: f64,
    comb_n: Option<u32>,
) -> Result<ErrorBreakdown, ExperimentError> {
    let cutoff = std::f64::consts::PI / nyquist_period;
    let lambda = channels.lambda;

    // Classical sampling spends every bit on the full signal range.
    let classical_spec = QuantizerSpec::new(bits, channels.inf_norm)?;
    let classical_q = quantize_values(&channels.truth, &classical_spec);
    let e_classical_live =
        filtered_residual_mse(&classical_q, &channels.truth, None, cutoff, guard)?;

    // Modulo channels spend one bit on the fold indicator.
    let amp_bits = if extra_bit { bits - 1 } else { bits };
    let modulo_spec = QuantizerSpec::new(amp_bits, lambda)?;
    let mode = if extra_bit {
        UnwrapMode::ExtraBitGated
    } else {
        UnwrapMode::Itoh
    };
    let rec_cfg = RecoveryConfig::new(lambda, mode)?;
    let flags = extra_bit.then_some(channels.fold_flags.as_slice());

    let mut warnings = 0u32;
    let mut recover_mse = |samples: &SampleSequence| -> Result<f64, ExperimentError> {
        let q = quantize_values(samples, &modulo_spec);
        let unwrapped = unwrap(&q, flags, &rec_cfg)?;
        warnings += unwrapped.clamped_steps as u32;
        Ok(filtered_residual_mse(
            &unwrapped.samples,
            &channels.truth,
            Some(lambda),
            cutoff,
            guard,
        )?)
    };
    let e_mod_live = recover_mse(&channels.live)?;
    let e_mod_ideal_sampler = recover_mse(&channels.ideal)?;

    Ok(ErrorBreakdown {
        of,
        bits,
        comb_n,
        e_classical_theory: classical_mse_theory(channels.inf_norm, bits, of),
        e_classical_live,
        e_mod_q_theory: modulo_q_mse_theory(channels.inf_norm, amp_bits, of)?,
        e_mod_hf: mod_hf_mse(&channels.live, &channels.ideal, guard)?,
        e_mod_live,
        e_mod_ideal_sampler,
        recovery_warnings: warnings,
    })
}

fn run_trial(cfg: &ExperimentConfig, trial: u32) -> Result<Vec<SweepRow>, ExperimentError> {
    let signal = BandlimitedSignal::random(
        cfg.n_terms,
        cfg.nyquist_period,
        cfg.amp_low,
        cfg.amp_high,
        cfg.seed.wrapping_add(trial as u64),
    )?;
    let mut rows = Vec::with_capacity(cfg.of_list.len() * cfg.bits_list.len());
    for &of in &cfg.of_list {
        let channels = run_trial_channels(&signal, of, cfg.refine, cfg.comb_n)?;
        for &bits in &cfg.bits_list {
            let breakdown = breakdown_for_bits(
                &channels,
                bits,
                cfg.extra_bit,
                cfg.guard,
                cfg.nyquist_period,
                of,
                cfg.comb_n,
            )?;
            rows.push(SweepRow { trial, breakdown });
        }
    }
    Ok(rows)
}

/// Run the full Monte-Carlo sweep. Trials execute in parallel; the returned
/// rows are ordered by (trial, of, bits) regardless of scheduling.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    cfg.validate()?;
    let per_trial: Result<Vec<Vec<SweepRow>>, ExperimentError> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_trial(cfg, trial))
        .collect();
    Ok(per_trial?.into_iter().flatten().collect())
}

/// Ensemble mean and standard error per (bits, of) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub bits: u32,
    pub of: f64,
    pub comb_n: Option<u32>,
    pub trials: u32,
    pub mean: AggregateStats,
    pub se: AggregateStats,
    /// Trials that raised at least one recovery warning in this cell.
    pub warned_trials: u32,
}

/// The six error fields in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AggregateStats {
    pub e_classical_theory: f64,
    pub e_classical_live: f64,
    pub e_mod_q_theory: f64,
    pub e_mod_hf: f64,
    pub e_mod_live: f64,
    pub e_mod_ideal_sampler: f64,
}

impl AggregateStats {
    fn from_breakdown(b: &ErrorBreakdown) -> [f64; 6] {
        [
            b.e_classical_theory,
            b.e_classical_live,
            b.e_mod_q_theory,
            b.e_mod_hf,
            b.e_mod_live,
            b.e_mod_ideal_sampler,
        ]
    }

    fn from_array(a: [f64; 6]) -> Self {
        Self {
            e_classical_theory: a[0],
            e_classical_live: a[1],
            e_mod_q_theory: a[2],
            e_mod_hf: a[3],
            e_mod_live: a[4],
            e_mod_ideal_sampler: a[5],
        }
    }
}

/// Fold sweep rows into per-(bits, of) aggregates, sorted by bits then
/// oversampling factor.
pub fn aggregate(rows: &[SweepRow]) -> Vec<AggregateRow> {
    let mut cells: Vec<((u32, f64), Vec<&SweepRow>)> = Vec::new();
    for row in rows {
        let key = (row.breakdown.bits, row.breakdown.of);
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(row),
            None => cells.push((key, vec![row])),
        }
    }
    cells.sort_by(|a, b| {
        (a.0 .0, a.0 .1)
            .partial_cmp(&(b.0 .0, b.0 .1))
            .expect("finite keys")
    });
    cells
        .into_iter()
        .map(|((bits, of), group)| {
            let n = group.len() as f64;
            let mut mean = [0.0_f64; 6];
            for row in &group {
                for (m, v) in mean
                    .iter_mut()
                    .zip(AggregateStats::from_breakdown(&row.breakdown))
                {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= n;
            }
            let mut var = [0.0_f64; 6];
            if group.len() > 1 {
                for row in &group {
                    for ((s, v), m) in var
                        .iter_mut()
                        .zip(AggregateStats::from_breakdown(&row.breakdown))
                        .zip(mean)
                    {
                        *s += (v - m) * (v - m);
                    }
                }
                for s in &mut var {
                    *s = (*s / (n - 1.0) / n).sqrt();
                }
            }
            AggregateRow {
                bits,
                of,
                comb_n: group[0].breakdown.comb_n,
                trials: group.len() as u32,
                mean: AggregateStats::from_array(mean),
                se: AggregateStats::from_array(var),
                warned_trials: group
                    .iter()
                    .filter(|r| r.breakdown.recovery_warnings > 0)
                    .count() as u32,
            }
        })
        .collect()
}

/// Everything a single-trial inspection run produces: dense intermediate
/// waveforms of the comb acquisition pipeline plus all channel samples.
pub struct SimulateOutput {
    pub input: DenseWaveform,
    pub folded: DenseWaveform,
    pub comb: DenseWaveform,
    pub mixed: DenseWaveform,
    /// Mixer output after the sampling-band filter, scaled to the folded
    /// wave's amplitude; its samples coincide with the ideal fold samples
    /// up to comb truncation.
    pub post_lpf: DenseWaveform,
    pub classical: SampleSequence,
    pub ideal: SampleSequence,
    pub direct: SampleSequence,
    pub comb_samples: SampleSequence,
    pub fold_flags: Vec<bool>,
    pub lambda: f64,
    pub inf_norm: f64,
    pub breakdown: ErrorBreakdown,
}

/// Run one trial and keep every intermediate waveform of the comb pipeline.
/// Uses the first entries of the config's bits and oversampling lists.
pub fn simulate_trial(cfg: &ExperimentConfig, trial: u32) -> Result<SimulateOutput, ExperimentError> {
    cfg.validate()?;
    let of = cfg.of_list[0];
    let bits = cfg.bits_list[0];
    let harmonics = cfg.comb_n.unwrap_or(0);

    let signal = BandlimitedSignal::random(
        cfg.n_terms,
        cfg.nyquist_period,
        cfg.amp_low,
        cfg.amp_high,
        cfg.seed.wrapping_add(trial as u64),
    )?;
    let ts = signal.nyquist_period() / of;
    let n_samples = (signal.duration() / ts).round() as usize;
    let dense = signal.render_dense(ts, cfg.refine, 0.0, n_samples)?;
    let inf_norm = dense.inf_norm();
    let choice = lambda_rule(inf_norm, of)?;
    if choice.degenerate {
        return Err(ExperimentError::Parameter(
            "signal peak is zero; the fold threshold rule degenerates".into(),
        ));
    }
    let spec = ModuloSpec::new(choice.lambda)?;
    check_dense_step(&dense, &spec)?;
    let (folded, trace) = fold_waveform(&dense, &spec);
    let fold_flags = trace.at_sample_rate(cfg.refine);

    let comb_spec = CombSpec::new(harmonics, ts)?;
    let comb = crate::chain::comb_waveform(&comb_spec, &folded)?;
    let mixed = crate::chain::mix(&folded, &comb)?;
    let band = std::f64::consts::PI / ts;
    let filtered = fft::brickwall(mixed.values(), mixed.dense_period(), band, EdgeRule::HalfGain);
    let c0 = 2 * (harmonics as u64 / cfg.refine as u64) + 1;
    let post: Vec<f64> = filtered.iter().map(|&v| v / c0 as f64).collect();
    let post_lpf = DenseWaveform::new(post, mixed.dense_period(), mixed.t0())?;

    let channels = TrialChannels {
        truth: decimate(&dense, cfg.refine, ts),
        ideal: decimate(&folded, cfg.refine, ts),
        live: comb_channel_samples(&folded, n_samples, cfg.refine, &comb_spec, ts)?,
        fold_flags: fold_flags.clone(),
        lambda: choice.lambda,
        inf_norm,
    };
    let direct = comb_channel_samples(&folded, n_samples, cfg.refine, &CombSpec::new(0, ts)?, ts)?;
    let breakdown = breakdown_for_bits(
        &channels,
        bits,
        cfg.extra_bit,
        cfg.guard,
        cfg.nyquist_period,
        of,
        cfg.comb_n,
    )?;
    Ok(SimulateOutput {
        input: dense,
        folded,
        comb,
        mixed,
        post_lpf,
        classical: channels.truth,
        ideal: channels.ideal,
        direct,
        comb_samples: channels.live,
        fold_flags,
        lambda: choice.lambda,
        inf_norm,
        breakdown,
    })
}
