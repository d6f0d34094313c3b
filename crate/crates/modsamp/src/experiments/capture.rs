//! Multi-channel capture files and the synthetic hardware-style fixture.
//!
//! A capture is a text file holding the words of up to four synchronized
//! converters: a `key=value` header (`bits`, `ts_seconds`, `lambda`,
//! `extra_bit`, `channels`) followed by one row of integer words per sample
//! instant. Word layout follows [`crate::adc::WordFormat`]: modulo-kind
//! channels span the fold range `[-lambda, lambda]` and, when the extra bit
//! is enabled, carry the fold flag in the LSB; the classical channel spans
//! [`CLASSICAL_RANGE_FACTOR`] times the fold threshold with all bits on
//! amplitude.
//!
//! The fixture builder reproduces a bench measurement in software: a
//! 1 kHz-band signal acquired by all four channels at 50 kHz with 7+1-bit
//! words, the fold threshold at a quarter of the signal peak, and a small
//! intentional delay on the modulo channels for the alignment stage to find.

use std::fs;
use std::path::Path;

use crate::adc::{quantize_sequence, SampleRecord, WordFormat};
use crate::chain::{
    check_dense_step, comb_channel_samples, decimate, fold_waveform, ChannelKind, CombSpec,
    ModuloSpec,
};
use crate::metrics::filtered_residual_mse;
use crate::recovery::{align_delay, reconstruct, unwrap, RecoveryConfig, UnwrapMode};
use crate::signal::{BandlimitedSignal, SampleSequence};

use super::ExperimentError;

/// Full-scale of the classical channel's converter, as a multiple of the
/// fold threshold. The fixture sets `lambda` to the signal peak divided by
/// this factor, so the classical converter exactly spans the input.
pub const CLASSICAL_RANGE_FACTOR: f64 = 4.0;

/// Parsed capture file.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureFile {
    pub bits: u32,
    pub sample_period: f64,
    pub lambda: f64,
    pub extra_bit: bool,
    pub channels: Vec<ChannelKind>,
    /// Words per channel, one inner vector per channel in header order.
    pub words: Vec<Vec<SampleRecord>>,
}

impl CaptureFile {
    /// Word format used by one channel of this capture.
    pub fn word_format(&self, kind: ChannelKind) -> Result<WordFormat, ExperimentError> {
        let fmt = if kind.is_modulo() {
            WordFormat::new(self.bits, self.extra_bit, self.lambda)
        } else {
            WordFormat::new(self.bits, false, CLASSICAL_RANGE_FACTOR * self.lambda)
        };
        fmt.map_err(Into::into)
    }

    pub fn n_samples(&self) -> usize {
        self.words.first().map(|w| w.len()).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.channels.is_empty() || self.channels.len() > 4 {
            return Err(ExperimentError::Parameter(format!(
                "capture must hold 1..=4 channels, got {}",
                self.channels.len()
            )));
        }
        if self.words.len() != self.channels.len() {
            return Err(ExperimentError::Parameter(
                "one word column per channel is required".into(),
            ));
        }
        let n = self.n_samples();
        if n == 0 || self.words.iter().any(|w| w.len() != n) {
            return Err(ExperimentError::Parameter(
                "channels must hold the same nonzero sample count".into(),
            ));
        }
        let limit = 1u32 << self.bits;
        if self
            .words
            .iter()
            .flatten()
            .any(|record| record.word >= limit)
        {
            return Err(ExperimentError::Parameter(format!(
                "words must be below 2^{}",
                self.bits
            )));
        }
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, line: usize, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Format {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

pub fn capture_to_string(c: &CaptureFile) -> String {
    let mut out = String::new();
    out.push_str(&format!("bits={}\n", c.bits));
    out.push_str(&format!("ts_seconds={:.16e}\n", c.sample_period));
    out.push_str(&format!("lambda={:.16e}\n", c.lambda));
    out.push_str(&format!("extra_bit={}\n", c.extra_bit));
    let kinds: Vec<&str> = c.channels.iter().map(|k| k.as_str()).collect();
    out.push_str(&format!("channels={}\n", kinds.join(",")));
    for n in 0..c.n_samples() {
        let row: Vec<String> = c.words.iter().map(|w| w[n].word.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_capture(c: &CaptureFile, path: &Path) -> Result<(), ExperimentError> {
    c.validate()?;
    fs::write(path, capture_to_string(c)).map_err(|e| io_err(path, e))
}

pub fn read_capture(path: &Path) -> Result<CaptureFile, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_capture(&text, path)
}

pub fn parse_capture(text: &str, path: &Path) -> Result<CaptureFile, ExperimentError> {
    let mut bits: Option<u32> = None;
    let mut ts: Option<f64> = None;
    let mut lambda: Option<f64> = None;
    let mut extra_bit: Option<bool> = None;
    let mut channels: Option<Vec<ChannelKind>> = None;

    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(idx, line)) = lines.peek() {
        let lineno = idx + 1;
        let Some((key, value)) = line.split_once('=') else {
            break; // first data row
        };
        lines.next();
        match key {
            "bits" => {
                let b = value
                    .parse::<u32>()
                    .map_err(|_| format_err(path, lineno, format!("bad bits {value:?}")))?;
                if !(1..=30).contains(&b) {
                    return Err(format_err(path, lineno, format!("bits {b} out of range")));
                }
                bits = Some(b);
            }
            "ts_seconds" => {
                let v = value
                    .parse::<f64>()
                    .map_err(|_| format_err(path, lineno, format!("bad ts_seconds {value:?}")))?;
                if v.is_nan() || v <= 0.0 {
                    return Err(format_err(path, lineno, "ts_seconds must be positive"));
                }
                ts = Some(v);
            }
            "lambda" => {
                let v = value
                    .parse::<f64>()
                    .map_err(|_| format_err(path, lineno, format!("bad lambda {value:?}")))?;
                if v.is_nan() || v <= 0.0 {
                    return Err(format_err(path, lineno, "lambda must be positive"));
                }
                lambda = Some(v);
            }
            "extra_bit" => {
                extra_bit = Some(match value {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(format_err(
                            path,
                            lineno,
                            format!("bad extra_bit {value:?}, expected true or false"),
                        ))
                    }
                });
            }
            "channels" => {
                let kinds: Result<Vec<ChannelKind>, ExperimentError> = value
                    .split(',')
                    .map(|s| {
                        ChannelKind::parse(s).ok_or_else(|| {
                            format_err(path, lineno, format!("unknown channel kind {s:?}"))
                        })
                    })
                    .collect();
                let kinds = kinds?;
                if kinds.is_empty() || kinds.len() > 4 {
                    return Err(format_err(path, lineno, "expected 1..=4 channels"));
                }
                channels = Some(kinds);
            }
            other => {
                return Err(format_err(
                    path,
                    lineno,
                    format!("unknown header key {other:?}"),
                ))
            }
        }
    }

    let header_end = lines.peek().map(|&(idx, _)| idx).unwrap_or(0);
    let missing = |what: &str| format_err(path, header_end, format!("missing header key {what}"));
    let bits = bits.ok_or_else(|| missing("bits"))?;
    let ts = ts.ok_or_else(|| missing("ts_seconds"))?;
    let lambda = lambda.ok_or_else(|| missing("lambda"))?;
    let extra_bit = extra_bit.ok_or_else(|| missing("extra_bit"))?;
    let channels = channels.ok_or_else(|| missing("channels"))?;

    let limit = 1u32 << bits;
    let mut words: Vec<Vec<SampleRecord>> = vec![Vec::new(); channels.len()];
    let mut any_row = false;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<u32>, ExperimentError> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<u32>()
                    .map_err(|_| format_err(path, lineno, format!("bad word {tok:?}")))
            })
            .collect();
        let row = row?;
        if row.len() != channels.len() {
            return Err(format_err(
                path,
                lineno,
                format!("expected {} words, found {}", channels.len(), row.len()),
            ));
        }
        for (channel, &word) in words.iter_mut().zip(&row) {
            if word >= limit {
                return Err(format_err(
                    path,
                    lineno,
                    format!("word {word} out of range for {bits}-bit format"),
                ));
            }
            channel.push(SampleRecord { word });
        }
        any_row = true;
    }
    if !any_row {
        return Err(format_err(path, header_end + 1, "capture holds no samples"));
    }
    Ok(CaptureFile {
        bits,
        sample_period: ts,
        lambda,
        extra_bit,
        channels,
        words,
    })
}

/// Parameters of the synthetic four-channel capture.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureConfig {
    pub seed: u64,
    pub n_terms: usize,
    /// Nyquist period of the test signal; the default models a 1 kHz band.
    pub nyquist_period: f64,
    /// Converter period; the default models 50 kHz sampling.
    pub sample_period: f64,
    pub bits: u32,
    pub comb_n: u32,
    /// Intentional delay of the modulo channels, in samples.
    pub delay_samples: usize,
    pub refine: usize,
    pub amp_low: f64,
    pub amp_high: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_terms: 40,
            nyquist_period: 5e-4,
            sample_period: 2e-5,
            bits: 8,
            comb_n: 2000,
            delay_samples: 2,
            refine: 64,
            amp_low: -0.5,
            amp_high: 0.5,
        }
    }
}

/// A built fixture: the capture plus the ground truth it was cut from.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub capture: CaptureFile,
    /// Unquantized input samples on the classical channel's time window.
    pub truth: SampleSequence,
    pub lambda: f64,
    pub inf_norm: f64,
    pub delay_samples: usize,
}

/// Order of channels in fixture captures.
pub const FIXTURE_CHANNELS: [ChannelKind; 4] = [
    ChannelKind::Classical,
    ChannelKind::IdealModulo,
    ChannelKind::DirectLpfModulo,
    ChannelKind::CombModulo,
];

/// Build the synthetic four-channel capture. The modulo channels' windows
/// start `delay_samples` earlier than the classical channel's, emulating a
/// fixed acquisition lag, and the fold threshold is pinned to
/// `peak / CLASSICAL_RANGE_FACTOR` so the classical converter spans the
/// input exactly.
pub fn make_fixture(cfg: &FixtureConfig) -> Result<Fixture, ExperimentError> {
    if cfg.n_terms == 0 || cfg.refine == 0 {
        return Err(ExperimentError::Parameter(
            "fixture needs n_terms >= 1 and refine >= 1".into(),
        ));
    }
    if cfg.sample_period.is_nan()
        || cfg.sample_period <= 0.0
        || cfg.nyquist_period.is_nan()
        || cfg.nyquist_period <= cfg.sample_period
    {
        return Err(ExperimentError::Parameter(
            "fixture needs 0 < sample_period < nyquist_period".into(),
        ));
    }
    if cfg.bits < 2 || cfg.bits > 16 {
        return Err(ExperimentError::Parameter(format!(
            "fixture bits must be in 2..=16, got {}",
            cfg.bits
        )));
    }
    let signal = BandlimitedSignal::random(
        cfg.n_terms,
        cfg.nyquist_period,
        cfg.amp_low,
        cfg.amp_high,
        cfg.seed,
    )?;
    let ts = cfg.sample_period;
    let n_out = (signal.duration() / ts).round() as usize;
    let delay = cfg.delay_samples;
    if n_out < 10 || delay >= n_out / 4 {
        return Err(ExperimentError::Parameter(format!(
            "fixture window too short: {n_out} samples with delay {delay}"
        )));
    }
    let n_total = n_out + delay;

    // Render from before the classical window so the delayed modulo
    // channels still cover n_out samples.
    let t0 = -(delay as f64) * ts;
    let dense = signal.render_dense(ts, cfg.refine, t0, n_total)?;
    let inf_norm = dense.inf_norm();
    if inf_norm == 0.0 {
        return Err(ExperimentError::Parameter("fixture signal is zero".into()));
    }
    let lambda = inf_norm / CLASSICAL_RANGE_FACTOR;
    let spec = ModuloSpec::new(lambda)?;
    check_dense_step(&dense, &spec)?;
    let (folded, trace) = fold_waveform(&dense, &spec);
    let flags = trace.at_sample_rate(cfg.refine);

    let input = decimate(&dense, cfg.refine, ts);
    let ideal = decimate(&folded, cfg.refine, ts);
    let direct = comb_channel_samples(&folded, n_total, cfg.refine, &CombSpec::new(0, ts)?, ts)?;
    let comb = comb_channel_samples(
        &folded,
        n_total,
        cfg.refine,
        &CombSpec::new(cfg.comb_n, ts)?,
        ts,
    )?;

    let window =
        |s: &SampleSequence, from: usize| -> Result<SampleSequence, ExperimentError> {
            Ok(SampleSequence::new(
                s.values()[from..from + n_out].to_vec(),
                ts,
                0.0,
            )?)
        };
    // classical channel: aligned window; modulo channels: early window
    let classical_win = window(&input, delay)?;
    let truth = classical_win.clone();
    let ideal_win = window(&ideal, 0)?;
    let direct_win = window(&direct, 0)?;
    let comb_win = window(&comb, 0)?;
    let flags_win = &flags[..n_out];

    let modulo_fmt = WordFormat::new(cfg.bits, true, lambda)?;
    let classical_fmt = WordFormat::new(cfg.bits, false, CLASSICAL_RANGE_FACTOR * lambda)?;
    let pack_mod = |s: &SampleSequence| -> Result<Vec<SampleRecord>, ExperimentError> {
        Ok(quantize_sequence(s, Some(flags_win), &modulo_fmt)?.records)
    };
    let words = vec![
        quantize_sequence(&classical_win, None, &classical_fmt)?.records,
        pack_mod(&ideal_win)?,
        pack_mod(&direct_win)?,
        pack_mod(&comb_win)?,
    ];

    let capture = CaptureFile {
        bits: cfg.bits,
        sample_period: ts,
        lambda,
        extra_bit: true,
        channels: FIXTURE_CHANNELS.to_vec(),
        words,
    };
    capture.validate()?;
    Ok(Fixture {
        capture,
        truth,
        lambda,
        inf_norm,
        delay_samples: delay,
    })
}

/// Outcome of recovering one modulo channel from a capture.
#[derive(Debug, Clone)]
pub struct ChannelRecovery {
    pub kind: ChannelKind,
    /// Delay found against the classical reference; zero when no reference
    /// channel is present.
    pub lag: i64,
    /// Unwrapped, aligned, band-limited samples.
    pub recovered: SampleSequence,
    /// Classical reference over the same window, when present.
    pub reference: Option<SampleSequence>,
    /// Post-filter MSE against the classical reference.
    pub mse_vs_classical: Option<f64>,
    pub clamped_steps: usize,
}

/// Recovery of every modulo channel in a capture.
#[derive(Debug, Clone)]
pub struct CaptureRecovery {
    pub channels: Vec<ChannelRecovery>,
    /// Dequantized classical channel, full window.
    pub classical: Option<SampleSequence>,
}

/// Measurement guard fraction used for capture-recovery error reports.
const RECOVERY_GUARD: f64 = 0.1;

/// Unwrap every modulo channel of a capture, align each against the
/// classical channel when one is present, and band-limit to `cutoff`.
pub fn recover_capture(
    capture: &CaptureFile,
    mode: UnwrapMode,
    cutoff: f64,
    max_lag: usize,
) -> Result<CaptureRecovery, ExperimentError> {
    capture.validate()?;
    let classical = capture
        .channels
        .iter()
        .position(|k| !k.is_modulo())
        .map(|idx| -> Result<SampleSequence, ExperimentError> {
            let fmt = capture.word_format(ChannelKind::Classical)?;
            let (seq, _) = crate::adc::unpack_sequence(
                &capture.words[idx],
                &fmt,
                capture.sample_period,
                0.0,
            )?;
            Ok(seq)
        })
        .transpose()?;

    let rec_cfg = RecoveryConfig::new(capture.lambda, mode)?.with_cutoff(cutoff)?;
    let mut channels = Vec::new();
    for (idx, &kind) in capture.channels.iter().enumerate() {
        if !kind.is_modulo() {
            continue;
        }
        let fmt = capture.word_format(kind)?;
        let (folded, flags) = crate::adc::unpack_sequence(
            &capture.words[idx],
            &fmt,
            capture.sample_period,
            0.0,
        )?;
        let flags_opt = (capture.extra_bit && mode == UnwrapMode::ExtraBitGated)
            .then_some(flags.as_slice());
        let unwrapped = unwrap(&folded, flags_opt, &rec_cfg)?;

        let (lag, raw, reference) = match &classical {
            Some(reference) => {
                let aligned = align_delay(reference, &unwrapped.samples, max_lag)?;
                (aligned.lag, aligned.aligned, Some(aligned.reference))
            }
            None => (0, unwrapped.samples.clone(), None),
        };
        let mse_vs_classical = reference
            .as_ref()
            .map(|r| {
                filtered_residual_mse(&raw, r, Some(capture.lambda), cutoff, RECOVERY_GUARD)
            })
            .transpose()?;
        let recovered = reconstruct(&raw, &rec_cfg)?.filtered;
        channels.push(ChannelRecovery {
            kind,
            lag,
            recovered,
            reference,
            mse_vs_classical,
            clamped_steps: unwrapped.clamped_steps,
        });
    }
    Ok(CaptureRecovery {
        channels,
        classical,
    })
}
