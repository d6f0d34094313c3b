//! Quantizer and converter word format: uniform mid-tread quantization over
//! a dynamic range, and the packed word whose least significant bit carries
//! the fold indicator.
//!
//! Two related quantizers live here.
//!
//! [`QuantizerSpec`] / [`quantize`] is the amplitude quantizer used by the
//! error study: step `step = half_range / (2^bits - 1)`, symmetric code
//! range `[-(2^bits - 1), 2^bits - 1]`. This is the step convention behind
//! the theoretical MSE curves, and it implies more mid-tread levels than a
//! `bits`-wide word can hold; `step_override` is available when a different
//! budget is wanted.
//!
//! [`WordFormat`] is the storage format of capture files: a `bits`-wide word
//! whose low bit is the fold flag (when the extra bit is enabled) and whose
//! remaining field holds the amplitude code in offset binary, code zero at
//! mid-scale. Every word value is valid, so packing and unpacking are exact
//! inverses over the whole word range.

use thiserror::Error;

use crate::signal::{SampleSequence, SignalError};

#[derive(Debug, Error)]
pub enum AdcError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: {0} samples vs {1} fold flags")]
    LengthMismatch(usize, usize),
    #[error("fold flags required when the extra bit is enabled")]
    MissingFlags,
    #[error("word {word:#x} out of range for {bits}-bit format")]
    WordOutOfRange { word: u32, bits: u32 },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Uniform mid-tread quantizer description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    bits: u32,
    half_range: f64,
    step_override: Option<f64>,
}

impl QuantizerSpec {
    pub fn new(bits: u32, half_range: f64) -> Result<Self, AdcError> {
        if !(1..=30).contains(&bits) {
            return Err(AdcError::InvalidParameter(format!(
                "bits must be in 1..=30, got {bits}"
            )));
        }
        if !half_range.is_finite() || half_range <= 0.0 {
            return Err(AdcError::InvalidParameter(format!(
                "half range must be positive, got {half_range}"
            )));
        }
        Ok(Self {
            bits,
            half_range,
            step_override: None,
        })
    }

    /// Use an explicit step size instead of `half_range / (2^bits - 1)`.
    pub fn with_step(mut self, step: f64) -> Result<Self, AdcError> {
        if !step.is_finite() || step <= 0.0 {
            return Err(AdcError::InvalidParameter(format!(
                "step must be positive, got {step}"
            )));
        }
        self.step_override = Some(step);
        Ok(self)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn half_range(&self) -> f64 {
        self.half_range
    }

    /// Quantization step.
    pub fn step(&self) -> f64 {
        self.step_override
            .unwrap_or(self.half_range / ((1u64 << self.bits) - 1) as f64)
    }

    /// Largest representable code magnitude; codes cover the half range.
    pub fn code_max(&self) -> i64 {
        ((self.half_range / self.step()).round() as i64).max(1)
    }
}

/// Result of quantizing one value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantized {
    pub code: i64,
    pub value: f64,
    pub saturated: bool,
}

/// Mid-tread quantization: `code = round(v / step)` clamped to the code
/// range, ties away from zero; `value = code * step`. Out-of-range inputs
/// clamp silently but are reported through the `saturated` flag.
pub fn quantize(v: f64, spec: &QuantizerSpec) -> Quantized {
    let step = spec.step();
    let raw = (v / step).round();
    let max = spec.code_max();
    let code = (raw as i64).clamp(-max, max);
    Quantized {
        code,
        value: code as f64 * step,
        saturated: raw.abs() > max as f64,
    }
}

/// One converter output word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRecord {
    pub word: u32,
}

/// Bit-exact layout of stored converter words.
///
/// With the extra bit enabled, bit 0 is the fold flag and the top
/// `bits - 1` bits hold the amplitude field; otherwise all `bits` bits hold
/// the field. The field is offset binary over the full dynamic range: field
/// value `2^(f-1)` is code zero, and the `f`-bit field spans codes
/// `[-2^(f-1), 2^(f-1) - 1]` with step `half_range / 2^(f-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordFormat {
    bits: u32,
    extra_bit: bool,
    half_range: f64,
}

impl WordFormat {
    pub fn new(bits: u32, extra_bit: bool, half_range: f64) -> Result<Self, AdcError> {
        let min_bits = if extra_bit { 2 } else { 1 };
        if bits < min_bits || bits > 30 {
            return Err(AdcError::InvalidParameter(format!(
                "word bits must be in {min_bits}..=30, got {bits}"
            )));
        }
        if !half_range.is_finite() || half_range <= 0.0 {
            return Err(AdcError::InvalidParameter(format!(
                "half range must be positive, got {half_range}"
            )));
        }
        Ok(Self {
            bits,
            extra_bit,
            half_range,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn extra_bit(&self) -> bool {
        self.extra_bit
    }

    pub fn half_range(&self) -> f64 {
        self.half_range
    }

    /// Width of the amplitude field.
    pub fn field_bits(&self) -> u32 {
        self.bits - self.extra_bit as u32
    }

    /// Amplitude step of the stored field.
    pub fn step(&self) -> f64 {
        self.half_range / (1u64 << (self.field_bits() - 1)) as f64
    }

    fn offset(&self) -> i64 {
        1i64 << (self.field_bits() - 1)
    }

    pub fn word_count(&self) -> u32 {
        1u32 << self.bits
    }

    /// Pack an amplitude and fold flag into one word.
    pub fn pack(&self, v: f64, fold: bool) -> (SampleRecord, bool) {
        let step = self.step();
        let offset = self.offset();
        let raw = (v / step).round();
        let code = (raw as i64).clamp(-offset, offset - 1);
        let saturated = raw < -(offset as f64) || raw > (offset - 1) as f64;
        let field = (code + offset) as u32;
        let word = if self.extra_bit {
            (field << 1) | fold as u32
        } else {
            field
        };
        (SampleRecord { word }, saturated)
    }

    /// Unpack one word into its dequantized amplitude and fold flag.
    pub fn unpack(&self, record: SampleRecord) -> Result<(f64, bool), AdcError> {
        if record.word >= self.word_count() {
            return Err(AdcError::WordOutOfRange {
                word: record.word,
                bits: self.bits,
            });
        }
        let (field, fold) = if self.extra_bit {
            (record.word >> 1, record.word & 1 == 1)
        } else {
            (record.word, false)
        };
        let code = field as i64 - self.offset();
        Ok((code as f64 * self.step(), fold))
    }
}

/// Quantized word stream plus bookkeeping.
#[derive(Debug, Clone)]
pub struct QuantizedWords {
    pub records: Vec<SampleRecord>,
    pub saturated: usize,
}

/// Quantize a sequence into converter words. With the extra bit enabled the
/// amplitude takes the `bits - 1`-wide field and each word's LSB carries the
/// sample's fold flag; otherwise all bits quantize amplitude and fold flags
/// are dropped.
pub fn quantize_sequence(
    s: &SampleSequence,
    folds: Option<&[bool]>,
    format: &WordFormat,
) -> Result<QuantizedWords, AdcError> {
    let flags: Option<&[bool]> = if format.extra_bit() {
        let f = folds.ok_or(AdcError::MissingFlags)?;
        if f.len() != s.len() {
            return Err(AdcError::LengthMismatch(s.len(), f.len()));
        }
        Some(f)
    } else {
        None
    };
    let mut saturated = 0;
    let records = s
        .values()
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            let fold = flags.map(|f| f[n]).unwrap_or(false);
            let (rec, sat) = format.pack(v, fold);
            saturated += sat as usize;
            rec
        })
        .collect();
    Ok(QuantizedWords { records, saturated })
}

/// Exact inverse of [`quantize_sequence`] on the code domain.
pub fn unpack_sequence(
    records: &[SampleRecord],
    format: &WordFormat,
    period: f64,
    t0: f64,
) -> Result<(SampleSequence, Vec<bool>), AdcError> {
    let mut values = Vec::with_capacity(records.len());
    let mut flags = Vec::with_capacity(records.len());
    for &rec in records {
        let (v, fold) = format.unpack(rec)?;
        values.push(v);
        flags.push(fold);
    }
    Ok((SampleSequence::new(values, period, t0)?, flags))
}
