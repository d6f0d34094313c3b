//! Command-line interface: `sweep`, `simulate`, `recover`, `make-fixture`.
//!
//! Exit status: 0 on success, 1 on parameter errors, 2 on file-format
//! errors. For `sweep`, flags override an optional `key=value` config file,
//! which overrides the built-in defaults.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::recovery::UnwrapMode;
use crate::signal::DenseWaveform;

use super::capture::{make_fixture, read_capture, recover_capture, write_capture, FixtureConfig};
use super::csvio::{results_to_string, write_aggregate_csv, write_results_csv};
use super::{aggregate, run_sweep, simulate_trial, ExperimentConfig, ExperimentError, SweepRow};

#[derive(Parser)]
#[command(
    name = "modsamp",
    version,
    about = "Modulo-sampling simulation, error sweeps, and recovery",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo error sweep over bit depths and oversampling factors
    Sweep(SweepArgs),
    /// Run one trial and dump every intermediate waveform
    Simulate(SimulateArgs),
    /// Unwrap and reconstruct the modulo channels of a capture file
    Recover(RecoverArgs),
    /// Build a synthetic four-channel capture file
    MakeFixture(FixtureArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Word sizes to sweep, e.g. 6,8
    #[arg(long, value_delimiter = ',')]
    bits: Option<Vec<u32>>,
    /// Oversampling factors to sweep, e.g. 4,5,6,8,10,16,32
    #[arg(long, value_delimiter = ',')]
    of: Option<Vec<f64>>,
    /// Signals per (bits, of) cell
    #[arg(long)]
    trials: Option<u32>,
    /// Comb harmonics per side; omit to model the plain filtered channel
    #[arg(long)]
    comb_n: Option<u32>,
    /// Base seed; trial i uses seed + i
    #[arg(long)]
    seed: Option<u64>,
    /// Dense-grid refinement per sampling period
    #[arg(long)]
    refine: Option<usize>,
    /// Fraction trimmed from each end before error averaging
    #[arg(long)]
    guard: Option<f64>,
    /// Spend one bit on the fold indicator (true/false)
    #[arg(long)]
    extra_bit: Option<bool>,
    /// Sinc terms per test signal
    #[arg(long)]
    n_terms: Option<usize>,
    /// Nyquist period of the test signals, seconds
    #[arg(long)]
    nyquist_period: Option<f64>,
    /// Lower coefficient bound
    #[arg(long)]
    amp_low: Option<f64>,
    /// Upper coefficient bound
    #[arg(long)]
    amp_high: Option<f64>,
    /// Optional key=value config file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Results CSV path; the per-cell aggregate lands next to it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    bits: u32,
    #[arg(long, default_value_t = 10.0)]
    of: f64,
    /// Comb harmonics per side
    #[arg(long, default_value_t = 2000)]
    comb_n: u32,
    #[arg(long, default_value_t = 64)]
    refine: usize,
    #[arg(long, default_value_t = 98)]
    n_terms: usize,
    #[arg(long, default_value_t = 1e-4)]
    nyquist_period: f64,
    /// Directory for the waveform dumps
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RecoverArgs {
    /// Capture file to ingest
    #[arg(long = "in")]
    input: PathBuf,
    /// Unwrapping mode: itoh or extra-bit-gated
    #[arg(long, default_value = "extra-bit-gated")]
    mode: String,
    /// Known maximum input frequency, Hz
    #[arg(long)]
    cutoff_hz: f64,
    /// Largest delay scanned during alignment, samples
    #[arg(long, default_value_t = 16)]
    max_lag: usize,
    /// Recovered-samples CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    n_terms: usize,
    /// Nyquist period of the fixture signal, seconds
    #[arg(long, default_value_t = 5e-4)]
    nyquist_period: f64,
    /// Converter period, seconds
    #[arg(long, default_value_t = 2e-5)]
    sample_period: f64,
    #[arg(long, default_value_t = 8)]
    bits: u32,
    #[arg(long, default_value_t = 2000)]
    comb_n: u32,
    /// Intentional delay of the modulo channels, samples
    #[arg(long, default_value_t = 2)]
    delay: usize,
    #[arg(long, default_value_t = 64)]
    refine: usize,
    /// Capture file to write
    #[arg(long)]
    out: PathBuf,
    /// Optional ground-truth CSV
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

/// Parse arguments and run; returns the process exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Sweep(args) => run_sweep_cmd(args),
        Command::Simulate(args) => run_simulate_cmd(args),
        Command::Recover(args) => run_recover_cmd(args),
        Command::MakeFixture(args) => run_fixture_cmd(args),
    }
}

fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ExperimentError::Format {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("expected key=value, got {line:?}"),
            });
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn apply_config_pairs(
    cfg: &mut ExperimentConfig,
    pairs: &[(String, String)],
    path: &Path,
) -> Result<(), ExperimentError> {
    let bad = |key: &str, value: &str| {
        ExperimentError::Parameter(format!(
            "config {}: bad value {value:?} for key {key}",
            path.display()
        ))
    };
    for (key, value) in pairs {
        match key.as_str() {
            "trials" => cfg.trials = value.parse().map_err(|_| bad(key, value))?,
            "bits" => {
                cfg.bits_list = value
                    .split(',')
                    .map(|s| s.trim().parse::<u32>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad(key, value))?
            }
            "of" => {
                cfg.of_list = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad(key, value))?
            }
            "comb-n" => cfg.comb_n = Some(value.parse().map_err(|_| bad(key, value))?),
            "seed" => cfg.seed = value.parse().map_err(|_| bad(key, value))?,
            "refine" => cfg.refine = value.parse().map_err(|_| bad(key, value))?,
            "guard" => cfg.guard = value.parse().map_err(|_| bad(key, value))?,
            "extra-bit" => cfg.extra_bit = value.parse().map_err(|_| bad(key, value))?,
            "n-terms" => cfg.n_terms = value.parse().map_err(|_| bad(key, value))?,
            "nyquist-period" => {
                cfg.nyquist_period = value.parse().map_err(|_| bad(key, value))?
            }
            "amp-low" => cfg.amp_low = value.parse().map_err(|_| bad(key, value))?,
            "amp-high" => cfg.amp_high = value.parse().map_err(|_| bad(key, value))?,
            other => {
                return Err(ExperimentError::Parameter(format!(
                    "config {}: unknown key {other:?}",
                    path.display()
                )))
            }
        }
    }
    Ok(())
}

fn resolve_sweep_config(args: &SweepArgs) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        let pairs = parse_config_file(path)?;
        apply_config_pairs(&mut cfg, &pairs, path)?;
    }
    if let Some(v) = &args.bits {
        cfg.bits_list = v.clone();
    }
    if let Some(v) = &args.of {
        cfg.of_list = v.clone();
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if args.comb_n.is_some() {
        cfg.comb_n = args.comb_n;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.refine {
        cfg.refine = v;
    }
    if let Some(v) = args.guard {
        cfg.guard = v;
    }
    if let Some(v) = args.extra_bit {
        cfg.extra_bit = v;
    }
    if let Some(v) = args.n_terms {
        cfg.n_terms = v;
    }
    if let Some(v) = args.nyquist_period {
        cfg.nyquist_period = v;
    }
    if let Some(v) = args.amp_low {
        cfg.amp_low = v;
    }
    if let Some(v) = args.amp_high {
        cfg.amp_high = v;
    }
    Ok(cfg)
}

/// Aggregate CSV path for a results path: `results.csv` -> `results.agg.csv`.
fn aggregate_path(out: &Path) -> PathBuf {
    match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => out.with_extension(format!("agg.{ext}")),
        None => out.with_extension("agg"),
    }
}

fn run_sweep_cmd(args: SweepArgs) -> Result<(), ExperimentError> {
    let cfg = resolve_sweep_config(&args)?;
    let rows = run_sweep(&cfg)?;
    write_results_csv(&rows, &args.out)?;
    let aggs = aggregate(&rows);
    let agg_path = aggregate_path(&args.out);
    write_aggregate_csv(&aggs, &agg_path)?;
    println!(
        "wrote {} rows to {} and {} aggregates to {}",
        rows.len(),
        args.out.display(),
        aggs.len(),
        agg_path.display()
    );
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), ExperimentError> {
    fs::write(path, text).map_err(|e| ExperimentError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn dense_table(columns: &[(&str, &DenseWaveform)]) -> String {
    let mut out = String::from("t");
    for (name, _) in columns {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    let n = columns[0].1.len();
    for k in 0..n {
        let _ = write!(out, "{:.12e}", columns[0].1.time_at(k));
        for (_, w) in columns {
            let _ = write!(out, ",{:.12e}", w.values()[k]);
        }
        out.push('\n');
    }
    out
}

fn run_simulate_cmd(args: SimulateArgs) -> Result<(), ExperimentError> {
    let cfg = ExperimentConfig {
        trials: 1,
        bits_list: vec![args.bits],
        of_list: vec![args.of],
        comb_n: Some(args.comb_n),
        n_terms: args.n_terms,
        nyquist_period: args.nyquist_period,
        seed: args.seed,
        refine: args.refine,
        ..ExperimentConfig::default()
    };
    let sim = simulate_trial(&cfg, 0)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| ExperimentError::Io {
        path: args.out_dir.display().to_string(),
        source: e,
    })?;

    write_text(
        &args.out_dir.join("dense.csv"),
        &dense_table(&[
            ("input", &sim.input),
            ("folded", &sim.folded),
            ("comb", &sim.comb),
            ("mixed", &sim.mixed),
            ("post_lpf", &sim.post_lpf),
        ]),
    )?;

    let mut samples = String::from(
        "n,t,classical,ideal_modulo,direct_lpf_modulo,comb_modulo,fold_flag\n",
    );
    for n in 0..sim.classical.len() {
        let _ = writeln!(
            samples,
            "{n},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
            sim.classical.time_at(n),
            sim.classical.values()[n],
            sim.ideal.values()[n],
            sim.direct.values()[n],
            sim.comb_samples.values()[n],
            sim.fold_flags[n] as u8,
        );
    }
    write_text(&args.out_dir.join("samples.csv"), &samples)?;

    let row = SweepRow {
        trial: 0,
        breakdown: sim.breakdown,
    };
    write_text(
        &args.out_dir.join("breakdown.csv"),
        &results_to_string(&[row]),
    )?;
    println!(
        "simulated 1 trial (lambda {:.6e}, peak {:.6e}); waveforms in {}",
        sim.lambda,
        sim.inf_norm,
        args.out_dir.display()
    );
    Ok(())
}

fn run_recover_cmd(args: RecoverArgs) -> Result<(), ExperimentError> {
    let mode = match args.mode.as_str() {
        "itoh" => UnwrapMode::Itoh,
        "extra-bit-gated" | "extra_bit_gated" => UnwrapMode::ExtraBitGated,
        other => {
            return Err(ExperimentError::Parameter(format!(
                "unknown mode {other:?}; expected itoh or extra-bit-gated"
            )))
        }
    };
    if args.cutoff_hz.is_nan() || args.cutoff_hz <= 0.0 {
        return Err(ExperimentError::Parameter(format!(
            "cutoff must be positive, got {}",
            args.cutoff_hz
        )));
    }
    let capture = read_capture(&args.input)?;
    let cutoff = 2.0 * std::f64::consts::PI * args.cutoff_hz;
    let rec = recover_capture(&capture, mode, cutoff, args.max_lag)?;

    // Each channel's aligned window sits at reference index max(0, -lag);
    // emit the intersection so rows line up across channels.
    let starts: Vec<usize> = rec
        .channels
        .iter()
        .map(|c| (-c.lag).max(0) as usize)
        .collect();
    let common_start = starts.iter().copied().max().unwrap_or(0);
    let common_end = starts
        .iter()
        .zip(&rec.channels)
        .map(|(s, c)| s + c.recovered.len())
        .min()
        .unwrap_or(0);

    let mut out = String::from("n,t");
    if rec.classical.is_some() {
        out.push_str(",classical");
    }
    for ch in &rec.channels {
        let _ = write!(out, ",{}", ch.kind.as_str());
    }
    out.push('\n');
    let rows = common_end.saturating_sub(common_start);
    for r in common_start..common_end {
        let _ = write!(out, "{r},{:.12e}", r as f64 * capture.sample_period);
        if let Some(classical) = &rec.classical {
            let _ = write!(out, ",{:.12e}", classical.values()[r]);
        }
        for (ch, &start) in rec.channels.iter().zip(&starts) {
            let _ = write!(out, ",{:.12e}", ch.recovered.values()[r - start]);
        }
        out.push('\n');
    }
    write_text(&args.out, &out)?;

    for ch in &rec.channels {
        match ch.mse_vs_classical {
            Some(mse) => println!(
                "{}: lag {} samples, mse vs classical {:.6e}, clamped steps {}",
                ch.kind.as_str(),
                ch.lag,
                mse,
                ch.clamped_steps
            ),
            None => println!(
                "{}: no classical reference, clamped steps {}",
                ch.kind.as_str(),
                ch.clamped_steps
            ),
        }
    }
    println!("wrote {} recovered samples to {}", rows, args.out.display());
    Ok(())
}

fn run_fixture_cmd(args: FixtureArgs) -> Result<(), ExperimentError> {
    let cfg = FixtureConfig {
        seed: args.seed,
        n_terms: args.n_terms,
        nyquist_period: args.nyquist_period,
        sample_period: args.sample_period,
        bits: args.bits,
        comb_n: args.comb_n,
        delay_samples: args.delay,
        refine: args.refine,
        ..FixtureConfig::default()
    };
    let fixture = make_fixture(&cfg)?;
    write_capture(&fixture.capture, &args.out)?;
    if let Some(truth_path) = &args.truth_out {
        let mut text = String::from("n,t,value\n");
        for (n, &v) in fixture.truth.values().iter().enumerate() {
            let _ = writeln!(text, "{n},{:.12e},{:.16e}", fixture.truth.time_at(n), v);
        }
        write_text(truth_path, &text)?;
    }
    println!(
        "wrote {}-sample capture ({} channels, lambda {:.6e}, delay {} samples) to {}",
        fixture.capture.n_samples(),
        fixture.capture.channels.len(),
        fixture.lambda,
        fixture.delay_samples,
        args.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_path_variants() {
        assert_eq!(
            aggregate_path(Path::new("results.csv")),
            PathBuf::from("results.agg.csv")
        );
        assert_eq!(
            aggregate_path(Path::new("out/sweep")),
            PathBuf::from("out/sweep.agg")
        );
    }

    #[test]
    fn config_file_overrides_defaults_and_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("sweep.cfg");
        fs::write(
            &cfg_path,
            "# comment\ntrials=7\nbits=6\nof=4,8\nseed=99\nextra-bit=false\n",
        )
        .unwrap();
        let args = SweepArgs {
            bits: None,
            of: None,
            trials: Some(3),
            comb_n: None,
            seed: None,
            refine: None,
            guard: None,
            extra_bit: None,
            n_terms: None,
            nyquist_period: None,
            amp_low: None,
            amp_high: None,
            config: Some(cfg_path),
            out: PathBuf::from("unused.csv"),
        };
        let cfg = resolve_sweep_config(&args).unwrap();
        assert_eq!(cfg.trials, 3); // flag beats config
        assert_eq!(cfg.bits_list, vec![6]); // config beats default
        assert_eq!(cfg.of_list, vec![4.0, 8.0]);
        assert_eq!(cfg.seed, 99);
        assert!(!cfg.extra_bit);
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("sweep.cfg");
        fs::write(&cfg_path, "volume=11\n").unwrap();
        let args = SweepArgs {
            bits: None,
            of: None,
            trials: None,
            comb_n: None,
            seed: None,
            refine: None,
            guard: None,
            extra_bit: None,
            n_terms: None,
            nyquist_period: None,
            amp_low: None,
            amp_high: None,
            config: Some(cfg_path),
            out: PathBuf::from("unused.csv"),
        };
        assert!(resolve_sweep_config(&args).is_err());
    }

    #[test]
    fn unknown_subcommand_fails_with_parameter_exit() {
        let code = cli_main(["modsamp", "frobnicate"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(cli_main(["modsamp", "--help"]), 0);
    }
}
