//! Experiment harness behind the `blockpr` command-line tool.

pub mod config;
pub mod experiment;
pub mod io;
pub mod report;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use blockpr::{
    add_noise, assemble_blocks, build_flattener, correlation_measure, global_phase_align, recover_arbitrary,
    verify_suite, FlatteningOperator, MeasurementVector, VerifyOptions,
};

pub use config::{Experiment, ExperimentConfig, MaskChoice};
pub use experiment::{aggregate, run_experiment, Aggregate, ExperimentOutput, Statistic, TrialResult};

#[derive(Debug, Parser)]
#[command(name = "blockpr", version, about = "Phase retrieval experiments from local correlation measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recovery error versus SNR.
    Robustness(GridArgs),
    /// Wall-clock time of the lifted solve versus d.
    Runtime(GridArgs),
    /// Condition number of the lifted system versus delta and d.
    Condno(GridArgs),
    /// Fraction of flattened Gaussian signals that are m-flat.
    Flatness(GridArgs),
    /// Sparse signals through a compressive sketch.
    Sparse(GridArgs),
    /// Structural and conditioning self-checks.
    Verify(VerifyArgs),
    /// Recover a signal from a file.
    Recover(RecoverArgs),
}

fn parse_snr(s: &str) -> Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        t => t.parse().map_err(|_| format!("invalid SNR {s:?}")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Signal dimensions (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub d: Vec<usize>,
    /// Mask support widths (comma separated) [default: 8, or the inner
    /// default `2 ceil(log2 m) + 3` for sparse].
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<usize>,
    #[arg(long, value_enum, default_value = "det")]
    pub masks: MaskChoice,
    /// Damping of deterministic masks [default: max(4, (delta-1)/2)].
    #[arg(long)]
    pub a: Option<f64>,
    /// Oversampling factor of random masks.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// SNR grid in dB (comma separated, `inf` for noiseless).
    #[arg(long, value_delimiter = ',', value_parser = parse_snr, default_value = "inf")]
    pub snr: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Emit JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
    /// Measure W x with a random flattening operator W.
    #[arg(long)]
    pub flatten: bool,
    /// Use m-flat test signals with this block size.
    #[arg(long)]
    pub flat_m: Option<usize>,
    /// Flatness block size (flatness) or sketch rows (sparse).
    #[arg(long)]
    pub m: Option<usize>,
    /// Sparsity of sparse test signals.
    #[arg(long)]
    pub s: Option<usize>,
}

impl GridArgs {
    pub fn config(&self, experiment: Experiment) -> ExperimentConfig {
        ExperimentConfig {
            experiment,
            d: self.d.clone(),
            delta: match (self.delta.is_empty(), experiment) {
                (false, _) | (true, Experiment::Sparse) => self.delta.clone(),
                (true, _) => vec![8],
            },
            masks: self.masks,
            a: self.a,
            gamma: self.gamma,
            snr_db: self.snr.clone(),
            trials: self.trials,
            seed: self.seed,
            flatten: self.flatten,
            flat_m: self.flat_m,
            m: self.m,
            s: self.s,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Blend the first mask toward the second before the conditioning checks.
    #[arg(long, hide = true, default_value_t = 0.0)]
    pub perturb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    /// A signal to measure and then recover.
    Signal,
    /// Measurements in mask-major order.
    Measurements,
}

#[derive(Debug, Clone, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "signal")]
    pub kind: InputKind,
    /// File format [default: from the extension].
    #[arg(long, value_enum)]
    pub format: Option<io::FileFormat>,
    /// Where to write the recovered signal.
    #[arg(long)]
    pub output: PathBuf,
    /// Signal dimension (required for measurement input).
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub delta: usize,
    #[arg(long, value_enum, default_value = "det")]
    pub masks: MaskChoice,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Noise added when measuring a signal input.
    #[arg(long, value_parser = parse_snr, default_value = "inf")]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Measurements are of W x for the flattener drawn from `seed`.
    #[arg(long)]
    pub flatten: bool,
    /// Print the summary as JSON.
    #[arg(long)]
    pub json: bool,
}

/// Failure of a command, mapped to an exit code by the binary.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] blockpr::BlockPrError),
    #[error(transparent)]
    File(#[from] io::IoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0} verification check(s) failed")]
    VerifyFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Model(blockpr::BlockPrError::Domain(_)) => 2,
            _ => 1,
        }
    }
}

fn sink<'a>(out: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn run_grid(args: &GridArgs, experiment: Experiment, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = args.config(experiment);
    let out = run_experiment(&cfg)?;
    let mut w = sink(&args.out, stdout)?;
    if args.json {
        report::write_json(&out, &mut w)?;
        writeln!(w)?;
    } else {
        report::write_csv(&out, &mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn run_verify(args: &VerifyArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let checks = verify_suite(VerifyOptions {
        perturbation: args.perturb,
    })?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    let mut w = sink(&args.out, stdout)?;
    if args.json {
        let doc = serde_json::json!({
            "schema": "blockpr-verify/1",
            "pass": failed == 0,
            "checks": checks,
        });
        serde_json::to_writer_pretty(&mut w, &doc).map_err(std::io::Error::other)?;
        writeln!(w)?;
    } else {
        for c in &checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            writeln!(w, "{tag} {:<36} computed={:e} bound={:e}", c.name, c.computed, c.bound)?;
        }
    }
    w.flush()?;
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}

fn run_recover(args: &RecoverArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let format = args.format.unwrap_or_else(|| io::FileFormat::from_path(&args.input));
    let (x, raw) = match args.kind {
        InputKind::Signal => {
            let x = io::read_signal(&args.input, format)?;
            if let Some(d) = args.d {
                if d != x.len() {
                    return Err(CliError::Usage(format!("--d {d} does not match signal length {}", x.len())));
                }
            }
            (Some(x), None)
        }
        InputKind::Measurements => (None, Some(io::read_measurements(&args.input, format)?)),
    };
    let d = match (&x, args.d) {
        (Some(x), _) => x.len(),
        (None, Some(d)) => d,
        (None, None) => return Err(CliError::Usage("--d is required for measurement input".into())),
    };
    let cfg = ExperimentConfig {
        masks: args.masks,
        a: args.a,
        gamma: args.gamma,
        seed: args.seed,
        ..ExperimentConfig::new(Experiment::Recover)
    };
    let ens = cfg.ensemble(d, args.delta, 0)?;
    let sys = assemble_blocks(&ens)?;
    let w = if args.flatten {
        build_flattener(d, cfg.trial_seed(config::stream::FLATTEN, 0))?
    } else {
        FlatteningOperator::identity(d)?
    };
    let b = match (&x, raw) {
        (Some(x), _) => {
            let clean = correlation_measure(&w.apply(x)?, &ens)?;
            add_noise(&clean, args.snr, cfg.trial_seed(config::stream::NOISE, 0))?.noisy
        }
        (None, Some(raw)) => {
            if raw.len() != ens.measurement_count() {
                return Err(CliError::Usage(format!(
                    "expected {} measurements for d = {d} with {} masks, found {}",
                    ens.measurement_count(),
                    ens.count(),
                    raw.len()
                )));
            }
            MeasurementVector::new(d, ens.count(), raw)?
        }
        (None, None) => unreachable!("input read above"),
    };
    let rec = recover_arbitrary(&b, &sys, &w)?;
    let out_format = io::FileFormat::from_path(&args.output);
    io::write_signal(&args.output, out_format, &rec.signal)?;
    let rel_error = match &x {
        Some(x) => global_phase_align(x, &rec.signal)?.relative_l2().ok(),
        None => None,
    };
    let summary = serde_json::json!({
        "d": d,
        "delta": args.delta,
        "masks": ens.count(),
        "diagnostics": rec.diagnostics,
        "rel_error": rel_error,
        "output": args.output,
    });
    if args.json {
        writeln!(stdout, "{}", serde_json::to_string_pretty(&summary).map_err(std::io::Error::other)?)?;
    } else {
        writeln!(
            stdout,
            "recovered d={d} delta={} masks={} kappa={:e} unreached={}{}",
            args.delta,
            ens.count(),
            rec.diagnostics.kappa,
            rec.diagnostics.unreached.len(),
            rel_error.map(|e| format!(" rel_error={e:e}")).unwrap_or_default()
        )?;
    }
    Ok(())
}

/// Execute a parsed command, writing results to `stdout` unless redirected.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Robustness(a) => run_grid(a, Experiment::Robustness, stdout),
        Command::Runtime(a) => run_grid(a, Experiment::Runtime, stdout),
        Command::Condno(a) => run_grid(a, Experiment::Condno, stdout),
        Command::Flatness(a) => run_grid(a, Experiment::Flatness, stdout),
        Command::Sparse(a) => run_grid(a, Experiment::Sparse, stdout),
        Command::Verify(a) => run_verify(a, stdout),
        Command::Recover(a) => run_recover(a, stdout),
    }
}
