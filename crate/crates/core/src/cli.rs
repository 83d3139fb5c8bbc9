//! Command-line front end: builds a code and decoder from flags, runs one of
//! the estimators or the exact oracle over a sweep, and prints CSV rows or
//! JSON lines.
//!
//! CSV columns for `mc`, `is` and `is-invariant` are
//! `ebn0_db,p,wer,kappa,words,q_used,seed`; `ebn0_db` is empty for `--p-list`
//! sweeps and `kappa` is empty when no decoding error was observed.

use std::io::Write;
use std::path::Path;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::channel::snr_to_p;
use crate::codes::{make_hamming, make_repetition, parse_alist, parse_matrix_file, LinearCode};
use crate::decoders::Decoder;
use crate::estimators::{
    estimate_t, run_is_invariant, run_mc, sweep_is_basic, EstimateReport, EstimatorError, ISConfig,
    Sharding, StopReason, StopRule, WeightTally,
};
use crate::exact::{
    argmin_q, convexity_certificate, error_profile, exact_wer, fixed_point_q, ExactError,
};

pub const CSV_HEADER: &str = "ebn0_db,p,wer,kappa,words,q_used,seed";
pub const T_CSV_HEADER: &str = "p,t,q_hat,words,seed";
pub const EXACT_CSV_HEADER: &str = "ebn0_db,p,wer,argmin_q,fixed_point_q";

#[derive(Debug, Parser)]
#[command(
    name = "fastsim",
    version,
    about = "Word error rate simulation for linear block codes on the BSC"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Standard Monte Carlo at each channel probability.
    Mc(RunArgs),
    /// Importance sampling with embedded estimation of the biased probability.
    Is(RunArgs),
    /// One importance-sampling run at q = (t+1)/n re-weighted for every point.
    IsInvariant(RunArgs),
    /// Estimate the error-correcting capability t of the decoder.
    EstimateT(RunArgs),
    /// Exhaustive error profile, exact WER and optimal biasing.
    Exact(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("sweep").required(true).args(["snr", "p_list"])))]
pub struct RunArgs {
    /// hamming:R, repetition:N, alist:PATH or matrix:PATH
    #[arg(long)]
    pub code: String,
    /// syndrome, bounded:T or bitflip:ITERS
    #[arg(long, default_value = "syndrome")]
    pub decoder: String,
    /// Eb/N0 sweep in dB as START:STOP:STEP, mapped to p with the code rate
    #[arg(long)]
    pub snr: Option<String>,
    /// Comma-separated channel cross-over probabilities
    #[arg(long, value_delimiter = ',')]
    pub p_list: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1_000)]
    pub min_words: u64,
    #[arg(long, default_value_t = 1_000_000_000)]
    pub max_words: u64,
    /// Also stop once this many decoding errors were observed
    #[arg(long)]
    pub error_target: Option<u64>,
    /// Starting biased probability (default: p of the first point)
    #[arg(long)]
    pub q0: Option<f64>,
    /// Number of q updates
    #[arg(long, default_value_t = 1)]
    pub l: usize,
    /// Words per q update and per stop-rule check
    #[arg(long, default_value_t = 1_000)]
    pub batch: u64,
    /// Error-correcting capability for is-invariant (default: from the decoder)
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("did not converge: {0}")]
    NonConvergence(String),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::EmptyBatches { .. } => CliError::NonConvergence(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ExactError> for CliError {
    fn from(e: ExactError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Builds a code from `hamming:R`, `repetition:N`, `alist:PATH` or `matrix:PATH`.
pub fn load_code(spec: &str) -> Result<LinearCode, CliError> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| config(format!("code spec '{spec}' must look like KIND:ARG")))?;
    let number = || {
        arg.parse::<usize>()
            .map_err(|_| config(format!("'{arg}' in code spec is not a nonnegative integer")))
    };
    let read = |path: &str| {
        std::fs::read_to_string(Path::new(path)).map_err(|e| config(format!("reading {path}: {e}")))
    };
    let code = match kind {
        "hamming" => make_hamming(number()?),
        "repetition" => make_repetition(number()?),
        "alist" => parse_alist(&read(arg)?).map(|c| c.with_name(arg)),
        "matrix" => parse_matrix_file(&read(arg)?).map(|c| c.with_name(arg)),
        _ => return Err(config(format!("unknown code kind '{kind}'"))),
    };
    code.map_err(|e| config(e.to_string()))
}

/// Builds a decoder from `syndrome`, `bounded:T` or `bitflip:ITERS`.
pub fn build_decoder(code: &LinearCode, spec: &str) -> Result<Decoder, CliError> {
    let (kind, arg) = match spec.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (spec, None),
    };
    let number = |what: &str| -> Result<usize, CliError> {
        arg.ok_or_else(|| config(format!("decoder '{kind}' needs {what}")))?
            .parse()
            .map_err(|_| {
                config(format!(
                    "decoder '{spec}': {what} must be a nonnegative integer"
                ))
            })
    };
    let decoder = match kind {
        "syndrome" if arg.is_none() => Decoder::syndrome_table(code),
        "bounded" => Decoder::bounded_distance(code, number("a capability T")?),
        "bitflip" => Decoder::bit_flip(code, number("an iteration count")?),
        _ => return Err(config(format!("unknown decoder '{spec}'"))),
    };
    decoder.map_err(|e| config(e.to_string()))
}

/// `START:STOP:STEP` inclusive of `STOP` up to rounding.
pub fn parse_snr_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| config(format!("snr range '{spec}' must be START:STOP:STEP")))?;
    let [a, b, step] = parts[..] else {
        return Err(config(format!(
            "snr range '{spec}' must be START:STOP:STEP"
        )));
    };
    if !(a.is_finite() && b.is_finite() && step > 0.0 && step.is_finite()) || b < a {
        return Err(config(format!(
            "snr range '{spec}' needs STOP >= START and STEP > 0"
        )));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 10_000 {
        return Err(config(format!("snr range '{spec}' has {count} points")));
    }
    Ok((0..count)
        .map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// Sweep points as `(ebn0_db, p)`.
fn sweep_points(args: &RunArgs, code: &LinearCode) -> Result<Vec<(Option<f64>, f64)>, CliError> {
    let points: Vec<(Option<f64>, f64)> = match (&args.snr, &args.p_list) {
        (Some(spec), None) => parse_snr_range(spec)?
            .into_iter()
            .map(|db| snr_to_p(db, code.rate()).map(|p| (Some(db), p)))
            .collect::<Result<_, _>>()
            .map_err(|e| config(e.to_string()))?,
        (None, Some(list)) => list.iter().map(|&p| (None, p)).collect(),
        _ => return Err(config("give exactly one of --snr or --p-list")),
    };
    if points.is_empty() {
        return Err(config("empty sweep"));
    }
    for &(db, p) in &points {
        if !(p > 0.0 && p < 1.0) {
            return Err(config(match db {
                Some(db) => format!("Eb/N0 {db} dB maps to p = {p}, outside (0, 1)"),
                None => format!("p = {p} outside (0, 1)"),
            }));
        }
    }
    Ok(points)
}

fn stop_rule(args: &RunArgs) -> Result<StopRule, CliError> {
    let stop = StopRule {
        target_kappa: args.kappa,
        min_words: args.min_words,
        max_words: args.max_words,
        target_error_count: args.error_target,
    };
    stop.validate()?;
    Ok(stop)
}

fn sharding(args: &RunArgs) -> Result<Sharding, CliError> {
    if args.workers == 0 || args.batch == 0 {
        return Err(config("--workers and --batch must be positive"));
    }
    Ok(Sharding {
        workers: args.workers,
        batch: args.batch,
    })
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Serialize)]
struct EstimateRecord<'a> {
    command: &'a str,
    code: &'a str,
    decoder: String,
    ebn0_db: Option<f64>,
    p: f64,
    wer: f64,
    kappa: Option<f64>,
    words: u64,
    q_used: f64,
    seed: u64,
    method: crate::estimators::Method,
    estimation_words: u64,
    errors: u64,
    q_trace: &'a [f64],
    q_clamped: bool,
    stop_reason: StopReason,
    generator: &'a str,
    stream_ids: &'a [u64],
    workers: usize,
    per_weight: &'a [WeightTally],
}

struct Emitter<'w, W: Write> {
    out: &'w mut W,
    format: Format,
    header_done: bool,
}

impl<'w, W: Write> Emitter<'w, W> {
    fn new(out: &'w mut W, format: Format) -> Self {
        Emitter {
            out,
            format,
            header_done: false,
        }
    }

    fn header(&mut self, header: &str) -> std::io::Result<()> {
        if self.format == Format::Csv && !self.header_done {
            writeln!(self.out, "{header}")?;
        }
        self.header_done = true;
        Ok(())
    }

    fn json(&mut self, v: &impl Serialize) -> std::io::Result<()> {
        let line = serde_json::to_string(v).map_err(std::io::Error::other)?;
        writeln!(self.out, "{line}")
    }

    fn estimate(
        &mut self,
        command: &str,
        code: &LinearCode,
        decoder: &Decoder,
        ebn0_db: Option<f64>,
        r: &EstimateReport,
    ) -> std::io::Result<()> {
        self.header(CSV_HEADER)?;
        match self.format {
            Format::Csv => writeln!(
                self.out,
                "{},{},{},{},{},{},{}",
                ebn0_db.map(|d| d.to_string()).unwrap_or_default(),
                num(r.p),
                num(r.wer),
                opt_num(r.kappa),
                r.words_generated,
                num(r.q_used),
                r.seed
            ),
            Format::Json => self.json(&EstimateRecord {
                command,
                code: code.name(),
                decoder: decoder.describe(),
                ebn0_db,
                p: r.p,
                wer: r.wer,
                kappa: r.kappa,
                words: r.words_generated,
                q_used: r.q_used,
                seed: r.seed,
                method: r.method,
                estimation_words: r.estimation_words,
                errors: r.errors,
                q_trace: &r.q_trace,
                q_clamped: r.q_clamped,
                stop_reason: r.stop_reason,
                generator: &r.generator,
                stream_ids: &r.stream_ids,
                workers: r.workers,
                per_weight: &r.per_weight,
            }),
        }
    }
}

/// Exit status and diagnostics of a completed run.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    /// Points that stopped at `max_words` before reaching the target kappa.
    pub unconverged: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.unconverged.is_empty() {
            0
        } else {
            3
        }
    }
}

fn note_stop(outcome: &mut Outcome, r: &EstimateReport) {
    if r.stop_reason == StopReason::MaxWords {
        outcome.unconverged.push(r.p);
    }
}

/// Runs a parsed command, writing records to `out`.
pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<Outcome, CliError> {
    let (name, args) = match &cli.command {
        Command::Mc(a) => ("mc", a),
        Command::Is(a) => ("is", a),
        Command::IsInvariant(a) => ("is-invariant", a),
        Command::EstimateT(a) => ("estimate-t", a),
        Command::Exact(a) => ("exact", a),
    };
    let code = load_code(&args.code)?;
    let decoder = build_decoder(&code, &args.decoder)?;
    let points = sweep_points(args, &code)?;
    let sharding = sharding(args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .map_err(|e| config(e.to_string()))?;
    let mut emit = Emitter::new(out, args.format);
    let mut outcome = Outcome::default();
    {
        match &cli.command {
            Command::Mc(_) => {
                let stop = stop_rule(args)?;
                for (k, &(db, p)) in points.iter().enumerate() {
                    let mut stream = crate::channel::RandomStream::new(args.seed, k as u64);
                    let r = pool.install(|| run_mc(&decoder, p, &stop, &mut stream, &sharding))?;
                    note_stop(&mut outcome, &r);
                    emit.estimate(name, &code, &decoder, db, &r)?;
                }
            }
            Command::Is(_) => {
                let stop = stop_rule(args)?;
                let cfg = ISConfig {
                    q0: args.q0.unwrap_or(points[0].1),
                    l: args.l,
                    words_per_iteration: args.batch,
                };
                let ps: Vec<f64> = points.iter().map(|x| x.1).collect();
                let reports = pool
                    .install(|| sweep_is_basic(&decoder, &ps, &cfg, &stop, args.seed, &sharding))?;
                for (r, &(db, _)) in reports.iter().zip(&points) {
                    note_stop(&mut outcome, r);
                    emit.estimate(name, &code, &decoder, db, r)?;
                }
            }
            Command::IsInvariant(_) => {
                let stop = stop_rule(args)?;
                let t = args
                    .t
                    .or(decoder.t_declared())
                    .or(code.t_known())
                    .ok_or_else(|| {
                        config("t unknown for this decoder; pass --t (see estimate-t)")
                    })?;
                let ps: Vec<f64> = points.iter().map(|x| x.1).collect();
                let mut stream = crate::channel::RandomStream::new(args.seed, 0);
                let reports = pool.install(|| {
                    run_is_invariant(&decoder, t, &ps, &stop, &mut stream, &sharding)
                })?;
                if let Some(r) = reports.first() {
                    note_stop(&mut outcome, r);
                }
                for (r, &(db, _)) in reports.iter().zip(&points) {
                    emit.estimate(name, &code, &decoder, db, r)?;
                }
            }
            Command::EstimateT(_) => {
                if points.len() != 1 {
                    return Err(config("estimate-t takes a single channel probability"));
                }
                let p = points[0].1;
                let cfg = ISConfig {
                    q0: args.q0.unwrap_or(0.5),
                    l: args.l,
                    words_per_iteration: args.batch,
                };
                let mut stream = crate::channel::RandomStream::new(args.seed, 0);
                let te = pool.install(|| estimate_t(&decoder, p, &cfg, &mut stream, &sharding))?;
                if te.np_warning {
                    outcome.warnings.push(format!(
                        "n*p = {} is not small; the estimate of t may be off",
                        decoder.n() as f64 * p
                    ));
                }
                emit.header(T_CSV_HEADER)?;
                match args.format {
                    Format::Csv => writeln!(
                        emit.out,
                        "{},{},{},{},{}",
                        num(p),
                        te.t,
                        num(te.q_hat),
                        te.words,
                        args.seed
                    )?,
                    Format::Json => emit.json(&json!({
                        "command": name,
                        "code": code.name(),
                        "decoder": decoder.describe(),
                        "p": p,
                        "t": te.t,
                        "q_hat": te.q_hat,
                        "words": te.words,
                        "q_trace": te.trace,
                        "np_warning": te.np_warning,
                        "seed": args.seed,
                    }))?,
                }
            }
            Command::Exact(_) => run_exact(&mut emit, name, &code, &decoder, &points, &pool)?,
        }
    }
    Ok(outcome)
}

fn run_exact<W: Write>(
    emit: &mut Emitter<W>,
    name: &str,
    code: &LinearCode,
    decoder: &Decoder,
    points: &[(Option<f64>, f64)],
    pool: &rayon::ThreadPool,
) -> Result<(), CliError> {
    let profile = pool.install(|| error_profile(decoder))?;
    let n = profile.n();
    let grid: Vec<f64> = (1..1000).map(|k| k as f64 / 1000.0).collect();
    let cert = convexity_certificate(n, &grid);
    let mut rows = Vec::with_capacity(points.len());
    for &(db, p) in points {
        let wer = exact_wer(&profile, p)?;
        let (am, fp) = if profile.has_errors() {
            (
                Some(argmin_q(&profile, p)?),
                Some(fixed_point_q(&profile, p)?.q),
            )
        } else {
            (None, None)
        };
        rows.push((db, p, wer, am, fp));
    }
    match emit.format {
        Format::Csv => {
            let counts: Vec<String> = profile.counts().iter().map(|c| c.to_string()).collect();
            writeln!(emit.out, "# code: {}", code.name())?;
            writeln!(emit.out, "# decoder: {}", decoder.describe())?;
            writeln!(emit.out, "# counts: {}", counts.join(" "))?;
            writeln!(emit.out, "# t_effective: {}", profile.t_effective())?;
            writeln!(
                emit.out,
                "# convexity: {}",
                if cert.holds { "holds" } else { "violated" }
            )?;
            emit.header(EXACT_CSV_HEADER)?;
            for (db, p, wer, am, fp) in rows {
                writeln!(
                    emit.out,
                    "{},{},{},{},{}",
                    db.map(|d| d.to_string()).unwrap_or_default(),
                    num(p),
                    num(wer),
                    opt_num(am),
                    opt_num(fp)
                )?;
            }
        }
        Format::Json => {
            let pts: Vec<Value> = rows
                .into_iter()
                .map(|(db, p, wer, am, fp)| {
                    json!({"ebn0_db": db, "p": p, "wer": wer, "argmin_q": am, "fixed_point_q": fp})
                })
                .collect();
            emit.json(&json!({
                "command": name,
                "code": code.name(),
                "decoder": decoder.describe(),
                "profile": profile.to_json(),
                "convexity": cert,
                "points": pts,
            }))?;
        }
    }
    Ok(())
}

/// Parses `args`, runs, and returns the process exit status. Records go to
/// `out`, diagnostics to `err`.
pub fn main_with<I, T, W, E>(args: I, out: &mut W, err: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli, out) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            if !outcome.unconverged.is_empty() {
                let ps: Vec<String> = outcome.unconverged.iter().map(|p| num(*p)).collect();
                let _ = writeln!(
                    err,
                    "warning: target kappa not reached within max words at p = {}",
                    ps.join(", ")
                );
            }
            outcome.exit_code()
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
