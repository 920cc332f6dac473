//! Command-line front end: argument and config-file handling, and dispatch
//! of each subcommand to the library.
//!
//! Every command is a pure function of its input files and options. Outputs
//! echo the seed and tolerances that produced them.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    canonical_dual, frame_bounds, is_untf, monte_carlo_mse, mse_closed_form, tight_constant, DualFrame,
    NoiseDistribution, NoiseModel,
};
use crate::completion::{complete_frame, CompletionOptions, CompletionProblem};
use crate::eigensteps::{
    inner_to_outer, outer_to_inner, sample_eigensteps, validate_inner, validate_outer, InnerEigenstepTable,
    NormSequence, OuterEigenstepTable,
};
use crate::error::{Error, Result};
use crate::io::{self, FrameJson, InnerTableJson, OuterTableJson};
use crate::numerics::{Matrix, Spectrum, TOL_CANCEL};
use crate::report::ValidationReport;
use crate::synthesis::{construct_frame, verify_frame_tol, Frame, VERIFY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Check an eigenstep table against its defining clauses.
    Validate,
    /// Convert between outer and inner eigenstep tables.
    Convert,
    /// Draw an outer eigenstep table for a spectrum and norm sequence.
    Sample,
    /// Build a frame from an outer eigenstep table.
    Synth,
    /// Check a frame against an outer eigenstep table.
    Verify,
    /// Frame bounds, tightness and canonical-dual MSE of a frame.
    Analyze,
    /// Monte-Carlo reconstruction error under additive noise.
    Simulate,
    /// Append vectors of prescribed norms minimizing the MSE.
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    #[default]
    Outer,
    Inner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    Gaussian,
    Uniform,
}

#[derive(Debug, Subcommand, Clone, Copy)]
pub enum Sub {
    /// Check an eigenstep table against its defining clauses.
    Validate,
    /// Convert between outer and inner eigenstep tables.
    Convert,
    /// Draw an outer eigenstep table for a spectrum and norm sequence.
    Sample,
    /// Build a frame from an outer eigenstep table.
    Synth,
    /// Check a frame (--input) against an outer eigenstep table (--table).
    Verify,
    /// Frame bounds, tightness and canonical-dual MSE of a frame.
    Analyze,
    /// Monte-Carlo reconstruction error under additive noise.
    Simulate,
    /// Append vectors of prescribed norms minimizing the MSE.
    Complete,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Validate => Command::Validate,
            Sub::Convert => Command::Convert,
            Sub::Sample => Command::Sample,
            Sub::Synth => Command::Synth,
            Sub::Verify => Command::Verify,
            Sub::Analyze => Command::Analyze,
            Sub::Simulate => Command::Simulate,
            Sub::Complete => Command::Complete,
        }
    }
}

/// Eigenstep frames: construction, verification, MSE analysis and completion.
#[derive(Debug, Parser)]
#[command(name = "eigenframe", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    #[command(flatten)]
    pub flags: Flags,
}

/// Options shared by all subcommands. Every field is optional so that a
/// config file can supply it; flags given on the command line win.
#[derive(Debug, Clone, Default, clap::Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    /// Optional JSON config file mirroring these flags.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Primary input file (table or frame).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Outer eigenstep table for `verify`.
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
    /// Initial orthonormal basis for `synth` (M x M CSV); identity by default.
    #[arg(long, global = true)]
    pub u1: Option<PathBuf>,
    /// Dual frame for `simulate`; the canonical dual by default.
    #[arg(long, global = true)]
    pub dual: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub sigma2: Option<f64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Brute-force samples for the completion oracle.
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Compare the completion against the brute-force oracle.
    #[arg(long, global = true)]
    pub oracle: bool,
    /// Print 4 decimals instead of full precision.
    #[arg(long, global = true)]
    pub pretty: bool,
    #[arg(long, global = true, value_enum)]
    pub kind: Option<TableKind>,
    /// Target dimension M when converting inner tables to outer ones.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub noise: Option<Noise>,
    /// Final spectrum for `sample`, e.g. "5/3,5/3,5/3".
    #[arg(long, global = true, value_parser = parse_list_arg)]
    pub lambda: Option<NumList>,
    /// Squared norms of the frame vectors (sample, validate, convert, synth).
    #[arg(long, global = true, value_parser = parse_list_arg)]
    pub mu: Option<NumList>,
    /// Squared norms of the vectors appended by `complete`.
    #[arg(long, global = true, value_parser = parse_list_arg)]
    pub norms: Option<NumList>,
}

/// A list of numbers given as one comma-separated argument, or as a JSON
/// array in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NumList(pub Vec<f64>);

fn parse_list_arg(s: &str) -> std::result::Result<NumList, String> {
    io::parse_list(s, "argument").map(NumList).map_err(|e| e.to_string())
}

/// Fully resolved options for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub u1: Option<PathBuf>,
    pub dual: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub tol: Option<f64>,
    pub sigma2: f64,
    pub trials: Option<u64>,
    pub samples: u64,
    pub restarts: usize,
    pub oracle: bool,
    pub pretty: bool,
    pub kind: TableKind,
    pub dim: Option<usize>,
    pub noise: NoiseDistribution,
    pub lambda: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub norms: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig::resolve(command, Flags::default(), Flags::default())
    }

    /// Merges command-line flags over config-file values over defaults.
    pub fn resolve(command: Command, flags: Flags, file: Flags) -> Self {
        let noise = match flags.noise.or(file.noise) {
            Some(Noise::Uniform) => NoiseDistribution::Uniform,
            _ => NoiseDistribution::Gaussian,
        };
        RunConfig {
            command,
            input: flags.input.or(file.input),
            table: flags.table.or(file.table),
            u1: flags.u1.or(file.u1),
            dual: flags.dual.or(file.dual),
            output: flags.output.or(file.output),
            format: flags.format.or(file.format).unwrap_or_default(),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            tol: flags.tol.or(file.tol),
            sigma2: flags.sigma2.or(file.sigma2).unwrap_or(1.0),
            trials: flags.trials.or(file.trials),
            samples: flags.samples.or(file.samples).unwrap_or(100_000),
            restarts: flags.restarts.or(file.restarts).unwrap_or(8),
            oracle: flags.oracle || file.oracle,
            pretty: flags.pretty || file.pretty,
            kind: flags.kind.or(file.kind).unwrap_or_default(),
            dim: flags.dim.or(file.dim),
            noise,
            lambda: flags.lambda.or(file.lambda).map(|l| l.0),
            mu: flags.mu.or(file.mu).map(|l| l.0),
            norms: flags.norms.or(file.norms).map(|l| l.0),
        }
    }

    pub fn from_cli(cli: Cli) -> Result<Self> {
        let file = match &cli.flags.config {
            Some(path) => {
                let text = read(path)?;
                serde_json::from_str::<Flags>(&text).map_err(|e| Error::Parse {
                    source_name: path.display().to_string(),
                    message: e.to_string(),
                })?
            }
            None => Flags::default(),
        };
        Ok(RunConfig::resolve(cli.command.into(), cli.flags, file))
    }
}

/// Result of one invocation: process status and text for standard output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub status: i32,
    pub stdout: String,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::InvalidInput(format!("missing --{flag}")))
}

/// Input files are read as JSON when they look like JSON, whatever `--format`
/// says; that flag only selects the output format.
fn is_json(text: &str) -> bool {
    text.trim_start().starts_with('{')
}

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

fn load_frame(path: &Path) -> Result<Frame> {
    let text = read(path)?;
    if is_json(&text) {
        serde_json::from_str::<FrameJson>(&text)
            .map_err(|e| Error::Parse {
                source_name: source_name(path),
                message: e.to_string(),
            })?
            .into_frame()
    } else {
        io::frame_from_csv(&text, &source_name(path))
    }
}

fn load_outer(path: &Path, mu: Option<&[f64]>) -> Result<OuterEigenstepTable> {
    let text = read(path)?;
    if is_json(&text) {
        let mut parsed: OuterTableJson = serde_json::from_str(&text).map_err(|e| Error::Parse {
            source_name: source_name(path),
            message: e.to_string(),
        })?;
        if let Some(mu) = mu {
            parsed.mu = mu.to_vec();
        }
        parsed.into_table()
    } else {
        io::outer_from_csv(&text, &source_name(path), mu)
    }
}

fn load_inner(path: &Path, mu: Option<&[f64]>) -> Result<InnerEigenstepTable> {
    let text = read(path)?;
    if is_json(&text) {
        let mut parsed: InnerTableJson = serde_json::from_str(&text).map_err(|e| Error::Parse {
            source_name: source_name(path),
            message: e.to_string(),
        })?;
        if let Some(mu) = mu {
            parsed.mu = mu.to_vec();
        }
        parsed.into_table()
    } else {
        io::inner_from_csv(&text, &source_name(path), mu)
    }
}

fn meta(config: &RunConfig, tol: f64) -> Value {
    json!({
        "command": config.command,
        "seed": config.seed,
        "tol": tol,
        "cancel_tol": TOL_CANCEL,
    })
}

fn meta_line(config: &RunConfig, tol: f64) -> String {
    format!(
        "eigenframe {} seed={} tol={tol:e} cancel_tol={TOL_CANCEL:e}",
        serde_json::to_value(config.command)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        config.seed
    )
}

fn to_json(value: &Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Sends `text` to `--output` when given, otherwise to standard output.
fn emit(config: &RunConfig, text: String, status: i32) -> Result<RunOutput> {
    match &config.output {
        Some(path) => {
            write(path, &text)?;
            Ok(RunOutput {
                status,
                stdout: String::new(),
            })
        }
        None => Ok(RunOutput { status, stdout: text }),
    }
}

fn report_output(config: &RunConfig, report: &ValidationReport, tol: f64, extra: Value) -> Result<RunOutput> {
    let mut body = json!({ "report": report, "meta": meta(config, tol) });
    if let (Value::Object(map), Value::Object(more)) = (&mut body, extra) {
        map.extend(more);
    }
    // validation reports always go to standard output
    let text = to_json(&body)?;
    if let Some(path) = &config.output {
        write(path, &text)?;
    }
    Ok(RunOutput {
        status: if report.passed { 0 } else { 1 },
        stdout: text,
    })
}

fn frame_text(config: &RunConfig, frame: &Frame, tol: f64) -> Result<String> {
    match config.format {
        Format::Json => to_json(&json!({ "frame": FrameJson::from(frame), "meta": meta(config, tol) })),
        Format::Csv => Ok(io::frame_to_csv(frame, config.pretty, Some(&meta_line(config, tol)))),
    }
}

fn outer_text(config: &RunConfig, table: &OuterEigenstepTable, tol: f64) -> Result<String> {
    match config.format {
        Format::Json => to_json(&json!({ "table": OuterTableJson::from(table), "meta": meta(config, tol) })),
        Format::Csv => Ok(io::outer_to_csv(table, config.pretty, Some(&meta_line(config, tol)))),
    }
}

fn inner_text(config: &RunConfig, table: &InnerEigenstepTable, tol: f64) -> Result<String> {
    match config.format {
        Format::Json => to_json(&json!({ "table": InnerTableJson::from(table), "meta": meta(config, tol) })),
        Format::Csv => Ok(io::inner_to_csv(table, config.pretty, Some(&meta_line(config, tol)))),
    }
}

/// Executes one command. Errors are returned for malformed input and for
/// numerical failures; validation failures yield status 1 with a report.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    match config.command {
        Command::Validate => run_validate(config),
        Command::Convert => run_convert(config),
        Command::Sample => run_sample(config),
        Command::Synth => run_synth(config),
        Command::Verify => run_verify(config),
        Command::Analyze => run_analyze(config),
        Command::Simulate => run_simulate(config),
        Command::Complete => run_complete(config),
    }
}

fn run_validate(config: &RunConfig) -> Result<RunOutput> {
    let input = required(&config.input, "input")?;
    let mu = config.mu.as_deref();
    let (report, tol) = match config.kind {
        TableKind::Outer => {
            let t = load_outer(input, mu)?;
            let tol = config.tol.unwrap_or_else(|| crate::eigensteps::table_tolerance(t.mu()));
            (crate::eigensteps::validate_outer_tol(&t, tol), tol)
        }
        TableKind::Inner => {
            let t = load_inner(input, mu)?;
            let tol = config.tol.unwrap_or_else(|| crate::eigensteps::table_tolerance(t.mu()));
            (crate::eigensteps::validate_inner_tol(&t, tol), tol)
        }
    };
    report_output(config, &report, tol, json!({ "kind": config.kind }))
}

fn run_convert(config: &RunConfig) -> Result<RunOutput> {
    let input = required(&config.input, "input")?;
    let mu = config.mu.as_deref();
    match config.kind {
        TableKind::Outer => {
            let t = load_outer(input, mu)?;
            let report = validate_outer(&t);
            if !report.passed {
                return report_output(config, &report, crate::eigensteps::table_tolerance(t.mu()), json!({}));
            }
            let inner = outer_to_inner(&t)?;
            emit(config, inner_text(config, &inner, crate::eigensteps::table_tolerance(t.mu()))?, 0)
        }
        TableKind::Inner => {
            let dim = config
                .dim
                .ok_or_else(|| Error::InvalidInput("converting an inner table needs --dim".into()))?;
            let t = load_inner(input, mu)?;
            let report = validate_inner(&t);
            if !report.passed {
                return report_output(config, &report, crate::eigensteps::table_tolerance(t.mu()), json!({}));
            }
            let outer = inner_to_outer(&t, dim)?;
            emit(config, outer_text(config, &outer, crate::eigensteps::table_tolerance(t.mu()))?, 0)
        }
    }
}

fn run_sample(config: &RunConfig) -> Result<RunOutput> {
    let lambda = config
        .lambda
        .clone()
        .ok_or_else(|| Error::InvalidInput("missing --lambda".into()))?;
    let mu = config.mu.clone().ok_or_else(|| Error::InvalidInput("missing --mu".into()))?;
    let lambda = Spectrum::new(lambda)?;
    let mu = NormSequence::new(mu)?;
    let table = sample_eigensteps(&lambda, &mu, config.seed)?;
    emit(config, outer_text(config, &table, crate::eigensteps::table_tolerance(&mu))?, 0)
}

fn run_synth(config: &RunConfig) -> Result<RunOutput> {
    let input = required(&config.input, "input")?;
    let table = load_outer(input, config.mu.as_deref())?;
    let u1 = match &config.u1 {
        Some(path) => io::parse_matrix(&read(path)?, &source_name(path))?,
        None => Matrix::identity(table.dim(), table.dim()),
    };
    let report = validate_outer(&table);
    if !report.passed {
        return report_output(config, &report, crate::eigensteps::table_tolerance(table.mu()), json!({}));
    }
    let frame = construct_frame(&table, &u1)?;
    emit(config, frame_text(config, &frame, TOL_CANCEL)?, 0)
}

fn run_verify(config: &RunConfig) -> Result<RunOutput> {
    let input = required(&config.input, "input")?;
    let table_path = required(&config.table, "table")?;
    let frame = load_frame(input)?;
    let table = load_outer(table_path, config.mu.as_deref())?;
    let tol = config.tol.unwrap_or(VERIFY_TOL);
    let report = verify_frame_tol(&frame, &table, tol)?;
    report_output(config, &report, tol, json!({}))
}

fn noise_model(config: &RunConfig) -> Result<NoiseModel> {
    NoiseModel::new(config.sigma2, config.noise, config.seed)
}

fn run_analyze(config: &RunConfig) -> Result<RunOutput> {
    let input = required(&config.input, "input")?;
    let frame = load_frame(input)?;
    let tol = config.tol.unwrap_or(ANALYZE_TOL);
    let noise = noise_model(config)?;
    let (lower, upper) = frame_bounds(&frame)?;
    let mse = match mse_closed_form(&frame, &noise) {
        Ok(v) => json!(v),
        Err(Error::Singular { .. }) => Value::Null,
        Err(e) => return Err(e),
    };
    let mut body = json!({
        "frame_bounds": { "lower": lower, "upper": upper },
        "is_frame": lower > crate::numerics::TOL_EIG,
        "is_untf": is_untf(&frame, tol)?,
        "tight_constant": tight_constant(&frame, tol)?,
        "sigma2": noise.sigma2(),
        "mse_closed_form": mse,
    });
    if let Some(trials) = config.trials {
        let dual = canonical_dual(&frame)?;
        let mc = monte_carlo_mse(&frame, &dual, &noise, trials)?;
        body["monte_carlo"] = json!({
            "estimate": mc.estimate,
            "stderr": mc.stderr,
            "trials": mc.trials,
            "seed": mc.seed,
            "noise": noise.distribution(),
        });
    }
    body["meta"] = meta(config, tol);
    emit(config, to_json(&body)?, 0)
}

/// Default tightness tolerance of `analyze`; loose enough for frames printed
/// to four decimals.
pub const ANALYZE_TOL: f64 = 1e-3;

fn run_simulate(config: &RunConfig) -> Result<RunOutput> {
    let input = required(&config.input, "input")?;
    let frame = load_frame(input)?;
    let noise = noise_model(config)?;
    let trials = config.trials.unwrap_or(10_000);
    let (dual, canonical) = match &config.dual {
        Some(path) => (DualFrame::new(load_frame(path)?.matrix().clone()), false),
        None => (canonical_dual(&frame)?, true),
    };
    let mc = monte_carlo_mse(&frame, &dual, &noise, trials)?;
    let closed = if canonical { Some(mse_closed_form(&frame, &noise)?) } else { None };
    let body = json!({
        "canonical_dual": canonical,
        "mse_closed_form": closed,
        "monte_carlo": {
            "estimate": mc.estimate,
            "stderr": mc.stderr,
            "trials": mc.trials,
            "seed": mc.seed,
            "noise": noise.distribution(),
            "sigma2": noise.sigma2(),
        },
        "meta": meta(config, config.tol.unwrap_or(1e-6)),
    });
    emit(config, to_json(&body)?, 0)
}

fn run_complete(config: &RunConfig) -> Result<RunOutput> {
    let input = required(&config.input, "input")?;
    let initial = load_frame(input)?;
    let norms = config
        .norms
        .clone()
        .ok_or_else(|| Error::InvalidInput("missing --norms".into()))?;
    let options = CompletionOptions {
        grid_step: None,
        restarts: config.restarts,
        seed: config.seed,
        tol: config.tol.unwrap_or(1e-6),
        oracle_samples: config.oracle.then_some(config.samples),
    };
    let tol = options.tol;
    let problem = CompletionProblem::new(initial, norms, options)?;
    let result = complete_frame(&problem)?;
    let finite = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
    let body = json!({
        "appended": result.appended,
        "completed": FrameJson::from(&result.completed),
        "final_spectrum": result.final_spectrum,
        "objective": finite(result.objective),
        "chain": result.chain,
        "insertion_order": result.insertion_order,
        "certificate": result.certificate.as_ref().map(|c| json!({
            "oracle_objective": finite(c.oracle_objective),
            "samples": c.samples,
            "seed": c.seed,
            "dominates": c.dominates,
        })),
        "meta": meta(config, tol),
    });
    if let Some(path) = &config.output {
        let frame_path = path.with_extension("frame.csv");
        write(&frame_path, &io::frame_to_csv(&result.completed, config.pretty, Some(&meta_line(config, tol))))?;
    }
    emit(config, to_json(&body)?, 0)
}
