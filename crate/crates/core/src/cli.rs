//! Front end of the `manifold-descent` binary.
//!
//! Exit codes: 0 on a completed run (divergence included), 2 on usage or
//! configuration errors, 3 when the run hit a non-finite value.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bench::{
    run_corpus_full, run_scenario_full, smallest_eigenvalue, EigenEstimate, MethodName, RunOptions,
    ScenarioResult,
};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::manifold::SphereRetraction;
use crate::optim::{IterateTrace, Termination};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Significant digits in table output.
const TABLE_DIGITS: usize = 8;

#[derive(Debug, Parser)]
#[command(
    name = "manifold-descent",
    version,
    about = "Riemannian descent methods on the builtin experiment corpus"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one method on a scenario, or estimate the smallest eigenvalue of a
    /// matrix file.
    Run(RunArgs),
    /// Run every (scenario, method) pair of the corpus.
    Corpus(CommonArgs),
    /// Print the per-iteration trace of a scenario run.
    Trace(RunArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Builtin scenario id (example1 … example9, example7p … example9p).
    #[arg(long, required_unless_present = "matrix", conflicts_with = "matrix")]
    pub scenario: Option<String>,
    /// JSON file `{"dim": m, "rows": [[...], ...]}` holding a symmetric matrix.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub method: String,
    /// Iteration budget (defaults to the scenario's own budget).
    #[arg(long)]
    pub iters: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Sphere retraction: projective or geodesic.
    #[arg(long)]
    pub retraction: Option<SphereRetraction>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub exponent_a: Option<f64>,
    /// Comma-separated New Q-Newton regularizers, e.g. `0,1`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub deltas: Option<Vec<f64>>,
    /// Learning rate for r_standard_gd.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Draw New Q-Newton regularizers at random from (0, 1].
    #[arg(long)]
    pub random_deltas: bool,
}

impl CommonArgs {
    pub fn options(&self, iters: Option<usize>) -> Result<RunOptions> {
        let mut o = RunOptions {
            iters,
            seed: self.seed,
            retraction: self.retraction,
            ..Default::default()
        };
        if let Some(a) = self.alpha {
            o.backtracking.alpha = a;
        }
        if let Some(b) = self.beta {
            o.backtracking.beta = b;
        }
        if let Some(d) = self.delta0 {
            o.backtracking.delta0 = d;
        }
        if let Some(a) = self.exponent_a {
            o.new_q_newton.exponent_a = a;
        }
        if let Some(d) = &self.deltas {
            o.new_q_newton.deltas = d.clone();
        }
        o.new_q_newton.random_deltas = self.random_deltas;
        if let Some(lr) = self.lr {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "lr must be nonnegative, got {lr}"
                )));
            }
            o.lr = lr;
        }
        if let Some(t) = self.grad_tol {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "grad-tol must be nonnegative, got {t}"
                )));
            }
            o.grad_tol = t;
        }
        o.backtracking.validate()?;
        o.new_q_newton.validate()?;
        Ok(o)
    }
}

/// On-disk matrix format.
#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixFile {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

pub fn load_matrix(path: &Path) -> Result<SymMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}

pub fn parse_matrix(text: &str) -> Result<SymMatrix> {
    let file: MatrixFile = serde_json::from_str(text)
        .map_err(|e| Error::InvalidParameter(format!("malformed matrix file: {e}")))?;
    if file.rows.len() != file.dim {
        return Err(Error::DimensionMismatch {
            expected: file.dim,
            actual: file.rows.len(),
        });
    }
    SymMatrix::from_rows(&file.rows)
}

/// `x` to `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.prec$e}", prec = digits - 1)
    }
}

/// Round-trip exact CSV float.
fn format_csv(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn point_table(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|&v| format_sig(v, TABLE_DIGITS)).collect();
    format!("({})", parts.join(", "))
}

fn flags_str(r: &ScenarioResult) -> String {
    let names: Vec<String> = r
        .flags
        .iter()
        .map(|f| {
            serde_json::to_value(f)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default()
        })
        .collect();
    if names.is_empty() {
        "-".into()
    } else {
        names.join("|")
    }
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

/// Renders scenario results in `format`.
pub fn render_results(results: &[ScenarioResult], format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(results)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from(
                "scenario_id,method,steps,final_value,termination,flags,final_point\n",
            );
            for r in results {
                let point: Vec<String> = r.final_point.iter().map(|&v| format_csv(v)).collect();
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    r.scenario_id,
                    r.method,
                    r.steps,
                    format_csv(r.final_value),
                    r.termination,
                    flags_str(r),
                    point.join(";")
                );
            }
            s
        }
        Format::Table => {
            let mut rows = vec![[
                "scenario",
                "method",
                "steps",
                "final_value",
                "termination",
                "flags",
                "final_point",
            ]
            .map(String::from)
            .to_vec()];
            for r in results {
                rows.push(vec![
                    r.scenario_id.clone(),
                    r.method.clone(),
                    r.steps.to_string(),
                    format_sig(r.final_value, TABLE_DIGITS),
                    r.termination.to_string(),
                    flags_str(r),
                    point_table(&r.final_point),
                ]);
            }
            aligned(&rows)
        }
    })
}

/// Trace as CSV with header `iter,f,grad_norm,step_size,x0,…`.
pub fn render_trace_csv(trace: &IterateTrace) -> String {
    let dim = trace.records[0].point.len();
    let mut s = String::from("iter,f,grad_norm,step_size");
    for i in 0..dim {
        let _ = write!(s, ",x{i}");
    }
    s.push('\n');
    for r in &trace.records {
        let _ = write!(
            s,
            "{},{},{},{}",
            r.iter,
            format_csv(r.f_value),
            format_csv(r.rgrad_norm),
            format_csv(r.step_size)
        );
        for &v in &r.point {
            let _ = write!(s, ",{}", format_csv(v));
        }
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct EigenReport<'a> {
    lambda1: f64,
    vector: &'a [f64],
    attempts: usize,
    result: &'a ScenarioResult,
}

fn render_eigen(e: &EigenEstimate, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => {
            let report = EigenReport {
                lambda1: e.lambda1,
                vector: &e.vector,
                attempts: e.attempts,
                result: &e.result,
            };
            let mut s = serde_json::to_string_pretty(&report)
                .map_err(|err| Error::InvalidParameter(err.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from("lambda1,attempts");
            for i in 0..e.vector.len() {
                let _ = write!(s, ",v{i}");
            }
            let _ = write!(s, "\n{},{}", format_csv(e.lambda1), e.attempts);
            for &v in &e.vector {
                let _ = write!(s, ",{}", format_csv(v));
            }
            s.push('\n');
            s
        }
        Format::Table => {
            let mut s = format!(
                "lambda1   {}\nvector    {}\nattempts  {}\n\n",
                format_sig(e.lambda1, TABLE_DIGITS),
                point_table(&e.vector),
                e.attempts
            );
            s.push_str(&render_results(
                std::slice::from_ref(&e.result),
                Format::Table,
            )?);
            s
        }
    })
}

fn exit_for(terminations: impl IntoIterator<Item = Termination>) -> i32 {
    if terminations
        .into_iter()
        .any(|t| t == Termination::NumericalFailure)
    {
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    }
}

fn exit_for_error(e: &Error) -> i32 {
    match e {
        Error::NonFinite(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let (text, code) = match cli.command {
        Command::Run(args) => {
            let opts = args.common.options(args.iters)?;
            match (&args.scenario, &args.matrix) {
                (Some(id), _) => {
                    let run = run_scenario_full(id, &args.method, &opts)?;
                    let code = exit_for([run.result.termination]);
                    (render_results(&[run.result], args.common.format)?, code)
                }
                (None, Some(path)) => {
                    let a = load_matrix(path)?;
                    let method: MethodName = args.method.parse()?;
                    let e = smallest_eigenvalue(&a, method, &opts)?;
                    let code = exit_for([e.result.termination]);
                    (render_eigen(&e, args.common.format)?, code)
                }
                (None, None) => {
                    return Err(Error::InvalidParameter(
                        "one of --scenario or --matrix is required".into(),
                    ))
                }
            }
        }
        Command::Corpus(common) => {
            let opts = common.options(None)?;
            let results: Vec<ScenarioResult> = run_corpus_full(&opts)?
                .into_iter()
                .map(|r| r.result)
                .collect();
            (render_results(&results, common.format)?, EXIT_OK)
        }
        Command::Trace(args) => {
            let id = args.scenario.as_deref().ok_or_else(|| {
                Error::InvalidParameter(
                    "trace needs --scenario; --matrix is only supported by run".into(),
                )
            })?;
            let opts = args.common.options(args.iters)?;
            let run = run_scenario_full(id, &args.method, &opts)?;
            let text = match args.common.format {
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&run.trace.records)
                        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    s.push('\n');
                    s
                }
                Format::Csv | Format::Table => render_trace_csv(&run.trace),
            };
            (text, exit_for([run.trace.termination]))
        }
    };
    out.write_all(text.as_bytes())
        .map_err(|e| Error::InvalidParameter(format!("write failed: {e}")))?;
    Ok(code)
}

/// Parses `args` (program name first) and runs the command, writing
/// reports to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_for_error(&e)
        }
    }
}
