//! Batch driver for fracvar problem files.
//!
//! `run` loads a JSON problem, executes its task and writes `summary.json`,
//! `timings.json` and the task's CSV tables into the output directory.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation error, 3 numerical
//! failure (non-finite value or an expression evaluated outside its domain),
//! 4 solver did not converge (outputs are still written).
//!
//! The environment variable `FRACVAR_SEED` is reserved and ignored: every
//! task is deterministic.

pub mod schema;
mod tasks;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use fracvar_core::certify::CertifyError;
use fracvar_core::solver::SolveError;
use fracvar_core::varproblem::ProblemError;

pub use schema::{ProblemFile, Task};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid problem: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => EXIT_VALIDATION,
            Self::Numerical(_) => EXIT_NUMERICAL,
            Self::Io { .. } => EXIT_IO,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn problem(context: &str, e: ProblemError) -> Self {
        match e {
            ProblemError::Eval { .. } => Self::Numerical(format!("{context}: {e}")),
            other => Self::Validation(format!("{context}: {other}")),
        }
    }

    pub(crate) fn solve(context: &str, e: SolveError) -> Self {
        match e {
            SolveError::Problem(p) => Self::problem(context, p),
            SolveError::NonFinite { .. } => Self::Numerical(format!("{context}: {e}")),
            other => Self::Validation(format!("{context}: {other}")),
        }
    }

    pub(crate) fn certify(context: &str, e: CertifyError) -> Self {
        match e {
            CertifyError::Eval { .. } | CertifyError::Expr(_) => {
                Self::Numerical(format!("{context}: {e}"))
            }
            other => Self::Validation(format!("{context}: {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub n_cells: Option<usize>,
    pub quiet: bool,
}

/// A CSV table; every cell is preformatted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub(crate) fn from_columns(name: &str, columns: Vec<(String, Vec<f64>)>) -> Self {
        let len = columns.first().map_or(0, |c| c.1.len());
        debug_assert!(columns.iter().all(|c| c.1.len() == len));
        Self {
            name: name.to_string(),
            header: columns.iter().map(|c| c.0.clone()).collect(),
            rows: (0..len)
                .map(|i| columns.iter().map(|c| num(c.1[i])).collect())
                .collect(),
        }
    }
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}

/// What a task hands back to the driver.
#[derive(Debug, Default)]
pub(crate) struct TaskOutput {
    pub results: Value,
    pub tables: Vec<Table>,
    /// `Some(false)` maps to exit code 4.
    pub converged: Option<bool>,
    pub timings: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Summary<'a> {
    tool: &'static str,
    version: &'static str,
    task: &'static str,
    input_sha256: String,
    config: &'a ProblemFile,
    results: &'a Value,
    tables: Vec<String>,
    exit_code: i32,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads, validates and executes a problem file, writing results to `out_dir`.
pub fn run(problem_path: &Path, out_dir: &Path, opts: RunOptions) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let bytes = fs::read(problem_path).map_err(|e| CliError::io(problem_path, e))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Validation(format!("problem file is not UTF-8: {e}")))?;
    let problem = ProblemFile::from_json(text)
        .map_err(|e| CliError::Validation(format!("problem file: {e}")))?;
    if opts.n_cells == Some(0) {
        return Err(CliError::Validation("--n-cells must be at least 1".into()));
    }
    let resolved = problem.resolve(opts.n_cells);

    let output = tasks::execute(&resolved)?;
    let exit_code = if output.converged == Some(false) {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_OK
    };

    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut files = Vec::new();
    for table in &output.tables {
        let path = out_dir.join(&table.name);
        write_csv(&path, table)?;
        files.push(path);
    }

    let summary = Summary {
        tool: "fracvar",
        version: env!("CARGO_PKG_VERSION"),
        task: resolved.task.name(),
        input_sha256: sha256_hex(&bytes),
        config: &resolved,
        results: &output.results,
        tables: output.tables.iter().map(|t| t.name.clone()).collect(),
        exit_code,
    };
    let summary_value = serde_json::to_value(&summary).expect("summary serializes");
    let summary_path = out_dir.join("summary.json");
    write_json(&summary_path, &summary_value)?;
    files.push(summary_path);

    let mut timings = serde_json::Map::new();
    for (k, v) in &output.timings {
        timings.insert(k.clone(), json!(v));
    }
    timings.insert(
        "total_seconds".into(),
        json!(started.elapsed().as_secs_f64()),
    );
    let timings_path = out_dir.join("timings.json");
    write_json(&timings_path, &Value::Object(timings))?;
    files.push(timings_path);

    if !opts.quiet {
        println!(
            "{}: {} (exit {exit_code}); wrote {} file(s) to {}",
            resolved.task.name(),
            headline(&output.results),
            files.len(),
            out_dir.display()
        );
    }
    Ok(RunOutcome {
        exit_code,
        summary: summary_value,
        files,
    })
}

fn headline(results: &Value) -> String {
    [
        "J",
        "lambda",
        "residual_norm",
        "converged",
        "convex",
        "verdict",
        "pass",
        "value_at_b",
        "distance_strictly_decreasing",
    ]
    .iter()
    .filter_map(|k| results.get(*k).map(|v| format!("{k} = {v}")))
    .collect::<Vec<_>>()
    .join(", ")
}

fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let to_io = |e: csv::Error| CliError::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    w.write_record(&table.header).map_err(to_io)?;
    for row in &table.rows {
        w.write_record(row).map_err(to_io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
