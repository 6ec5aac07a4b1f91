//! The `ocmesh` command line: extraction, criteria ablation, view
//! consistency and the uniform-grid oracle. Every command writes one JSON
//! report; failures print a JSON error record on stderr.

pub mod args;
mod commands;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::Parser;
use ocmesh_core::Error;
use serde_json::{json, Value};

pub use args::{Cli, Command, Mode};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "OCMESH_THREADS";

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Malformed arguments.
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(_) => EXIT_FAILURE,
        }
    }

    /// Machine-readable form: `{"error": {"kind", "message", ...}}` with
    /// extra fields for some kinds.
    pub fn record(&self) -> Value {
        let mut rec = json!({});
        let kind = match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => match e {
                Error::Parse(p) => {
                    rec["line"] = json!(p.line);
                    rec["col"] = json!(p.col);
                    "parse"
                }
                Error::Config(_) => "config",
                Error::Precondition(_) => "precondition",
                Error::FineCellCap { cap, attempted } => {
                    rec["cap"] = json!(cap);
                    rec["attempted"] = json!(attempted);
                    "fine_cell_cap"
                }
                Error::LatticeDepth { level, max } => {
                    rec["level"] = json!(level);
                    rec["max"] = json!(max);
                    "lattice_depth"
                }
                Error::MissingVertex { .. } => "missing_vertex",
                Error::SizeMismatch(..) => "size_mismatch",
                Error::Io { path, .. } => {
                    rec["path"] = json!(path.display().to_string());
                    "io"
                }
                Error::Format { path, .. } => {
                    rec["path"] = json!(path.display().to_string());
                    "format"
                }
            },
        };
        rec["kind"] = json!(kind);
        rec["message"] = json!(self.to_string());
        json!({ "error": rec })
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Reads the thread cap; `None` when unset.
pub fn thread_cap() -> CliResult<Option<usize>> {
    let Some(raw) = std::env::var_os(THREADS_ENV) else {
        return Ok(None);
    };
    let text = raw.to_string_lossy();
    match text.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(Some(n)),
        _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{text}`")).into()),
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Extract(a) => commands::extract(&a),
        Command::Ablate(a) => commands::ablate(&a),
        Command::Consistency(a) => commands::consistency(&a),
        Command::OracleDc(a) => commands::oracle_dc(&a),
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => return fail(&CliError::Usage(e.to_string().trim_end().to_string())),
    };
    let result = thread_cap().and_then(|cap| {
        if let Some(n) = cap {
            // Fails only if a pool already exists, as in repeated in-process calls.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        execute(cli)
    });
    match result {
        Ok(()) => 0,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> i32 {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{}", e.record());
    e.exit_code()
}

/// Writes a report to `path`, or to stdout.
pub(crate) fn emit(report: &Value, path: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(report).expect("reports serialize");
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_name_kind_and_extras() {
        let r = CliError::from(Error::FineCellCap { cap: 10, attempted: 80 }).record();
        assert_eq!(r["error"]["kind"], "fine_cell_cap");
        assert_eq!(r["error"]["cap"], 10);
        assert_eq!(r["error"]["attempted"], 80);
        assert!(r["error"]["message"].as_str().unwrap().contains("80"));
        let r = CliError::Usage("bad".into()).record();
        assert_eq!(r["error"]["kind"], "usage");
        assert_eq!(CliError::Usage("bad".into()).exit_code(), EXIT_USAGE);
    }
}
