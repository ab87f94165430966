//! Batch front end for `indefla-core`.
//!
//! A run reads a key-value configuration, applies `--key value` overrides,
//! dispatches one subcommand and writes `report.json`, CSV tables and
//! gnuplot scripts into the output directory.

pub mod commands;
pub mod config;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

use indefla_core::{Error, Result, Schedule};
use serde_json::json;

pub use commands::{execute, Command};
pub use config::{build_config, parse_config, parse_document, FieldSolver, RunConfig};
pub use output::{error_json, Artifacts, SCHEMA_VERSION};

/// Exit status for an error: 2 for malformed input, 1 for domain failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. }
        | Error::Validation { .. }
        | Error::InvalidGeometry(_)
        | Error::InvalidContrast(_)
        | Error::InvalidSource(_)
        | Error::WindowTooSmall { .. }
        | Error::WindowOutOfRange { .. }
        | Error::InvalidDeltaGrid(_)
        | Error::InvalidGrid(_) => 2,
        _ => 1,
    }
}

/// Config path plus `(key, value)` overrides.
pub type Invocation = (Option<PathBuf>, Vec<(String, String)>);

/// Splits trailing arguments into an optional config path and overrides.
/// Accepts `--key value` and `--key=value`.
pub fn split_args(args: &[String]) -> Result<Invocation> {
    let mut path = None;
    let mut overrides = Vec::new();
    let mut it = args.iter().peekable();
    if let Some(first) = it.peek() {
        if !first.starts_with("--") {
            path = Some(PathBuf::from(it.next().unwrap()));
        }
    }
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            return Err(Error::Validation {
                field: arg.clone(),
                message: "expected `--key value` after the config path".into(),
            });
        };
        let (key, value) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| Error::Validation {
                    field: body.to_string(),
                    message: "missing value".into(),
                })?;
                (body.to_string(), v.clone())
            }
        };
        overrides.push((key, value));
    }
    Ok((path, overrides))
}

/// Reads, overrides and validates a configuration. `out_override` replaces
/// `out_dir` (the `INDEFLA_OUT` variable).
pub fn load_config(path: Option<&Path>, overrides: &[(String, String)], out_override: Option<&str>) -> Result<RunConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::Validation {
            field: "config".into(),
            message: format!("cannot read {}: {e}", p.display()),
        })?,
        None => String::new(),
    };
    let mut entries = parse_document(&text)?;
    config::apply_overrides(&mut entries, overrides)?;
    let mut cfg = build_config(&entries)?;
    if let Some(out) = out_override {
        cfg.out_dir = out.to_string();
    }
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    /// JSON printed to stdout: the error object, or the list of written files.
    pub stdout: String,
    pub written: Vec<PathBuf>,
}

/// Loads the configuration, executes `cmd` and writes the artifacts.
pub fn run(cmd: Command, args: &[String], out_override: Option<&str>, schedule: Schedule) -> Outcome {
    let fail = |e: &Error, written: Vec<PathBuf>| Outcome {
        code: exit_code(e),
        stdout: output::pretty(&error_json(e)),
        written,
    };
    let cfg = match split_args(args).and_then(|(p, o)| load_config(p.as_deref(), &o, out_override)) {
        Ok(c) => c,
        Err(e) => return fail(&e, Vec::new()),
    };
    let dir = PathBuf::from(&cfg.out_dir);
    let io_err = |e: std::io::Error| Error::Validation {
        field: "out_dir".into(),
        message: format!("cannot write {}: {e}", dir.display()),
    };
    match execute(&cfg, cmd, schedule) {
        Ok(art) => match art.write_all(&dir) {
            Ok(written) => {
                let names: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
                Outcome {
                    code: 0,
                    stdout: output::pretty(&json!({ "schema_version": SCHEMA_VERSION, "written": names })),
                    written,
                }
            }
            Err(e) => fail(&io_err(e), Vec::new()),
        },
        Err(e) => {
            // domain failures still leave a report behind
            let mut obj = error_json(&e);
            obj["command"] = json!(cmd.name());
            obj["config"] = output::to_json(&cfg);
            let mut art = Artifacts::default();
            art.add("report.json", output::pretty(&obj));
            let written = art.write_all(&dir).unwrap_or_default();
            fail(&e, written)
        }
    }
}
