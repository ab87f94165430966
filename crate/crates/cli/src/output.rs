//! CSV, JSON and gnuplot rendering. Everything is built in memory and written
//! once at the end of a run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use indefla_core::{Error, ScaledValue};
use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e15)` so huge or tiny values stay compact.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let a = x.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Native float for a scaled value, clamped to the largest finite `f64`.
/// The flag is set when clamping happened.
pub fn clamp_scaled(v: ScaledValue) -> (f64, bool) {
    if v.overflows_f64() {
        let sign = if v < ScaledValue::ZERO { -1.0 } else { 1.0 };
        (sign * f64::MAX, true)
    } else {
        (v.to_f64(), false)
    }
}

#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let cells: Vec<String> = cells.into_iter().collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Files produced by one run, in write order.
#[derive(Debug, Default, Clone)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, content: impl Into<String>) {
        self.files.push((name.into(), content.into()));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write_all(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for (name, content) in &self.files {
            let p = dir.join(name);
            fs::write(&p, content)?;
            out.push(p);
        }
        Ok(out)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).unwrap_or(Value::Null)
}

pub fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values always serialize");
    s.push('\n');
    s
}

/// Structured error object with a stable `code`.
pub fn error_json(err: &Error) -> Value {
    let mut body = json!({
        "code": err.code(),
        "message": err.to_string(),
    });
    let obj = body.as_object_mut().expect("object literal");
    match err {
        Error::Parse { line, column, .. } => {
            obj.insert("line".into(), json!(line));
            obj.insert("column".into(), json!(column));
        }
        Error::Validation { field, .. } => {
            obj.insert("field".into(), json!(field));
        }
        Error::NotInRange { ratio, report } => {
            obj.insert("ratio".into(), json!(ratio));
            obj.insert("report".into(), to_json(report));
        }
        _ => {}
    }
    json!({ "schema_version": SCHEMA_VERSION, "error": body })
}

/// Log-log plot of one or more columns of a CSV against its first column.
pub fn gnuplot_script(title: &str, data: &str, xlabel: &str, ylabel: &str, logx: bool, logy: bool, series: &[(usize, &str)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    if logx {
        let _ = writeln!(s, "set logscale x");
    }
    if logy {
        let _ = writeln!(s, "set logscale y");
    }
    let parts: Vec<String> = series
        .iter()
        .map(|(col, label)| format!("'{data}' using 1:{col} with linespoints title '{label}'"))
        .collect();
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}
