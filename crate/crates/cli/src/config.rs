//! Key-value run configuration.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value        # trailing comments are allowed
//! ```
//!
//! Lists are comma-separated (`deltas = 1e-1, 1e-2, 1e-3, 1e-4`). Explicit
//! angular coefficients are written `h = m:re[:im], ...`.

use std::collections::BTreeMap;

use indefla_core::{
    default_delta_grid, AngularSpectrum, AnnularGeometry, Contrast, Error, Result, SourceSpec,
    DEFAULT_M_MAX,
};
use num_complex::Complex64;
use serde::Serialize;

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "r_i",
    "r_e",
    "R",
    "mu",
    "delta",
    "M_max",
    "margin",
    "tail_tol",
    "a",
    "b",
    "spectrum",
    "amplitude",
    "q",
    "s",
    "h",
    "m_lo",
    "m_hi",
    "window_lo",
    "window_hi",
    "deltas",
    "grid_points",
    "field_points",
    "mode",
    "out_dir",
    "field_solver",
];

/// Raw entry: value plus the position of the value for error reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
    pub column: usize,
}

/// Parses the document into raw entries, rejecting unknown and repeated keys.
pub fn parse_document(text: &str) -> Result<BTreeMap<String, Entry>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let column = raw.len() - raw.trim_start().len() + 1;
            return Err(Error::Parse {
                line,
                column,
                message: "expected `key = value`".into(),
            });
        };
        let key = content[..eq].trim();
        let key_col = content.len() - content.trim_start().len() + 1;
        if key.is_empty() {
            return Err(Error::Parse {
                line,
                column: key_col,
                message: "missing key before `=`".into(),
            });
        }
        if !KEYS.contains(&key) {
            return Err(Error::Parse {
                line,
                column: key_col,
                message: format!("unknown key `{key}`"),
            });
        }
        let rest = &content[eq + 1..];
        let value = rest.trim();
        let column = eq + 2 + (rest.len() - rest.trim_start().len());
        if value.is_empty() {
            return Err(Error::Parse {
                line,
                column,
                message: format!("missing value for `{key}`"),
            });
        }
        let entry = Entry {
            value: value.to_string(),
            line,
            column,
        };
        if out.insert(key.to_string(), entry).is_some() {
            return Err(Error::Parse {
                line,
                column: key_col,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSolver {
    Critical,
    Regularized,
}

/// Validated configuration with all defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub geometry: AnnularGeometry,
    pub mu: f64,
    pub delta: f64,
    #[serde(rename = "M_max")]
    pub m_max: u64,
    pub margin: f64,
    pub tail_tol: f64,
    pub source: Option<SourceSpec>,
    pub m_lo: i64,
    pub m_hi: i64,
    pub window: (i64, i64),
    pub deltas: Vec<f64>,
    pub grid_points: usize,
    pub field_points: usize,
    pub mode: i64,
    pub out_dir: String,
    pub field_solver: FieldSolver,
}

impl RunConfig {
    pub fn contrast(&self) -> Result<Contrast> {
        Contrast::new(self.mu, self.delta)
    }

    /// The source, or a validation error for commands that need one.
    pub fn require_source(&self) -> Result<&SourceSpec> {
        self.source.as_ref().ok_or_else(|| Error::Validation {
            field: "a".into(),
            message: "this command needs a source: set `a`, `b` and a spectrum".into(),
        })
    }
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        message: message.into(),
    }
}

struct Reader<'a> {
    entries: &'a BTreeMap<String, Entry>,
}

impl Reader<'_> {
    fn parse_err(&self, key: &str, message: String) -> Error {
        let e = &self.entries[key];
        if e.line == 0 {
            invalid(key, message)
        } else {
            Error::Parse {
                line: e.line,
                column: e.column,
                message: format!("`{key}`: {message}"),
            }
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<f64>()
                .map(Some)
                .map_err(|_| self.parse_err(key, format!("expected a number, got `{}`", e.value))),
        }
    }

    fn int(&self, key: &str) -> Result<Option<i64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<i64>()
                .map(Some)
                .map_err(|_| self.parse_err(key, format!("expected an integer, got `{}`", e.value))),
        }
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| self.parse_err(key, format!("expected a number, got `{}`", t.trim())))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    fn coefficients(&self, key: &str) -> Result<Option<BTreeMap<i64, Complex64>>> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        let mut out = BTreeMap::new();
        for item in e.value.split(',') {
            let parts: Vec<&str> = item.trim().split(':').map(str::trim).collect();
            let bad = || self.parse_err(key, format!("expected `m:re[:im]`, got `{}`", item.trim()));
            if !(2..=3).contains(&parts.len()) {
                return Err(bad());
            }
            let m = parts[0].parse::<i64>().map_err(|_| bad())?;
            let re = parts[1].parse::<f64>().map_err(|_| bad())?;
            let im = match parts.get(2) {
                Some(p) => p.parse::<f64>().map_err(|_| bad())?,
                None => 0.0,
            };
            if out.insert(m, Complex64::new(re, im)).is_some() {
                return Err(self.parse_err(key, format!("mode {m} given twice")));
            }
        }
        Ok(Some(out))
    }
}

/// Applies `--key value` overrides on top of parsed entries.
pub fn apply_overrides(entries: &mut BTreeMap<String, Entry>, overrides: &[(String, String)]) -> Result<()> {
    for (k, v) in overrides {
        if !KEYS.contains(&k.as_str()) {
            return Err(invalid(k, format!("unknown key `{k}`")));
        }
        entries.insert(
            k.clone(),
            Entry {
                value: v.clone(),
                line: 0,
                column: 0,
            },
        );
    }
    Ok(())
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    build_config(&parse_document(text)?)
}

/// Validates raw entries into a [`RunConfig`].
pub fn build_config(entries: &BTreeMap<String, Entry>) -> Result<RunConfig> {
    let rd = Reader { entries };
    let need = |key: &str, v: Option<f64>| v.ok_or_else(|| invalid(key, "required"));
    let r_i = need("r_i", rd.f64("r_i")?)?;
    let r_e = need("r_e", rd.f64("r_e")?)?;
    let r_o = need("R", rd.f64("R")?)?;
    let geometry = AnnularGeometry::new(r_i, r_e, r_o)
        .map_err(|_| invalid("geometry", format!("radii must satisfy 0 < r_i < r_e < R, got r_i={r_i}, r_e={r_e}, R={r_o}")))?;
    let mu = rd.f64("mu")?.unwrap_or(1.0);
    let delta = rd.f64("delta")?.unwrap_or(0.0);
    if !(mu.is_finite() && mu > 0.0) {
        return Err(invalid("mu", format!("must be positive, got {mu}")));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(invalid("delta", format!("must be nonnegative, got {delta}")));
    }
    let m_max = rd.int("M_max")?.unwrap_or(DEFAULT_M_MAX);
    if m_max < 1 {
        return Err(invalid("M_max", format!("must be at least 1, got {m_max}")));
    }
    let m_max = m_max as u64;
    let margin = rd.f64("margin")?.unwrap_or(0.01);
    if !(margin.is_finite() && (0.0..1.0).contains(&margin)) {
        return Err(invalid("margin", format!("must lie in [0, 1), got {margin}")));
    }
    let tail_tol = rd.f64("tail_tol")?.unwrap_or(1e-8);
    if !(tail_tol.is_finite() && tail_tol > 0.0) {
        return Err(invalid("tail_tol", format!("must be positive, got {tail_tol}")));
    }

    let source = build_source(&rd, &geometry, m_max)?;

    let m_lo = rd.int("m_lo")?.unwrap_or(0);
    let m_hi = rd.int("m_hi")?.unwrap_or(8);
    if m_lo > m_hi {
        return Err(invalid("m_lo", format!("m_lo={m_lo} exceeds m_hi={m_hi}")));
    }
    let window = (
        rd.int("window_lo")?.unwrap_or(indefla_core::spectral::DEFAULT_WINDOW.0),
        rd.int("window_hi")?.unwrap_or(indefla_core::spectral::DEFAULT_WINDOW.1),
    );
    let deltas = rd.list("deltas")?.unwrap_or_else(default_delta_grid);
    let grid_points = rd.int("grid_points")?.unwrap_or(512);
    if grid_points < indefla_core::oracle::MIN_POINTS as i64 {
        return Err(invalid(
            "grid_points",
            format!("must be at least {}, got {grid_points}", indefla_core::oracle::MIN_POINTS),
        ));
    }
    let field_points = rd.int("field_points")?.unwrap_or(201);
    if field_points < 2 {
        return Err(invalid("field_points", format!("must be at least 2, got {field_points}")));
    }
    let mode = rd.int("mode")?.unwrap_or(3);
    if mode.unsigned_abs() > m_max {
        return Err(invalid("mode", format!("|mode| must not exceed M_max={m_max}")));
    }
    let out_dir = rd.str("out_dir").unwrap_or("out").to_string();
    let field_solver = match rd.str("field_solver") {
        None if mu == 1.0 && delta == 0.0 => FieldSolver::Critical,
        None => FieldSolver::Regularized,
        Some("critical") => FieldSolver::Critical,
        Some("regularized") => FieldSolver::Regularized,
        Some(other) => {
            return Err(invalid(
                "field_solver",
                format!("expected `critical` or `regularized`, got `{other}`"),
            ))
        }
    };
    if field_solver == FieldSolver::Critical && !(mu == 1.0 && delta == 0.0) {
        return Err(invalid("field_solver", "the critical solver needs mu = 1 and delta = 0"));
    }
    if field_solver == FieldSolver::Regularized && mu == 1.0 && delta == 0.0 {
        return Err(invalid("delta", "the regularized solver needs delta > 0 when mu = 1"));
    }

    Ok(RunConfig {
        geometry,
        mu,
        delta,
        m_max,
        margin,
        tail_tol,
        source,
        m_lo,
        m_hi,
        window,
        deltas,
        grid_points: grid_points as usize,
        field_points: field_points as usize,
        mode,
        out_dir,
        field_solver,
    })
}

fn build_source(rd: &Reader<'_>, geom: &AnnularGeometry, m_max: u64) -> Result<Option<SourceSpec>> {
    let (a, b) = (rd.f64("a")?, rd.f64("b")?);
    let spectral_keys = ["spectrum", "amplitude", "q", "s", "h"];
    let (a, b) = match (a, b) {
        (None, None) => {
            if let Some(k) = spectral_keys.iter().find(|k| rd.entries.contains_key(**k)) {
                return Err(invalid(k, "spectrum given without a support: set `a` and `b`"));
            }
            return Ok(None);
        }
        (Some(_), None) => return Err(invalid("b", "required when `a` is set")),
        (None, Some(_)) => return Err(invalid("a", "required when `b` is set")),
        (Some(a), Some(b)) => (a, b),
    };
    if a < geom.r_e() {
        return Err(invalid(
            "a",
            format!("support must lie in the outer annulus, r_e <= a < b <= R; got a={a} < r_e={}", geom.r_e()),
        ));
    }
    if !(a < b) {
        return Err(invalid("b", format!("need a < b, got a={a}, b={b}")));
    }
    if b > geom.r_outer() {
        return Err(invalid("b", format!("need b <= R, got b={b} > R={}", geom.r_outer())));
    }
    let kind = rd.str("spectrum").unwrap_or(if rd.entries.contains_key("h") {
        "explicit"
    } else {
        "parametric"
    });
    let spectrum = match kind {
        "explicit" => {
            for k in ["amplitude", "q", "s"] {
                if rd.entries.contains_key(k) {
                    return Err(invalid(k, "only used with `spectrum = parametric`"));
                }
            }
            let coefs = rd
                .coefficients("h")?
                .ok_or_else(|| invalid("h", "required for `spectrum = explicit`"))?;
            AngularSpectrum::Explicit { coefficients: coefs }
        }
        "parametric" => {
            if rd.entries.contains_key("h") {
                return Err(invalid("h", "only used with `spectrum = explicit`"));
            }
            AngularSpectrum::parametric(
                rd.f64("amplitude")?.unwrap_or(1.0),
                rd.f64("q")?.unwrap_or(2.0),
                rd.f64("s")?.unwrap_or(1.0),
            )
        }
        other => {
            return Err(invalid(
                "spectrum",
                format!("expected `parametric` or `explicit`, got `{other}`"),
            ))
        }
    };
    let source = SourceSpec::new(a, b, spectrum);
    source.validate(geom, m_max).map_err(|e| match e {
        Error::InvalidSource(msg) => invalid("spectrum", msg),
        other => other,
    })?;
    Ok(Some(source))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let c = parse_config("r_i = 1\nr_e = 2\nR = 8\nmu = 1\n").unwrap();
        assert_eq!(c.m_max, 64);
        assert_eq!(c.margin, 0.01);
        assert_eq!(c.deltas.len(), 9);
        assert!(c.source.is_none());
        assert_eq!(c.field_solver, FieldSolver::Critical);
    }

    #[test]
    fn geometry_violation_names_field() {
        let e = parse_config("r_i = 2\nr_e = 1\nR = 8\n").unwrap_err();
        match e {
            Error::Validation { field, message } => {
                assert_eq!(field, "geometry");
                assert!(message.contains("r_i < r_e"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn support_below_r_e_rejected() {
        let e = parse_config("r_i = 1\nr_e = 4\nR = 8\na = 3\nb = 5\n").unwrap_err();
        match e {
            Error::Validation { field, message } => {
                assert_eq!(field, "a");
                assert!(message.contains("r_e <= a"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = parse_config("r_i = 1\n  bogus = 3\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, column: 3, .. }), "{e:?}");
        let e = parse_config("r_i = 1\nr_e 2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = parse_config("r_i = 1\nr_e = two\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, column: 7, .. }), "{e:?}");
        let e = parse_config("r_i = 1\nr_i = 2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn comments_and_explicit_spectrum() {
        let text = "# geometry\nr_i = 1   # inner\nr_e = 2\nR = 8\na = 5\nb = 6\nh = 3:1.0, -3:1.0:0.5\n";
        let c = parse_config(text).unwrap();
        let src = c.source.unwrap();
        assert_eq!(src.coefficient(indefla_core::ModeIndex(-3)), Complex64::new(1.0, 0.5));
        assert!(src.spectrum.is_finite_support());
    }

    #[test]
    fn overrides_replace_values() {
        let mut e = parse_document("r_i = 1\nr_e = 2\nR = 8\n").unwrap();
        apply_overrides(&mut e, &[("R".into(), "10".into()), ("M_max".into(), "32".into())]).unwrap();
        let c = build_config(&e).unwrap();
        assert_eq!(c.geometry.r_outer(), 10.0);
        assert_eq!(c.m_max, 32);
        assert!(apply_overrides(&mut e, &[("nope".into(), "1".into())]).is_err());
    }
}
