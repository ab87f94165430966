//! Subcommand implementations. Each returns the report plus its artifacts;
//! nothing touches the filesystem here.

use indefla_core::{
    classify_contrast, delta_sweep, fd_transmission_solve, h1_norms, solve_critical,
    solve_critical_mode, solve_regularized_mode, theta_eigenvalues_scaled, Error, MatrixKind,
    ModeIndex, ModeSolution, ModeTable, RadialGrid, RangePolicy, Region, RegionNorms, Result,
    SampledField, Schedule, SourceSpec,
};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::{FieldSolver, RunConfig};
use crate::output::{clamp_scaled, fmt_f64, gnuplot_script, pretty, to_json, Artifacts, Csv, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Dtn,
    Field,
    Solve,
    RangeCheck,
    SweepDelta,
    ThetaSpectrum,
    OracleCompare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Dtn => "dtn",
            Command::Field => "field",
            Command::Solve => "solve",
            Command::RangeCheck => "range-check",
            Command::SweepDelta => "sweep-delta",
            Command::ThetaSpectrum => "theta-spectrum",
            Command::OracleCompare => "oracle-compare",
        }
    }
}

const ALL_KINDS: [MatrixKind; 6] = [
    MatrixKind::InteriorDtN,
    MatrixKind::ExteriorDtN,
    MatrixKind::Difference,
    MatrixKind::DifferenceInverse,
    MatrixKind::Theta,
    MatrixKind::Psi,
];

/// Runs `cmd` and returns its artifacts, `report.json` included.
pub fn execute(cfg: &RunConfig, cmd: Command, schedule: Schedule) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    let result = match cmd {
        Command::Dtn => dtn(cfg, schedule, &mut art),
        Command::Field => field(cfg, &mut art)?,
        Command::Solve => solve(cfg, schedule, &mut art)?,
        Command::RangeCheck => range_check(cfg)?,
        Command::SweepDelta => sweep(cfg, schedule, &mut art)?,
        Command::ThetaSpectrum => theta(cfg, &mut art)?,
        Command::OracleCompare => oracle(cfg, &mut art)?,
    };
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": cmd.name(),
        "config": to_json(cfg),
        "result": result,
    });
    art.files.insert(0, ("report.json".into(), pretty(&report)));
    Ok(art)
}

fn policy(cfg: &RunConfig) -> RangePolicy {
    RangePolicy {
        margin: cfg.margin,
        tail_tol: cfg.tail_tol,
        m_max: cfg.m_max,
    }
}

fn dtn(cfg: &RunConfig, schedule: Schedule, art: &mut Artifacts) -> Value {
    let top = cfg.m_lo.unsigned_abs().max(cfg.m_hi.unsigned_abs());
    let table = ModeTable::build(&cfg.geometry, cfg.mu, top, schedule);
    let mut csv = Csv::new(&["m", "kind", "e11", "e12", "e21", "e22", "overflow"]);
    let mut singular = Vec::new();
    for m in cfg.m_lo..=cfg.m_hi {
        let blocks = table.get(ModeIndex(m)).expect("table covers the range");
        for kind in ALL_KINDS {
            let mut cells = vec![m.to_string(), kind.label().to_string()];
            let mut overflow = false;
            match blocks.get(kind) {
                Some(mat) => {
                    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let (v, o) = clamp_scaled(mat.entry(i, j));
                        overflow |= o;
                        cells.push(fmt_f64(v));
                    }
                }
                None => {
                    singular.push(m);
                    cells.extend(std::iter::repeat_n("NaN".to_string(), 4));
                }
            }
            cells.push(u8::from(overflow).to_string());
            csv.row(cells);
        }
    }
    art.add("dtn.csv", csv.into_string());
    json!({
        "modes": [cfg.m_lo, cfg.m_hi],
        "rows": (cfg.m_hi - cfg.m_lo + 1) * ALL_KINDS.len() as i64,
        "singular_modes": singular,
    })
}

fn solve_mode(cfg: &RunConfig, m: ModeIndex, source: &SourceSpec) -> Result<ModeSolution> {
    match cfg.field_solver {
        FieldSolver::Critical => Ok(solve_critical_mode(&cfg.geometry, m, source)?.solution),
        FieldSolver::Regularized => solve_regularized_mode(&cfg.geometry, &cfg.contrast()?, m, source),
    }
}

fn radial_samples(cfg: &RunConfig) -> Vec<f64> {
    let n = cfg.field_points;
    let r_o = cfg.geometry.r_outer();
    (0..n).map(|k| r_o * k as f64 / (n - 1) as f64).collect()
}

fn field_plot(data: &str) -> String {
    gnuplot_script("radial profile", data, "r", "u", false, false, &[(2, "re"), (3, "im")])
}

fn field(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value> {
    let source = cfg.require_source()?;
    let m = ModeIndex(cfg.mode);
    let sol = solve_mode(cfg, m, source)?;
    let mut csv = Csv::new(&["r", "re", "im", "piece_index"]);
    for r in radial_samples(cfg) {
        let u = sol.evaluate(r)?;
        let idx = sol.piece_index(r).unwrap_or(0);
        csv.row([fmt_f64(r), fmt_f64(u.re), fmt_f64(u.im), idx.to_string()]);
    }
    art.add("field.csv", csv.into_string());
    art.add("plot_field.gp", field_plot("field.csv"));
    let pieces: Vec<Value> = sol
        .pieces
        .iter()
        .map(|p| json!({ "lo": p.lo, "hi": p.hi }))
        .collect();
    Ok(json!({
        "mode": cfg.mode,
        "solver": to_json(&cfg.field_solver),
        "pieces": pieces,
        "h1_norms_sq": to_json(&h1_norms(&sol, &cfg.geometry)),
    }))
}

fn mode_norm_rows(cfg: &RunConfig, sols: &[ModeSolution], art: &mut Artifacts) -> (Vec<Value>, RegionNorms) {
    let mut csv = Csv::new(&["m", "inner", "annulus", "outer"]);
    let mut total = RegionNorms::default();
    let mut rows = Vec::with_capacity(sols.len());
    for s in sols {
        let n = h1_norms(s, &cfg.geometry);
        total = total + n;
        csv.row([
            s.m.value().to_string(),
            fmt_f64(n.inner),
            fmt_f64(n.annulus),
            fmt_f64(n.outer),
        ]);
        rows.push(json!({ "m": s.m.value(), "h1_norms_sq": to_json(&n) }));
    }
    art.add("modes.csv", csv.into_string());
    (rows, total)
}

/// Synthesized field at angle zero, `sum_m u_m(r)`.
fn synthesized_field(cfg: &RunConfig, sols: &[ModeSolution], art: &mut Artifacts) -> Result<()> {
    let mut csv = Csv::new(&["r", "re", "im", "piece_index"]);
    for r in radial_samples(cfg) {
        let mut u = Complex64::new(0.0, 0.0);
        for s in sols {
            u += s.evaluate(r)?;
        }
        let idx = sols.first().and_then(|s| s.piece_index(r)).unwrap_or(0);
        csv.row([fmt_f64(r), fmt_f64(u.re), fmt_f64(u.im), idx.to_string()]);
    }
    art.add("field.csv", csv.into_string());
    art.add("plot_field.gp", field_plot("field.csv"));
    Ok(())
}

fn solve(cfg: &RunConfig, schedule: Schedule, art: &mut Artifacts) -> Result<Value> {
    let source = cfg.require_source()?;
    match cfg.field_solver {
        FieldSolver::Critical => {
            let sol = solve_critical(&cfg.geometry, source, &policy(cfg), schedule)?;
            let sols: Vec<ModeSolution> = sol.modes.iter().map(|m| m.solution.clone()).collect();
            let (rows, total) = mode_norm_rows(cfg, &sols, art);
            synthesized_field(cfg, &sols, art)?;
            Ok(json!({
                "solver": "critical",
                "verdict": sol.report.verdict.label(),
                "ratio": sol.report.ratio,
                "truncation": sol.report.truncation,
                "membership": to_json(&sol.report),
                "modes": rows,
                "total_h1_norms_sq": to_json(&total),
            }))
        }
        FieldSolver::Regularized => {
            let contrast = cfg.contrast()?;
            let modes = source.spectrum.modes(cfg.m_max);
            let sols = schedule.try_map(modes, |m| {
                solve_regularized_mode(&cfg.geometry, &contrast, m, source)
            })?;
            let (rows, total) = mode_norm_rows(cfg, &sols, art);
            synthesized_field(cfg, &sols, art)?;
            Ok(json!({
                "solver": "regularized",
                "mu": cfg.mu,
                "delta": cfg.delta,
                "truncation": cfg.m_max,
                "modes": rows,
                "total_h1_norms_sq": to_json(&total),
            }))
        }
    }
}

fn range_check(cfg: &RunConfig) -> Result<Value> {
    let source = cfg.require_source()?;
    let report = indefla_core::range_check(&cfg.geometry, source, &policy(cfg))?;
    Ok(to_json(&report))
}

fn sweep(cfg: &RunConfig, schedule: Schedule, art: &mut Artifacts) -> Result<Value> {
    let source = cfg.require_source()?;
    let report = delta_sweep(&cfg.geometry, cfg.mu, source, &cfg.deltas, cfg.m_max, schedule)?;
    let mut csv = Csv::new(&["delta", "region", "h1_norm_sq"]);
    let mut wide = Csv::new(&["delta", "inner", "annulus", "outer"]);
    for e in &report.entries {
        for region in Region::ALL {
            csv.row([fmt_f64(e.delta), region.label().to_string(), fmt_f64(e.norms.get(region))]);
        }
        wide.row([
            fmt_f64(e.delta),
            fmt_f64(e.norms.inner),
            fmt_f64(e.norms.annulus),
            fmt_f64(e.norms.outer),
        ]);
    }
    art.add("sweep.csv", csv.into_string());
    art.add("sweep_wide.csv", wide.into_string());
    art.add(
        "plot_sweep.gp",
        gnuplot_script(
            "H1 norm squared against delta",
            "sweep_wide.csv",
            "delta",
            "||u||^2",
            true,
            true,
            &[(2, "inner"), (3, "annulus"), (4, "outer")],
        ),
    );
    Ok(to_json(&report))
}

fn theta(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value> {
    let class = classify_contrast(&cfg.geometry, cfg.mu, cfg.window, cfg.m_max)?;
    let kind = if cfg.mu == 1.0 { "critical" } else { "noncritical" };
    let mut csv = Csv::new(&["m", "lambda1", "lambda2", "kind"]);
    let mut abs_csv = Csv::new(&["m", "abs_lambda1", "abs_lambda2"]);
    for m in 0..=cfg.m_max as i64 {
        let [l1, l2] = theta_eigenvalues_scaled(&cfg.geometry, cfg.mu, ModeIndex(m)).map(|v| clamp_scaled(v).0);
        csv.row([m.to_string(), fmt_f64(l1), fmt_f64(l2), kind.to_string()]);
        abs_csv.row([m.to_string(), fmt_f64(l1.abs()), fmt_f64(l2.abs())]);
    }
    art.add("theta.csv", csv.into_string());
    art.add("theta_abs.csv", abs_csv.into_string());
    art.add(
        "plot_theta.gp",
        gnuplot_script(
            "Theta eigenvalue magnitudes",
            "theta_abs.csv",
            "m",
            "|lambda|",
            false,
            true,
            &[(2, "|lambda1|"), (3, "|lambda2|")],
        ),
    );
    Ok(to_json(&class))
}

fn oracle(cfg: &RunConfig, art: &mut Artifacts) -> Result<Value> {
    const LEVELS: usize = 3;
    let source = cfg.require_source()?;
    let contrast = cfg.contrast()?;
    let m = ModeIndex(cfg.mode);
    let exact = solve_mode(cfg, m, source)?;
    let mut grid = RadialGrid::new(&cfg.geometry, source, cfg.grid_points)?;
    let mut levels = Vec::new();
    let mut fields: Vec<SampledField> = Vec::new();
    for level in 0..=LEVELS {
        if level > 0 {
            grid = grid.refined();
        }
        let fd = fd_transmission_solve(&cfg.geometry, &contrast, m, source, &grid)?;
        let ex = SampledField::from_solution(&exact, &grid)?;
        let err = fd
            .values
            .iter()
            .zip(&ex.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if level == 0 {
            let mut csv = Csv::new(&["r", "exact", "oracle", "abs_error"]);
            for ((r, e), o) in fd.radii().iter().zip(&ex.values).zip(&fd.values) {
                csv.row([fmt_f64(*r), fmt_f64(e.re), fmt_f64(o.re), fmt_f64((e - o).norm())]);
            }
            art.add("oracle.csv", csv.into_string());
        }
        levels.push((grid.n_points, err));
        fields.push(fd);
    }
    let table: Vec<Value> = levels
        .iter()
        .enumerate()
        .map(|(k, &(n, err))| {
            let order = (k > 0).then(|| (levels[k - 1].1 / err).log2());
            let self_diff = fields.get(k + 1).map(|f| fields[k].max_difference(f));
            json!({ "n_points": n, "max_error": err, "order": order, "self_difference": self_diff })
        })
        .collect();
    art.add(
        "plot_oracle.gp",
        gnuplot_script("oracle comparison", "oracle.csv", "r", "u", false, false, &[(2, "exact"), (3, "oracle")]),
    );
    let finest = levels.last().map(|l| l.1).unwrap_or(f64::NAN);
    if !finest.is_finite() {
        return Err(Error::InvalidGrid("oracle produced a non-finite field".into()));
    }
    Ok(json!({
        "mode": cfg.mode,
        "solver": to_json(&cfg.field_solver),
        "convergence": table,
    }))
}
