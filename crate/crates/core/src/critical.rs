//! The `mu = 1` pipeline: Dirichlet solve in the outer annulus, Neumann
//! trace at `r_e`, interface data through `D_m^{-1}`, range membership of
//! the source, and synthesis of the solution from the Poisson operators.

use num_complex::Complex64;
use serde::Serialize;

use crate::dtn::invert_difference_mode;
use crate::error::{Error, Result};
use crate::geometry::{AnnularGeometry, ModeIndex};
use crate::poisson::{
    exterior_poisson_scaled, interior_poisson_scaled, ModeSolution, RadialPiece, SourceTerm,
};
use crate::scaled::{scaled_ratio_pow, ScaledComplex, ScaledValue};
use crate::schedule::Schedule;
use crate::source::{AngularSpectrum, SourceSpec};

/// Solution `f_m` of the Euler equation with right-hand side
/// `h_m 1_(a,b)` on `(r_e, R)`, vanishing at both ends.
pub fn dirichlet_annulus_solve_mode(geom: &AnnularGeometry, m: ModeIndex, source: &SourceSpec) -> RadialPiece {
    let mut piece = RadialPiece::zero(geom.r_e(), geom.r_outer(), m);
    let h = source.coefficient(m);
    if h != Complex64::new(0.0, 0.0) && source.a < source.b {
        piece.source_term = Some(SourceTerm {
            a: source.a,
            b: source.b,
            h,
            weight: Complex64::new(1.0, 0.0),
            r_lo: geom.r_e(),
            r_hi: geom.r_outer(),
        });
    }
    piece
}

/// `f_m'(r_e)` for `h_m = 1`, in scaled form.
pub(crate) fn unit_neumann_trace(geom: &AnnularGeometry, n: u64, a: f64, b: f64) -> ScaledValue {
    let (r_e, r_o) = (geom.r_e(), geom.r_outer());
    let a = a.max(r_e);
    let b = b.min(r_o);
    if a >= b {
        return ScaledValue::ZERO;
    }
    if n == 0 {
        let l = (r_o / r_e).ln();
        let anti = |s: f64| 0.5 * s * s * (r_o / s).ln() + 0.25 * s * s;
        return ScaledValue::from_f64(-(anti(b) - anti(a)) / (r_e * l));
    }
    let nf = n as f64;
    let sv = ScaledValue::from_f64;
    let first = if n == 2 {
        sv(r_e * r_e * (b / a).ln())
    } else {
        (sv(a * a) * scaled_ratio_pow(r_e, a, n) - sv(b * b) * scaled_ratio_pow(r_e, b, n)) / (nf - 2.0)
    };
    let r2 = r_o * r_o;
    let second = (sv(b * b) * scaled_ratio_pow(r_e * b, r2, n) - sv(a * a) * scaled_ratio_pow(r_e * a, r2, n))
        / (nf + 2.0);
    let den = ScaledValue::ONE - scaled_ratio_pow(r_e, r_o, 2 * n);
    -((first - second) / (den * r_e))
}

/// `f_m'(r_e)` of [`dirichlet_annulus_solve_mode`], in closed form.
pub fn neumann_trace_re(geom: &AnnularGeometry, m: ModeIndex, source: &SourceSpec) -> Complex64 {
    let h = source.coefficient(m);
    if h == Complex64::new(0.0, 0.0) {
        return h;
    }
    h * unit_neumann_trace(geom, m.order(), source.a, source.b).to_f64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    InRange,
    NotInRange,
    Inconclusive,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::InRange => "InRange",
            Verdict::NotInRange => "NotInRange",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

/// Decision margins for [`range_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangePolicy {
    /// Half-width of the band around `rho = 1` reported as inconclusive.
    pub margin: f64,
    /// Relative tail size above which a truncation warning is attached.
    pub tail_tol: f64,
    /// Modes `1..=m_max` are summed.
    pub m_max: u64,
}

impl Default for RangePolicy {
    fn default() -> Self {
        Self {
            margin: 0.01,
            tail_tol: 1e-8,
            m_max: crate::geometry::DEFAULT_M_MAX as u64,
        }
    }
}

/// Partial sum of the membership series up to `|m| <= m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialSum {
    pub m: u64,
    pub log10_sum: f64,
    /// `None` when the sum exceeds the `f64` range.
    pub sum: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub verdict: Verdict,
    /// Limiting ratio of consecutive series terms.
    pub ratio: f64,
    /// `(r_e^2 / (r_i a))^2`, the spectrum-independent part of `ratio`.
    pub geometric_ratio: f64,
    pub critical_radius: f64,
    pub margin: f64,
    pub truncation: u64,
    pub partial_sums: Vec<PartialSum>,
    /// Geometric bound on the neglected terms, relative to the accumulated sum.
    pub relative_tail: Option<f64>,
    pub warning: Option<String>,
}

fn log10_scaled(x: ScaledValue) -> f64 {
    if x.is_zero() {
        f64::NEG_INFINITY
    } else {
        x.log2_abs() * std::f64::consts::LOG10_2
    }
}

fn partial(m: u64, s: ScaledValue) -> PartialSum {
    PartialSum {
        m,
        log10_sum: log10_scaled(s),
        sum: (!s.overflows_f64()).then(|| s.to_f64()),
    }
}

/// Series term `(1/n) sum_{m = +-n} |D_n^{-1} (0, -f_m'(r_e))|^2`.
fn series_term(geom: &AnnularGeometry, source: &SourceSpec, n: u64) -> Result<ScaledValue> {
    let spec = &source.spectrum;
    let hp = spec.coefficient_abs_scaled(ModeIndex(n as i64));
    let hm = spec.coefficient_abs_scaled(ModeIndex(-(n as i64)));
    let h2 = hp * hp + hm * hm;
    if h2.is_zero() {
        return Ok(ScaledValue::ZERO);
    }
    let dinv = invert_difference_mode(geom, 1.0, ModeIndex(n as i64))?;
    let tr = unit_neumann_trace(geom, n, source.a, source.b);
    let (d0, d1) = (dinv.entry(0, 1), dinv.entry(1, 1));
    Ok((d0 * d0 + d1 * d1) * tr * tr * h2 / (n as f64))
}

/// Decides whether `1_(a,b) h` lies in the range of the critical operator.
pub fn range_check(geom: &AnnularGeometry, source: &SourceSpec, policy: &RangePolicy) -> Result<MembershipReport> {
    source.validate(geom, policy.m_max)?;
    let base = geom.r_e() * geom.r_e() / (geom.r_i() * source.a);
    let geometric_ratio = base * base;
    let finite = source.spectrum.is_finite_support();
    let ratio = match &source.spectrum {
        AngularSpectrum::Explicit { .. } => 0.0,
        AngularSpectrum::Parametric { amplitude, s, .. } => {
            if *amplitude == 0.0 {
                0.0
            } else {
                s * s * geometric_ratio
            }
        }
    };
    let verdict = if finite || ratio < 1.0 - policy.margin {
        Verdict::InRange
    } else if ratio > 1.0 + policy.margin {
        Verdict::NotInRange
    } else {
        Verdict::Inconclusive
    };

    let mut sum = ScaledValue::ZERO;
    let mut last = ScaledValue::ZERO;
    let mut partial_sums = Vec::new();
    let mut checkpoint = 1u64;
    for n in 1..=policy.m_max {
        last = series_term(geom, source, n)?;
        sum = sum + last;
        if n == checkpoint || n == policy.m_max {
            partial_sums.push(partial(n, sum));
            checkpoint *= 2;
        }
    }
    let mut warning = None;
    let relative_tail = if finite {
        Some(0.0)
    } else if ratio < 1.0 && !sum.is_zero() {
        let tail = last * (ratio / (1.0 - ratio));
        let rel = (tail / sum).to_f64();
        if rel > policy.tail_tol {
            warning = Some(format!(
                "truncation at M={} leaves an estimated relative tail of {rel:.3e}",
                policy.m_max
            ));
        }
        Some(rel)
    } else if sum.is_zero() {
        Some(0.0)
    } else {
        None
    };
    if verdict == Verdict::Inconclusive {
        warning = Some(format!(
            "term ratio {ratio:.6} lies within {} of 1; the polynomial factor decides",
            policy.margin
        ));
    }
    Ok(MembershipReport {
        verdict,
        ratio,
        geometric_ratio,
        critical_radius: geom.critical_radius(),
        margin: policy.margin,
        truncation: policy.m_max,
        partial_sums,
        relative_tail,
        warning,
    })
}

/// One solved mode of the critical problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalMode {
    pub m: ModeIndex,
    pub h: Complex64,
    /// `f_m'(r_e)`.
    pub neumann_trace: Complex64,
    /// Interface data on `S_{r_i}` and `S_{r_e}`.
    #[serde(serialize_with = "ser_pair")]
    pub psi: [ScaledComplex; 2],
    pub solution: ModeSolution,
}

fn ser_pair<S: serde::Serializer>(p: &[ScaledComplex; 2], s: S) -> std::result::Result<S::Ok, S::Error> {
    [p[0].to_complex(), p[1].to_complex()].serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalSolution {
    pub modes: Vec<CriticalMode>,
    pub report: MembershipReport,
}

impl CriticalSolution {
    pub fn mode(&self, m: ModeIndex) -> Option<&CriticalMode> {
        self.modes.iter().find(|c| c.m == m)
    }
}

/// Solves the critical problem for one mode: `u = P psi + (0, f)` with
/// `psi = D_m^{-1} (0, -f_m'(r_e))`.
pub fn solve_critical_mode(geom: &AnnularGeometry, m: ModeIndex, source: &SourceSpec) -> Result<CriticalMode> {
    let h = source.coefficient(m);
    let f = dirichlet_annulus_solve_mode(geom, m, source);
    let tr = unit_neumann_trace(geom, m.order(), source.a, source.b);
    let g = -(ScaledComplex::new(h).scale(tr));
    let dinv = invert_difference_mode(geom, 1.0, m)?;
    let psi = [
        g.scale(dinv.entry(0, 1)),
        g.scale(dinv.entry(1, 1)),
    ];
    let annulus = interior_poisson_scaled(geom, m, psi[0], psi[1]);
    let (inner, mut outer) = exterior_poisson_scaled(geom, m, psi[0], psi[1]);
    outer.source_term = f.source_term;
    Ok(CriticalMode {
        m,
        h,
        neumann_trace: h * tr.to_f64(),
        psi,
        solution: ModeSolution::new(m, vec![inner, annulus, outer]),
    })
}

/// Full critical pipeline. Fails with [`Error::NotInRange`] when the
/// source lies outside the range; inconclusive verdicts still synthesize.
pub fn solve_critical(
    geom: &AnnularGeometry,
    source: &SourceSpec,
    policy: &RangePolicy,
    schedule: Schedule,
) -> Result<CriticalSolution> {
    let report = range_check(geom, source, policy)?;
    if report.verdict == Verdict::NotInRange {
        return Err(Error::NotInRange {
            ratio: report.ratio,
            report: Box::new(report),
        });
    }
    let modes = source.spectrum.modes(policy.m_max);
    let modes = schedule.try_map(modes, |m| solve_critical_mode(geom, m, source))?;
    Ok(CriticalSolution { modes, report })
}
