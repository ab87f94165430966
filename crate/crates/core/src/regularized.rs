//! The regularized problem with complex coefficient `h_mu + i delta`, per
//! mode, together with `H^1` diagnostics and the `delta -> 0` sweep.

use num_complex::Complex64;
use serde::Serialize;

use crate::critical::unit_neumann_trace;
use crate::error::{Error, Result};
use crate::geometry::{AnnularGeometry, Contrast, ModeIndex};
use crate::poisson::{ModeSolution, RadialPiece, SourceTerm};
use crate::quad::integrate_split;
use crate::scaled::{scaled_ratio_pow, ScaledComplex, ScaledValue};
use crate::schedule::Schedule;
use crate::source::SourceSpec;

/// Relative pivot size below which the 6x6 system counts as singular.
const PIVOT_TOL: f64 = 1e-13;

/// Per-mode interface/boundary system.
///
/// Unknowns, in order: `A1, B1` on `(0, r_i)` with basis `(r/r_i)^n`,
/// `(r_i/r)^n`; `A2, B2` on `(r_i, r_e)` with `(r/r_e)^n`, `(r_i/r)^n`;
/// `A3, B3` on `(r_e, R)` with `(r/R)^n`, `(r_e/r)^n`. For `m = 0` the
/// bases are `1, ln(r/r_ref)` with `r_ref = r_i, r_i, r_e`. Every basis
/// function is bounded by one on its region.
#[derive(Debug, Clone)]
pub struct RegularizedModeSystem {
    pub m: ModeIndex,
    /// `c1 = -mu + i delta`, `c2 = 1 + i delta`, `c3 = -mu + i delta`.
    pub coefficients: [Complex64; 3],
    pub matrix: [[ScaledComplex; 6]; 6],
    pub rhs: [ScaledComplex; 6],
    geom: AnnularGeometry,
    source: Option<SourceTerm>,
}

fn region_coefficients(contrast: &Contrast) -> [Complex64; 3] {
    let d = contrast.delta();
    let mu = contrast.mu();
    [Complex64::new(-mu, d), Complex64::new(1.0, d), Complex64::new(-mu, d)]
}

impl RegularizedModeSystem {
    pub fn assemble(geom: &AnnularGeometry, contrast: &Contrast, m: ModeIndex, source: &SourceSpec) -> Self {
        Self::assemble_with_coefficients(geom, region_coefficients(contrast), m, source)
    }

    /// Assembly for arbitrary nonzero region coefficients `[c1, c2, c3]`,
    /// e.g. a negative imaginary part.
    pub fn assemble_with_coefficients(
        geom: &AnnularGeometry,
        c: [Complex64; 3],
        m: ModeIndex,
        source: &SourceSpec,
    ) -> Self {
        let [c1, c2, c3] = c.map(ScaledComplex::new);
        let n = m.order();
        let (r_i, r_e, r_o) = (geom.r_i(), geom.r_e(), geom.r_outer());
        let zero = ScaledComplex::ZERO;
        let one = ScaledComplex::ONE;
        let mut a = [[zero; 6]; 6];
        let mut rhs = [zero; 6];

        let h = source.coefficient(m);
        let tr = unit_neumann_trace(geom, n, source.a, source.b);
        // c3 r_e u_p'(r_e) with u_p = -(h/c3) G, before the 1/n scaling
        let jump = -(ScaledComplex::new(h).scale(tr * r_e));

        // regularity at the origin
        a[0][1] = one;
        if n == 0 {
            let l1 = ScaledComplex::new(Complex64::new((r_e / r_i).ln(), 0.0));
            let l2 = ScaledComplex::new(Complex64::new((r_o / r_e).ln(), 0.0));
            // continuity and flux (times r) at r_i
            a[1][0] = one;
            a[1][2] = -one;
            a[2][1] = c1;
            a[2][3] = -c2;
            // continuity and flux at r_e
            a[3][2] = one;
            a[3][3] = l1;
            a[3][4] = -one;
            a[4][3] = c2;
            a[4][5] = -c3;
            rhs[4] = jump;
            // u(R) = 0
            a[5][4] = one;
            a[5][5] = l2;
        } else {
            let t = ScaledComplex::from_real(scaled_ratio_pow(r_i, r_e, n));
            let s = ScaledComplex::from_real(scaled_ratio_pow(r_e, r_o, n));
            // continuity and flux (times r/n) at r_i
            a[1][0] = one;
            a[1][1] = one;
            a[1][2] = -t;
            a[1][3] = -one;
            a[2][0] = c1;
            a[2][1] = -c1;
            a[2][2] = -(c2 * t);
            a[2][3] = c2;
            // continuity and flux at r_e
            a[3][2] = one;
            a[3][3] = t;
            a[3][4] = -s;
            a[3][5] = -one;
            a[4][2] = c2;
            a[4][3] = -(c2 * t);
            a[4][4] = -(c3 * s);
            a[4][5] = c3;
            rhs[4] = jump.scale(ScaledValue::from_f64(1.0 / n as f64));
            // u(R) = 0
            a[5][4] = one;
            a[5][5] = s;
        }
        let source_term = (h != Complex64::new(0.0, 0.0) && source.a < source.b).then(|| SourceTerm {
            a: source.a,
            b: source.b,
            h,
            weight: -c[2].inv(),
            r_lo: r_e,
            r_hi: r_o,
        });
        Self {
            m,
            coefficients: c,
            matrix: a,
            rhs,
            geom: *geom,
            source: source_term,
        }
    }

    /// LU factorization with partial pivoting; returns the factors, the row
    /// permutation sign, and the smallest relative pivot.
    fn factor(&self) -> ([[ScaledComplex; 6]; 6], [usize; 6], f64) {
        let mut lu = self.matrix;
        let mut perm = [0, 1, 2, 3, 4, 5];
        let scale = lu
            .iter()
            .flatten()
            .map(|z| z.abs())
            .fold(ScaledValue::ZERO, |acc, x| if x > acc { x } else { acc });
        let mut min_rel = f64::INFINITY;
        for k in 0..6 {
            let p = (k..6)
                .max_by(|&i, &j| lu[i][k].abs().partial_cmp(&lu[j][k].abs()).unwrap())
                .unwrap();
            lu.swap(k, p);
            perm.swap(k, p);
            let piv = lu[k][k];
            let rel = if scale.is_zero() { 0.0 } else { (piv.abs() / scale).to_f64() };
            min_rel = min_rel.min(rel);
            if piv.is_zero() {
                continue;
            }
            for i in k + 1..6 {
                if lu[i][k].is_zero() {
                    continue;
                }
                let f = lu[i][k] / piv;
                lu[i][k] = f;
                for j in k + 1..6 {
                    lu[i][j] = lu[i][j] - f * lu[k][j];
                }
            }
        }
        (lu, perm, min_rel)
    }

    /// Determinant in scaled form.
    pub fn determinant(&self) -> ScaledComplex {
        let (lu, perm, _) = self.factor();
        let mut det = ScaledComplex::ONE;
        for (k, row) in lu.iter().enumerate() {
            det = det * row[k];
        }
        // parity of the permutation
        let mut seen = [false; 6];
        let mut transpositions = 0;
        for start in 0..6 {
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = perm[i];
                len += 1;
            }
            if len > 0 {
                transpositions += len - 1;
            }
        }
        if transpositions % 2 == 1 {
            -det
        } else {
            det
        }
    }

    /// Solves for the six coefficients.
    pub fn solve_coefficients(&self) -> Result<[ScaledComplex; 6]> {
        let (lu, perm, min_rel) = self.factor();
        if !(min_rel > PIVOT_TOL) {
            return Err(Error::SingularSystem {
                m: self.m.value(),
                delta: self.coefficients[1].im,
            });
        }
        let mut x = [ScaledComplex::ZERO; 6];
        for i in 0..6 {
            let mut s = self.rhs[perm[i]];
            for j in 0..i {
                s = s - lu[i][j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..6).rev() {
            let mut s = x[i];
            for j in i + 1..6 {
                s = s - lu[i][j] * x[j];
            }
            x[i] = s / lu[i][i];
        }
        Ok(x)
    }

    /// Solves and converts the coefficients into radial pieces.
    pub fn solve(&self) -> Result<ModeSolution> {
        let x = self.solve_coefficients()?;
        let g = &self.geom;
        let (r_i, r_e, r_o) = (g.r_i(), g.r_e(), g.r_outer());
        let m = self.m;
        let n = m.order();
        let mut inner = RadialPiece::zero(0.0, r_i, m);
        let mut annulus = RadialPiece::zero(r_i, r_e, m);
        let mut outer = RadialPiece::zero(r_e, r_o, m);
        if n == 0 {
            let c = |z: ScaledComplex| z.to_complex();
            inner.coef_const = c(x[0]);
            annulus.coef_log = c(x[3]);
            annulus.coef_const = c(x[2]) - c(x[3]) * r_i.ln();
            outer.coef_log = c(x[5]);
            outer.coef_const = c(x[4]) - c(x[5]) * r_e.ln();
        } else {
            inner.coef_pos = x[0];
            annulus.coef_pos = x[2].scale(scaled_ratio_pow(r_i, r_e, n));
            annulus.coef_neg = x[3];
            outer.coef_pos = x[4].scale(scaled_ratio_pow(r_e, r_o, n));
            outer.coef_neg = x[5];
        }
        outer.source_term = self.source;
        Ok(ModeSolution::new(m, vec![inner, annulus, outer]))
    }
}

fn check_contrast(contrast: &Contrast) -> Result<()> {
    if contrast.delta() == 0.0 && contrast.is_critical() {
        return Err(Error::InvalidContrast(
            "the regularized solver needs delta > 0 when mu = 1".into(),
        ));
    }
    Ok(())
}

/// Solution of `-c_k u'' - c_k u'/r + c_k m^2 u/r^2 = g_m` per region with
/// continuity of `u` and of the coefficient times `u'`, regular at the origin
/// and vanishing at `R`.
pub fn solve_regularized_mode(
    geom: &AnnularGeometry,
    contrast: &Contrast,
    m: ModeIndex,
    source: &SourceSpec,
) -> Result<ModeSolution> {
    check_contrast(contrast)?;
    RegularizedModeSystem::assemble(geom, contrast, m, source).solve()
}

/// `int (|u'|^2 + m^2 |u|^2 / r^2) r dr` and `int |u|^2 r dr` over one piece.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PieceEnergy {
    pub gradient: f64,
    pub mass: f64,
}

impl PieceEnergy {
    pub fn h1(&self) -> f64 {
        self.gradient + self.mass
    }
}

fn closed_form_energy(p: &RadialPiece) -> Option<PieceEnergy> {
    if p.source_term.is_some() {
        return None;
    }
    let n = p.m.order();
    let (lo, hi) = (p.lo, p.hi);
    if n == 0 {
        if !(p.coef_pos.is_zero() && p.coef_neg.is_zero()) {
            return None;
        }
        let l = p.coef_log;
        if lo == 0.0 && l.norm() != 0.0 {
            return None;
        }
        let grad = if l.norm() == 0.0 { 0.0 } else { l.norm_sqr() * (hi / lo).ln() };
        // antiderivative of r |u|^2 with u = C + L ln r
        let anti = |r: f64| {
            if r == 0.0 {
                return 0.0;
            }
            let u = p.coef_const + l * r.ln();
            0.5 * r * r * (u.norm_sqr() - (l * u.conj()).re + 0.5 * l.norm_sqr())
        };
        return Some(PieceEnergy {
            gradient: grad,
            mass: anti(hi) - anti(lo),
        });
    }
    if p.coef_log.norm() != 0.0 || p.coef_const.norm() != 0.0 {
        return None;
    }
    if lo == 0.0 && !p.coef_neg.is_zero() {
        return None;
    }
    let nf = n as f64;
    let sq = |z: ScaledComplex| z.norm_sqr();
    let pos_at = |r: f64| {
        if r == 0.0 || p.coef_pos.is_zero() {
            ScaledValue::ZERO
        } else {
            sq(p.coef_pos.scale(scaled_ratio_pow(r, p.r_ref, n)))
        }
    };
    let neg_at = |r: f64| {
        if p.coef_neg.is_zero() {
            ScaledValue::ZERO
        } else {
            sq(p.coef_neg.scale(scaled_ratio_pow(p.r_ref, r, n)))
        }
    };
    let (ph, pl, nh, nl) = (pos_at(hi), pos_at(lo), neg_at(hi), if lo == 0.0 { ScaledValue::ZERO } else { neg_at(lo) });
    let grad = (ph - pl + nl - nh) * nf;
    let mut mass = (ph * (hi * hi) - pl * (lo * lo)) / (2.0 * nf + 2.0)
        + (p.coef_pos * p.coef_neg.conj()).re() * (hi * hi - lo * lo);
    if !p.coef_neg.is_zero() {
        mass = mass
            + if n == 1 {
                sq(p.coef_neg) * (p.r_ref * p.r_ref * (hi / lo).ln())
            } else {
                (nh * (hi * hi) - nl * (lo * lo)) / (2.0 - 2.0 * nf)
            };
    }
    Some(PieceEnergy {
        gradient: grad.to_f64(),
        mass: mass.to_f64(),
    })
}

fn quadrature_energy(p: &RadialPiece) -> PieceEnergy {
    let nf = p.m.order() as f64;
    let breaks: Vec<f64> = p.source_term.map(|s| vec![s.a, s.b]).unwrap_or_default();
    let grad_f = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        let u = p.evaluate(r).unwrap_or_default();
        let du = p.derivative(r).unwrap_or_default();
        (du.norm_sqr() + nf * nf * u.norm_sqr() / (r * r)) * r
    };
    let mass_f = |r: f64| p.evaluate(r).unwrap_or_default().norm_sqr() * r;
    let run = |f: &dyn Fn(f64) -> f64| {
        let rough = integrate_split(f, p.lo, p.hi, &breaks, f64::INFINITY).abs();
        integrate_split(f, p.lo, p.hi, &breaks, 1e-12 * rough.max(f64::MIN_POSITIVE))
    };
    PieceEnergy {
        gradient: run(&grad_f),
        mass: run(&mass_f),
    }
}

/// Energies of one piece: closed form for pure basis combinations,
/// adaptive quadrature when a particular solution is present.
pub fn piece_energy(p: &RadialPiece) -> PieceEnergy {
    closed_form_energy(p).unwrap_or_else(|| quadrature_energy(p))
}

/// Squared `H^1` norms per region (no angular `2 pi` factor).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RegionNorms {
    /// `B_{r_i}`.
    pub inner: f64,
    /// `B_{r_i, r_e}`.
    pub annulus: f64,
    /// `B_{r_e, R}`.
    pub outer: f64,
}

impl RegionNorms {
    pub fn get(&self, region: Region) -> f64 {
        match region {
            Region::Inner => self.inner,
            Region::Annulus => self.annulus,
            Region::Outer => self.outer,
        }
    }
}

impl std::ops::Add for RegionNorms {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            inner: self.inner + o.inner,
            annulus: self.annulus + o.annulus,
            outer: self.outer + o.outer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Inner,
    Annulus,
    Outer,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Inner, Region::Annulus, Region::Outer];

    pub fn label(self) -> &'static str {
        match self {
            Region::Inner => "inner",
            Region::Annulus => "annulus",
            Region::Outer => "outer",
        }
    }
}

/// `int (|u'|^2 + m^2 |u|^2/r^2 + |u|^2) r dr` over each region.
pub fn h1_norms(solution: &ModeSolution, geom: &AnnularGeometry) -> RegionNorms {
    let mut out = RegionNorms::default();
    for p in &solution.pieces {
        let e = piece_energy(p).h1();
        if p.hi <= geom.r_i() {
            out.inner += e;
        } else if p.lo >= geom.r_e() {
            out.outer += e;
        } else {
            out.annulus += e;
        }
    }
    out
}

/// Default sweep grid `10^-1, 10^-1.5, ..., 10^-5`.
pub fn default_delta_grid() -> Vec<f64> {
    (0..9).map(|k| 10f64.powf(-1.0 - 0.5 * k as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub delta: f64,
    pub norms: RegionNorms,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionFit {
    pub region: Region,
    /// `p` in `|u_delta|^2 ~ delta^-p`.
    pub exponent: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    /// Norm at the smallest delta over norm at the largest.
    pub growth: f64,
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub delta: f64,
    pub m: i64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaSweepReport {
    pub mu: f64,
    pub m_max: u64,
    /// Strictly decreasing in `delta`.
    pub entries: Vec<SweepEntry>,
    /// Number of leading (largest) deltas left out of the fits.
    pub discarded: usize,
    pub fits: Vec<RegionFit>,
    pub failures: Vec<SweepFailure>,
}

impl DeltaSweepReport {
    pub fn fit(&self, region: Region) -> &RegionFit {
        self.fits.iter().find(|f| f.region == region).expect("all regions fitted")
    }

    /// Annulus-region exponent.
    pub fn exponent(&self) -> f64 {
        self.fit(Region::Annulus).exponent
    }
}

/// Least-squares line `y = c + k x`; returns `(k, c, rms residual)`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let k = sxy / sxx;
    let c = my - k * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - c - k * a).powi(2)).sum();
    (k, c, (rss / n).sqrt())
}

fn validate_deltas(deltas: &[f64]) -> Result<Vec<f64>> {
    if deltas.len() < 4 {
        return Err(Error::InvalidDeltaGrid(format!("need at least 4 values, got {}", deltas.len())));
    }
    if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::InvalidDeltaGrid("values must be positive and finite".into()));
    }
    let mut d = deltas.to_vec();
    d.sort_by(|a, b| b.total_cmp(a));
    if d.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidDeltaGrid("values must be distinct".into()));
    }
    if d[0] / d[d.len() - 1] < 1e3 * (1.0 - 1e-12) {
        return Err(Error::InvalidDeltaGrid("values must span at least three decades".into()));
    }
    Ok(d)
}

/// Solves every mode for every delta, sums squared `H^1` norms per region and
/// fits the blow-up exponent.
pub fn delta_sweep(
    geom: &AnnularGeometry,
    mu: f64,
    source: &SourceSpec,
    deltas: &[f64],
    m_max: u64,
    schedule: Schedule,
) -> Result<DeltaSweepReport> {
    Contrast::new(mu, 0.0)?;
    source.validate(geom, m_max)?;
    let deltas = validate_deltas(deltas)?;
    let modes = source.spectrum.modes(m_max);
    let cells: Vec<(usize, ModeIndex)> = (0..deltas.len())
        .flat_map(|i| modes.iter().map(move |&m| (i, m)))
        .collect();
    let results = schedule.map(cells, |(i, m)| {
        let contrast = Contrast::new(mu, deltas[i])?;
        let sol = solve_regularized_mode(geom, &contrast, m, source)?;
        Ok::<_, Error>(h1_norms(&sol, geom))
    });

    let mut sums = vec![RegionNorms::default(); deltas.len()];
    let mut ok = vec![true; deltas.len()];
    let mut failures = Vec::new();
    let cells = (0..deltas.len()).flat_map(|i| modes.iter().map(move |&m| (i, m)));
    for ((i, m), r) in cells.zip(results) {
        match r {
            Ok(n) => sums[i] = sums[i] + n,
            Err(e) => {
                ok[i] = false;
                failures.push(SweepFailure {
                    delta: deltas[i],
                    m: m.value(),
                    message: e.to_string(),
                });
            }
        }
    }
    let entries: Vec<SweepEntry> = deltas
        .iter()
        .zip(sums)
        .zip(&ok)
        .filter(|(_, &ok)| ok)
        .map(|((&delta, norms), _)| SweepEntry { delta, norms })
        .collect();
    if entries.len() < 2 {
        return Err(failures
            .first()
            .map(|f| Error::SingularSystem {
                m: f.m,
                delta: f.delta,
            })
            .unwrap_or_else(|| Error::InvalidDeltaGrid("no solvable delta".into())));
    }
    let discarded = entries.len().saturating_sub(4).min(2);
    let fit_part = &entries[discarded..];
    let x: Vec<f64> = fit_part.iter().map(|e| e.delta.ln()).collect();
    let fits = Region::ALL
        .iter()
        .map(|&region| {
            let y: Vec<f64> = fit_part
                .iter()
                .map(|e| e.norms.get(region).max(f64::MIN_POSITIVE).ln())
                .collect();
            let (k, _, residual) = linear_fit(&x, &y);
            let first = entries[0].norms.get(region);
            let last = entries[entries.len() - 1].norms.get(region);
            let growth = if first > 0.0 { last / first } else if last > 0.0 { f64::INFINITY } else { 1.0 };
            let exponent = if k.is_finite() { -k } else { 0.0 };
            RegionFit {
                region,
                exponent,
                residual,
                growth,
                bounded: !(growth > 2.0 && exponent > 0.1),
            }
        })
        .collect();
    Ok(DeltaSweepReport {
        mu,
        m_max,
        entries,
        discarded,
        fits,
        failures,
    })
}
