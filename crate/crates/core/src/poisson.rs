//! Harmonic extensions (Poisson operators) per angular mode, and the
//! piecewise closed-form radial fields they produce.
//!
//! A [`RadialPiece`] is a combination of the Euler-equation basis
//! `(r/r_ref)^|m|`, `(r_ref/r)^|m|` (or `1`, `ln r` when `m = 0`) on one
//! radial interval, optionally plus the Dirichlet-annulus particular
//! solution of `f'' + f'/r - m^2 f/r^2 = h 1_(a,b)` recorded in a
//! [`SourceTerm`].

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{AnnularGeometry, ModeIndex};
use crate::scaled::{scaled_ratio_pow, ScaledComplex, ScaledValue};

/// Interface data for one mode: values on `S_{r_i}` and `S_{r_e}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceModeVector {
    pub m: ModeIndex,
    pub phi_i: Complex64,
    pub phi_e: Complex64,
}

impl TraceModeVector {
    pub fn new(m: ModeIndex, phi_i: Complex64, phi_e: Complex64) -> Self {
        Self { m, phi_i, phi_e }
    }
}

/// `ratio^n` for `ratio = num/den`, as `f64`; `num = 0` gives `0` for `n > 0`.
fn pow_ratio(num: f64, den: f64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if num == 0.0 {
        return 0.0;
    }
    scaled_ratio_pow(num, den, n).to_f64()
}

/// Particular solution of the Euler equation with right-hand side
/// `h 1_(a,b)(r)` on `(r_lo, r_hi)`, vanishing at both ends, multiplied by
/// `weight`. Evaluated through the Dirichlet Green's function of the Euler
/// operator, written with power ratios that never exceed one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceTerm {
    pub a: f64,
    pub b: f64,
    pub h: Complex64,
    pub weight: Complex64,
    pub r_lo: f64,
    pub r_hi: f64,
}

impl SourceTerm {
    fn amplitude(&self) -> Complex64 {
        self.h * self.weight
    }

    /// Value and radial derivative at `r`, for order `n = |m|`.
    pub fn eval(&self, n: u64, r: f64) -> (Complex64, Complex64) {
        let (g, dg) = green_solution(n, self.r_lo, self.r_hi, self.a, self.b, r);
        let amp = self.amplitude();
        (amp * g, amp * dg)
    }
}

/// Solution of `f'' + f'/r - n^2 f/r^2 = 1_(a,b)` on `(lo, hi)` with
/// `f(lo) = f(hi) = 0`, and its derivative, at `r`.
pub(crate) fn green_solution(n: u64, lo: f64, hi: f64, a: f64, b: f64, r: f64) -> (f64, f64) {
    let a = a.max(lo);
    let b = b.min(hi);
    if a >= b {
        return (0.0, 0.0);
    }
    // split (a, b) into the part below r and the part above r
    let below = (a, b.min(r));
    let above = (a.max(r), b);
    if n == 0 {
        let l = (hi / lo).ln();
        let anti_below = |s: f64| 0.5 * s * s * (s / lo).ln() - 0.25 * s * s;
        let anti_above = |s: f64| 0.5 * s * s * (hi / s).ln() + 0.25 * s * s;
        let j1 = if below.0 < below.1 {
            anti_below(below.1) - anti_below(below.0)
        } else {
            0.0
        };
        let j2 = if above.0 < above.1 {
            anti_above(above.1) - anti_above(above.0)
        } else {
            0.0
        };
        let f = -((hi / r).ln() * j1 + (r / lo).ln() * j2) / l;
        let df = -(j2 - j1) / (r * l);
        return (f, df);
    }
    let nf = n as f64;
    let kb = if below.0 < below.1 {
        kernel_below(n, lo, r, below.0, below.1)
    } else {
        0.0
    };
    let ka = if above.0 < above.1 {
        kernel_above(n, hi, r, above.0, above.1)
    } else {
        0.0
    };
    let den = 1.0 - pow_ratio(lo, hi, 2 * n);
    let p = pow_ratio(r, hi, 2 * n);
    let e = pow_ratio(lo, r, 2 * n);
    let c = -1.0 / (2.0 * nf * den);
    let f = c * ((1.0 - p) * kb + (1.0 - e) * ka);
    let df = c * (nf / r) * (-(1.0 + p) * kb + (1.0 + e) * ka);
    (f, df)
}

/// `int_s0^s1 (s/r)^n (1 - (lo/s)^(2n)) s ds` for `s1 <= r`.
fn kernel_below(n: u64, lo: f64, r: f64, s0: f64, s1: f64) -> f64 {
    let nf = n as f64;
    let first = (s1 * s1 * pow_ratio(s1, r, n) - s0 * s0 * pow_ratio(s0, r, n)) / (nf + 2.0);
    let second = if n == 2 {
        pow_ratio(lo, r, 2) * lo * lo * (s1 / s0).ln()
    } else {
        (s1 * s1 * pow_ratio(lo * lo, r * s1, n) - s0 * s0 * pow_ratio(lo * lo, r * s0, n))
            / (2.0 - nf)
    };
    first - second
}

/// `int_s0^s1 (r/s)^n (1 - (s/hi)^(2n)) s ds` for `r <= s0`.
fn kernel_above(n: u64, hi: f64, r: f64, s0: f64, s1: f64) -> f64 {
    let nf = n as f64;
    let first = if n == 2 {
        r * r * (s1 / s0).ln()
    } else {
        (s1 * s1 * pow_ratio(r, s1, n) - s0 * s0 * pow_ratio(r, s0, n)) / (2.0 - nf)
    };
    let second = (s1 * s1 * pow_ratio(r * s1, hi * hi, n) - s0 * s0 * pow_ratio(r * s0, hi * hi, n))
        / (nf + 2.0);
    first - second
}

/// Closed-form radial field on one interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialPiece {
    pub lo: f64,
    pub hi: f64,
    pub m: ModeIndex,
    /// Multiplies `(r/r_ref)^|m|`; zero for `m = 0`.
    #[serde(serialize_with = "ser_scaled")]
    pub coef_pos: ScaledComplex,
    /// Multiplies `(r_ref/r)^|m|`; zero for `m = 0` and on pieces touching the origin.
    #[serde(serialize_with = "ser_scaled")]
    pub coef_neg: ScaledComplex,
    /// Multiplies `ln r`; zero unless `m = 0`.
    pub coef_log: Complex64,
    pub coef_const: Complex64,
    pub r_ref: f64,
    pub source_term: Option<SourceTerm>,
}

fn ser_scaled<S: serde::Serializer>(z: &ScaledComplex, s: S) -> std::result::Result<S::Ok, S::Error> {
    z.to_complex().serialize(s)
}

/// Interval endpoint closest to the geometric mean of the interval; the
/// origin is never used.
pub fn reference_radius(lo: f64, hi: f64) -> f64 {
    if lo <= 0.0 {
        return hi;
    }
    let gm = (lo * hi).sqrt();
    if gm - lo <= hi - gm {
        lo
    } else {
        hi
    }
}

impl RadialPiece {
    pub fn zero(lo: f64, hi: f64, m: ModeIndex) -> Self {
        Self {
            lo,
            hi,
            m,
            coef_pos: ScaledComplex::ZERO,
            coef_neg: ScaledComplex::ZERO,
            coef_log: Complex64::new(0.0, 0.0),
            coef_const: Complex64::new(0.0, 0.0),
            r_ref: reference_radius(lo, hi),
            source_term: None,
        }
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.lo && r <= self.hi
    }

    pub fn is_zero(&self) -> bool {
        self.coef_pos.is_zero()
            && self.coef_neg.is_zero()
            && self.coef_log == Complex64::new(0.0, 0.0)
            && self.coef_const == Complex64::new(0.0, 0.0)
            && self.source_term.is_none_or(|s| s.amplitude() == Complex64::new(0.0, 0.0))
    }

    fn check(&self, r: f64) -> Result<()> {
        // tolerate rounding at the endpoints
        let slack = 1e-12 * self.hi.abs().max(1.0);
        if r.is_nan() || r < self.lo - slack || r > self.hi + slack {
            return Err(Error::OutOfInterval {
                r,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(())
    }

    /// Homogeneous part as scaled values: `(value, r * derivative)`.
    fn homogeneous(&self, r: f64) -> (ScaledComplex, ScaledComplex) {
        let n = self.m.order();
        if n == 0 {
            let v = self.coef_const + if r > 0.0 { self.coef_log * r.ln() } else { Complex64::new(0.0, 0.0) };
            return (ScaledComplex::new(v), ScaledComplex::new(self.coef_log));
        }
        let nf = ScaledValue::from_f64(n as f64);
        let pos = if self.coef_pos.is_zero() || r == 0.0 {
            ScaledComplex::ZERO
        } else {
            self.coef_pos.scale(scaled_ratio_pow(r, self.r_ref, n))
        };
        let neg = if self.coef_neg.is_zero() {
            ScaledComplex::ZERO
        } else {
            self.coef_neg.scale(scaled_ratio_pow(self.r_ref, r, n))
        };
        let c = ScaledComplex::new(self.coef_const);
        (pos + neg + c, (pos - neg).scale(nf))
    }

    /// Value at `r`.
    pub fn evaluate(&self, r: f64) -> Result<Complex64> {
        self.check(r)?;
        let r = r.clamp(self.lo, self.hi);
        let (v, _) = self.homogeneous(r);
        let mut v = v.to_complex();
        if let Some(src) = &self.source_term {
            v += src.eval(self.m.order(), r).0;
        }
        Ok(v)
    }

    /// Radial derivative at `r > 0`.
    pub fn derivative(&self, r: f64) -> Result<Complex64> {
        self.check(r)?;
        let r = r.clamp(self.lo, self.hi);
        if r == 0.0 {
            // regular pieces: only |m| = 1 has a nonzero slope at the origin
            let n = self.m.order();
            return Ok(if n == 1 {
                self.coef_pos.to_complex() / self.r_ref
            } else {
                Complex64::new(0.0, 0.0)
            });
        }
        let (_, rd) = self.homogeneous(r);
        let mut d = rd.to_complex() / r;
        if let Some(src) = &self.source_term {
            d += src.eval(self.m.order(), r).1;
        }
        Ok(d)
    }
}

/// Ordered, contiguous pieces describing one angular mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSolution {
    pub m: ModeIndex,
    pub pieces: Vec<RadialPiece>,
}

impl ModeSolution {
    pub fn new(m: ModeIndex, pieces: Vec<RadialPiece>) -> Self {
        Self { m, pieces }
    }

    /// Index of the piece containing `r`; at a breakpoint the left piece.
    /// Radii within rounding of the outer ends map to the end pieces.
    pub fn piece_index(&self, r: f64) -> Option<usize> {
        self.pieces
            .iter()
            .position(|p| p.contains(r))
            .or_else(|| self.pieces.iter().position(|p| p.check(r).is_ok()))
    }

    pub fn evaluate(&self, r: f64) -> Result<Complex64> {
        let idx = self.piece_index(r).ok_or(Error::OutOfInterval {
            r,
            lo: self.pieces.first().map_or(f64::NAN, |p| p.lo),
            hi: self.pieces.last().map_or(f64::NAN, |p| p.hi),
        })?;
        self.pieces[idx].evaluate(r)
    }

    pub fn derivative(&self, r: f64) -> Result<Complex64> {
        let idx = self.piece_index(r).ok_or(Error::OutOfInterval {
            r,
            lo: self.pieces.first().map_or(f64::NAN, |p| p.lo),
            hi: self.pieces.last().map_or(f64::NAN, |p| p.hi),
        })?;
        self.pieces[idx].derivative(r)
    }

    /// Piece whose interval is exactly `(lo, hi)`.
    pub fn piece_on(&self, lo: f64, hi: f64) -> Option<&RadialPiece> {
        self.pieces.iter().find(|p| p.lo == lo && p.hi == hi)
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(RadialPiece::is_zero)
    }
}

fn cz(z: Complex64) -> ScaledComplex {
    ScaledComplex::new(z)
}

/// Harmonic extension of the trace into the annulus `(r_i, r_e)`.
pub fn interior_poisson_mode(geom: &AnnularGeometry, trace: &TraceModeVector) -> RadialPiece {
    interior_poisson_scaled(geom, trace.m, cz(trace.phi_i), cz(trace.phi_e))
}

pub(crate) fn interior_poisson_scaled(
    geom: &AnnularGeometry,
    m: ModeIndex,
    pi: ScaledComplex,
    pe: ScaledComplex,
) -> RadialPiece {
    let (r_i, r_e) = (geom.r_i(), geom.r_e());
    let mut piece = RadialPiece::zero(r_i, r_e, m);
    let n = m.order();
    if n == 0 {
        let (phi_i, phi_e) = (pi.to_complex(), pe.to_complex());
        let l = (r_e / r_i).ln();
        piece.coef_log = (phi_e - phi_i) / l;
        piece.coef_const = (phi_i * r_e.ln() - phi_e * r_i.ln()) / l;
        return piece;
    }
    debug_assert_eq!(piece.r_ref, r_i);
    // basis (r/r_i)^n, (r_i/r)^n with t = (r_i/r_e)^n
    let t = ScaledComplex::from_real(scaled_ratio_pow(r_i, r_e, n));
    let denom = ScaledComplex::ONE - t * t;
    piece.coef_pos = t * (pe - t * pi) / denom;
    piece.coef_neg = (pi - t * pe) / denom;
    piece
}

/// Harmonic extension into the inner disk `(0, r_i)` and into the outer
/// annulus `(r_e, R)` with zero data on `S_R`.
pub fn exterior_poisson_mode(
    geom: &AnnularGeometry,
    trace: &TraceModeVector,
) -> (RadialPiece, RadialPiece) {
    exterior_poisson_scaled(geom, trace.m, cz(trace.phi_i), cz(trace.phi_e))
}

pub(crate) fn exterior_poisson_scaled(
    geom: &AnnularGeometry,
    m: ModeIndex,
    pi: ScaledComplex,
    pe: ScaledComplex,
) -> (RadialPiece, RadialPiece) {
    let (r_i, r_e, r_o) = (geom.r_i(), geom.r_e(), geom.r_outer());
    let mut inner = RadialPiece::zero(0.0, r_i, m);
    let mut outer = RadialPiece::zero(r_e, r_o, m);
    let n = m.order();
    if n == 0 {
        let (phi_i, phi_e) = (pi.to_complex(), pe.to_complex());
        inner.coef_const = phi_i;
        let l = (r_o / r_e).ln();
        outer.coef_const = phi_e * r_o.ln() / l;
        outer.coef_log = -phi_e / l;
        return (inner, outer);
    }
    inner.coef_pos = pi;
    debug_assert_eq!(outer.r_ref, r_e);
    // basis (r/r_e)^n, (r_e/r)^n with sigma = (r_e/R)^n
    let sigma2 = ScaledComplex::from_real(scaled_ratio_pow(r_e, r_o, 2 * n));
    let denom = ScaledComplex::ONE - sigma2;
    outer.coef_neg = pe / denom;
    outer.coef_pos = -(sigma2 * pe) / denom;
    (inner, outer)
}

/// Generic evaluation entry point.
pub fn evaluate_radial(piece: &RadialPiece, r: f64) -> Result<Complex64> {
    piece.evaluate(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    /// Second-order central difference residual of the radial operator.
    fn fd_residual(p: &RadialPiece, n: u64, r: f64, h: f64) -> Complex64 {
        let f = |x: f64| p.evaluate(x).unwrap();
        let d2 = (f(r + h) - f(r) * 2.0 + f(r - h)) / (h * h);
        let d1 = (f(r + h) - f(r - h)) / (2.0 * h);
        d2 + d1 / r - f(r) * ((n * n) as f64 / (r * r))
    }

    #[test]
    fn log_interpolation_midpoint() {
        let g = AnnularGeometry::new(1.0, E, 5.0).unwrap();
        let p = interior_poisson_mode(&g, &TraceModeVector::new(ModeIndex(0), c(0.0), c(1.0)));
        let v = p.evaluate(E.sqrt()).unwrap();
        assert!((v.re - 0.5).abs() < 1e-15 && v.im == 0.0);
    }

    #[test]
    fn zero_traces_give_zero_pieces() {
        let g = AnnularGeometry::new(1.0, 2.0, 5.0).unwrap();
        for m in [-4, 0, 3] {
            let t = TraceModeVector::new(ModeIndex(m), c(0.0), c(0.0));
            assert!(interior_poisson_mode(&g, &t).is_zero());
            let (a, b) = exterior_poisson_mode(&g, &t);
            assert!(a.is_zero() && b.is_zero());
        }
    }

    #[test]
    fn exterior_examples() {
        let g = AnnularGeometry::new(1.0, 2.0, 2.0 * E).unwrap();
        let t = TraceModeVector::new(ModeIndex(2), c(1.0), c(0.0));
        let (inner, _) = exterior_poisson_mode(&g, &t);
        assert!((inner.evaluate(0.5).unwrap().re - 0.25).abs() < 1e-15);
        let t = TraceModeVector::new(ModeIndex(0), c(0.0), c(1.0));
        let (_, outer) = exterior_poisson_mode(&g, &t);
        for r in [2.0, 2.5, 3.7, 2.0 * E] {
            let expect = (2.0 * E / r).ln();
            assert!((outer.evaluate(r).unwrap().re - expect).abs() < 1e-14);
        }
        assert!(outer.evaluate(2.0 * E).unwrap().norm() < 1e-15);
    }

    #[test]
    fn constant_and_reference_pieces() {
        let mut p = RadialPiece::zero(1.0, 3.0, ModeIndex(0));
        p.coef_const = Complex64::new(2.0, -1.0);
        assert_eq!(p.evaluate(2.2).unwrap(), Complex64::new(2.0, -1.0));
        let mut q = RadialPiece::zero(1.0, 3.0, ModeIndex(5));
        q.coef_pos = cz(Complex64::new(0.5, 0.25));
        assert_eq!(q.evaluate(q.r_ref).unwrap(), Complex64::new(0.5, 0.25));
    }

    #[test]
    fn out_of_interval_rejected() {
        let p = RadialPiece::zero(1.0, 3.0, ModeIndex(1));
        assert!(matches!(p.evaluate(3.5), Err(Error::OutOfInterval { .. })));
        assert!(p.evaluate(3.0).is_ok());
    }

    #[test]
    fn interior_m3_is_harmonic() {
        let g = AnnularGeometry::new(0.8, 2.3, 5.0).unwrap();
        let t = TraceModeVector::new(ModeIndex(3), Complex64::new(0.7, -0.2), Complex64::new(-1.1, 0.4));
        let p = interior_poisson_mode(&g, &t);
        let scale = 1.1f64.hypot(0.4);
        for k in 1..=50 {
            let r = 0.8 + 1.5 * k as f64 / 51.0;
            let res = fd_residual(&p, 3, r, 1e-4);
            assert!(res.norm() / scale < 1e-6 * 9.0 / (r * r) + 1e-5, "r={r} res={res}");
        }
    }

    #[test]
    fn origin_evaluation() {
        let g = AnnularGeometry::new(1.0, 2.0, 5.0).unwrap();
        for m in [0, 1, 4] {
            let (inner, _) = exterior_poisson_mode(&g, &TraceModeVector::new(ModeIndex(m), c(2.0), c(0.0)));
            let expect = if m == 0 { 2.0 } else { 0.0 };
            assert_eq!(inner.evaluate(0.0).unwrap().re, expect);
        }
    }

    #[test]
    fn green_solution_vanishes_at_ends() {
        for n in 0..8 {
            let (f0, _) = green_solution(n, 2.0, 4.0, 3.0, 4.0, 2.0);
            let (f1, _) = green_solution(n, 2.0, 4.0, 3.0, 4.0, 4.0);
            assert!(f0.abs() < 1e-15 && f1.abs() < 1e-14, "n={n}: {f0} {f1}");
        }
    }

    #[test]
    fn green_solution_neumann_trace_hand_value() {
        // f'(r_e) = -11/36 for n=1, r_e=2, R=4, (a,b)=(3,4)
        let (_, d) = green_solution(1, 2.0, 4.0, 3.0, 4.0, 2.0);
        assert!((d + 11.0 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn green_solution_satisfies_ode() {
        for n in [0u64, 1, 2, 3, 7] {
            let h = 1e-4;
            let f = |r: f64| green_solution(n, 2.0, 8.0, 3.5, 6.0, r).0;
            for r in [2.5, 3.0, 4.0, 5.5, 7.0] {
                let d2 = (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h);
                let d1 = (f(r + h) - f(r - h)) / (2.0 * h);
                let lhs = d2 + d1 / r - (n * n) as f64 * f(r) / (r * r);
                let rhs = if r > 3.5 && r < 6.0 { 1.0 } else { 0.0 };
                assert!((lhs - rhs).abs() < 1e-5, "n={n} r={r} lhs={lhs}");
                let dfd = (f(r + h) - f(r - h)) / (2.0 * h);
                let d = green_solution(n, 2.0, 8.0, 3.5, 6.0, r).1;
                assert!((dfd - d).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn rounded_outer_radius_maps_to_last_piece() {
        let g = AnnularGeometry::new(0.3, 0.7, 15.784780035257585).unwrap();
        let m = ModeIndex(2);
        let tr = TraceModeVector::new(m, c(1.0), c(1.0));
        let (disk, outer) = exterior_poisson_mode(&g, &tr);
        let sol = ModeSolution::new(m, vec![disk, interior_poisson_mode(&g, &tr), outer]);
        let r = g.r_outer() * (1.0 + 2.0 * f64::EPSILON);
        assert_eq!(sol.piece_index(r), Some(2));
        assert!(sol.evaluate(r).unwrap().norm() < 1e-12);
        assert!(sol.evaluate(g.r_outer() * 1.01).is_err());
    }
}
