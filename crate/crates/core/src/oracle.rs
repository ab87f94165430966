//! Independent finite-difference solver for the per-mode transmission
//! problem, used to cross-check the closed forms.
//!
//! Plain `Complex64` throughout; nothing here touches the scaled types or the
//! mode matrices.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{AnnularGeometry, Contrast, ModeIndex};
use crate::poisson::ModeSolution;
use crate::source::SourceSpec;

/// Minimum number of nodes per segment.
pub const MIN_POINTS: usize = 64;

/// Piecewise-uniform grid on `[0, R]`. Each segment carries `n_points`
/// nodes including both ends; nodes at breakpoints are duplicated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialGrid {
    pub breakpoints: Vec<f64>,
    pub n_points: usize,
}

impl RadialGrid {
    /// Breakpoints `0, r_i, r_e, R` plus the source support ends, so the
    /// source jump never sits inside a stencil.
    pub fn new(geom: &AnnularGeometry, source: &SourceSpec, n_points: usize) -> Result<Self> {
        if n_points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_POINTS} points per segment, got {n_points}"
            )));
        }
        let mut bp = vec![0.0, geom.r_i(), geom.r_e(), geom.r_outer()];
        for x in [source.a, source.b] {
            if x > geom.r_e() && x < geom.r_outer() {
                bp.push(x);
            }
        }
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        Ok(Self {
            breakpoints: bp,
            n_points,
        })
    }

    pub fn segments(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn spacing(&self, seg: usize) -> f64 {
        (self.breakpoints[seg + 1] - self.breakpoints[seg]) / (self.n_points - 1) as f64
    }

    /// Radius of node `j` in segment `seg`.
    pub fn node(&self, seg: usize, j: usize) -> f64 {
        if j == self.n_points - 1 {
            self.breakpoints[seg + 1]
        } else {
            self.breakpoints[seg] + j as f64 * self.spacing(seg)
        }
    }

    pub fn len(&self) -> usize {
        self.segments() * self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same breakpoints with every spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            n_points: 2 * self.n_points - 1,
        }
    }
}

/// Field values on a [`RadialGrid`], segment by segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledField {
    pub grid: RadialGrid,
    pub values: Vec<Complex64>,
}

impl SampledField {
    pub fn at(&self, seg: usize, j: usize) -> Complex64 {
        self.values[seg * self.grid.n_points + j]
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.grid.segments())
            .flat_map(|s| (0..self.grid.n_points).map(move |j| (s, j)))
            .map(|(s, j)| self.grid.node(s, j))
            .collect()
    }

    /// Samples a closed-form solution; each segment uses the piece
    /// containing its midpoint.
    pub fn from_solution(sol: &ModeSolution, grid: &RadialGrid) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for s in 0..grid.segments() {
            let mid = 0.5 * (grid.breakpoints[s] + grid.breakpoints[s + 1]);
            let idx = sol.piece_index(mid).ok_or(Error::OutOfInterval {
                r: mid,
                lo: 0.0,
                hi: 0.0,
            })?;
            let piece = &sol.pieces[idx];
            for j in 0..grid.n_points {
                values.push(piece.evaluate(grid.node(s, j))?);
            }
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Largest difference at the nodes this field shares with `fine`, a
    /// field on a refinement (possibly repeated) of the same breakpoints.
    pub fn max_difference(&self, fine: &SampledField) -> f64 {
        let ratio = (fine.grid.n_points - 1) / (self.grid.n_points - 1);
        assert_eq!(ratio * (self.grid.n_points - 1), fine.grid.n_points - 1, "grids not nested");
        let mut err: f64 = 0.0;
        for s in 0..self.grid.segments() {
            for j in 0..self.grid.n_points {
                err = err.max((self.at(s, j) - fine.at(s, j * ratio)).norm());
            }
        }
        err
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Region coefficient `h_mu + i delta` on a segment, by its midpoint.
fn segment_coefficient(geom: &AnnularGeometry, coefs: &[Complex64; 3], lo: f64, hi: f64) -> Complex64 {
    let mid = 0.5 * (lo + hi);
    if mid < geom.r_i() {
        coefs[0]
    } else if mid < geom.r_e() {
        coefs[1]
    } else {
        coefs[2]
    }
}

fn contrast_coefficients(contrast: &Contrast) -> [Complex64; 3] {
    let (mu, d) = (contrast.mu(), contrast.delta());
    [Complex64::new(-mu, d), Complex64::new(1.0, d), Complex64::new(-mu, d)]
}

/// Banded matrix with `kl` sub- and `ku` super-diagonals plus `kl` extra
/// super-diagonals for pivoting fill-in.
struct Band {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl Band {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![Complex64::new(0.0, 0.0); n * width],
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[self.idx(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Gaussian elimination with partial pivoting, in place on `rhs`.
    fn solve(mut self, rhs: &mut [Complex64]) -> Result<()> {
        let n = self.n;
        let scale = self.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let p = (k..=last)
                .max_by(|&a, &b| self.get(a, k).norm().total_cmp(&self.get(b, k).norm()))
                .unwrap();
            let piv = self.get(p, k);
            if !(piv.norm() > 1e-15 * scale) {
                return Err(Error::SingularDiscreteSystem {
                    row: k,
                    pivot: piv.norm(),
                });
            }
            let jmax = (k + self.kl + self.ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.get(k, j), self.get(p, j));
                    self.set(k, j, b);
                    self.set(p, j, a);
                }
                rhs.swap(k, p);
            }
            for i in k + 1..=last {
                let f = self.get(i, k) / piv;
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..=jmax {
                    let v = self.get(i, j) - f * self.get(k, j);
                    self.set(i, j, v);
                }
                self.set(i, k, Complex64::new(0.0, 0.0));
                rhs[i] -= f * rhs[k];
            }
        }
        for i in (0..n).rev() {
            let jmax = (i + self.kl + self.ku).min(n - 1);
            let mut s = rhs[i];
            for j in i + 1..=jmax {
                s -= self.get(i, j) * rhs[j];
            }
            rhs[i] = s / self.get(i, i);
        }
        Ok(())
    }
}

/// Second-order finite-difference solution of the per-mode problem
/// `-c (u'' + u'/r - m^2 u/r^2) = g_m` with continuity of `u` and `c u'`
/// across every breakpoint, regularity at the origin and `u(R) = 0`.
pub fn fd_transmission_solve(
    geom: &AnnularGeometry,
    contrast: &Contrast,
    m: ModeIndex,
    source: &SourceSpec,
    grid: &RadialGrid,
) -> Result<SampledField> {
    let coefs = contrast_coefficients(contrast);
    let np = grid.n_points;
    let nseg = grid.segments();
    let total = grid.len();
    let nn = (m.order() * m.order()) as f64;
    let h_m = source.coefficient(m);
    let one = Complex64::new(1.0, 0.0);
    let mut a = Band::new(total, 3, 2);
    let mut rhs = vec![Complex64::new(0.0, 0.0); total];
    let c_of = |s: usize| segment_coefficient(geom, &coefs, grid.breakpoints[s], grid.breakpoints[s + 1]);

    for s in 0..nseg {
        let h = grid.spacing(s);
        let c = c_of(s);
        let base = s * np;
        let mid = 0.5 * (grid.breakpoints[s] + grid.breakpoints[s + 1]);
        let g = if mid > source.a && mid < source.b { h_m } else { Complex64::new(0.0, 0.0) };
        for j in 1..np - 1 {
            let r = grid.node(s, j);
            let i = base + j;
            let (lo, di, hi) = (1.0 / (h * h) - 0.5 / (h * r), -2.0 / (h * h) - nn / (r * r), 1.0 / (h * h) + 0.5 / (h * r));
            a.set(i, i - 1, one * lo);
            a.set(i, i, one * di);
            a.set(i, i + 1, one * hi);
            rhs[i] = -g / c;
        }
        // first node of the segment
        if s == 0 {
            if m.order() == 0 {
                // 2 u''(0) = Laplacian at the origin
                a.set(0, 0, one * (-4.0 / (h * h)));
                a.set(0, 1, one * (4.0 / (h * h)));
                rhs[0] = -g / c;
            } else {
                a.set(0, 0, one);
            }
        }
        // last node: interface rows, or the Dirichlet condition at R
        let i = base + np - 1;
        if s + 1 == nseg {
            a.set(i, i, one);
        } else {
            // continuity
            a.set(i, i, one);
            a.set(i, i + 1, -one);
            // flux: c_s D^- u = c_{s+1} D^+ u
            let c2 = c_of(s + 1);
            let h2 = grid.spacing(s + 1);
            let k = i + 1;
            let l = c / (2.0 * h);
            let rr = c2 / (2.0 * h2);
            a.set(k, i - 2, l);
            a.set(k, i - 1, l * -4.0);
            a.set(k, i, l * 3.0);
            a.set(k, k, rr * 3.0);
            a.set(k, k + 1, rr * -4.0);
            a.set(k, k + 2, rr);
        }
    }
    a.solve(&mut rhs)?;
    Ok(SampledField {
        grid: grid.clone(),
        values: rhs,
    })
}

/// Largest relative residual of `-c (u'' + u'/r - m^2 u/r^2) = g_m` over the
/// interior nodes of every segment:
/// `|-c L u - g| / (1 + |g_m|)`.
///
/// Derivatives use five-point central stencils where the segment allows
/// and three-point ones next to breakpoints. At the first node off the
/// origin the parity `u(-r) = (-1)^m u(r)` of regular fields supplies the
/// missing ghost value, so the `u'/r` term stays second order there too.
pub fn fd_residual(
    field: &SampledField,
    geom: &AnnularGeometry,
    m: ModeIndex,
    coefficients: &[Complex64; 3],
    source: &SourceSpec,
) -> f64 {
    let grid = &field.grid;
    let np = grid.n_points;
    let nn = (m.order() * m.order()) as f64;
    let parity = if m.order().is_multiple_of(2) { 1.0 } else { -1.0 };
    let h_m = source.coefficient(m);
    let mut worst: f64 = 0.0;
    for s in 0..grid.segments() {
        let h = grid.spacing(s);
        let c = segment_coefficient(geom, coefficients, grid.breakpoints[s], grid.breakpoints[s + 1]);
        let at_origin = grid.breakpoints[s] == 0.0;
        for j in 1..np - 1 {
            let r = grid.node(s, j);
            let u = |k: usize| field.at(s, k);
            let (d2, d1) = if (2..np - 2).contains(&j) || (at_origin && j == 1) {
                let um2 = if j == 1 { u(1) * parity } else { u(j - 2) };
                let (um1, u0, up1, up2) = (u(j - 1), u(j), u(j + 1), u(j + 2));
                (
                    (-up2 + up1 * 16.0 - u0 * 30.0 + um1 * 16.0 - um2) / (12.0 * h * h),
                    (-up2 + up1 * 8.0 - um1 * 8.0 + um2) / (12.0 * h),
                )
            } else {
                let (um1, u0, up1) = (u(j - 1), u(j), u(j + 1));
                ((up1 - u0 * 2.0 + um1) / (h * h), (up1 - um1) / (2.0 * h))
            };
            let lu = d2 + d1 / r - u(j) * (nn / (r * r));
            let g = if r > source.a && r < source.b { h_m } else { Complex64::new(0.0, 0.0) };
            worst = worst.max((-c * lu - g).norm() / (1.0 + h_m.norm()));
        }
    }
    worst
}

/// Observed orders `log2(e_k / e_{k+1})` from successive differences of
/// solutions on grids refined `levels` times.
pub fn self_convergence_orders(
    geom: &AnnularGeometry,
    contrast: &Contrast,
    m: ModeIndex,
    source: &SourceSpec,
    n_points: usize,
    levels: usize,
) -> Result<Vec<f64>> {
    let mut grid = RadialGrid::new(geom, source, n_points)?;
    let mut fields = vec![fd_transmission_solve(geom, contrast, m, source, &grid)?];
    for _ in 0..levels {
        grid = grid.refined();
        fields.push(fd_transmission_solve(geom, contrast, m, source, &grid)?);
    }
    let diffs: Vec<f64> = fields.windows(2).map(|w| w[0].max_difference(&w[1])).collect();
    Ok(diffs.windows(2).map(|d| (d[0] / d[1]).log2()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::AngularSpectrum;

    fn setup() -> (AnnularGeometry, SourceSpec) {
        let g = AnnularGeometry::new(1.0, 2.0, 8.0).unwrap();
        let s = SourceSpec::new(5.0, 6.0, AngularSpectrum::single(2, Complex64::new(1.0, 0.0)));
        (g, s)
    }

    #[test]
    fn grid_layout() {
        let (g, s) = setup();
        let grid = RadialGrid::new(&g, &s, 64).unwrap();
        assert_eq!(grid.breakpoints, vec![0.0, 1.0, 2.0, 5.0, 6.0, 8.0]);
        assert_eq!(grid.node(1, 63), 2.0);
        assert_eq!(grid.node(2, 0), 2.0);
        assert!(RadialGrid::new(&g, &s, 63).is_err());
        assert_eq!(grid.refined().n_points, 127);
    }

    #[test]
    fn zero_source_zero_field() {
        let (g, _) = setup();
        let s = SourceSpec::new(5.0, 6.0, AngularSpectrum::zero());
        let grid = RadialGrid::new(&g, &s, 64).unwrap();
        let f = fd_transmission_solve(&g, &Contrast::new(2.0, 0.05).unwrap(), ModeIndex(2), &s, &grid).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn band_solver_matches_dense() {
        // tridiagonal with a zero leading pivot forces a row swap
        let n = 6;
        let mut b = Band::new(n, 3, 2);
        let mut dense = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            for j in i.saturating_sub(3)..(i + 3).min(n) {
                let v = if i == 0 && j == 0 { 0.0 } else { 1.0 + (i * 7 + j * 3) as f64 % 5.0 };
                let v = Complex64::new(v, 0.1 * j as f64);
                b.set(i, j, v);
                dense[i][j] = v;
            }
        }
        let x: Vec<Complex64> = (0..n).map(|k| Complex64::new(k as f64 + 1.0, -(k as f64))).collect();
        let mut rhs: Vec<Complex64> = (0..n).map(|i| (0..n).map(|j| dense[i][j] * x[j]).sum()).collect();
        b.solve(&mut rhs).unwrap();
        for k in 0..n {
            assert!((rhs[k] - x[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn corrupted_field_detected() {
        let (g, s) = setup();
        let grid = RadialGrid::new(&g, &s, 64).unwrap();
        let c = Contrast::new(2.0, 0.05).unwrap();
        let exact = crate::regularized::solve_regularized_mode(&g, &c, ModeIndex(2), &s).unwrap();
        let mut f = SampledField::from_solution(&exact, &grid).unwrap();
        let coefs = contrast_coefficients(&c);
        let clean = fd_residual(&f, &g, ModeIndex(2), &coefs, &s);
        assert!(clean < 1e-3, "{clean}");
        f.values[2 * 64 + 30] += Complex64::new(1.0, 0.0);
        let h = grid.spacing(2);
        assert!(fd_residual(&f, &g, ModeIndex(2), &coefs, &s) >= 0.1 / (h * h));
    }

    #[test]
    fn second_order_convergence() {
        let (g, s) = setup();
        let orders = self_convergence_orders(&g, &Contrast::new(2.0, 0.05).unwrap(), ModeIndex(2), &s, 65, 3).unwrap();
        for p in orders {
            assert!((1.9..=2.1).contains(&p), "{p}");
        }
    }

    #[test]
    fn residual_of_closed_form_is_second_order() {
        let (g, s) = setup();
        let c = Contrast::critical();
        let src = SourceSpec::new(s.a, s.b, crate::source::AngularSpectrum::single(3, Complex64::new(1.0, 0.0)));
        let exact = crate::critical::solve_critical_mode(&g, ModeIndex(3), &src).unwrap().solution;
        let coefs = contrast_coefficients(&c);
        let res: Vec<f64> = [65, 129, 257]
            .iter()
            .map(|&n| {
                let grid = RadialGrid::new(&g, &src, n).unwrap();
                fd_residual(&SampledField::from_solution(&exact, &grid).unwrap(), &g, ModeIndex(3), &coefs, &src)
            })
            .collect();
        for w in res.windows(2) {
            let p = (w[0] / w[1]).log2();
            assert!(p > 1.8, "{res:?}");
        }
    }
}
