//! Per-mode Dirichlet-to-Neumann algebra on the two interface circles.
//!
//! Every operator here is diagonal in the angular Fourier basis, so it acts
//! on mode `m` through a 2x2 block whose rows and columns are indexed by the
//! circles `S_{r_i}` (index 0) and `S_{r_e}` (index 1):
//!
//! * `B_m` — DtN map of the annulus `r_i < r < r_e`, normals pointing out of
//!   the annulus.
//! * `C_m` — DtN map of the complement (inner disk plus outer annulus) with
//!   zero data on `S_R`, normals pointing out of the complement.
//! * `B_m - mu C_m` and its inverse.
//! * `Theta_m = (B_m - mu C_m) Lambda / 2` and
//!   `Psi_m = Lambda^(1/2) (B_m - mu C_m) Lambda^(1/2) / 2`, where `Lambda`
//!   acts on `S_rho` by `sqrt(m^2/rho^2 + 1)`.
//!
//! All entries are held as [`ScaledValue`]. For `m != 0` they are written in
//! terms of `t = (r_i/r_e)^|m|` and `s = (r_e/R)^|m|`, both below one, so the
//! critical difference `B_m - C_m` never forms by cancellation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{AnnularGeometry, ModeIndex};
use crate::scaled::{scaled_ratio_pow, ScaledValue};
use crate::schedule::Schedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MatrixKind {
    InteriorDtN,
    ExteriorDtN,
    Difference,
    DifferenceInverse,
    Theta,
    Psi,
}

impl MatrixKind {
    pub const ALL: [MatrixKind; 6] = [
        MatrixKind::InteriorDtN,
        MatrixKind::ExteriorDtN,
        MatrixKind::Difference,
        MatrixKind::DifferenceInverse,
        MatrixKind::Theta,
        MatrixKind::Psi,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MatrixKind::InteriorDtN => "B",
            MatrixKind::ExteriorDtN => "C",
            MatrixKind::Difference => "D",
            MatrixKind::DifferenceInverse => "Dinv",
            MatrixKind::Theta => "Theta",
            MatrixKind::Psi => "Psi",
        }
    }
}

/// A 2x2 mode block. Index 0 is the inner circle, index 1 the outer one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMatrix {
    pub m: ModeIndex,
    pub kind: MatrixKind,
    pub entries: [[ScaledValue; 2]; 2],
}

impl ModeMatrix {
    pub fn entry(&self, row: usize, col: usize) -> ScaledValue {
        self.entries[row][col]
    }

    pub fn to_f64(&self) -> [[f64; 2]; 2] {
        self.entries.map(|row| row.map(|x| x.to_f64()))
    }

    /// True if any entry saturates when rendered as `f64`.
    pub fn overflows_f64(&self) -> bool {
        self.entries.iter().flatten().any(|x| x.overflows_f64())
    }

    pub fn det(&self) -> ScaledValue {
        let e = &self.entries;
        e[0][0] * e[1][1] - e[0][1] * e[1][0]
    }

    /// Plain matrix product of the entries; the result keeps `self`'s labels.
    pub fn matmul(&self, other: &ModeMatrix) -> [[ScaledValue; 2]; 2] {
        let a = &self.entries;
        let b = &other.entries;
        let mut out = [[ScaledValue::ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    }

    pub fn apply(&self, v: [ScaledValue; 2]) -> [ScaledValue; 2] {
        let e = &self.entries;
        [e[0][0] * v[0] + e[0][1] * v[1], e[1][0] * v[0] + e[1][1] * v[1]]
    }
}

/// Per-circle weights of `Lambda = sqrt(-Laplace_Sigma + 1)` on mode `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaBlock {
    pub m: ModeIndex,
    pub w_i: f64,
    pub w_e: f64,
}

impl LambdaBlock {
    pub fn new(geom: &AnnularGeometry, m: ModeIndex) -> Self {
        let k = m.order() as f64;
        Self {
            m,
            w_i: ((k / geom.r_i()).powi(2) + 1.0).sqrt(),
            w_e: ((k / geom.r_e()).powi(2) + 1.0).sqrt(),
        }
    }

    pub fn weights(&self) -> [f64; 2] {
        [self.w_i, self.w_e]
    }
}

fn sv(x: f64) -> ScaledValue {
    ScaledValue::from_f64(x)
}

/// Quantities shared by all blocks of one `|m| > 0`.
struct PowerTerms {
    n: f64,
    /// `t^2 / (1 - t^2)` with `t = (r_i/r_e)^|m|`
    t2_frac: ScaledValue,
    /// `t / (1 - t^2)`
    t_frac: ScaledValue,
    /// `s^2 / (1 - s^2)` with `s = (r_e/R)^|m|`
    s2_frac: ScaledValue,
}

impl PowerTerms {
    fn new(geom: &AnnularGeometry, m: ModeIndex) -> Self {
        let k = m.order();
        let t = scaled_ratio_pow(geom.r_i(), geom.r_e(), k);
        let s = scaled_ratio_pow(geom.r_e(), geom.r_outer(), k);
        let t2 = t * t;
        let s2 = s * s;
        let one_m_t2 = ScaledValue::ONE - t2;
        let one_m_s2 = ScaledValue::ONE - s2;
        Self {
            n: k as f64,
            t2_frac: t2 / one_m_t2,
            t_frac: t / one_m_t2,
            s2_frac: s2 / one_m_s2,
        }
    }
}

fn matrix(m: ModeIndex, kind: MatrixKind, entries: [[ScaledValue; 2]; 2]) -> ModeMatrix {
    ModeMatrix { m, kind, entries }
}

/// `B_m`: annulus DtN map.
pub fn interior_dtn_mode(geom: &AnnularGeometry, m: ModeIndex) -> ModeMatrix {
    let (r_i, r_e) = (geom.r_i(), geom.r_e());
    if m.is_zero() {
        let l = (r_e / r_i).ln();
        let a = sv(1.0 / (r_i * l));
        let b = sv(1.0 / (r_e * l));
        return matrix(m, MatrixKind::InteriorDtN, [[a, -a], [-b, b]]);
    }
    let p = PowerTerms::new(geom, m);
    // (1 + t^2)/(1 - t^2) = 1 + 2 t^2/(1 - t^2)
    let coth = ScaledValue::ONE + p.t2_frac * 2.0;
    let off = p.t_frac * (-2.0 * p.n);
    matrix(
        m,
        MatrixKind::InteriorDtN,
        [
            [coth * (p.n / r_i), off / r_i],
            [off / r_e, coth * (p.n / r_e)],
        ],
    )
}

/// `C_m`: DtN map of the inner disk and outer annulus, always diagonal.
pub fn exterior_dtn_mode(geom: &AnnularGeometry, m: ModeIndex) -> ModeMatrix {
    let (r_i, r_e, r_o) = (geom.r_i(), geom.r_e(), geom.r_outer());
    let z = ScaledValue::ZERO;
    if m.is_zero() {
        let l = (r_o / r_e).ln();
        return matrix(m, MatrixKind::ExteriorDtN, [[z, z], [z, sv(1.0 / (r_e * l))]]);
    }
    let p = PowerTerms::new(geom, m);
    let coth = ScaledValue::ONE + p.s2_frac * 2.0;
    matrix(
        m,
        MatrixKind::ExteriorDtN,
        [[sv(p.n / r_i), z], [z, coth * (p.n / r_e)]],
    )
}

/// `B_m - mu C_m`. Accepts `mu = 0` (returns `B_m`).
pub fn difference_mode(geom: &AnnularGeometry, mu: f64, m: ModeIndex) -> ModeMatrix {
    let (r_i, r_e, r_o) = (geom.r_i(), geom.r_e(), geom.r_outer());
    if m.is_zero() {
        let l1 = (r_e / r_i).ln();
        let l2 = (r_o / r_e).ln();
        let a = sv(1.0 / (r_i * l1));
        let b = sv(1.0 / (r_e * l1));
        let d = (sv(1.0 / l1) - sv(mu / l2)) / r_e;
        return matrix(m, MatrixKind::Difference, [[a, -a], [-b, d]]);
    }
    let p = PowerTerms::new(geom, m);
    // 1 - mu is exact for mu in [1/2, 2]
    let one_minus_mu = sv(1.0 - mu);
    // (1 + t^2)/(1 - t^2) - mu = (1 - mu) + 2 t^2/(1 - t^2)
    let d11 = (one_minus_mu + p.t2_frac * 2.0) * (p.n / r_i);
    let d22 = (one_minus_mu + p.t2_frac * 2.0 - p.s2_frac * (2.0 * mu)) * (p.n / r_e);
    let off = p.t_frac * (-2.0 * p.n);
    matrix(
        m,
        MatrixKind::Difference,
        [[d11, off / r_i], [off / r_e, d22]],
    )
}

/// Inverse of [`difference_mode`] by direct 2x2 inversion.
pub fn invert_difference_mode(geom: &AnnularGeometry, mu: f64, m: ModeIndex) -> Result<ModeMatrix> {
    let d = difference_mode(geom, mu, m);
    invert(&d).ok_or(Error::SingularMode { m: m.value(), mu })
}

fn invert(d: &ModeMatrix) -> Option<ModeMatrix> {
    let det = d.det();
    let e = &d.entries;
    // relative to the size of the products, an exactly cancelled determinant
    // is the only failure mode of the closed forms
    let scale = (e[0][0] * e[1][1]).abs() + (e[0][1] * e[1][0]).abs();
    if det.is_zero() || (!scale.is_zero() && (det / scale).abs().to_f64() < 1e-14) {
        return None;
    }
    Some(matrix(
        d.m,
        MatrixKind::DifferenceInverse,
        [
            [e[1][1] / det, -e[0][1] / det],
            [-e[1][0] / det, e[0][0] / det],
        ],
    ))
}

/// Closed-form inverse of `B_m - C_m` at `mu = 1`, `m != 0`, written with
/// the ratios `r_e^2/(r_i R)`, `r_e/r_i`, `r_e/R`. Independent of the
/// direct inversion above; returns `None` at `m = 0`.
pub fn critical_inverse_closed_form(geom: &AnnularGeometry, m: ModeIndex) -> Option<ModeMatrix> {
    if m.is_zero() {
        return None;
    }
    let (r_i, r_e, r_o) = (geom.r_i(), geom.r_e(), geom.r_outer());
    let k = m.order();
    let n = k as f64;
    let q = scaled_ratio_pow(r_e * r_e, r_i * r_o, 2 * k);
    let rho = scaled_ratio_pow(r_e, r_i, k);
    let s2 = scaled_ratio_pow(r_e, r_o, 2 * k);
    let one = ScaledValue::ONE;
    let f = sv(-1.0 / (2.0 * n));
    Some(matrix(
        m,
        MatrixKind::DifferenceInverse,
        [
            [f * (one - q) * r_i, f * rho * (one - s2) * r_e],
            [f * rho * (one - s2) * r_i, f * (one - s2) * r_e],
        ],
    ))
}

/// `Theta_m = (B_m - mu C_m) diag(w_i, w_e) / 2`.
pub fn theta_mode(geom: &AnnularGeometry, mu: f64, m: ModeIndex) -> ModeMatrix {
    let d = difference_mode(geom, mu, m);
    let w = LambdaBlock::new(geom, m).weights();
    let mut entries = d.entries;
    for row in entries.iter_mut() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = *x * (0.5 * w[j]);
        }
    }
    matrix(m, MatrixKind::Theta, entries)
}

/// `Psi_m = diag(sqrt w) (B_m - mu C_m) diag(sqrt w) / 2`.
pub fn psi_mode(geom: &AnnularGeometry, mu: f64, m: ModeIndex) -> ModeMatrix {
    let d = difference_mode(geom, mu, m);
    let w = LambdaBlock::new(geom, m).weights().map(f64::sqrt);
    let mut entries = d.entries;
    for (i, row) in entries.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = *x * (0.5 * w[i] * w[j]);
        }
    }
    matrix(m, MatrixKind::Psi, entries)
}

/// `Theta_m` conjugated by the `H^{1/2}(Sigma)` mode weights
/// `W = diag(r_i w_i, r_e w_e)`: `W^{1/2} Theta_m W^{-1/2}`.
///
/// `Theta` is self-adjoint in `H^{1/2}`, so this block is symmetric. It is
/// also the `diag(r)`-symmetrization of `Psi_m`, the two being similar.
pub fn symmetrized_theta(geom: &AnnularGeometry, mu: f64, m: ModeIndex) -> [[ScaledValue; 2]; 2] {
    let d = difference_mode(geom, mu, m);
    let w = LambdaBlock::new(geom, m).weights();
    let r = [geom.r_i(), geom.r_e()];
    let mut out = [[ScaledValue::ZERO; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = d.entries[i][j] * (0.5 * (r[i] * w[i]).sqrt() * (w[j] / r[j]).sqrt());
        }
    }
    out
}

/// All blocks for one `|m|`.
#[derive(Debug, Clone)]
pub struct ModeBlocks {
    pub m: ModeIndex,
    pub interior: ModeMatrix,
    pub exterior: ModeMatrix,
    pub difference: ModeMatrix,
    /// `None` when the difference block is singular for this contrast.
    pub inverse: Option<ModeMatrix>,
    pub theta: ModeMatrix,
    pub psi: ModeMatrix,
}

impl ModeBlocks {
    pub fn compute(geom: &AnnularGeometry, mu: f64, m: ModeIndex) -> Self {
        let difference = difference_mode(geom, mu, m);
        Self {
            m,
            interior: interior_dtn_mode(geom, m),
            exterior: exterior_dtn_mode(geom, m),
            inverse: invert(&difference),
            difference,
            theta: theta_mode(geom, mu, m),
            psi: psi_mode(geom, mu, m),
        }
    }

    pub fn get(&self, kind: MatrixKind) -> Option<&ModeMatrix> {
        match kind {
            MatrixKind::InteriorDtN => Some(&self.interior),
            MatrixKind::ExteriorDtN => Some(&self.exterior),
            MatrixKind::Difference => Some(&self.difference),
            MatrixKind::DifferenceInverse => self.inverse.as_ref(),
            MatrixKind::Theta => Some(&self.theta),
            MatrixKind::Psi => Some(&self.psi),
        }
    }
}

/// Blocks for `|m| = 0..=m_max`, computed once and shared read-only.
/// Lookups for negative `m` return the `|m|` entry relabelled.
#[derive(Debug, Clone)]
pub struct ModeTable {
    geom: AnnularGeometry,
    mu: f64,
    blocks: Vec<ModeBlocks>,
}

impl ModeTable {
    pub fn build(geom: &AnnularGeometry, mu: f64, m_max: u64, schedule: Schedule) -> Self {
        let orders: Vec<i64> = (0..=m_max as i64).collect();
        let blocks = schedule.map(orders, |k| ModeBlocks::compute(geom, mu, ModeIndex(k)));
        Self {
            geom: *geom,
            mu,
            blocks,
        }
    }

    pub fn geometry(&self) -> &AnnularGeometry {
        &self.geom
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn m_max(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }

    /// Blocks for mode `m`, or `None` beyond the table.
    pub fn get(&self, m: ModeIndex) -> Option<ModeBlocks> {
        let b = self.blocks.get(m.order() as usize)?;
        if m.value() >= 0 {
            return Some(b.clone());
        }
        let relabel = |mut x: ModeMatrix| {
            x.m = m;
            x
        };
        Some(ModeBlocks {
            m,
            interior: relabel(b.interior),
            exterior: relabel(b.exterior),
            difference: relabel(b.difference),
            inverse: b.inverse.map(relabel),
            theta: relabel(b.theta),
            psi: relabel(b.psi),
        })
    }
}
