//! Concentric-circle geometry, contrast parameters and mode indices.
//!
//! The domain is the disk `B_R`. The annulus `r_i < r < r_e` carries the
//! coefficient `+1`; the inner disk and the outer annulus `r_e < r < R`
//! carry `-mu`. The interface is the pair of circles `S_{r_i}`, `S_{r_e}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default angular truncation.
pub const DEFAULT_M_MAX: i64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnularGeometry {
    r_i: f64,
    r_e: f64,
    r_outer: f64,
}

impl AnnularGeometry {
    /// Requires `0 < r_i < r_e < R`, all finite.
    pub fn new(r_i: f64, r_e: f64, r_outer: f64) -> Result<Self> {
        let finite = r_i.is_finite() && r_e.is_finite() && r_outer.is_finite();
        if !finite || !(0.0 < r_i && r_i < r_e && r_e < r_outer) {
            return Err(Error::InvalidGeometry(format!(
                "radii must satisfy 0 < r_i < r_e < R, got r_i={r_i}, r_e={r_e}, R={r_outer}"
            )));
        }
        Ok(Self { r_i, r_e, r_outer })
    }

    pub fn r_i(&self) -> f64 {
        self.r_i
    }

    pub fn r_e(&self) -> f64 {
        self.r_e
    }

    /// Radius `R` of the outer Dirichlet circle.
    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    /// `r_e^2 / r_i`: sources supported beyond this radius are always in the
    /// range of the critical operator.
    pub fn critical_radius(&self) -> f64 {
        self.r_e * self.r_e / self.r_i
    }

    /// Same geometry with every radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.r_i * factor, self.r_e * factor, self.r_outer * factor)
    }
}

/// Free-function form of [`AnnularGeometry::critical_radius`].
pub fn critical_radius(geom: &AnnularGeometry) -> f64 {
    geom.critical_radius()
}

/// Contrast `mu > 0` and regularization `delta >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    mu: f64,
    delta: f64,
}

impl Contrast {
    pub fn new(mu: f64, delta: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidContrast(format!("mu must be positive, got {mu}")));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidContrast(format!(
                "delta must be nonnegative, got {delta}"
            )));
        }
        Ok(Self { mu, delta })
    }

    pub fn critical() -> Self {
        Self { mu: 1.0, delta: 0.0 }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Exact comparison on the stored value; `mu = 1 + 1e-15` is not critical.
    pub fn is_critical(&self) -> bool {
        self.mu == 1.0
    }
}

/// Signed angular Fourier index. All mode matrices depend on `|m|` only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex(pub i64);

impl ModeIndex {
    pub fn new(m: i64) -> Self {
        Self(m)
    }

    pub fn value(&self) -> i64 {
        self.0
    }

    pub fn order(&self) -> u64 {
        self.0.unsigned_abs()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == 0
    }
}

impl From<i64> for ModeIndex {
    fn from(m: i64) -> Self {
        Self(m)
    }
}
