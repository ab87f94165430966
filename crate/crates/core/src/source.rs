//! Sources of the form `g(r, theta) = 1_(a,b)(r) h(theta)` with
//! `r_e <= a < b <= R`, described through the angular Fourier
//! coefficients `h_m` of `h`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnnularGeometry, ModeIndex};
use crate::scaled::{scaled_ratio_pow, ScaledValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AngularSpectrum {
    /// Finitely many nonzero coefficients.
    Explicit { coefficients: BTreeMap<i64, Complex64> },
    /// `|h_m| = amplitude * (1 + |m|)^(-q) * s^|m|`, real and even in `m`.
    Parametric { amplitude: f64, q: f64, s: f64 },
}

impl AngularSpectrum {
    pub fn explicit<I: IntoIterator<Item = (i64, Complex64)>>(coefs: I) -> Self {
        AngularSpectrum::Explicit {
            coefficients: coefs.into_iter().collect(),
        }
    }

    pub fn single(m: i64, h: Complex64) -> Self {
        Self::explicit([(m, h)])
    }

    pub fn parametric(amplitude: f64, q: f64, s: f64) -> Self {
        AngularSpectrum::Parametric { amplitude, q, s }
    }

    pub fn zero() -> Self {
        Self::explicit([])
    }

    pub fn coefficient(&self, m: ModeIndex) -> Complex64 {
        match self {
            AngularSpectrum::Explicit { coefficients } => coefficients
                .get(&m.value())
                .copied()
                .unwrap_or(Complex64::new(0.0, 0.0)),
            AngularSpectrum::Parametric { amplitude, q, s } => {
                let k = m.order() as f64;
                Complex64::new(amplitude * (1.0 + k).powf(-q) * s.powf(k), 0.0)
            }
        }
    }

    /// `|h_m|` in scaled form, so geometric decay never underflows.
    pub fn coefficient_abs_scaled(&self, m: ModeIndex) -> ScaledValue {
        match self {
            AngularSpectrum::Explicit { .. } => {
                let h = self.coefficient(m).norm();
                if h == 0.0 {
                    ScaledValue::ZERO
                } else {
                    ScaledValue::from_f64(h)
                }
            }
            AngularSpectrum::Parametric { amplitude, q, s } => {
                if *amplitude == 0.0 {
                    return ScaledValue::ZERO;
                }
                let k = m.order();
                ScaledValue::from_f64(amplitude * (1.0 + k as f64).powf(-q)) * scaled_ratio_pow(*s, 1.0, k)
            }
        }
    }

    pub fn is_finite_support(&self) -> bool {
        matches!(self, AngularSpectrum::Explicit { .. })
    }

    /// Modes carrying a (possibly) nonzero coefficient, ascending in `|m|`
    /// then `m`, truncated at `|m| <= m_max`.
    pub fn modes(&self, m_max: u64) -> Vec<ModeIndex> {
        let mut modes: Vec<ModeIndex> = match self {
            AngularSpectrum::Explicit { coefficients } => coefficients
                .iter()
                .filter(|(m, h)| m.unsigned_abs() <= m_max && h.norm() > 0.0)
                .map(|(m, _)| ModeIndex(*m))
                .collect(),
            AngularSpectrum::Parametric { amplitude, .. } => {
                if *amplitude == 0.0 {
                    Vec::new()
                } else {
                    let k = m_max as i64;
                    (-k..=k).map(ModeIndex).collect()
                }
            }
        };
        modes.sort_by_key(|m| (m.order(), m.value()));
        modes
    }

    pub fn validate(&self, m_max: u64) -> Result<()> {
        match self {
            AngularSpectrum::Explicit { coefficients } => {
                if let Some((m, _)) = coefficients.iter().find(|(m, _)| m.unsigned_abs() > m_max) {
                    return Err(Error::InvalidSource(format!(
                        "explicit coefficient at m={m} beyond M_max={m_max}"
                    )));
                }
                if coefficients.values().any(|h| !(h.re.is_finite() && h.im.is_finite())) {
                    return Err(Error::InvalidSource("non-finite coefficient".into()));
                }
                Ok(())
            }
            AngularSpectrum::Parametric { amplitude, q, s } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return Err(Error::InvalidSource(format!(
                        "amplitude must be >= 0, got {amplitude}"
                    )));
                }
                if !q.is_finite() {
                    return Err(Error::InvalidSource(format!("q must be finite, got {q}")));
                }
                if !(s.is_finite() && *s > 0.0) {
                    return Err(Error::InvalidSource(format!("s must be > 0, got {s}")));
                }
                Ok(())
            }
        }
    }

    /// Same spectrum with every coefficient multiplied by `c`. Parametric
    /// spectra only accept real nonnegative `c`.
    pub fn scaled(&self, c: Complex64) -> Option<Self> {
        match self {
            AngularSpectrum::Explicit { coefficients } => Some(Self::Explicit {
                coefficients: coefficients.iter().map(|(m, h)| (*m, h * c)).collect(),
            }),
            AngularSpectrum::Parametric { amplitude, q, s } => {
                (c.im == 0.0 && c.re >= 0.0).then(|| Self::parametric(amplitude * c.re, *q, *s))
            }
        }
    }
}

/// Radial support `(a, b)` and angular spectrum of a source in the outer annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub a: f64,
    pub b: f64,
    pub spectrum: AngularSpectrum,
}

impl SourceSpec {
    pub fn new(a: f64, b: f64, spectrum: AngularSpectrum) -> Self {
        Self { a, b, spectrum }
    }

    /// Checks `r_e <= a < b <= R` and the spectrum.
    pub fn validate(&self, geom: &AnnularGeometry, m_max: u64) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::InvalidSource("a and b must be finite".into()));
        }
        if self.a < geom.r_e() {
            return Err(Error::InvalidSource(format!(
                "support must lie in the outer annulus: need r_e <= a, got a={} < r_e={}",
                self.a,
                geom.r_e()
            )));
        }
        if !(self.a < self.b) {
            return Err(Error::InvalidSource(format!(
                "need a < b, got a={}, b={}",
                self.a, self.b
            )));
        }
        if self.b > geom.r_outer() {
            return Err(Error::InvalidSource(format!(
                "need b <= R, got b={} > R={}",
                self.b,
                geom.r_outer()
            )));
        }
        self.spectrum.validate(m_max)
    }

    pub fn coefficient(&self, m: ModeIndex) -> Complex64 {
        self.spectrum.coefficient(m)
    }

    /// `g_m(r) = h_m 1_(a,b)(r)`.
    pub fn radial_value(&self, m: ModeIndex, r: f64) -> Complex64 {
        if r > self.a && r < self.b {
            self.coefficient(m)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parametric_coefficients() {
        let s = AngularSpectrum::parametric(2.0, 2.0, 0.5);
        let h = s.coefficient(ModeIndex(-3));
        assert!((h.re - 2.0 / 16.0 * 0.125).abs() < 1e-16);
        assert_eq!(s.coefficient(ModeIndex(3)), h);
    }

    #[test]
    fn explicit_modes_sorted_by_order() {
        let s = AngularSpectrum::explicit([
            (3, Complex64::new(1.0, 0.0)),
            (-1, Complex64::new(1.0, 0.0)),
            (1, Complex64::new(0.0, 1.0)),
            (2, Complex64::new(0.0, 0.0)),
        ]);
        let m: Vec<i64> = s.modes(10).iter().map(|m| m.value()).collect();
        assert_eq!(m, vec![-1, 1, 3]);
    }

    #[test]
    fn source_support_checks() {
        let g = AnnularGeometry::new(1.0, 4.0, 8.0).unwrap();
        let bad = SourceSpec::new(3.0, 5.0, AngularSpectrum::zero());
        let err = bad.validate(&g, 64).unwrap_err();
        assert!(err.to_string().contains("r_e <= a"));
        assert!(SourceSpec::new(5.0, 5.0, AngularSpectrum::zero()).validate(&g, 64).is_err());
        assert!(SourceSpec::new(5.0, 9.0, AngularSpectrum::zero()).validate(&g, 64).is_err());
        assert!(SourceSpec::new(4.0, 8.0, AngularSpectrum::zero()).validate(&g, 64).is_ok());
        let far = SourceSpec::new(5.0, 6.0, AngularSpectrum::single(65, Complex64::new(1.0, 0.0)));
        assert!(far.validate(&g, 64).is_err());
    }
}
