//! Eigenvalues of the per-mode `Theta`/`Psi` blocks and the contrast
//! classification built on them: exponential decay at `mu = 1`, quadratic
//! growth in `|m|` otherwise.

use serde::Serialize;

use crate::dtn::symmetrized_theta;
use crate::error::{Error, Result};
use crate::geometry::{AnnularGeometry, ModeIndex};
use crate::regularized::linear_fit;
use crate::scaled::ScaledValue;

/// Smallest admissible fit window length and lower end.
pub const MIN_WINDOW_LEN: usize = 10;
pub const MIN_WINDOW_LO: i64 = 5;
/// Default fit window.
pub const DEFAULT_WINDOW: (i64, i64) = (10, 40);

/// Eigenvalues of the symmetrized block, largest magnitude first.
pub fn theta_eigenvalues_scaled(geom: &AnnularGeometry, mu: f64, m: ModeIndex) -> [ScaledValue; 2] {
    let s = symmetrized_theta(geom, mu, m);
    let (a, b, d) = (s[0][0], s[0][1], s[1][1]);
    let mean = (a + d) / 2.0;
    let half = (a - d) / 2.0;
    let rad = (half * half + b * b).sqrt();
    // add the radical with the sign of the mean so no cancellation occurs
    let big = if mean >= ScaledValue::ZERO { mean + rad } else { mean - rad };
    if big.is_zero() {
        return [ScaledValue::ZERO; 2];
    }
    let det = a * d - b * b;
    [big, det / big]
}

/// Eigenvalues of `Theta_m` (equivalently `Psi_m`), largest magnitude first.
pub fn theta_eigenvalues(geom: &AnnularGeometry, mu: f64, m: ModeIndex) -> [f64; 2] {
    theta_eigenvalues_scaled(geom, mu, m).map(|x| x.to_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Critical,
    NonCritical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastClassification {
    pub regime: Regime,
    pub mu: f64,
    pub window: (i64, i64),
    /// Slope of `ln |lambda_max|` against `|m|` (critical regime).
    pub decay_rate: Option<f64>,
    /// Root-mean-square residual of that fit.
    pub decay_rms: Option<f64>,
    /// `decay_rms` divided by the spread of `ln |lambda_max|` over the window.
    pub decay_residual: Option<f64>,
    /// Whether `|lambda_max|` decreases strictly across the window.
    pub strictly_decreasing: Option<bool>,
    /// Limits of `lambda_max / m^2` and `lambda_min / m^2` (noncritical regime).
    pub growth_constants: Option<[f64; 2]>,
    /// Root-mean-square residuals of the two growth fits.
    pub growth_residuals: Option<[f64; 2]>,
    /// Both growth constants carry the sign of `1 - mu`.
    pub sign_consistent: Option<bool>,
}

fn check_window(window: (i64, i64), m_max: u64) -> Result<()> {
    let (lo, hi) = window;
    if hi < lo || ((hi - lo + 1) as usize) < MIN_WINDOW_LEN {
        return Err(Error::WindowTooSmall {
            lo,
            hi,
            min: MIN_WINDOW_LEN,
        });
    }
    if lo < MIN_WINDOW_LO || hi as u64 > m_max {
        return Err(Error::WindowOutOfRange {
            lo,
            hi,
            min_lo: MIN_WINDOW_LO,
            m_max: m_max as i64,
        });
    }
    Ok(())
}

/// Classifies the contrast from the mode blocks over `window`.
pub fn classify_contrast(
    geom: &AnnularGeometry,
    mu: f64,
    window: (i64, i64),
    m_max: u64,
) -> Result<ContrastClassification> {
    crate::geometry::Contrast::new(mu, 0.0)?;
    check_window(window, m_max)?;
    let ms: Vec<i64> = (window.0..=window.1).collect();
    let eig: Vec<[ScaledValue; 2]> = ms
        .iter()
        .map(|&m| theta_eigenvalues_scaled(geom, mu, ModeIndex(m)))
        .collect();
    let mut out = ContrastClassification {
        regime: Regime::NonCritical,
        mu,
        window,
        decay_rate: None,
        decay_rms: None,
        decay_residual: None,
        strictly_decreasing: None,
        growth_constants: None,
        growth_residuals: None,
        sign_consistent: None,
    };
    if mu == 1.0 {
        out.regime = Regime::Critical;
        let x: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
        let y: Vec<f64> = eig.iter().map(|e| e[0].ln_abs()).collect();
        let (k, _, rms) = linear_fit(&x, &y);
        let spread = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - y.iter().cloned().fold(f64::INFINITY, f64::min);
        out.decay_rate = Some(k);
        out.decay_rms = Some(rms);
        out.decay_residual = Some(if spread > 0.0 { rms / spread } else { 0.0 });
        out.strictly_decreasing = Some(y.windows(2).all(|w| w[1] < w[0]));
    } else {
        // lambda / m^2 = g + c / m
        let x: Vec<f64> = ms.iter().map(|&m| 1.0 / m as f64).collect();
        let mut g = [0.0; 2];
        let mut res = [0.0; 2];
        for k in 0..2 {
            let y: Vec<f64> = ms
                .iter()
                .zip(&eig)
                .map(|(&m, e)| e[k].to_f64() / (m * m) as f64)
                .collect();
            let (_, c, rms) = linear_fit(&x, &y);
            g[k] = c;
            res[k] = rms;
        }
        let sign = (1.0 - mu).signum();
        out.growth_constants = Some(g);
        out.growth_residuals = Some(res);
        out.sign_consistent = Some(g.iter().all(|v| v.signum() == sign && *v != 0.0));
    }
    Ok(out)
}
