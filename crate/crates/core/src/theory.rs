//! Closed-form predictions for the linear entropy of weakly coupled rotors.
//!
//! Early times: `S_lin(t) = (ξ/ħ)²·C(t)` with `C(t) ≈ c·t`.
//! Late times, for a Gaussian momentum profile with diffusion `D_q`:
//! `S_lin(t) = 1 − ħ/√(4πD_q t)`.
//!
//! Equating the two with `u = √t` gives the depressed cubic
//! `a u³ − u + b = 0` where `a = c ξ²/ħ²` and `b = ħ/√(4πD_q)`. Scaling
//! `u = y/√(3a)` turns it into `y³ − 3y + q = 0` with
//! `q = 3^{3/2} ξ √c / (2√(πD_q))` (ħ drops out), and `y = w + 1/w` gives
//! `w⁶ = −1 + q²/2 + q√(q²/4 − 1)`. With `𝒢 = w²`,
//! `t* = (ħ²/(3cξ²))·(2 + 𝒢 + 1/𝒢)`.
//!
//! For `q < 2` the radicand is negative, `|𝒢| = 1` and `𝒢 + 1/𝒢 = 2 Re 𝒢`.
//! Squaring `y` loses its sign: the principal cube root gives the negative
//! root of the cubic, which solves `a t − 1 − b/√t = 0` instead. The larger
//! positive root, where the linear growth meets the saturating curve, is the
//! principal `𝒢` times `e^{−2πi/3}`. For `q > 2` there is no positive
//! crossing.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::linear_fit;

/// Linear entropy below which the perturbative regime is assumed when
/// extracting `C(t)` from a run.
pub const EARLY_SLIN_LIMIT: f64 = 0.2;

const IMAGINARY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub xi12: f64,
    pub hbar_s: f64,
    pub d_q: f64,
    /// Slope of `C(t)`.
    pub c_slope: f64,
}

impl TheoryInputs {
    pub fn new(xi12: f64, hbar_s: f64, d_q: f64) -> Result<Self> {
        let inputs = TheoryInputs {
            xi12,
            hbar_s,
            d_q,
            c_slope: 1.0,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn with_c_slope(self, c_slope: f64) -> Result<Self> {
        let inputs = TheoryInputs { c_slope, ..self };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("xi12", self.xi12),
            ("hbar_s", self.hbar_s),
            ("d_q", self.d_q),
            ("c_slope", self.c_slope),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Early-time growth rate `c·(ξ/ħ)²`.
    pub fn linear_rate(&self) -> f64 {
        self.c_slope * (self.xi12 / self.hbar_s).powi(2)
    }
}

/// `(ξ/ħ)²·C(t)` elementwise.
pub fn perturbative_slin(inputs: &TheoryInputs, c_of_t: &[f64]) -> Vec<f64> {
    let factor = (inputs.xi12 / inputs.hbar_s).powi(2);
    c_of_t.iter().map(|c| factor * c).collect()
}

/// `1 − ħ/√(4π D_q t)`; negative for small `t`.
pub fn asymptotic_slin(t: f64, hbar_s: f64, d_q: f64) -> f64 {
    1.0 - hbar_s / (4.0 * PI * d_q * t).sqrt()
}

/// `𝒢(ξ, D_q)` on the principal branches of the square and cube roots.
pub fn g_factor(xi12: f64, d_q: f64) -> Complex64 {
    let radicand = -1.0 / (PI * d_q) + 27.0 * xi12 * xi12 / (16.0 * PI * PI * d_q * d_q);
    let root = Complex64::new(radicand, 0.0).sqrt();
    let inner = Complex64::new(-1.0 + 27.0 / (8.0 * PI) * xi12 * xi12 / d_q, 0.0)
        + 3f64.powf(1.5) * xi12 / 2.0 * root;
    principal_cbrt(inner)
}

fn principal_cbrt(z: Complex64) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        z
    } else {
        Complex64::from_polar(z.norm().cbrt(), z.arg() / 3.0)
    }
}

/// Coupling at which the inner radicand of `𝒢` changes sign, `ξ² = 16πD_q/27`.
pub fn radicand_threshold(d_q: f64) -> f64 {
    (16.0 * PI * d_q / 27.0).sqrt()
}

/// Crossover time `t*` where the linear and saturating forms of `S_lin` meet.
pub fn crossover_time(inputs: &TheoryInputs) -> Result<f64> {
    inputs.validate()?;
    let effective_xi = inputs.xi12 * inputs.c_slope.sqrt();
    let q = 3f64.powf(1.5) * effective_xi / (2.0 * (PI * inputs.d_q).sqrt());
    if q > 2.0 {
        return Err(Error::Domain {
            message: format!(
                "no crossing: the linear growth exceeds the saturating curve for all t (q = {q:.4} > 2)"
            ),
            offending: Vec::new(),
        });
    }
    let g = g_factor(effective_xi, inputs.d_q) * Complex64::from_polar(1.0, -2.0 * PI / 3.0);
    let bracket = 2.0 + g + g.inv();
    let prefactor = inputs.hbar_s.powi(2) / (3.0 * effective_xi * effective_xi);
    let t_star = prefactor * bracket;
    if t_star.im.abs() > IMAGINARY_TOLERANCE * t_star.norm() {
        return Err(Error::Numerical(format!("crossover time has imaginary part {}", t_star.im)));
    }
    if !(t_star.re.is_finite() && t_star.re > 0.0) {
        return Err(Error::Domain {
            message: format!("crossover time {} is not positive", t_star.re),
            offending: Vec::new(),
        });
    }
    Ok(t_star.re)
}

/// `C(t)` recovered from a linear-entropy series, with its early-time slope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub c_of_t: Vec<(f64, f64)>,
    pub c_slope: f64,
    /// Time span of the early window used for the slope.
    pub window: (f64, f64),
}

/// Inverts `S_lin = (ξ/ħ)²C(t)` and fits `C(t) = c·t` through the origin
/// over samples with `S_lin` below [`EARLY_SLIN_LIMIT`].
pub fn extract_correlation(slin_series: &[(f64, f64)], xi12: f64, hbar_s: f64) -> Result<CorrelationEstimate> {
    if !(xi12 > 0.0) {
        return Err(Error::Window("C(t) is undefined without coupling".into()));
    }
    let scale = (hbar_s / xi12).powi(2);
    let c_of_t: Vec<(f64, f64)> = slin_series.iter().map(|&(t, s)| (t, s * scale)).collect();
    let early: Vec<(f64, f64)> = slin_series
        .iter()
        .zip(&c_of_t)
        .take_while(|((_, s), _)| *s <= EARLY_SLIN_LIMIT)
        .filter(|((t, _), _)| *t >= 1.0)
        .map(|(_, c)| *c)
        .collect();
    if early.len() < 3 {
        return Err(Error::Window(format!(
            "only {} samples before S_lin reaches {EARLY_SLIN_LIMIT}",
            early.len()
        )));
    }
    let sxx: f64 = early.iter().map(|(t, _)| t * t).sum();
    let sxy: f64 = early.iter().map(|(t, c)| t * c).sum();
    let c_slope = sxy / sxx;
    if !(c_slope > 0.0) {
        return Err(Error::Window("C(t) does not grow in the early window".into()));
    }
    Ok(CorrelationEstimate {
        window: (early[0].0, early[early.len() - 1].0),
        c_of_t,
        c_slope,
    })
}

/// Log-log slope of rates against couplings.
pub fn power_law_exponent(couplings: &[f64], rates: &[f64]) -> Result<f64> {
    let xs: Vec<f64> = couplings.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = rates.iter().map(|y| y.ln()).collect();
    if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
        return Err(Error::Domain {
            message: "power-law fit needs positive couplings and rates".into(),
            offending: Vec::new(),
        });
    }
    Ok(linear_fit(&xs, &ys)?.slope)
}
