//! Nondimensional Michaelis–Menten rate laws.
//!
//! With `C` the nutrient concentration scaled by its external value, the
//! mitosis and death rates (scaled by the mitosis rate `A`) are
//!
//! ```text
//! k_m / A = C / (c_c + C)
//! k_d / A = (B/A) (1 - sigma C / (c_d + C))
//! ```
//!
//! and the model uses `a = k_m/A - k_d/A` (net growth),
//! `b = k_m/A - (1 - delta) k_d/A` (volume source) and
//! `k = (beta_hat A) k_m/A` (nutrient consumption).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The inversion unknowns `p = [c_c, c_d, sigma]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    /// Half-saturation concentration of the mitosis rate.
    pub c_c: f64,
    /// Half-saturation concentration of the death-suppression term.
    pub c_d: f64,
    /// Death-suppression factor.
    pub sigma: f64,
}

impl Parameters {
    pub const COUNT: usize = 3;
    pub const NAMES: [&'static str; 3] = ["c_c", "c_d", "sigma"];

    pub const fn new(c_c: f64, c_d: f64, sigma: f64) -> Self {
        Self { c_c, c_d, sigma }
    }

    /// Values used to generate the synthetic data sets.
    pub const fn standard() -> Self {
        Self::new(0.1, 0.05, 0.9)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.c_c, self.c_d, self.sigma]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.c_c.is_finite() && self.c_d.is_finite() && self.sigma.is_finite();
        if !finite || self.c_c <= 0.0 || self.c_d <= 0.0 || self.sigma < 0.0 {
            return Err(Error::Domain(format!(
                "parameters must satisfy c_c > 0, c_d > 0, sigma >= 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    /// Euclidean distance between two parameter vectors.
    pub fn distance(&self, other: &Parameters) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Fixed dimensionless groups of the model.
///
/// The defaults are not taken from measurements; they are reference values
/// chosen so that a seeded spheroid grows to a few tens of cell radii with a
/// nutrient-depleted but not anoxic core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConstants {
    /// Ratio `B/A` of the death and mitosis rate scales.
    pub b_over_a: f64,
    /// Dead to live cell volume ratio `V_D / V_L`.
    pub delta: f64,
    /// Consumption group `beta_hat * A`.
    pub beta_hat_a: f64,
}

impl Default for ModelConstants {
    fn default() -> Self {
        Self {
            b_over_a: 0.5,
            delta: 0.5,
            beta_hat_a: 0.005,
        }
    }
}

impl ModelConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = self.b_over_a.is_finite()
            && self.b_over_a > 0.0
            && self.delta > 0.0
            && self.delta <= 1.0
            && self.beta_hat_a.is_finite()
            && self.beta_hat_a > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "model constants must satisfy b_over_a > 0, 0 < delta <= 1, beta_hat_a > 0 (got {self:?})"
            )))
        }
    }
}

/// Values of `a`, `b` and `k` at one concentration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateValues {
    pub a: f64,
    pub b: f64,
    pub k: f64,
}

/// Partial derivatives of `a`, `b`, `k` with respect to `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSlopes {
    pub da: f64,
    pub db: f64,
    pub dk: f64,
}

/// Jacobian of `(a, b, k)` with respect to `(c_c, c_d, sigma)`.
///
/// Row `r` holds the derivatives of rate `r` (`a`, `b`, `k` in that order).
/// Extending the inversion vector means adding columns here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateJacobian {
    pub rows: [[f64; 3]; 3],
}

impl RateJacobian {
    pub fn da(&self) -> [f64; 3] {
        self.rows[0]
    }
    pub fn db(&self) -> [f64; 3] {
        self.rows[1]
    }
    pub fn dk(&self) -> [f64; 3] {
        self.rows[2]
    }
}

#[inline]
fn check_conc(c: f64) -> Result<()> {
    if c >= 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("negative or non-finite concentration {c}")))
    }
}

/// Mitosis rate `k_m / A`.
#[inline]
fn mitosis(c: f64, p: &Parameters) -> f64 {
    c / (p.c_c + c)
}

/// Death rate `k_d / A`.
#[inline]
fn death(c: f64, p: &Parameters, mc: &ModelConstants) -> f64 {
    mc.b_over_a * (1.0 - p.sigma * c / (p.c_d + c))
}

pub fn rate_a(c: f64, p: &Parameters, mc: &ModelConstants) -> Result<f64> {
    check_conc(c)?;
    Ok(mitosis(c, p) - death(c, p, mc))
}

pub fn rate_b(c: f64, p: &Parameters, mc: &ModelConstants) -> Result<f64> {
    check_conc(c)?;
    Ok(mitosis(c, p) - (1.0 - mc.delta) * death(c, p, mc))
}

pub fn rate_k(c: f64, p: &Parameters, mc: &ModelConstants) -> Result<f64> {
    check_conc(c)?;
    Ok(mc.beta_hat_a * mitosis(c, p))
}

/// All three rates at once.
pub fn rates(c: f64, p: &Parameters, mc: &ModelConstants) -> Result<RateValues> {
    check_conc(c)?;
    let km = mitosis(c, p);
    let kd = death(c, p, mc);
    Ok(RateValues {
        a: km - kd,
        b: km - (1.0 - mc.delta) * kd,
        k: mc.beta_hat_a * km,
    })
}

pub fn rates_dc(c: f64, p: &Parameters, mc: &ModelConstants) -> Result<RateSlopes> {
    check_conc(c)?;
    let dkm = p.c_c / (p.c_c + c).powi(2);
    // d(k_d/A)/dC, negated
    let dkd_neg = mc.b_over_a * p.sigma * p.c_d / (p.c_d + c).powi(2);
    Ok(RateSlopes {
        da: dkm + dkd_neg,
        db: dkm + (1.0 - mc.delta) * dkd_neg,
        dk: mc.beta_hat_a * dkm,
    })
}

pub fn rates_dp(c: f64, p: &Parameters, mc: &ModelConstants) -> Result<RateJacobian> {
    check_conc(c)?;
    let dkm_dcc = -c / (p.c_c + c).powi(2);
    // derivatives of -k_d/A
    let ndkd_dcd = -mc.b_over_a * p.sigma * c / (p.c_d + c).powi(2);
    let ndkd_dsigma = mc.b_over_a * c / (p.c_d + c);
    let keep = 1.0 - mc.delta;
    Ok(RateJacobian {
        rows: [
            [dkm_dcc, ndkd_dcd, ndkd_dsigma],
            [dkm_dcc, keep * ndkd_dcd, keep * ndkd_dsigma],
            [mc.beta_hat_a * dkm_dcc, 0.0, 0.0],
        ],
    })
}
