//! Oustaloup's recursive pole/zero approximation of `s^γ` over a band.

use nalgebra::Complex;

use crate::error::{Error, Result};

/// Band and order used when realizing a fractional operator as a filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OustaloupConfig {
    /// `(ω_low, ω_high)` in rad/s.
    pub band: (f64, f64),
    /// `N`: the filter has `2N + 1` zero/pole pairs.
    pub order: usize,
}

impl Default for OustaloupConfig {
    fn default() -> Self {
        Self {
            band: (1e-3, 1e3),
            order: 5,
        }
    }
}

impl OustaloupConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.band;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::invalid(format!(
                "band must satisfy 0 < ω_low < ω_high, got ({lo}, {hi})"
            )));
        }
        if self.order == 0 {
            return Err(Error::invalid("approximation order must be at least 1"));
        }
        Ok(())
    }
}

/// Stable rational filter `gain · Π (s − z_i) / Π (s − p_i)` with real,
/// negative zeros and poles.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFilter {
    exponent: f64,
    zeros: Vec<f64>,
    poles: Vec<f64>,
    gain: f64,
    band: (f64, f64),
    approx_order: usize,
}

impl RationalFilter {
    /// The fractional exponent `γ` this filter approximates.
    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Zero locations (rad/s, negative).
    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    /// Pole locations (rad/s, negative).
    pub fn poles(&self) -> &[f64] {
        &self.poles
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn band(&self) -> (f64, f64) {
        self.band
    }

    pub fn approx_order(&self) -> usize {
        self.approx_order
    }

    /// `H(jω)`.
    pub fn response(&self, omega: f64) -> Complex<f64> {
        let s = Complex::new(0.0, omega);
        let num = self
            .zeros
            .iter()
            .fold(Complex::new(self.gain, 0.0), |acc, z| acc * (s - z));
        let den = self
            .poles
            .iter()
            .fold(Complex::new(1.0, 0.0), |acc, p| acc * (s - p));
        num / den
    }
}

/// Oustaloup approximation of `s^γ` for `γ ∈ (−1, 1) \ {0}`.
///
/// Integer parts must be split off by the caller (see [`split_order`]).
pub fn oustaloup_approximation(
    exponent: f64,
    band: (f64, f64),
    order: usize,
) -> Result<RationalFilter> {
    if !exponent.is_finite() {
        return Err(Error::NonFinite("Oustaloup exponent"));
    }
    if !(exponent > -1.0 && exponent < 1.0) {
        return Err(Error::invalid(format!(
            "Oustaloup exponent must lie in (−1, 1), got {exponent}; split off the integer part"
        )));
    }
    if exponent == 0.0 {
        return Err(Error::invalid(
            "exponent 0 is the identity and needs no filter",
        ));
    }
    OustaloupConfig { band, order }.validate()?;

    let (lo, hi) = band;
    let ratio = hi / lo;
    let pairs = 2 * order + 1;
    let n = order as f64;
    let mut zeros = Vec::with_capacity(pairs);
    let mut poles = Vec::with_capacity(pairs);
    for k in 0..pairs {
        let k = k as f64 - n;
        let zero_exp = (k + n + 0.5 * (1.0 - exponent)) / pairs as f64;
        let pole_exp = (k + n + 0.5 * (1.0 + exponent)) / pairs as f64;
        zeros.push(-lo * ratio.powf(zero_exp));
        poles.push(-lo * ratio.powf(pole_exp));
    }
    Ok(RationalFilter {
        exponent,
        zeros,
        poles,
        gain: hi.powf(exponent),
        band,
        approx_order: order,
    })
}

/// Splits `γ = m + f` with `m = trunc(γ)`, so `f` carries the sign of `γ`
/// and `|f| < 1`. Fractional parts below `1e-12` are snapped to zero.
pub fn split_order(order: f64) -> (i32, f64) {
    let m = order.trunc();
    let mut f = order - m;
    if f.abs() < 1e-12 {
        f = 0.0;
    }
    (m as i32, f)
}
