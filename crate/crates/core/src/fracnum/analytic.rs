use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Closed-form Caputo/RL differintegral of `t^p`:
/// `Γ(p+1)/Γ(p+1−γ) · t^(p−γ)`.
pub fn analytic_power_differintegral(power: f64, order: f64, t: f64) -> Result<f64> {
    if !(power >= 0.0) {
        return Err(Error::invalid(format!(
            "power must be non-negative, got {power}"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!(
            "time must be non-negative, got {t}"
        )));
    }
    if !order.is_finite() || !power.is_finite() || !t.is_finite() {
        return Err(Error::NonFinite("analytic differintegral arguments"));
    }
    let exponent = power - order;
    if exponent <= -1.0 {
        return Err(Error::invalid(format!(
            "p − γ = {exponent} ≤ −1 is not integrable"
        )));
    }
    Ok(gamma(power + 1.0) / gamma(exponent + 1.0) * t.powf(exponent))
}
