//! Grünwald–Letnikov differintegration on a uniform grid.
//!
//! Under zero initial conditions the GL operator coincides with the Caputo
//! derivative, which is the only setting the rest of the crate needs.

use crate::error::{Error, Result};

/// Binomial weights `c_j = (-1)^j · binom(γ, j)` via the recurrence
/// `c_j = c_{j-1} · (1 − (γ+1)/j)`, `c_0 = 1`.
pub fn gl_coefficients(order: f64, n: usize) -> Vec<f64> {
    let mut coeffs = Vec::with_capacity(n);
    if n == 0 {
        return coeffs;
    }
    coeffs.push(1.0);
    for j in 1..n {
        let prev = coeffs[j - 1];
        coeffs.push(prev * (1.0 - (order + 1.0) / j as f64));
    }
    coeffs
}

/// Number of non-zero GL weights for a non-negative integer order, `None` for
/// every other order (infinite support).
pub(crate) fn finite_support(order: f64) -> Option<usize> {
    if order >= 0.0 && order.fract() == 0.0 {
        Some(order as usize + 1)
    } else {
        None
    }
}

/// A GL kernel of fixed order, step and memory length.
#[derive(Debug, Clone, PartialEq)]
pub struct GlKernel {
    order: f64,
    step: f64,
    coeffs: Vec<f64>,
}

impl GlKernel {
    /// `memory_length` is the number of weights kept (`N ≥ 1`).
    pub fn new(order: f64, step: f64, memory_length: usize) -> Result<Self> {
        if !order.is_finite() {
            return Err(Error::NonFinite("differintegration order"));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::invalid(format!("step must be positive, got {step}")));
        }
        if memory_length == 0 {
            return Err(Error::invalid("memory length must be at least 1"));
        }
        Ok(Self {
            order,
            step,
            coeffs: gl_coefficients(order, memory_length),
        })
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn memory_length(&self) -> usize {
        self.coeffs.len()
    }

    /// `out[k] = h^(−γ) · Σ_{j ≤ min(k, N−1)} c_j · f[k−j]`.
    pub fn apply(&self, signal: &[f64]) -> Vec<f64> {
        let scale = self.step.powf(-self.order);
        let support =
            finite_support(self.order).map_or(self.coeffs.len(), |s| s.min(self.coeffs.len()));
        let coeffs = &self.coeffs[..support];
        (0..signal.len())
            .map(|k| {
                let acc: f64 = coeffs
                    .iter()
                    .zip(signal[..=k].iter().rev())
                    .map(|(c, f)| c * f)
                    .sum();
                scale * acc
            })
            .collect()
    }
}

/// GL differintegral of a uniformly sampled signal starting at `t = 0`.
///
/// `memory = None` keeps the full history. Order zero returns the input
/// unchanged.
pub fn gl_differintegral(
    signal: &[f64],
    order: f64,
    step: f64,
    memory: Option<usize>,
) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    if !order.is_finite() {
        return Err(Error::NonFinite("differintegration order"));
    }
    if order == 0.0 {
        return Ok(signal.to_vec());
    }
    let full = signal.len().max(1);
    let memory = memory.map_or(full, |m| m.clamp(1, full));
    let memory = finite_support(order).map_or(memory, |s| s.min(memory));
    Ok(GlKernel::new(order, step, memory)?.apply(signal))
}
