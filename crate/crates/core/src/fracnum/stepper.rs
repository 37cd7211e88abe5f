//! Causal, sample-by-sample realizations of `D^γ` for time-stepping loops.
//!
//! Every operator exposes its output at the current step as an affine map of
//! the current input, `y_k = feedthrough · x_k + pending`, so algebraic loops
//! (zero-delay feedback) can be solved before the input is committed.

use super::gl::{finite_support, gl_coefficients};
use super::oustaloup::{oustaloup_approximation, split_order, OustaloupConfig};
use crate::error::{Error, Result};

/// How fractional operators are discretized in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Realization {
    /// Grünwald–Letnikov convolution; `memory = None` keeps full history.
    GrunwaldLetnikov { memory: Option<usize> },
    /// Oustaloup filter, Tustin-discretized section by section.
    Oustaloup(OustaloupConfig),
}

impl Default for Realization {
    fn default() -> Self {
        Realization::Oustaloup(OustaloupConfig::default())
    }
}

pub trait StepOperator {
    /// Coefficient of the current input in the current output.
    fn feedthrough(&self) -> f64;
    /// Output at the current step if the current input were zero.
    fn pending(&self) -> f64;
    /// Commit the current input, advance one step and return the output.
    fn push(&mut self, input: f64) -> f64;
}

#[derive(Debug, Clone)]
pub struct GlStepper {
    order: f64,
    scale: f64,
    coeffs: Vec<f64>,
    limit: Option<usize>,
    history: Vec<f64>,
}

impl GlStepper {
    pub fn new(order: f64, step: f64, memory: Option<usize>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::invalid(format!("step must be positive, got {step}")));
        }
        if !order.is_finite() {
            return Err(Error::NonFinite("differintegration order"));
        }
        if memory == Some(0) {
            return Err(Error::invalid("memory length must be at least 1"));
        }
        let limit = match (memory, finite_support(order)) {
            (Some(m), Some(s)) => Some(m.min(s)),
            (m, s) => m.or(s),
        };
        Ok(Self {
            order,
            scale: step.powf(-order),
            coeffs: gl_coefficients(order, 2),
            limit,
            history: Vec::new(),
        })
    }

    fn ensure_coeffs(&mut self, n: usize) {
        let have = self.coeffs.len();
        if n > have {
            let order = self.order;
            self.coeffs.reserve(n - have);
            for j in have..n {
                let prev = self.coeffs[j - 1];
                self.coeffs.push(prev * (1.0 - (order + 1.0) / j as f64));
            }
        }
    }

    fn terms(&self) -> usize {
        let k = self.history.len();
        self.limit.map_or(k + 1, |m| m.min(k + 1))
    }
}

impl StepOperator for GlStepper {
    fn feedthrough(&self) -> f64 {
        self.scale
    }

    fn pending(&self) -> f64 {
        let terms = self.terms();
        let acc: f64 = self.coeffs[1..terms]
            .iter()
            .zip(self.history.iter().rev())
            .map(|(c, x)| c * x)
            .sum();
        self.scale * acc
    }

    fn push(&mut self, input: f64) -> f64 {
        let out = self.feedthrough() * input + self.pending();
        self.history.push(input);
        self.ensure_coeffs(self.terms());
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum SectionKind {
    /// Tustin image of `(n1·s + n0) / (s + p)`.
    Bilinear { b0: f64, b1: f64, a1: f64 },
    /// Backward difference `(1 − z⁻¹)/h`.
    Difference { inv_step: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Section {
    kind: SectionKind,
    x_prev: f64,
    y_prev: f64,
}

impl Section {
    fn bilinear(n1: f64, n0: f64, p: f64, step: f64) -> Self {
        let c = 2.0 / step;
        let d = c + p;
        Section {
            kind: SectionKind::Bilinear {
                b0: (n1 * c + n0) / d,
                b1: (n0 - n1 * c) / d,
                a1: (p - c) / d,
            },
            x_prev: 0.0,
            y_prev: 0.0,
        }
    }

    fn integrator(step: f64) -> Self {
        Self::bilinear(0.0, 1.0, 0.0, step)
    }

    fn difference(step: f64) -> Self {
        Section {
            kind: SectionKind::Difference {
                inv_step: 1.0 / step,
            },
            x_prev: 0.0,
            y_prev: 0.0,
        }
    }

    fn feedthrough(&self) -> f64 {
        match self.kind {
            SectionKind::Bilinear { b0, .. } => b0,
            SectionKind::Difference { inv_step } => inv_step,
        }
    }

    fn pending(&self) -> f64 {
        match self.kind {
            SectionKind::Bilinear { b1, a1, .. } => b1 * self.x_prev - a1 * self.y_prev,
            SectionKind::Difference { inv_step } => -inv_step * self.x_prev,
        }
    }

    fn push(&mut self, x: f64) -> f64 {
        let y = self.feedthrough() * x + self.pending();
        self.x_prev = x;
        self.y_prev = y;
        y
    }
}

/// Cascade of first-order sections: integer part (trapezoid integrators or
/// backward differences) followed by the Oustaloup fractional part.
#[derive(Debug, Clone)]
pub struct FilterStepper {
    gain: f64,
    sections: Vec<Section>,
}

impl FilterStepper {
    pub fn new(order: f64, step: f64, config: OustaloupConfig) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::invalid(format!("step must be positive, got {step}")));
        }
        if !order.is_finite() {
            return Err(Error::NonFinite("differintegration order"));
        }
        config.validate()?;
        let (whole, frac) = split_order(order);
        let mut sections = Vec::new();
        for _ in 0..whole.unsigned_abs() {
            sections.push(if whole < 0 {
                Section::integrator(step)
            } else {
                Section::difference(step)
            });
        }
        let mut gain = 1.0;
        if frac != 0.0 {
            let filter = oustaloup_approximation(frac, config.band, config.order)?;
            gain = filter.gain();
            for (z, p) in filter.zeros().iter().zip(filter.poles()) {
                sections.push(Section::bilinear(1.0, -z, -p, step));
            }
        }
        Ok(Self { gain, sections })
    }
}

impl StepOperator for FilterStepper {
    fn feedthrough(&self) -> f64 {
        self.gain
            * self
                .sections
                .iter()
                .map(Section::feedthrough)
                .product::<f64>()
    }

    fn pending(&self) -> f64 {
        let p = self
            .sections
            .iter()
            .fold(0.0, |acc, s| s.feedthrough() * acc + s.pending());
        self.gain * p
    }

    fn push(&mut self, input: f64) -> f64 {
        let v = self.sections.iter_mut().fold(input, |v, s| s.push(v));
        self.gain * v
    }
}

/// A realized differintegrator of a given order.
#[derive(Debug, Clone)]
pub enum DifferIntegrator {
    Identity,
    Gl(GlStepper),
    Filter(FilterStepper),
}

impl DifferIntegrator {
    pub fn new(order: f64, step: f64, realization: Realization) -> Result<Self> {
        if !order.is_finite() {
            return Err(Error::NonFinite("differintegration order"));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::invalid(format!("step must be positive, got {step}")));
        }
        if order == 0.0 {
            return Ok(DifferIntegrator::Identity);
        }
        match realization {
            Realization::GrunwaldLetnikov { memory } => {
                Ok(DifferIntegrator::Gl(GlStepper::new(order, step, memory)?))
            }
            Realization::Oustaloup(cfg) => Ok(DifferIntegrator::Filter(FilterStepper::new(
                order, step, cfg,
            )?)),
        }
    }
}

impl StepOperator for DifferIntegrator {
    fn feedthrough(&self) -> f64 {
        match self {
            DifferIntegrator::Identity => 1.0,
            DifferIntegrator::Gl(g) => g.feedthrough(),
            DifferIntegrator::Filter(f) => f.feedthrough(),
        }
    }

    fn pending(&self) -> f64 {
        match self {
            DifferIntegrator::Identity => 0.0,
            DifferIntegrator::Gl(g) => g.pending(),
            DifferIntegrator::Filter(f) => f.pending(),
        }
    }

    fn push(&mut self, input: f64) -> f64 {
        match self {
            DifferIntegrator::Identity => input,
            DifferIntegrator::Gl(g) => g.push(input),
            DifferIntegrator::Filter(f) => f.push(input),
        }
    }
}
