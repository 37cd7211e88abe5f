//! Numerical fractional differintegration.

mod analytic;
mod gl;
mod oustaloup;
mod stepper;

pub use analytic::analytic_power_differintegral;
pub use gl::{gl_coefficients, gl_differintegral, GlKernel};
pub use oustaloup::{oustaloup_approximation, split_order, OustaloupConfig, RationalFilter};
pub use stepper::{DifferIntegrator, FilterStepper, GlStepper, Realization, StepOperator};
