//! LQR-based tuning of fractional-order PID (PI^λD^μ) controllers for
//! non-integer-order-plus-time-delay (NIOPTD) processes.
//!
//! The crate is organised bottom-up:
//!
//! - [`fracnum`]: Grünwald–Letnikov differintegration, Oustaloup filters and
//!   step-by-step realizations of fractional operators.
//! - [`matops`]: matrix exponential, continuous algebraic Riccati equation and
//!   spectral diagnostics.
//! - [`lqr_fopid`]: plant/controller types, the LQR → FOPID gain map and the
//!   two delay-handling gain formulas.
//! - [`simkit`]: fixed-step closed-loop simulation and the ITSE / ISDCO indices.
//! - [`nsga2`]: the multi-objective search over LQR weights and orders.
//! - [`rules`]: polynomial tuning rules in (L/T, α) and their regression fit.

pub mod error;
pub mod fracnum;
pub mod lqr_fopid;
pub mod matops;
pub mod nsga2;
pub mod rules;
pub mod simkit;

pub use error::{Error, Result};
pub use lqr_fopid::{DelayMethod, FopidController, LqrDesignVars, NioptdPlant};
pub use nsga2::{MooConfig, ParetoFront};
pub use simkit::{Scenario, SimResult};
