//! LQR design of PI^λD^μ controllers for `K e^{−Ls} / (T s^α + 1)` plants.
//!
//! With the error states `x = [I^λ e, e, D^μ e]` the plant becomes the
//! incommensurate state space
//!
//! ```text
//! A = [[0, 1, 0], [0, 0, 1], [0, −1/T, 0]],   B = [0, 0, −K/T]ᵀ
//! ```
//!
//! and the optimal state feedback `F = R⁻¹BᵀP = [−Ki, −Kp, −Kd]` is read off as
//! FOPID gains. Dead time is handled either by solving the Riccati equation
//! with `e^{−AL}B` (Cai) or by post-multiplying the delay-free gain by
//! `e^{(A−BF)L}` (He).

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::matops::{expm, solve_care, CareProblem, CareSolution};

/// Non-integer-order plus time delay process `K e^{−Ls} / (T s^α + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NioptdPlant {
    gain: f64,
    delay: f64,
    time_constant: f64,
    alpha: f64,
}

impl NioptdPlant {
    pub fn new(gain: f64, delay: f64, time_constant: f64, alpha: f64) -> Result<Self> {
        if ![gain, delay, time_constant, alpha]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::NonFinite("plant parameters"));
        }
        if gain == 0.0 {
            return Err(Error::invalid("plant gain K must be non-zero"));
        }
        if delay < 0.0 {
            return Err(Error::invalid(format!("delay L must be ≥ 0, got {delay}")));
        }
        if time_constant <= 0.0 {
            return Err(Error::invalid(format!(
                "time constant T must be > 0, got {time_constant}"
            )));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::invalid(format!(
                "order α must lie in (0, 2), got {alpha}"
            )));
        }
        Ok(Self {
            gain,
            delay,
            time_constant,
            alpha,
        })
    }

    /// Oscillatory benchmark `e^{−0.5s} / (2 s^{1.5} + 1)`.
    pub fn benchmark_oscillatory() -> Self {
        Self::new(1.0, 0.5, 2.0, 1.5).expect("valid benchmark")
    }

    /// Sluggish benchmark `e^{−0.5s} / (2 s^{0.5} + 1)`.
    pub fn benchmark_sluggish() -> Self {
        Self::new(1.0, 0.5, 2.0, 0.5).expect("valid benchmark")
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }
    pub fn delay(&self) -> f64 {
        self.delay
    }
    pub fn time_constant(&self) -> f64 {
        self.time_constant
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `L / T`.
    pub fn delay_ratio(&self) -> f64 {
        self.delay / self.time_constant
    }

    pub fn with_delay(self, delay: f64) -> Result<Self> {
        Self::new(self.gain, delay, self.time_constant, self.alpha)
    }

    pub fn with_time_constant(self, time_constant: f64) -> Result<Self> {
        Self::new(self.gain, self.delay, time_constant, self.alpha)
    }

    /// Open-loop step response creeps up without overshoot (`α < 1`).
    pub fn is_sluggish(&self) -> bool {
        self.alpha < 1.0
    }

    /// Open-loop step response overshoots and rings (`α > 1`).
    pub fn is_oscillatory(&self) -> bool {
        self.alpha > 1.0
    }

    /// `G(jω)`, delay included.
    pub fn frequency_response(&self, omega: f64) -> Complex<f64> {
        let jw = Complex::new(0.0, omega);
        let delay = Complex::from_polar(1.0, -omega * self.delay);
        delay * self.gain / (jw.powf(self.alpha) * self.time_constant + 1.0)
    }
}

/// `u = Kp e + Ki I^λ e + Kd D^μ e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FopidController {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl FopidController {
    pub fn new(kp: f64, ki: f64, kd: f64, lambda: f64, mu: f64) -> Result<Self> {
        let c = Self {
            kp,
            ki,
            kd,
            lambda,
            mu,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.kp, self.ki, self.kd, self.lambda, self.mu]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::NonFinite("controller parameters"));
        }
        for (name, v) in [("λ", self.lambda), ("μ", self.mu)] {
            if !(0.0..=2.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "{name} must lie in [0, 2], got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn gains(&self) -> PidGains {
        PidGains {
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
        }
    }

    /// `C(jω) = Kp + Ki (jω)^{−λ} + Kd (jω)^μ`.
    pub fn frequency_response(&self, omega: f64) -> Complex<f64> {
        let jw = Complex::new(0.0, omega);
        Complex::new(self.kp, 0.0) + jw.powf(-self.lambda) * self.ki + jw.powf(self.mu) * self.kd
    }
}

/// The three gains without orders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    /// Reads a state-feedback row `[−Ki, −Kp, −Kd]`.
    pub fn from_feedback_row(row: [f64; 3]) -> Self {
        Self {
            ki: -row[0],
            kp: -row[1],
            kd: -row[2],
        }
    }

    pub fn feedback_row(&self) -> [f64; 3] {
        [-self.ki, -self.kp, -self.kd]
    }

    pub fn with_orders(self, lambda: f64, mu: f64) -> Result<FopidController> {
        FopidController::new(self.kp, self.ki, self.kd, lambda, mu)
    }

    pub fn norm(&self) -> f64 {
        (self.kp * self.kp + self.ki * self.ki + self.kd * self.kd).sqrt()
    }
}

/// Decision vector of the weight search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrDesignVars {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub r: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl LqrDesignVars {
    /// Search box `(lower, upper)` in the order `Q1, Q2, Q3, R, λ, μ`.
    pub const BOUNDS: [(f64, f64); 6] = [
        (0.0, 100.0),
        (0.0, 100.0),
        (0.0, 100.0),
        (0.0, 100.0),
        (0.0, 2.0),
        (0.0, 2.0),
    ];

    pub const NAMES: [&'static str; 6] = ["Q1", "Q2", "Q3", "R", "lambda", "mu"];

    pub fn new(q1: f64, q2: f64, q3: f64, r: f64, lambda: f64, mu: f64) -> Result<Self> {
        Self::from_slice(&[q1, q2, q3, r, lambda, mu])
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != 6 {
            return Err(Error::DimensionMismatch {
                expected: "6 design variables".into(),
                actual: v.len().to_string(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("design variables"));
        }
        for ((x, (lo, hi)), name) in v.iter().zip(Self::BOUNDS).zip(Self::NAMES) {
            if *x < lo || *x > hi {
                return Err(Error::invalid(format!("{name} = {x} outside [{lo}, {hi}]")));
            }
        }
        if v[3] <= 0.0 {
            return Err(Error::invalid("R must be strictly positive"));
        }
        Ok(Self {
            q1: v[0],
            q2: v[1],
            q3: v[2],
            r: v[3],
            lambda: v[4],
            mu: v[5],
        })
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.q1, self.q2, self.q3, self.r, self.lambda, self.mu]
    }

    pub fn q_diag(&self) -> [f64; 3] {
        [self.q1, self.q2, self.q3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DelayMethod {
    DelayFree,
    Cai,
    He,
}

impl DelayMethod {
    pub const ALL: [DelayMethod; 3] = [DelayMethod::DelayFree, DelayMethod::Cai, DelayMethod::He];

    pub fn as_str(&self) -> &'static str {
        match self {
            DelayMethod::DelayFree => "delay-free",
            DelayMethod::Cai => "cai",
            DelayMethod::He => "he",
        }
    }
}

impl fmt::Display for DelayMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DelayMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "delay-free" | "delayfree" | "delay_free" | "none" => Ok(DelayMethod::DelayFree),
            "cai" => Ok(DelayMethod::Cai),
            "he" => Ok(DelayMethod::He),
            other => Err(Error::invalid(format!(
                "unknown delay method '{other}' (expected delay-free, cai or he)"
            ))),
        }
    }
}

/// Gains together with the effective feedback row and the Riccati solution
/// they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GainDesign {
    pub gains: PidGains,
    /// `[−Ki, −Kp, −Kd]`.
    pub feedback_row: [f64; 3],
    pub care: CareSolution,
}

impl GainDesign {
    fn from_row(row: &DMatrix<f64>, care: CareSolution) -> Self {
        let feedback_row = [row[(0, 0)], row[(0, 1)], row[(0, 2)]];
        Self {
            gains: PidGains::from_feedback_row(feedback_row),
            feedback_row,
            care,
        }
    }
}

/// `(A, B)` of the error-state model.
pub fn build_state_space(plant: &NioptdPlant) -> (DMatrix<f64>, DMatrix<f64>) {
    let t = plant.time_constant;
    let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0 / t, 0.0]);
    let b = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, -plant.gain / t]);
    (a, b)
}

fn weights(q: [f64; 3], r: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut qm = DMatrix::zeros(3, 3);
    for (i, v) in q.iter().enumerate() {
        qm[(i, i)] = *v;
    }
    (qm, DMatrix::from_element(1, 1, r))
}

/// Delay-free LQR gains; the plant delay is ignored.
pub fn gains_delay_free(plant: &NioptdPlant, q: [f64; 3], r: f64) -> Result<GainDesign> {
    let (a, b) = build_state_space(plant);
    let (qm, rm) = weights(q, r);
    let care = solve_care(&CareProblem::new(a, b, qm, rm)?)?;
    let row = care.gain.clone();
    Ok(GainDesign::from_row(&row, care))
}

/// Cai's predictor form: CARE with `B(A) = e^{−AL}B`, gain `R⁻¹B(A)ᵀP̄`.
pub fn gains_cai(plant: &NioptdPlant, q: [f64; 3], r: f64) -> Result<GainDesign> {
    let (a, b) = build_state_space(plant);
    let b_delay = expm(&(&a * -plant.delay))? * b;
    let (qm, rm) = weights(q, r);
    let care = solve_care(&CareProblem::new(a, b_delay, qm, rm)?)?;
    let row = care.gain.clone();
    Ok(GainDesign::from_row(&row, care))
}

/// He's steady-state form: `G = F e^{(A−BF)L}` with `F` the delay-free gain.
pub fn gains_he(plant: &NioptdPlant, q: [f64; 3], r: f64) -> Result<GainDesign> {
    let (a, b) = build_state_space(plant);
    let (qm, rm) = weights(q, r);
    let care = solve_care(&CareProblem::new(a.clone(), b.clone(), qm, rm)?)?;
    let closed = a - b * &care.gain;
    let row = &care.gain * expm(&(closed * plant.delay))?;
    Ok(GainDesign::from_row(&row, care))
}

pub fn gains_for(
    plant: &NioptdPlant,
    q: [f64; 3],
    r: f64,
    method: DelayMethod,
) -> Result<GainDesign> {
    match method {
        DelayMethod::DelayFree => gains_delay_free(plant, q, r),
        DelayMethod::Cai => gains_cai(plant, q, r),
        DelayMethod::He => gains_he(plant, q, r),
    }
}

/// Full controller from a point of the search space.
pub fn design_from_vars(
    plant: &NioptdPlant,
    vars: &LqrDesignVars,
    method: DelayMethod,
) -> Result<FopidController> {
    LqrDesignVars::from_slice(&vars.to_array())?;
    let design = gains_for(plant, vars.q_diag(), vars.r, method)?;
    design.gains.with_orders(vars.lambda, vars.mu)
}

/// `min (|arg λ| − qπ/2)` over the non-zero eigenvalues of `a_closed`;
/// positive means stable for a commensurate order-`q` system.
/// Returns `+∞` when every eigenvalue is zero.
pub fn matignon_margin(a_closed: &DMatrix<f64>, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!(
            "commensurate order must lie in (0, 1], got {q}"
        )));
    }
    if a_closed.nrows() != a_closed.ncols() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            actual: format!("{}×{}", a_closed.nrows(), a_closed.ncols()),
        });
    }
    if a_closed.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("closed-loop matrix"));
    }
    let zero_tol = 1e-12 * a_closed.norm().max(1.0);
    Ok(crate::matops::eigenvalues(a_closed)?
        .into_iter()
        .filter(|l| l.norm() > zero_tol)
        .map(|l| l.im.atan2(l.re).abs() - q * FRAC_PI_2)
        .fold(f64::INFINITY, f64::min))
}
