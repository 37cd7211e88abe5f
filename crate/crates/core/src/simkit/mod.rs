//! Fixed-step simulation of the delayed fractional loop and its performance
//! indices.
//!
//! Per step `k`: `e_k = r − y_k`, `u_k = Kp e_k + Ki (I^λ e)_k + Kd (D^μ e)_k`,
//! and the plant is driven by `u_{k−d} + w(t_k)` with `d = round(L/h)` and `w`
//! an optional input disturbance step. Without delay the loop is algebraic;
//! every block is affine in its current input, so `y_k` is solved exactly.

mod plant;

use std::io::Write;

pub use plant::{fractional_lag_state_space, GlPlant, PlantModel, StateSpace, ZohPlant};

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::fracnum::{DifferIntegrator, Realization, StepOperator};
use crate::lqr_fopid::{
    design_from_vars, DelayMethod, FopidController, LqrDesignVars, NioptdPlant,
};

/// Objective value assigned to failed or diverging designs.
pub const PENALTY: f64 = 1e6;

/// `|y|` beyond this multiple of `max(1, |r|)` counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Input-additive step disturbance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub time: f64,
    pub magnitude: f64,
}

impl Default for Disturbance {
    fn default() -> Self {
        Self {
            time: 70.0,
            magnitude: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub setpoint: f64,
    pub horizon: f64,
    pub step: f64,
    pub disturbance: Option<Disturbance>,
    pub realization: Realization,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            setpoint: 1.0,
            horizon: 100.0,
            step: 0.01,
            disturbance: None,
            realization: Realization::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !self.setpoint.is_finite() {
            return Err(Error::NonFinite("setpoint"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        let ratio = self.horizon / self.step;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::invalid(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.step
            )));
        }
        if let Some(d) = self.disturbance {
            if !d.time.is_finite() || !d.magnitude.is_finite() {
                return Err(Error::NonFinite("disturbance"));
            }
        }
        Ok(())
    }

    /// `horizon / h`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    /// Delay in samples, `round(L / h)`; the rounding error is at most `h/2`.
    pub fn delay_steps(&self, delay: f64) -> usize {
        (delay / self.step).round() as usize
    }

    fn disturbance_at(&self, t: f64) -> f64 {
        match self.disturbance {
            Some(d) if t >= d.time - 1e-9 * self.step => d.magnitude,
            _ => 0.0,
        }
    }
}

/// Closed-loop trajectories and indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    /// `I^λ e`.
    pub x1: Vec<f64>,
    /// `e`.
    pub x2: Vec<f64>,
    /// `D^μ e`.
    pub x3: Vec<f64>,
    pub itse: f64,
    pub isdco: f64,
    pub diverged: bool,
}

impl SimResult {
    pub fn objectives(&self) -> [f64; 2] {
        [self.itse, self.isdco]
    }

    /// Writes `t,y,u,x1,x2,x3`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,y,u,x1,x2,x3")?;
        for k in 0..self.t.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.t[k], self.y[k], self.u[k], self.x1[k], self.x2[k], self.x3[k]
            )?;
        }
        Ok(())
    }
}

/// Open-loop unit-step response.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub diverged: bool,
}

impl StepResponse {
    /// Writes `t,y,u` with `u` the undelayed unit step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,y,u")?;
        for (t, y) in self.t.iter().zip(&self.y) {
            writeln!(out, "{t},{y},1")?;
        }
        Ok(())
    }
}

fn divergence_limit(setpoint: f64) -> f64 {
    DIVERGENCE_FACTOR * setpoint.abs().max(1.0)
}

/// Response to `u(t) = 1(t)`, i.e. the plant sees `1(t − L)`.
pub fn simulate_open_loop_step(
    plant: &NioptdPlant,
    horizon: f64,
    step: f64,
    realization: Realization,
) -> Result<StepResponse> {
    let scenario = Scenario {
        horizon,
        step,
        realization,
        ..Scenario::default()
    };
    scenario.validate()?;
    let mut model = PlantModel::new(plant, step, realization)?;
    let n = scenario.steps();
    let d = scenario.delay_steps(plant.delay());
    let limit = divergence_limit(1.0);
    let mut t = Vec::with_capacity(n + 1);
    let mut y = Vec::with_capacity(n + 1);
    let mut diverged = false;
    for k in 0..=n {
        let input = if k >= d { 1.0 } else { 0.0 };
        let yk = model.push(input);
        t.push(k as f64 * step);
        y.push(yk);
        if !yk.is_finite() || yk.abs() > limit * plant.gain().abs().max(1.0) {
            diverged = true;
            break;
        }
    }
    Ok(StepResponse { t, y, diverged })
}

/// `G(jω) = K e^{−jωL} / (T (jω)^α + 1)` on the principal branch.
pub fn frequency_response(plant: &NioptdPlant, omega: f64) -> Result<Complex<f64>> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::invalid(format!("ω must be positive, got {omega}")));
    }
    Ok(plant.frequency_response(omega))
}

/// One Bode sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodePoint {
    pub omega: f64,
    pub magnitude_db: f64,
    /// Unwrapped phase in degrees.
    pub phase_deg: f64,
}

/// Magnitude and unwrapped phase over `count` log-spaced frequencies.
pub fn bode(
    plant: &NioptdPlant,
    omega_min: f64,
    omega_max: f64,
    count: usize,
) -> Result<Vec<BodePoint>> {
    if !(omega_min > 0.0 && omega_max > omega_min && omega_max.is_finite()) || count < 2 {
        return Err(Error::invalid(
            "need 0 < ω_min < ω_max and at least two points",
        ));
    }
    let ratio = (omega_max / omega_min).ln();
    let mut out: Vec<BodePoint> = Vec::with_capacity(count);
    for i in 0..count {
        let omega = omega_min * (ratio * i as f64 / (count - 1) as f64).exp();
        let g = frequency_response(plant, omega)?;
        let mut phase = g.arg().to_degrees();
        if let Some(prev) = out.last() {
            phase += 360.0 * ((prev.phase_deg - phase) / 360.0).round();
        }
        out.push(BodePoint {
            omega,
            magnitude_db: 20.0 * g.norm().log10(),
            phase_deg: phase,
        });
    }
    Ok(out)
}

/// Writes `omega,magnitude_db,phase_deg`.
pub fn write_bode_csv<W: Write>(points: &[BodePoint], mut out: W) -> Result<()> {
    writeln!(out, "omega,magnitude_db,phase_deg")?;
    for p in points {
        writeln!(out, "{},{},{}", p.omega, p.magnitude_db, p.phase_deg)?;
    }
    Ok(())
}

/// `(∫ t e² dt, ∫ (u − u_ss)² dt)` by the left rectangle rule over the first
/// `horizon / h` samples.
pub fn performance_indices(e: &[f64], u: &[f64], u_ss: f64, step: f64, horizon: f64) -> (f64, f64) {
    let n = ((horizon / step).round() as usize)
        .min(e.len())
        .min(u.len());
    let mut itse = 0.0;
    let mut isdco = 0.0;
    for k in 0..n {
        let t = k as f64 * step;
        itse += t * e[k] * e[k];
        let du = u[k] - u_ss;
        isdco += du * du;
    }
    (itse * step, isdco * step)
}

pub fn simulate_closed_loop(
    plant: &NioptdPlant,
    controller: &FopidController,
    scenario: &Scenario,
) -> Result<SimResult> {
    controller.validate()?;
    scenario.validate()?;
    let h = scenario.step;
    let mut model = PlantModel::new(plant, h, scenario.realization)?;
    let mut integ = DifferIntegrator::new(-controller.lambda, h, scenario.realization)?;
    let mut diff = DifferIntegrator::new(controller.mu, h, scenario.realization)?;
    let (kp, ki, kd) = (controller.kp, controller.ki, controller.kd);
    let r = scenario.setpoint;
    let n = scenario.steps();
    let d = scenario.delay_steps(plant.delay());
    let limit = divergence_limit(r);

    let mut res = SimResult {
        t: Vec::with_capacity(n + 1),
        y: Vec::with_capacity(n + 1),
        u: Vec::with_capacity(n + 1),
        x1: Vec::with_capacity(n + 1),
        x2: Vec::with_capacity(n + 1),
        x3: Vec::with_capacity(n + 1),
        itse: 0.0,
        isdco: 0.0,
        diverged: false,
    };

    for k in 0..=n {
        let t = k as f64 * h;
        let w = scenario.disturbance_at(t);
        let pg = model.feedthrough();
        let po = model.pending();
        let y = if d == 0 {
            let cg = kp + ki * integ.feedthrough() + kd * diff.feedthrough();
            let co = ki * integ.pending() + kd * diff.pending();
            (po + pg * (cg * r + co + w)) / (1.0 + pg * cg)
        } else {
            let ud = if k >= d { res.u[k - d] } else { 0.0 };
            po + pg * (ud + w)
        };
        let e = r - y;
        let x1 = integ.push(e);
        let x3 = diff.push(e);
        let u = kp * e + ki * x1 + kd * x3;
        let plant_in = if d == 0 {
            u + w
        } else if k >= d {
            res.u[k - d] + w
        } else {
            w
        };
        model.push(plant_in);

        res.t.push(t);
        res.y.push(y);
        res.u.push(u);
        res.x1.push(x1);
        res.x2.push(e);
        res.x3.push(x3);
        if !y.is_finite() || !u.is_finite() || y.abs() > limit {
            res.diverged = true;
            break;
        }
    }

    if res.diverged {
        res.itse = PENALTY;
        res.isdco = PENALTY;
    } else {
        let u_ss = if controller.lambda > 0.0 {
            r / plant.gain()
        } else {
            *res.u.last().expect("at least one sample")
        };
        let (itse, isdco) = performance_indices(&res.x2, &res.u, u_ss, h, scenario.horizon);
        res.itse = itse;
        res.isdco = isdco;
    }
    Ok(res)
}

/// `(J1, J2)` of a point in the design space; any failure maps to the
/// penalty pair.
pub fn evaluate_design_objectives(
    plant: &NioptdPlant,
    vars: &LqrDesignVars,
    method: DelayMethod,
    scenario: &Scenario,
) -> [f64; 2] {
    let penalty = [PENALTY, PENALTY];
    let Ok(controller) = design_from_vars(plant, vars, method) else {
        return penalty;
    };
    match simulate_closed_loop(plant, &controller, scenario) {
        Ok(res) if !res.diverged && res.itse.is_finite() && res.isdco.is_finite() => {
            [res.itse, res.isdco]
        }
        _ => penalty,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub delay: f64,
    pub time_constant: f64,
    pub itse: f64,
    pub isdco: f64,
    pub diverged: bool,
}

/// Indices of a fixed controller over a grid of delays and lags (other plant
/// parameters nominal). Rows follow `delays`, columns `time_constants`.
pub fn robustness_sweep(
    nominal: &NioptdPlant,
    controller: &FopidController,
    delays: &[f64],
    time_constants: &[f64],
    scenario: &Scenario,
) -> Result<Vec<SweepCell>> {
    let mut cells = Vec::with_capacity(delays.len() * time_constants.len());
    for &l in delays {
        for &t in time_constants {
            let plant = nominal.with_delay(l)?.with_time_constant(t)?;
            let res = simulate_closed_loop(&plant, controller, scenario)?;
            cells.push(SweepCell {
                delay: l,
                time_constant: t,
                itse: res.itse,
                isdco: res.isdco,
                diverged: res.diverged,
            });
        }
    }
    Ok(cells)
}

/// Writes `L,T,itse,isdco`.
pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], mut out: W) -> Result<()> {
    writeln!(out, "L,T,itse,isdco")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{}",
            c.delay, c.time_constant, c.itse, c.isdco
        )?;
    }
    Ok(())
}
