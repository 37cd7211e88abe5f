//! Discrete-time realizations of `K / (T s^α + 1)` (delay handled by the loop).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fracnum::{
    oustaloup_approximation, split_order, GlStepper, OustaloupConfig, Realization, StepOperator,
};
use crate::lqr_fopid::NioptdPlant;
use crate::matops::expm;

/// Continuous single-input single-output state space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl StateSpace {
    fn first_order(pole: f64, zero: f64) -> Self {
        // (s − z)/(s − p) = 1 + (p − z)/(s − p)
        Self {
            a: DMatrix::from_element(1, 1, pole),
            b: DVector::from_element(1, 1.0),
            c: DVector::from_element(1, pole - zero),
            d: 1.0,
        }
    }

    fn integrator() -> Self {
        Self {
            a: DMatrix::zeros(1, 1),
            b: DVector::from_element(1, 1.0),
            c: DVector::from_element(1, 1.0),
            d: 0.0,
        }
    }

    fn gain(k: f64) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
            c: DVector::zeros(0),
            d: k,
        }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `next ∘ self`.
    fn then(&self, next: &StateSpace) -> StateSpace {
        let n1 = self.order();
        let n2 = next.order();
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&next.a);
        a.view_mut((n1, 0), (n2, n1))
            .copy_from(&(&next.b * self.c.transpose()));
        let mut b = DVector::zeros(n1 + n2);
        b.rows_mut(0, n1).copy_from(&self.b);
        b.rows_mut(n1, n2).copy_from(&(&next.b * self.d));
        let mut c = DVector::zeros(n1 + n2);
        c.rows_mut(0, n1).copy_from(&(&self.c * next.d));
        c.rows_mut(n1, n2).copy_from(&next.c);
        StateSpace {
            a,
            b,
            c,
            d: self.d * next.d,
        }
    }

    /// Transfer function value at `s = jω`.
    pub fn frequency_response(&self, omega: f64) -> nalgebra::Complex<f64> {
        use nalgebra::Complex;
        let n = self.order();
        if n == 0 {
            return Complex::new(self.d, 0.0);
        }
        let s_minus_a = DMatrix::<Complex<f64>>::identity(n, n) * Complex::new(0.0, omega)
            - self.a.map(|x| Complex::new(x, 0.0));
        let b = self.b.map(|x| Complex::new(x, 0.0));
        let x = s_minus_a.lu().solve(&b).expect("jω not an eigenvalue");
        let cx: Complex<f64> = self.c.iter().zip(x.iter()).map(|(c, x)| x * *c).sum();
        cx + self.d
    }
}

/// State space of `K / (T s^α + 1)` with `s^{−α}` replaced by integrators and
/// an Oustaloup filter: the forward path `s^{−α}/T` closed by unity feedback on
/// `K·u`.
pub fn fractional_lag_state_space(
    plant: &NioptdPlant,
    config: OustaloupConfig,
) -> Result<StateSpace> {
    config.validate()?;
    let (whole, frac) = split_order(plant.alpha());
    let mut forward = StateSpace::gain(1.0 / plant.time_constant());
    for _ in 0..whole {
        forward = forward.then(&StateSpace::integrator());
    }
    if frac != 0.0 {
        let filter = oustaloup_approximation(-frac, config.band, config.order)?;
        forward = forward.then(&StateSpace::gain(filter.gain()));
        for (z, p) in filter.zeros().iter().zip(filter.poles()) {
            forward = forward.then(&StateSpace::first_order(*p, *z));
        }
    }
    let k = plant.gain();
    let den = 1.0 + forward.d;
    let a = &forward.a - &forward.b * forward.c.transpose() / den;
    Ok(StateSpace {
        a,
        b: &forward.b * (k / den),
        c: &forward.c / den,
        d: forward.d * k / den,
    })
}

/// Zero-order-hold discretization, exact for piecewise-constant input.
#[derive(Debug, Clone)]
pub struct ZohPlant {
    ad: DMatrix<f64>,
    bd: DVector<f64>,
    c: DVector<f64>,
    d: f64,
    x: DVector<f64>,
    scratch: DVector<f64>,
}

impl ZohPlant {
    pub fn new(ss: &StateSpace, step: f64) -> Result<Self> {
        let n = ss.order();
        let mut aug = DMatrix::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&(&ss.a * step));
        aug.view_mut((0, n), (n, 1)).copy_from(&(&ss.b * step));
        let e = expm(&aug)?;
        Ok(Self {
            ad: e.view((0, 0), (n, n)).clone_owned(),
            bd: e.view((0, n), (n, 1)).column(0).clone_owned(),
            c: ss.c.clone(),
            d: ss.d,
            x: DVector::zeros(n),
            scratch: DVector::zeros(n),
        })
    }
}

impl StepOperator for ZohPlant {
    fn feedthrough(&self) -> f64 {
        self.d
    }

    fn pending(&self) -> f64 {
        self.c.dot(&self.x)
    }

    fn push(&mut self, input: f64) -> f64 {
        let y = self.pending() + self.d * input;
        self.scratch.gemv(1.0, &self.ad, &self.x, 0.0);
        self.scratch.axpy(input, &self.bd, 1.0);
        std::mem::swap(&mut self.x, &mut self.scratch);
        y
    }
}

/// `T D^α y + y = K u` with `D^α` by Grünwald–Letnikov, solved for `y_k`
/// each step.
#[derive(Debug, Clone)]
pub struct GlPlant {
    op: GlStepper,
    gain: f64,
    time_constant: f64,
}

impl GlPlant {
    pub fn new(plant: &NioptdPlant, step: f64, memory: Option<usize>) -> Result<Self> {
        Ok(Self {
            op: GlStepper::new(plant.alpha(), step, memory)?,
            gain: plant.gain(),
            time_constant: plant.time_constant(),
        })
    }

    fn denominator(&self) -> f64 {
        self.time_constant * self.op.feedthrough() + 1.0
    }
}

impl StepOperator for GlPlant {
    fn feedthrough(&self) -> f64 {
        self.gain / self.denominator()
    }

    fn pending(&self) -> f64 {
        -self.time_constant * self.op.pending() / self.denominator()
    }

    fn push(&mut self, input: f64) -> f64 {
        let y = self.feedthrough() * input + self.pending();
        self.op.push(y);
        y
    }
}

#[derive(Debug, Clone)]
pub enum PlantModel {
    Zoh(ZohPlant),
    Gl(GlPlant),
}

impl PlantModel {
    pub fn new(plant: &NioptdPlant, step: f64, realization: Realization) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid(format!("step must be positive, got {step}")));
        }
        match realization {
            Realization::Oustaloup(cfg) => {
                let ss = fractional_lag_state_space(plant, cfg)?;
                Ok(PlantModel::Zoh(ZohPlant::new(&ss, step)?))
            }
            Realization::GrunwaldLetnikov { memory } => {
                Ok(PlantModel::Gl(GlPlant::new(plant, step, memory)?))
            }
        }
    }
}

impl StepOperator for PlantModel {
    fn feedthrough(&self) -> f64 {
        match self {
            PlantModel::Zoh(p) => p.feedthrough(),
            PlantModel::Gl(p) => p.feedthrough(),
        }
    }

    fn pending(&self) -> f64 {
        match self {
            PlantModel::Zoh(p) => p.pending(),
            PlantModel::Gl(p) => p.pending(),
        }
    }

    fn push(&mut self, input: f64) -> f64 {
        match self {
            PlantModel::Zoh(p) => p.push(input),
            PlantModel::Gl(p) => p.push(input),
        }
    }
}
