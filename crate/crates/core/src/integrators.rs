//! Fixed-step explicit integration (forward Euler and classical RK4).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::Signal;
use crate::trajectory::Trajectory;

/// First-order ODE system `x' = f(t, x)`.
pub trait OdeSystem {
    fn dimension(&self) -> usize;

    /// Writes `f(t, state)` into `deriv`. Both slices have length
    /// `self.dimension()`.
    fn rhs(&self, t: f64, state: &[f64], deriv: &mut [f64]);
}

impl<S: OdeSystem + ?Sized> OdeSystem for &S {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn rhs(&self, t: f64, state: &[f64], deriv: &mut [f64]) {
        (**self).rhs(t, state, deriv)
    }
}

/// Closure-backed system.
pub struct FnSystem<F> {
    dimension: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dimension: usize, f: F) -> Self {
        FnSystem { dimension, f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn rhs(&self, t: f64, state: &[f64], deriv: &mut [f64]) {
        (self.f)(t, state, deriv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    #[default]
    Rk4,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Euler => "euler",
            Method::Rk4 => "rk4",
        })
    }
}

fn default_stride() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimPlan {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

impl SimPlan {
    pub fn new(t_start: f64, t_end: f64, dt: f64, record_stride: usize) -> Result<Self> {
        let plan = SimPlan {
            t_start,
            t_end,
            dt,
            record_stride,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite()) {
            return Err(Error::InvalidPlan(
                "t_start and t_end must be finite".into(),
            ));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::InvalidPlan("t_end must exceed t_start".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidPlan("dt must be positive".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidPlan("record_stride must be >= 1".into()));
        }
        if self.steps() < 1 {
            return Err(Error::InvalidPlan("span shorter than one step".into()));
        }
        Ok(())
    }

    /// Number of whole steps in the span. A ratio within a few ulps of an
    /// integer counts as that integer.
    pub fn steps(&self) -> usize {
        let ratio = (self.t_end - self.t_start) / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as usize
        } else {
            ratio.floor() as usize
        }
    }

    pub fn recorded_samples(&self) -> usize {
        self.steps() / self.record_stride + 1
    }

    #[inline]
    pub fn time_at(&self, step: usize) -> f64 {
        self.t_start + step as f64 * self.dt
    }

    /// Spacing between recorded samples.
    pub fn record_dt(&self) -> f64 {
        self.dt * self.record_stride as f64
    }
}

fn check_finite(t: f64, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { t })
    }
}

/// Reusable scratch buffers for in-place stepping.
#[derive(Debug, Clone)]
pub struct Stepper {
    method: Method,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stepper {
    pub fn new(method: Method, dimension: usize) -> Self {
        Stepper {
            method,
            k1: vec![0.0; dimension],
            k2: vec![0.0; dimension],
            k3: vec![0.0; dimension],
            k4: vec![0.0; dimension],
            tmp: vec![0.0; dimension],
        }
    }

    #[allow(clippy::needless_range_loop)]
    pub fn step<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        t: f64,
        state: &mut [f64],
        dt: f64,
    ) -> Result<()> {
        match self.method {
            Method::Euler => {
                sys.rhs(t, state, &mut self.k1);
                check_finite(t, &self.k1)?;
                for (x, d) in state.iter_mut().zip(&self.k1) {
                    *x += dt * d;
                }
            }
            Method::Rk4 => {
                let half = 0.5 * dt;
                sys.rhs(t, state, &mut self.k1);
                check_finite(t, &self.k1)?;
                for i in 0..state.len() {
                    self.tmp[i] = state[i] + half * self.k1[i];
                }
                sys.rhs(t + half, &self.tmp, &mut self.k2);
                check_finite(t, &self.k2)?;
                for i in 0..state.len() {
                    self.tmp[i] = state[i] + half * self.k2[i];
                }
                sys.rhs(t + half, &self.tmp, &mut self.k3);
                check_finite(t, &self.k3)?;
                for i in 0..state.len() {
                    self.tmp[i] = state[i] + dt * self.k3[i];
                }
                sys.rhs(t + dt, &self.tmp, &mut self.k4);
                check_finite(t, &self.k4)?;
                let sixth = dt / 6.0;
                for i in 0..state.len() {
                    state[i] +=
                        sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
                }
            }
        }
        check_finite(t, state)
    }
}

fn single_step<S: OdeSystem + ?Sized>(
    method: Method,
    sys: &S,
    t: f64,
    state: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    if state.len() != sys.dimension() {
        return Err(Error::DimensionMismatch {
            expected: sys.dimension(),
            got: state.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidPlan("dt must be positive".into()));
    }
    let mut next = state.to_vec();
    Stepper::new(method, state.len()).step(sys, t, &mut next, dt)?;
    Ok(next)
}

/// `state + dt * f(t, state)`.
pub fn step_euler<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    state: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    single_step(Method::Euler, sys, t, state, dt)
}

/// Classical four-stage Runge-Kutta update.
pub fn step_rk4<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    state: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    single_step(Method::Rk4, sys, t, state, dt)
}

/// What a recorded column samples.
#[derive(Debug, Clone)]
pub enum Probe {
    /// One entry of the state vector.
    State(usize),
    /// The `order`-th derivative of an input signal.
    Truth { signal: Signal, order: u32 },
}

#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub name: String,
    pub probe: Probe,
}

impl ColumnSpec {
    pub fn state(name: impl Into<String>, index: usize) -> Self {
        ColumnSpec {
            name: name.into(),
            probe: Probe::State(index),
        }
    }

    pub fn truth(name: impl Into<String>, signal: Signal, order: u32) -> Self {
        ColumnSpec {
            name: name.into(),
            probe: Probe::Truth { signal, order },
        }
    }
}

/// Integrates `sys` from `x0` over `plan`, recording every
/// `plan.record_stride`-th step (and the initial state).
pub fn simulate<S: OdeSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    plan: &SimPlan,
    method: Method,
    recorder: &[ColumnSpec],
) -> Result<Trajectory> {
    plan.validate()?;
    let dim = sys.dimension();
    if x0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x0.len(),
        });
    }
    for spec in recorder {
        match &spec.probe {
            Probe::State(i) if *i >= dim => {
                return Err(Error::param(
                    &spec.name,
                    format!("state index {i} out of range for dimension {dim}"),
                ))
            }
            Probe::Truth { signal, order } if signal.derivative(0.0, *order).is_none() => {
                return Err(Error::BoundUnavailable)
            }
            _ => {}
        }
    }
    check_finite(plan.t_start, x0)?;

    let steps = plan.steps();
    let n_rec = plan.recorded_samples();
    let mut times = Vec::with_capacity(n_rec);
    let mut columns: Vec<Vec<f64>> = recorder.iter().map(|_| Vec::with_capacity(n_rec)).collect();

    let mut record = |t: f64, state: &[f64]| {
        times.push(t);
        for (spec, col) in recorder.iter().zip(columns.iter_mut()) {
            col.push(match &spec.probe {
                Probe::State(i) => state[*i],
                Probe::Truth { signal, order } => signal.derivative(t, *order).unwrap_or(f64::NAN),
            });
        }
    };

    let mut state = x0.to_vec();
    let mut stepper = Stepper::new(method, dim);
    record(plan.t_start, &state);
    for j in 0..steps {
        let t = plan.time_at(j);
        stepper.step(sys, t, &mut state, plan.dt)?;
        if (j + 1) % plan.record_stride == 0 {
            record(plan.time_at(j + 1), &state);
        }
    }

    Trajectory::new(
        times,
        recorder
            .iter()
            .map(|s| s.name.clone())
            .zip(columns)
            .collect(),
    )
}
