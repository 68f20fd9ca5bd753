//! Switching differentiator (SD) and its series connection.
//!
//! One SD stage tracks its input `a` with `alpha` and estimates `a'` with
//! `sigma`:
//!
//! ```text
//! e     = a - alpha
//! alpha' = k e + sigma
//! sigma' = L sw(e)
//! ```
//!
//! where `sw` is `sgn` or its boundary-layer surrogate `sat(e / eps)`. Since
//! the switching term only enters through `sigma'`, `sigma` is its integral
//! and moves at most `L` per second. Stages are chained by feeding stage
//! `i`'s `sigma` to stage `i + 1`, so stage `n` estimates `a^(n)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{ColumnSpec, OdeSystem};
use crate::signals::Input;

/// Discontinuous switch or its saturated surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Switch {
    /// `sign(e)` with `sign(0) = 0`.
    Sgn,
    /// `clamp(e / epsilon, -1, 1)`.
    Sat { epsilon: f64 },
}

impl Default for Switch {
    fn default() -> Self {
        Switch::Sat { epsilon: 1e-4 }
    }
}

impl Switch {
    #[inline]
    pub fn apply(&self, e: f64) -> f64 {
        match *self {
            Switch::Sgn => sgn(e),
            Switch::Sat { epsilon } => (e / epsilon).clamp(-1.0, 1.0),
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        match *self {
            Switch::Sat { epsilon } if !(epsilon > 0.0 && epsilon.is_finite()) => {
                Err(Error::param(field, "sat epsilon must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Switch::Sgn => "sgn",
            Switch::Sat { .. } => "sat",
        }
    }
}

/// Sign with `sgn(0) = 0`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn switch_fn(e: f64, switch: &Switch) -> f64 {
    switch.apply(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdParams {
    /// Tracking gain, 1/s.
    pub k: f64,
    /// Switching gain; must dominate the bound on the stage input's second
    /// derivative.
    pub l: f64,
    #[serde(default)]
    pub switch: Switch,
}

impl SdParams {
    pub fn new(k: f64, l: f64, switch: Switch) -> Result<Self> {
        let p = SdParams { k, l, switch };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::param("k", "must be positive"));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::param("l", "must be positive"));
        }
        self.switch.validate("switch")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SdState {
    pub alpha: f64,
    pub sigma: f64,
}

/// `(alpha', sigma')` for one stage driven by `input`.
#[inline]
pub fn sd_rhs(state: SdState, input: f64, p: &SdParams) -> (f64, f64) {
    let e = input - state.alpha;
    (p.k * e + state.sigma, p.l * p.switch.apply(e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeState {
    pub stages: Vec<SdState>,
}

impl CascadeState {
    pub fn zeros(n: usize) -> Self {
        CascadeState {
            stages: vec![SdState::default(); n],
        }
    }

    /// Interleaved `[alpha1, sigma1, alpha2, sigma2, ...]`.
    pub fn from_flat(x: &[f64]) -> Self {
        CascadeState {
            stages: x
                .chunks_exact(2)
                .map(|c| SdState {
                    alpha: c[0],
                    sigma: c[1],
                })
                .collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.stages
            .iter()
            .flat_map(|s| [s.alpha, s.sigma])
            .collect()
    }
}

/// Stage derivatives of the cascade with shared parameters.
pub fn cascade_rhs(state: &CascadeState, a_value: f64, p: &SdParams) -> Vec<(f64, f64)> {
    cascade_rhs_with(state, a_value, |_| p)
}

/// Stage derivatives with one parameter set per stage.
pub fn cascade_rhs_per_stage(
    state: &CascadeState,
    a_value: f64,
    params: &[SdParams],
) -> Vec<(f64, f64)> {
    assert_eq!(state.stages.len(), params.len(), "one SdParams per stage");
    cascade_rhs_with(state, a_value, |i| &params[i])
}

fn cascade_rhs_with<'a>(
    state: &CascadeState,
    a_value: f64,
    params: impl Fn(usize) -> &'a SdParams,
) -> Vec<(f64, f64)> {
    let mut input = a_value;
    state
        .stages
        .iter()
        .enumerate()
        .map(|(i, &stage)| {
            let d = sd_rhs(stage, input, params(i));
            input = stage.sigma;
            d
        })
        .collect()
}

/// State coordinates used to integrate the cascade.
///
/// `Direct` integrates `(alpha_i, sigma_i)`. `ErrorCoordinates` integrates
/// `(e_i, sigma_i)` with `e_i = input_i - alpha_i`, which needs the exact
/// input rate `a'`:
///
/// ```text
/// e_1'   = a' - k e_1 - sigma_1
/// e_i'   = L sw(e_{i-1}) - k e_i - sigma_i
/// sigma_i' = L sw(e_i)
/// ```
///
/// Both describe the same ODE. They differ in rounding: in `Direct` the
/// difference `a - alpha` carries an absolute error of a few ulps of `|a|`,
/// which every stage re-amplifies near its boundary-layer resonance
/// `sqrt(L / eps)`. At high gains the last stage then chatters on rounding
/// noise alone. `Auto` selects `ErrorCoordinates` whenever the input is
/// analytic and noiseless.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Realization {
    #[default]
    #[serde(rename = "auto")]
    Auto,
    #[serde(rename = "direct")]
    Direct,
    #[serde(rename = "error")]
    ErrorCoordinates,
}

impl Realization {
    pub fn label(&self) -> &'static str {
        match self {
            Realization::Auto => "auto",
            Realization::Direct => "direct",
            Realization::ErrorCoordinates => "error",
        }
    }
}

/// The `n`-stage cascade driven by an input signal, as an ODE system over
/// an interleaved state `[x1, sigma1, ..., xN, sigmaN]` where `x_i` is
/// `alpha_i` or `e_i` depending on the [`Realization`].
#[derive(Debug, Clone)]
pub struct SdCascade {
    input: Input,
    stages: Vec<SdParams>,
    realization: Realization,
}

impl SdCascade {
    pub fn new(input: impl Into<Input>, stages: Vec<SdParams>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::param("stages", "at least one stage is required"));
        }
        for p in &stages {
            p.validate()?;
        }
        let input = input.into();
        let realization = if input.rate(0.0).is_some() {
            Realization::ErrorCoordinates
        } else {
            Realization::Direct
        };
        Ok(SdCascade {
            input,
            stages,
            realization,
        })
    }

    pub fn with_realization(mut self, realization: Realization) -> Result<Self> {
        self.realization = match realization {
            Realization::Auto => return SdCascade::new(self.input, self.stages),
            Realization::ErrorCoordinates if self.input.rate(0.0).is_none() => {
                return Err(Error::param(
                    "realization",
                    "error coordinates need a noiseless sinusoidal input",
                ))
            }
            r => r,
        };
        Ok(self)
    }

    /// Resolved realization, never `Auto`.
    pub fn realization(&self) -> Realization {
        self.realization
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn stage_params(&self) -> &[SdParams] {
        &self.stages
    }

    pub fn input(&self) -> &Input {
        &self.input
    }

    /// Flat integration state for the given `(alpha, sigma)` values at `t0`.
    pub fn initial_state(&self, t0: f64, state: &CascadeState) -> Result<Vec<f64>> {
        if state.stages.len() != self.n_stages() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: 2 * state.stages.len(),
            });
        }
        Ok(match self.realization {
            Realization::ErrorCoordinates => {
                let mut input = self.input.value(t0);
                state
                    .stages
                    .iter()
                    .flat_map(|s| {
                        let e = input - s.alpha;
                        input = s.sigma;
                        [e, s.sigma]
                    })
                    .collect()
            }
            _ => state.to_flat(),
        })
    }

    /// All `alpha_i` and `sigma_i` zero at `t0`.
    pub fn rest_state(&self, t0: f64) -> Vec<f64> {
        self.initial_state(t0, &CascadeState::zeros(self.n_stages()))
            .expect("stage count matches")
    }

    /// `(alpha, sigma)` values of a flat integration state at time `t`.
    pub fn cascade_state(&self, t: f64, x: &[f64]) -> CascadeState {
        let mut state = CascadeState::from_flat(x);
        if self.realization == Realization::ErrorCoordinates {
            let mut input = self.input.value(t);
            for s in &mut state.stages {
                s.alpha = input - s.alpha;
                input = s.sigma;
            }
        }
        state
    }

    /// Index of `sigma_i` (1-based stage) in the flat state.
    pub fn sigma_index(stage: usize) -> usize {
        2 * (stage - 1) + 1
    }

    /// `sd.sigma1 ... sd.sigmaN` estimate columns.
    pub fn estimate_columns(&self) -> Vec<ColumnSpec> {
        (1..=self.n_stages())
            .map(|i| ColumnSpec::state(format!("sd.sigma{i}"), Self::sigma_index(i)))
            .collect()
    }
}

impl OdeSystem for SdCascade {
    fn dimension(&self) -> usize {
        2 * self.stages.len()
    }

    fn rhs(&self, t: f64, x: &[f64], d: &mut [f64]) {
        match self.realization {
            Realization::ErrorCoordinates => {
                let mut input_rate = self.input.rate(t).expect("analytic input");
                for (i, p) in self.stages.iter().enumerate() {
                    let (e, sigma) = (x[2 * i], x[2 * i + 1]);
                    let ds = p.l * p.switch.apply(e);
                    d[2 * i] = input_rate - (p.k * e + sigma);
                    d[2 * i + 1] = ds;
                    input_rate = ds;
                }
            }
            _ => {
                let mut input = self.input.value(t);
                for (i, p) in self.stages.iter().enumerate() {
                    let stage = SdState {
                        alpha: x[2 * i],
                        sigma: x[2 * i + 1],
                    };
                    let (da, ds) = sd_rhs(stage, input, p);
                    d[2 * i] = da;
                    d[2 * i + 1] = ds;
                    input = stage.sigma;
                }
            }
        }
    }
}

/// Cascade of `n_stages` identical SD stages closed over `input`.
pub fn build_sd_system(input: impl Into<Input>, p: SdParams, n_stages: usize) -> Result<SdCascade> {
    SdCascade::new(input, vec![p; n_stages])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::{simulate, Method, SimPlan};
    use crate::signals::{Signal, TestSignal};
    use proptest::prelude::*;

    #[test]
    fn switch_values() {
        let sat = Switch::Sat { epsilon: 1e-4 };
        assert_eq!(switch_fn(0.0, &Switch::Sgn), 0.0);
        assert_eq!(switch_fn(0.0, &sat), 0.0);
        assert_eq!(switch_fn(2e-4, &sat), 1.0);
        assert!((switch_fn(-5e-5, &sat) + 0.5).abs() < 1e-15);
        assert_eq!(switch_fn(-3.0, &Switch::Sgn), -1.0);
    }

    proptest! {
        #[test]
        fn switch_is_odd_and_bounded(e in -1e3f64..1e3, eps in 1e-8f64..1.0) {
            for sw in [Switch::Sgn, Switch::Sat { epsilon: eps }] {
                let v = sw.apply(e);
                prop_assert!((-1.0..=1.0).contains(&v));
                prop_assert_eq!(sw.apply(-e), -v);
            }
        }
    }

    #[test]
    fn single_stage_rhs() {
        let p = SdParams::new(3.0, 5.0, Switch::Sgn).unwrap();
        assert_eq!(
            sd_rhs(
                SdState {
                    alpha: 1.5,
                    sigma: 0.0
                },
                1.5,
                &p
            ),
            (0.0, 0.0)
        );
        assert_eq!(
            sd_rhs(
                SdState {
                    alpha: 0.0,
                    sigma: 2.0
                },
                1.0,
                &p
            ),
            (5.0, 5.0)
        );
        assert_eq!(
            sd_rhs(
                SdState {
                    alpha: 1.0,
                    sigma: 0.0
                },
                0.0,
                &p
            ),
            (-3.0, -5.0)
        );
    }

    #[test]
    fn params_validation() {
        assert!(SdParams::new(0.0, 1.0, Switch::Sgn).is_err());
        assert!(SdParams::new(1.0, -1.0, Switch::Sgn).is_err());
        assert!(SdParams::new(1.0, 1.0, Switch::Sat { epsilon: 0.0 }).is_err());
        assert!(build_sd_system(
            TestSignal::paper(),
            SdParams::new(1.0, 1.0, Switch::Sgn).unwrap(),
            0
        )
        .is_err());
    }

    #[test]
    fn cascade_equilibrium_and_coupling() {
        let p = SdParams::new(1.0, 1.0, Switch::Sgn).unwrap();
        let zero = cascade_rhs(&CascadeState::zeros(4), 0.0, &p);
        assert!(zero.iter().all(|&(a, s)| a == 0.0 && s == 0.0));

        let state = CascadeState {
            stages: vec![
                SdState {
                    alpha: 0.0,
                    sigma: 7.0,
                },
                SdState {
                    alpha: 7.0,
                    sigma: 0.0,
                },
            ],
        };
        let d = cascade_rhs(&state, 0.0, &p);
        assert_eq!(d[1].0, 0.0);
        assert_eq!(d[1].1, 0.0);
        // stage 1: e = 0 - 0, alpha' = sigma = 7
        assert_eq!(d[0], (7.0, 0.0));
    }

    #[test]
    fn per_stage_params_are_used() {
        let state = CascadeState {
            stages: vec![
                SdState {
                    alpha: 0.0,
                    sigma: 1.0,
                },
                SdState {
                    alpha: 0.0,
                    sigma: 0.0,
                },
            ],
        };
        let params = [
            SdParams::new(1.0, 2.0, Switch::Sgn).unwrap(),
            SdParams::new(10.0, 20.0, Switch::Sgn).unwrap(),
        ];
        let d = cascade_rhs_per_stage(&state, 1.0, &params);
        assert_eq!(d[0], (2.0, 2.0));
        assert_eq!(d[1], (10.0, 20.0));
    }

    #[test]
    fn system_matches_cascade_rhs() {
        let p = SdParams::new(30.0, 50.0, Switch::Sat { epsilon: 1e-2 }).unwrap();
        let sys = build_sd_system(TestSignal::paper(), p, 3)
            .unwrap()
            .with_realization(Realization::Direct)
            .unwrap();
        assert_eq!(sys.dimension(), 6);
        let x = [0.1, -0.2, 0.3, 0.4, -0.5, 0.6];
        let mut d = [0.0; 6];
        sys.rhs(0.7, &x, &mut d);
        let expect = cascade_rhs(
            &CascadeState::from_flat(&x),
            TestSignal::paper().eval(0.7, 0),
            &p,
        );
        let flat: Vec<f64> = expect.iter().flat_map(|&(a, s)| [a, s]).collect();
        assert_eq!(d.to_vec(), flat);
        assert_eq!(CascadeState::from_flat(&x).to_flat(), x.to_vec());
    }

    #[test]
    fn dimensions() {
        let p = SdParams::new(3000.0, 3000.0, Switch::default()).unwrap();
        assert_eq!(
            build_sd_system(TestSignal::paper(), p, 4)
                .unwrap()
                .dimension(),
            8
        );
        assert_eq!(
            build_sd_system(TestSignal::paper(), p, 1)
                .unwrap()
                .dimension(),
            2
        );
    }

    #[test]
    fn zero_signal_stays_at_rest() {
        let p = SdParams::new(100.0, 100.0, Switch::Sgn).unwrap();
        let sys = build_sd_system(Signal::custom(|_| 0.0), p, 4).unwrap();
        let plan = SimPlan::new(0.0, 0.1, 1e-4, 10).unwrap();
        let traj = simulate(
            &sys,
            &sys.rest_state(0.0),
            &plan,
            Method::Rk4,
            &sys.estimate_columns(),
        )
        .unwrap();
        for name in ["sd.sigma1", "sd.sigma2", "sd.sigma3", "sd.sigma4"] {
            assert!(traj.column(name).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn first_stage_tracks_derivative_of_slow_signal() {
        let sig = TestSignal::paper();
        let p = SdParams::new(300.0, 300.0, Switch::Sat { epsilon: 1e-3 }).unwrap();
        let sys = build_sd_system(sig.clone(), p, 1).unwrap();
        let plan = SimPlan::new(0.0, 2.0, 1e-5, 100).unwrap();
        let traj = simulate(
            &sys,
            &sys.rest_state(0.0),
            &plan,
            Method::Rk4,
            &sys.estimate_columns(),
        )
        .unwrap();
        let sigma = traj.column("sd.sigma1").unwrap();
        for (t, s) in traj.times().iter().zip(sigma).filter(|(t, _)| **t > 1.0) {
            assert!((s - sig.eval(*t, 1)).abs() < 0.05, "t={t} sigma={s}");
        }
    }

    #[test]
    fn realization_resolution() {
        let p = SdParams::new(10.0, 10.0, Switch::Sgn).unwrap();
        let analytic = build_sd_system(TestSignal::paper(), p, 2).unwrap();
        assert_eq!(analytic.realization(), Realization::ErrorCoordinates);
        let custom = build_sd_system(Signal::custom(f64::sin), p, 2).unwrap();
        assert_eq!(custom.realization(), Realization::Direct);
        assert!(custom
            .with_realization(Realization::ErrorCoordinates)
            .is_err());
        let noisy = Input::clean(TestSignal::paper()).with_noise(
            crate::signals::NoiseSpec {
                kind: crate::signals::NoiseKind::Uniform,
                magnitude: 1e-3,
                seed: 1,
            },
            0.0,
            1e-3,
        );
        assert_eq!(
            build_sd_system(noisy, p, 2).unwrap().realization(),
            Realization::Direct
        );
    }

    #[test]
    fn realizations_describe_the_same_vector_field() {
        let sig = TestSignal::paper();
        let p = SdParams::new(40.0, 60.0, Switch::Sat { epsilon: 0.05 }).unwrap();
        let err = build_sd_system(sig.clone(), p, 3).unwrap();
        let dir = err.clone().with_realization(Realization::Direct).unwrap();
        let t = 0.37;
        let cs = CascadeState::from_flat(&[0.3, -1.0, 0.2, 4.0, -0.1, 2.5]);
        let xe = err.initial_state(t, &cs).unwrap();
        for (a, b) in err.cascade_state(t, &xe).to_flat().iter().zip(cs.to_flat()) {
            assert!((a - b).abs() < 1e-14);
        }
        let (mut de, mut dd) = ([0.0; 6], [0.0; 6]);
        err.rhs(t, &xe, &mut de);
        dir.rhs(t, &cs.to_flat(), &mut dd);
        // e_i' = input_i' - alpha_i'
        let mut input_rate = sig.eval(t, 1);
        for i in 0..3 {
            assert!((de[2 * i] - (input_rate - dd[2 * i])).abs() < 1e-12);
            assert_eq!(de[2 * i + 1], dd[2 * i + 1]);
            input_rate = dd[2 * i + 1];
        }
    }

    #[test]
    fn realizations_agree_on_trajectories() {
        let p = SdParams::new(200.0, 400.0, Switch::Sat { epsilon: 1e-2 }).unwrap();
        let err = build_sd_system(TestSignal::paper(), p, 2).unwrap();
        let dir = err.clone().with_realization(Realization::Direct).unwrap();
        let plan = SimPlan::new(0.0, 1.0, 1e-5, 1000).unwrap();
        let a = simulate(
            &err,
            &err.rest_state(0.0),
            &plan,
            Method::Rk4,
            &err.estimate_columns(),
        )
        .unwrap();
        let b = simulate(
            &dir,
            &dir.rest_state(0.0),
            &plan,
            Method::Rk4,
            &dir.estimate_columns(),
        )
        .unwrap();
        for name in ["sd.sigma1", "sd.sigma2"] {
            for (x, y) in a.column(name).unwrap().iter().zip(b.column(name).unwrap()) {
                assert!((x - y).abs() < 1e-6 * (1.0 + y.abs()), "{name}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn negated_input_negates_trajectory() {
        let sig = TestSignal::paper();
        let neg = TestSignal::new(
            "neg",
            sig.terms
                .iter()
                .map(|t| crate::signals::Term {
                    amplitude: -t.amplitude,
                    ..*t
                })
                .collect(),
        )
        .unwrap();
        let p = SdParams::new(300.0, 600.0, Switch::Sat { epsilon: 1e-3 }).unwrap();
        let plan = SimPlan::new(0.0, 0.2, 1e-5, 50).unwrap();
        for r in [Realization::Direct, Realization::ErrorCoordinates] {
            let s1 = build_sd_system(sig.clone(), p, 3)
                .unwrap()
                .with_realization(r)
                .unwrap();
            let s2 = build_sd_system(neg.clone(), p, 3)
                .unwrap()
                .with_realization(r)
                .unwrap();
            let a = simulate(
                &s1,
                &s1.rest_state(0.0),
                &plan,
                Method::Rk4,
                &s1.estimate_columns(),
            )
            .unwrap();
            let b = simulate(
                &s2,
                &s2.rest_state(0.0),
                &plan,
                Method::Rk4,
                &s2.estimate_columns(),
            )
            .unwrap();
            for name in ["sd.sigma1", "sd.sigma2", "sd.sigma3"] {
                let neg_a: Vec<f64> = a.column(name).unwrap().iter().map(|v| -v).collect();
                assert_eq!(neg_a.as_slice(), b.column(name).unwrap());
            }
        }
    }

    #[test]
    fn sigma_moves_at_most_l_per_second() {
        let p = SdParams::new(3000.0, 3000.0, Switch::Sat { epsilon: 1e-4 }).unwrap();
        let sys = build_sd_system(TestSignal::paper(), p, 4).unwrap();
        let plan = SimPlan::new(0.0, 0.3, 1e-6, 100).unwrap();
        let traj = simulate(
            &sys,
            &sys.rest_state(0.0),
            &plan,
            Method::Rk4,
            &sys.estimate_columns(),
        )
        .unwrap();
        for name in ["sd.sigma1", "sd.sigma4"] {
            let col = traj.column(name).unwrap();
            for (t, s) in traj.times().iter().zip(col) {
                assert!(s.abs() <= p.l * t * (1.0 + 1e-12) + 1e-12, "{name} t={t}");
            }
        }
    }
}
