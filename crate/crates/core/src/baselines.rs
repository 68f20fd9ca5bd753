//! Reference differentiators: a fifth-order high-gain observer (HGO) and a
//! fifth-order high-order sliding-mode (HOSM) differentiator. Both estimate
//! `a, a', ..., a''''` with states `z0 ... z4`.

use serde::{Deserialize, Serialize};

use crate::differentiators::{sgn, Switch};
use crate::error::{Error, Result};
use crate::integrators::{ColumnSpec, OdeSystem};
use crate::signals::Input;

pub const ORDER: usize = 5;

pub type ObserverState = [f64; ORDER];

/// Linear high-gain observer
/// `z_i' = z_{i+1} + (c_i / eps^(i+1)) (a - z0)`, `z4' = (c4 / eps^5)(a - z0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HgoConfig {
    pub c: [f64; ORDER],
    pub epsilon: f64,
}

impl HgoConfig {
    /// Gains tuned for a 0.1 s settling time of `z4`.
    pub fn paper() -> Self {
        HgoConfig {
            c: [47.5, 902.5, 8573.75, 40725.3125, 77378.09375],
            epsilon: 0.03,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        if self.c.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("c", "gains must be finite"));
        }
        Ok(())
    }

    /// Effective injection gains `c_i / eps^(i+1)`.
    pub fn gains(&self) -> [f64; ORDER] {
        let mut g = [0.0; ORDER];
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = self.c[i] / self.epsilon.powi(i as i32 + 1);
        }
        g
    }
}

pub fn hgo_rhs(z: &ObserverState, a_value: f64, cfg: &HgoConfig) -> ObserverState {
    hgo_rhs_with_gains(z, a_value, &cfg.gains())
}

#[inline]
fn hgo_rhs_with_gains(z: &ObserverState, a_value: f64, gains: &[f64; ORDER]) -> ObserverState {
    let e = a_value - z[0];
    let mut d = [0.0; ORDER];
    for i in 0..ORDER {
        let next = if i + 1 < ORDER { z[i + 1] } else { 0.0 };
        d[i] = next + gains[i] * e;
    }
    d
}

/// `|x|^p sgn(x)`.
#[inline]
pub fn signed_power(x: f64, p: f64) -> f64 {
    sgn(x) * x.abs().powf(p)
}

/// HOSM differentiator with gain `L`:
///
/// ```text
/// z0' = v0 = -8   L^(1/5) [z0 - a ]^(4/5)
/// z1' = v1 = -5   L^(1/4) [z1 - v0]^(3/4)
/// z2' = v2 = -3   L^(1/3) [z2 - v1]^(2/3)
/// z3' = v3 = -1.5 L^(1/2) [z3 - v2]^(1/2)
/// z4'      = -1.1 L sw(z4 - v3)
/// ```
///
/// with `[x]^p = |x|^p sgn(x)`. The last stage uses exact `sgn` unless
/// `final_switch` selects the saturated surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HosmConfig {
    pub l: f64,
    #[serde(default = "default_final_switch")]
    pub final_switch: Switch,
}

fn default_final_switch() -> Switch {
    Switch::Sgn
}

pub const HOSM_COEFFICIENTS: [f64; ORDER] = [8.0, 5.0, 3.0, 1.5, 1.1];
pub const HOSM_EXPONENTS: [f64; ORDER - 1] = [4.0 / 5.0, 3.0 / 4.0, 2.0 / 3.0, 1.0 / 2.0];

impl HosmConfig {
    pub fn paper() -> Self {
        HosmConfig {
            l: 3e7,
            final_switch: Switch::Sgn,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::param("l", "must be positive"));
        }
        self.final_switch.validate("final_switch")
    }

    /// `lambda_i L^(1/(5-i))`.
    pub fn gains(&self) -> [f64; ORDER] {
        let mut g = [0.0; ORDER];
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = HOSM_COEFFICIENTS[i] * self.l.powf(1.0 / (ORDER - i) as f64);
        }
        g
    }
}

pub fn hosm_rhs(z: &ObserverState, a_value: f64, cfg: &HosmConfig) -> ObserverState {
    hosm_rhs_with_gains(z, a_value, &cfg.gains(), &cfg.final_switch)
}

#[inline]
fn hosm_rhs_with_gains(
    z: &ObserverState,
    a_value: f64,
    gains: &[f64; ORDER],
    final_switch: &Switch,
) -> ObserverState {
    let mut d = [0.0; ORDER];
    let mut reference = a_value;
    for i in 0..ORDER - 1 {
        d[i] = -gains[i] * signed_power(z[i] - reference, HOSM_EXPONENTS[i]);
        reference = d[i];
    }
    d[ORDER - 1] = -gains[ORDER - 1] * final_switch.apply(z[ORDER - 1] - reference);
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineConfig {
    Hgo(HgoConfig),
    Hosm(HosmConfig),
}

impl BaselineConfig {
    pub fn prefix(&self) -> &'static str {
        match self {
            BaselineConfig::Hgo(_) => "hgo",
            BaselineConfig::Hosm(_) => "hosm",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BaselineConfig::Hgo(c) => c.validate(),
            BaselineConfig::Hosm(c) => c.validate(),
        }
    }
}

/// A baseline observer closed over its input, with state `z0 ... z4`.
#[derive(Debug, Clone)]
pub struct BaselineSystem {
    input: Input,
    config: BaselineConfig,
    gains: [f64; ORDER],
}

impl BaselineSystem {
    pub fn config(&self) -> &BaselineConfig {
        &self.config
    }

    pub fn zero_state(&self) -> Vec<f64> {
        vec![0.0; ORDER]
    }

    /// `<prefix>.z1 ... <prefix>.z4` estimate columns.
    pub fn estimate_columns(&self) -> Vec<ColumnSpec> {
        (1..ORDER)
            .map(|i| ColumnSpec::state(format!("{}.z{i}", self.config.prefix()), i))
            .collect()
    }
}

impl OdeSystem for BaselineSystem {
    fn dimension(&self) -> usize {
        ORDER
    }

    fn rhs(&self, t: f64, x: &[f64], d: &mut [f64]) {
        let z: &ObserverState = x.try_into().expect("baseline state has 5 entries");
        let a = self.input.value(t);
        let out = match &self.config {
            BaselineConfig::Hgo(_) => hgo_rhs_with_gains(z, a, &self.gains),
            BaselineConfig::Hosm(c) => hosm_rhs_with_gains(z, a, &self.gains, &c.final_switch),
        };
        d.copy_from_slice(&out);
    }
}

pub fn build_baseline_system(
    input: impl Into<Input>,
    config: BaselineConfig,
) -> Result<BaselineSystem> {
    config.validate()?;
    let gains = match &config {
        BaselineConfig::Hgo(c) => c.gains(),
        BaselineConfig::Hosm(c) => c.gains(),
    };
    Ok(BaselineSystem {
        input: input.into(),
        config,
        gains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::TestSignal;
    use proptest::prelude::*;

    #[test]
    fn hgo_constant_equilibrium() {
        let z = [2.5, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(hgo_rhs(&z, 2.5, &HgoConfig::paper()), [0.0; 5]);
    }

    #[test]
    fn hgo_first_row_arithmetic() {
        let d = hgo_rhs(&[0.0; 5], 1.0, &HgoConfig::paper());
        assert!((d[0] - 47.5 / 0.03).abs() < 1e-9);
        assert!((d[0] - 1_583.333_333_333_333).abs() < 1e-9);
        assert!((d[4] - 77378.09375 / 0.03f64.powi(5)).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn hgo_rhs_is_affine_in_error(
            z in prop::array::uniform5(-10.0f64..10.0),
            w in prop::array::uniform5(-10.0f64..10.0),
            a in -5.0f64..5.0,
        ) {
            let cfg = HgoConfig::paper();
            let lhs = hgo_rhs(&z, a, &cfg);
            let rhs = hgo_rhs(&w, a, &cfg);
            let mut diff = [0.0; 5];
            for i in 0..5 {
                diff[i] = z[i] - w[i];
            }
            // rhs(z, a) - rhs(w, a) equals the homogeneous part applied to z - w
            let hom = hgo_rhs(&diff, 0.0, &cfg);
            for i in 0..5 {
                let scale = 1.0 + lhs[i].abs() + rhs[i].abs();
                prop_assert!(((lhs[i] - rhs[i]) - hom[i]).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn signed_power_is_odd_and_monotone(x in -1e6f64..1e6, dx in 0.0f64..10.0, p in 0.01f64..=1.0) {
            prop_assert_eq!(signed_power(-x, p), -signed_power(x, p));
            prop_assert!(signed_power(x + dx, p) >= signed_power(x, p));
        }
    }

    #[test]
    fn signed_power_values() {
        assert_eq!(signed_power(0.0, 0.5), 0.0);
        assert_eq!(signed_power(4.0, 0.5), 2.0);
        assert!((signed_power(-8.0, 2.0 / 3.0) + 4.0).abs() < 1e-14);
        assert!((signed_power(-0.001, 2.0 / 3.0) + 0.01).abs() < 1e-12);
    }

    #[test]
    fn hosm_values() {
        let cfg = HosmConfig {
            l: 1.0,
            final_switch: Switch::Sgn,
        };
        let d = hosm_rhs(&[1.0, 0.0, 0.0, 0.0, 0.0], 0.0, &cfg);
        assert_eq!(d[0], -8.0);
        let rest = hosm_rhs(&[3.0, 0.0, 0.0, 0.0, 0.0], 3.0, &HosmConfig::paper());
        assert_eq!(rest, [0.0; 5]);
    }

    #[test]
    fn hosm_gain_schedule() {
        let g = HosmConfig::paper().gains();
        let l: f64 = 3e7;
        assert!((g[0] - 8.0 * l.powf(0.2)).abs() < 1e-9 * g[0]);
        assert!((g[3] - 1.5 * l.sqrt()).abs() < 1e-9 * g[3]);
        assert!((g[4] - 1.1 * l).abs() < 1e-6);
    }

    #[test]
    fn system_dimensions_and_columns() {
        let hgo =
            build_baseline_system(TestSignal::paper(), BaselineConfig::Hgo(HgoConfig::paper()))
                .unwrap();
        let hosm = build_baseline_system(
            TestSignal::paper(),
            BaselineConfig::Hosm(HosmConfig::paper()),
        )
        .unwrap();
        assert_eq!(hgo.dimension(), 5);
        assert_eq!(hosm.dimension(), 5);
        let names: Vec<String> = hosm
            .estimate_columns()
            .into_iter()
            .map(|c| c.name)
            .collect();
        assert_eq!(names, ["hosm.z1", "hosm.z2", "hosm.z3", "hosm.z4"]);
        assert!(build_baseline_system(
            TestSignal::paper(),
            BaselineConfig::Hgo(HgoConfig {
                epsilon: 0.0,
                ..HgoConfig::paper()
            })
        )
        .is_err());
    }
}
