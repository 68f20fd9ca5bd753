//! Analytic test signals with closed-form derivatives of every order.
//!
//! A [`TestSignal`] is a finite sum of sinusoids, so each derivative is again
//! a sinusoid sum and `sup |a^(n)|` has the triangle-inequality bound
//! `Σ |A| ω^n`. Noise is generated per sample index from a counter-based
//! ChaCha8 stream so any sample can be reproduced in isolation.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Sine,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub amplitude: f64,
    /// Angular frequency in rad/s.
    pub omega: f64,
    pub kind: Phase,
}

impl Term {
    pub fn sine(amplitude: f64, omega: f64) -> Self {
        Term {
            amplitude,
            omega,
            kind: Phase::Sine,
        }
    }

    pub fn cosine(amplitude: f64, omega: f64) -> Self {
        Term {
            amplitude,
            omega,
            kind: Phase::Cosine,
        }
    }

    fn eval(&self, t: f64, order: u32) -> f64 {
        let (s, c) = (self.omega * t).sin_cos();
        // d/dt rotates sin -> cos -> -sin -> -cos, cos -> -sin -> -cos -> sin
        let quarter = match self.kind {
            Phase::Sine => order % 4,
            Phase::Cosine => (order + 1) % 4,
        };
        let base = match quarter {
            0 => s,
            1 => c,
            2 => -s,
            _ => -c,
        };
        self.amplitude * self.omega.powi(order as i32) * base
    }
}

/// Finite sum of sinusoids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSignal {
    pub name: String,
    pub terms: Vec<Term>,
}

impl TestSignal {
    pub fn new(name: impl Into<String>, terms: Vec<Term>) -> Result<Self> {
        let sig = TestSignal {
            name: name.into(),
            terms,
        };
        sig.validate()?;
        Ok(sig)
    }

    /// `a(t) = 2 sin t + 3 cos 3t`, the signal of the reference experiments.
    pub fn paper() -> Self {
        TestSignal {
            name: "paper".to_string(),
            terms: vec![Term::sine(2.0, 1.0), Term::cosine(3.0, 3.0)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::param(
                "signal.terms",
                "at least one term is required",
            ));
        }
        for (i, term) in self.terms.iter().enumerate() {
            if !term.amplitude.is_finite() {
                return Err(Error::param(
                    &format!("signal.terms[{i}].amplitude"),
                    "must be finite",
                ));
            }
            if !term.omega.is_finite() || term.omega < 0.0 {
                return Err(Error::param(
                    &format!("signal.terms[{i}].omega"),
                    "must be finite and >= 0",
                ));
            }
        }
        Ok(())
    }

    /// `a^(order)(t)`.
    pub fn eval(&self, t: f64, order: u32) -> f64 {
        self.terms.iter().map(|term| term.eval(t, order)).sum()
    }

    /// Triangle-inequality bound `Σ |A| ω^order` on `sup_t |a^(order)(t)|`.
    pub fn derivative_bound(&self, order: u32) -> f64 {
        self.terms
            .iter()
            .map(|term| term.amplitude.abs() * term.omega.powi(order as i32))
            .sum()
    }

    /// Smallest nonzero angular frequency, if any.
    pub fn min_omega(&self) -> Option<f64> {
        self.terms
            .iter()
            .map(|t| t.omega)
            .filter(|w| *w > 0.0)
            .min_by(|a, b| a.total_cmp(b))
    }
}

/// `a^(order)(t)` for a sinusoid-sum signal.
pub fn eval_signal(sig: &TestSignal, t: f64, order: u32) -> f64 {
    sig.eval(t, order)
}

pub fn derivative_bound(sig: &TestSignal, order: u32) -> f64 {
    sig.derivative_bound(order)
}

/// A differentiator input: either an analytic sinusoid sum or an arbitrary
/// callable. Only the analytic form provides derivatives and bounds.
#[derive(Clone)]
pub enum Signal {
    Sinusoids(TestSignal),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Signal {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Signal::Custom(Arc::new(f))
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Signal::Sinusoids(sig) => sig.eval(t, 0),
            Signal::Custom(f) => f(t),
        }
    }

    pub fn derivative(&self, t: f64, order: u32) -> Option<f64> {
        match self {
            Signal::Sinusoids(sig) => Some(sig.eval(t, order)),
            Signal::Custom(f) if order == 0 => Some(f(t)),
            Signal::Custom(_) => None,
        }
    }

    pub fn derivative_bound(&self, order: u32) -> Result<f64> {
        match self {
            Signal::Sinusoids(sig) => Ok(sig.derivative_bound(order)),
            Signal::Custom(_) => Err(Error::BoundUnavailable),
        }
    }

    pub fn as_test_signal(&self) -> Option<&TestSignal> {
        match self {
            Signal::Sinusoids(sig) => Some(sig),
            Signal::Custom(_) => None,
        }
    }
}

impl From<TestSignal> for Signal {
    fn from(sig: TestSignal) -> Self {
        Signal::Sinusoids(sig)
    }
}

impl fmt::Debug for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signal::Sinusoids(sig) => f.debug_tuple("Sinusoids").field(sig).finish(),
            Signal::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    None,
    Uniform,
    Gaussian,
}

/// Additive measurement noise. `magnitude` is the half-width for uniform
/// noise and the standard deviation for gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    #[serde(default)]
    pub magnitude: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return Err(Error::param("noise.magnitude", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.kind != NoiseKind::None && self.magnitude > 0.0
    }
}

/// Counter-based noise stream.
///
/// Sample `j` is drawn from the ChaCha8 keystream seeded with `seed` at word
/// position `4j` (two 64-bit words per sample), so the value depends only on
/// `(seed, j)`. Uniform samples map one word to `[-m, m]`; gaussian samples
/// use the Box-Muller transform on both words.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    spec: NoiseSpec,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(spec: NoiseSpec) -> Self {
        NoiseSource {
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
        }
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn sample(&self, index: u64) -> f64 {
        if !self.spec.is_active() {
            return 0.0;
        }
        let mut rng = self.rng.clone();
        rng.set_word_pos(u128::from(index) * 4);
        // (0, 1], never zero so ln() is finite
        let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        match self.spec.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Uniform => self.spec.magnitude * (2.0 * u1 - 1.0),
            NoiseKind::Gaussian => self.spec.magnitude * (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos(),
        }
    }
}

/// What a differentiator sees: the signal plus optional measurement noise.
///
/// Noise is sampled on the integration grid `origin + j * dt`; an evaluation
/// at time `t` uses the sample of the nearest grid node.
#[derive(Debug, Clone)]
pub struct Input {
    signal: Signal,
    noise: Option<GridNoise>,
}

#[derive(Debug, Clone)]
struct GridNoise {
    source: NoiseSource,
    origin: f64,
    dt: f64,
}

impl Input {
    pub fn clean(signal: impl Into<Signal>) -> Self {
        Input {
            signal: signal.into(),
            noise: None,
        }
    }

    pub fn with_noise(mut self, spec: NoiseSpec, origin: f64, dt: f64) -> Self {
        self.noise = spec.is_active().then(|| GridNoise {
            source: NoiseSource::new(spec),
            origin,
            dt,
        });
        self
    }

    pub fn signal(&self) -> &Signal {
        &self.signal
    }

    pub fn is_noisy(&self) -> bool {
        self.noise.is_some()
    }

    /// Exact `a'(t)` when the input is noiseless and analytic.
    #[inline]
    pub fn rate(&self, t: f64) -> Option<f64> {
        match (&self.noise, &self.signal) {
            (None, Signal::Sinusoids(sig)) => Some(sig.eval(t, 1)),
            _ => None,
        }
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        let clean = self.signal.value(t);
        match &self.noise {
            None => clean,
            Some(n) => {
                let index = ((t - n.origin) / n.dt).round().max(0.0) as u64;
                clean + n.source.sample(index)
            }
        }
    }
}

impl<S: Into<Signal>> From<S> for Input {
    fn from(signal: S) -> Self {
        Input::clean(signal)
    }
}

/// `a(t_j) + n_j` over a strictly increasing grid.
pub fn sample_with_noise(sig: &TestSignal, grid: &[f64], noise: &NoiseSpec) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if let Some(index) = grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotoneGrid { index: index + 1 });
    }
    noise.validate()?;
    let source = NoiseSource::new(*noise);
    Ok(grid
        .iter()
        .enumerate()
        .map(|(j, &t)| sig.eval(t, 0) + source.sample(j as u64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_signal_values_at_origin() {
        let sig = TestSignal::paper();
        assert_eq!(sig.eval(0.0, 0), 3.0);
        assert_eq!(sig.eval(0.0, 1), 2.0);
    }

    #[test]
    fn fourth_derivative_matches_finite_difference() {
        let sig = TestSignal::paper();
        let h = 1e-5;
        let fd = (sig.eval(0.5 + h, 3) - sig.eval(0.5 - h, 3)) / (2.0 * h);
        let exact = sig.eval(0.5, 4);
        assert!(((fd - exact) / exact).abs() < 1e-6, "fd {fd} exact {exact}");
    }

    #[test]
    fn bounds() {
        let sig = TestSignal::paper();
        assert_eq!(sig.derivative_bound(2), 29.0);
        assert_eq!(sig.derivative_bound(5), 731.0);
        let single = TestSignal::new("s", vec![Term::sine(1.0, 1.0)]).unwrap();
        assert_eq!(single.derivative_bound(1), 1.0);
    }

    #[test]
    fn second_derivative_bound_holds_on_dense_grid() {
        let sig = TestSignal::paper();
        let n = 100_000;
        let sup = (0..n)
            .map(|j| sig.eval(TAU * j as f64 / n as f64, 2).abs())
            .fold(0.0, f64::max);
        assert!(sup <= 29.0);
        assert!(sup > 28.0);
    }

    #[test]
    fn rejects_invalid_terms() {
        assert!(TestSignal::new("e", vec![]).is_err());
        assert!(TestSignal::new("n", vec![Term::sine(f64::NAN, 1.0)]).is_err());
        assert!(TestSignal::new("w", vec![Term::sine(1.0, -1.0)]).is_err());
    }

    #[test]
    fn noiseless_sampling() {
        let sig = TestSignal::paper();
        assert_eq!(
            sample_with_noise(&sig, &[0.0], &NoiseSpec::none()).unwrap(),
            vec![3.0]
        );
        assert!(matches!(
            sample_with_noise(&sig, &[], &NoiseSpec::none()),
            Err(Error::EmptyGrid)
        ));
        assert!(sample_with_noise(&sig, &[0.0, 0.0], &NoiseSpec::none()).is_err());
    }

    #[test]
    fn zero_magnitude_noise_is_identity() {
        let sig = TestSignal::paper();
        let grid: Vec<f64> = (0..50).map(|j| j as f64 * 0.01).collect();
        let clean = sample_with_noise(&sig, &grid, &NoiseSpec::none()).unwrap();
        let spec = NoiseSpec {
            kind: NoiseKind::Uniform,
            magnitude: 0.0,
            seed: 3,
        };
        assert_eq!(sample_with_noise(&sig, &grid, &spec).unwrap(), clean);
    }

    #[test]
    fn seeded_noise_is_reproducible_and_bounded() {
        let sig = TestSignal::paper();
        let grid: Vec<f64> = (0..1000).map(|j| j as f64 * 1e-3).collect();
        let spec = NoiseSpec {
            kind: NoiseKind::Uniform,
            magnitude: 0.1,
            seed: 42,
        };
        let a = sample_with_noise(&sig, &grid, &spec).unwrap();
        let b = sample_with_noise(&sig, &grid, &spec).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        for (v, t) in a.iter().zip(&grid) {
            assert!((v - sig.eval(*t, 0)).abs() <= 0.1);
        }
        let other = NoiseSpec { seed: 43, ..spec };
        assert_ne!(a, sample_with_noise(&sig, &grid, &other).unwrap());
    }

    #[test]
    fn gaussian_noise_moments() {
        let src = NoiseSource::new(NoiseSpec {
            kind: NoiseKind::Gaussian,
            magnitude: 2.0,
            seed: 7,
        });
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|j| src.sample(j)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var.sqrt() - 2.0).abs() < 0.05, "std {}", var.sqrt());
    }

    #[test]
    fn custom_signal_has_no_bound() {
        let s = Signal::custom(|t| t * t);
        assert_eq!(s.value(3.0), 9.0);
        assert!(s.derivative(1.0, 1).is_none());
        assert!(matches!(
            s.derivative_bound(1),
            Err(Error::BoundUnavailable)
        ));
    }
}
