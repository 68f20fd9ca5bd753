//! Return-map analysis of the first-order SD error dynamics.
//!
//! Under the worst-case drive `r = -L_delta sgn(e_alpha)` the errors obey
//!
//! ```text
//! e_alpha' = -k e_alpha + e_sigma
//! e_sigma' = r
//! ```
//!
//! Between consecutive zeros of `e_alpha` the drive is constant, which gives
//! closed forms for the inter-crossing interval and for the map
//! `e_sigma^i -> e_sigma^{i+1}` in terms of the principal Lambert-W branch:
//!
//! ```text
//! x        = -|e| / rho - 1                  (rho = L_delta / k)
//! t_delta  = |e| / L_delta + (1 + W(x e^x)) / k
//! e_next   = -sgn(e) rho (1 + W(x e^x))
//! ```
//!
//! [`oracle_crossing`] integrates the same dynamics by brute force and locates
//! the crossing by bisection, independently of the Lambert-W route.

use std::f64::consts::E;

use crate::differentiators::sgn;
use crate::error::{Error, Result};

const HALLEY_MAX_ITER: usize = 50;

/// `1 + W` as a series in `p = sqrt(2 (1 + e y))` about the branch point.
fn branch_series(p: f64) -> f64 {
    const C: [f64; 6] = [
        1.0,
        -1.0 / 3.0,
        11.0 / 72.0,
        -43.0 / 540.0,
        769.0 / 17280.0,
        -221.0 / 8505.0,
    ];
    C.iter().rev().fold(0.0, |acc, c| acc * p + c) * p
}

/// Principal branch `W0(y)` for `y` in `[-1/e, 0]`.
///
/// Halley iteration on `w e^w - y`, seeded from the branch-point expansion
/// for `y < -0.25` and with `w = y` otherwise. Within `p < 1e-3` of the
/// branch point the expansion is already exact to working precision and is
/// returned directly.
pub fn lambert_w0(y: f64) -> Result<f64> {
    if !y.is_finite() || y > 0.0 {
        return Err(Error::LambertDomain(y));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let q = E.mul_add(y, 1.0);
    if q < -4.0 * f64::EPSILON {
        return Err(Error::LambertDomain(y));
    }
    // within a few ulps of -1/e the rounding of y itself dominates
    if q <= 4.0 * f64::EPSILON {
        return Ok(-1.0);
    }
    let p = (2.0 * q).sqrt();
    if p < 1e-3 {
        return Ok(branch_series(p) - 1.0);
    }
    let mut w = if y < -0.25 { branch_series(p) - 1.0 } else { y };
    for _ in 0..HALLEY_MAX_ITER {
        let ew = w.exp();
        let f = w * ew - y;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = (w - step).clamp(-1.0, 0.0);
        let converged = (next - w).abs() <= 1e-16 * (1.0 + next.abs()) || f.abs() <= 1e-17;
        w = next;
        if converged {
            break;
        }
    }
    Ok(w)
}

/// `ln(1 + s) - s`, accurate near `s = 0`.
fn log1p_minus(s: f64) -> f64 {
    if s.abs() < 0.1 {
        // -s^2/2 + s^3/3 - s^4/4 + ...
        let mut term = -s;
        let mut sum = 0.0;
        for n in 2..40 {
            term *= -s;
            let add = term / n as f64;
            sum -= add;
            if add.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        s.ln_1p() - s
    }
}

/// `1 + W0(x e^x)` for `x = -1 - u`, `u >= 0`.
///
/// Close to the branch point `W0(x e^x)` cannot be formed from the rounded
/// product `x e^x` without losing most of the digits of `1 + W`. Writing
/// `v = 1 + W` the defining equation becomes `ln(1 - v) + v = ln(1 + u) - u`,
/// which is solved for `v` by Newton iteration for `u < 1`. Larger `u` goes
/// through [`lambert_w0`].
pub fn one_plus_w_of_xexp(u: f64) -> f64 {
    debug_assert!(u >= 0.0);
    if u == 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        let x = -1.0 - u;
        let y = x * x.exp();
        return 1.0 + lambert_w0(y).expect("x e^x lies in [-1/e, 0) for x <= -1");
    }
    let c = log1p_minus(u);
    let p = (-2.0 * c.exp_m1()).sqrt();
    let mut v = branch_series(p).clamp(f64::MIN_POSITIVE, 0.9);
    for _ in 0..HALLEY_MAX_ITER {
        let h = log1p_minus(-v) - c;
        let step = h * (1.0 - v) / v;
        let next = v + step;
        let converged = step.abs() <= 2e-16 * next.abs();
        v = next;
        if converged {
            break;
        }
    }
    v
}

/// `x = -|e| / rho - 1`.
pub fn map_x(e_sigma: f64, rho: f64) -> f64 {
    -e_sigma.abs() / rho - 1.0
}

/// Parameters of the worst-case error dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMapParams {
    pub k: f64,
    /// Switching margin `L - L*`.
    pub l_delta: f64,
    /// `l_delta / k`.
    pub rho: f64,
}

impl ErrorMapParams {
    pub fn new(k: f64, l_delta: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::param("k", "must be positive"));
        }
        if !(l_delta > 0.0 && l_delta.is_finite()) {
            return Err(Error::param("l_delta", "must be positive"));
        }
        Ok(ErrorMapParams {
            k,
            l_delta,
            rho: l_delta / k,
        })
    }

    /// Parameters with the given `k` and `rho`, so `l_delta = rho k`.
    pub fn from_rho(k: f64, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::param("rho", "must be positive"));
        }
        let mut p = ErrorMapParams::new(k, rho * k)?;
        p.rho = rho;
        Ok(p)
    }

    /// Worst-case drive `-L_delta sgn(e_sigma)` on the interval following a
    /// crossing with error `e_sigma`.
    pub fn drive(&self, e_sigma: f64) -> f64 {
        -self.l_delta * sgn(e_sigma)
    }
}

/// One interval between consecutive zeros of `e_alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingRecord {
    pub e_sigma_in: f64,
    pub t_delta: f64,
    pub e_sigma_out: f64,
    /// Drive applied over the interval.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapIterate {
    pub sequence: Vec<CrossingRecord>,
}

impl MapIterate {
    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.sequence.iter().map(|r| r.e_sigma_out)
    }
}

/// `t_delta = |e| / L_delta + (1 + W(x e^x)) / k`; zero at `e = 0`.
pub fn crossing_interval(e_sigma: f64, p: &ErrorMapParams) -> f64 {
    if e_sigma == 0.0 {
        return 0.0;
    }
    let v = one_plus_w_of_xexp(e_sigma.abs() / p.rho);
    e_sigma.abs() / p.l_delta + v / p.k
}

/// `e_next = -sgn(e) rho (1 + W(x e^x))`.
pub fn next_crossing_error(e_sigma: f64, p: &ErrorMapParams) -> f64 {
    if e_sigma == 0.0 {
        return 0.0;
    }
    -sgn(e_sigma) * p.rho * one_plus_w_of_xexp(e_sigma.abs() / p.rho)
}

pub fn crossing_record(e_sigma: f64, p: &ErrorMapParams) -> CrossingRecord {
    CrossingRecord {
        e_sigma_in: e_sigma,
        t_delta: crossing_interval(e_sigma, p),
        e_sigma_out: next_crossing_error(e_sigma, p),
        r: p.drive(e_sigma),
    }
}

/// Central-difference slope of the return map at the origin, step `1e-6 rho`.
pub fn map_slope_at_origin(p: &ErrorMapParams) -> f64 {
    let h = 1e-6 * p.rho;
    (next_crossing_error(h, p) - next_crossing_error(-h, p)) / (2.0 * h)
}

pub fn iterate_map(e0: f64, p: &ErrorMapParams, n: usize) -> MapIterate {
    let mut e = e0;
    let sequence = (0..n)
        .map(|_| {
            let rec = crossing_record(e, p);
            e = rec.e_sigma_out;
            rec
        })
        .collect();
    MapIterate { sequence }
}

/// `e_alpha_dot(t)` before the first crossing, with drive
/// `r = -sign_branch L_delta`: `(e_d0 + s rho) e^{-kt} - s rho`.
pub fn transient_solution(e_d0: f64, p: &ErrorMapParams, t: f64, sign_branch: f64) -> f64 {
    let s = sgn(sign_branch);
    (e_d0 + s * p.rho) * (-p.k * t).exp() - s * p.rho
}

/// Brute-force crossing: RK4 on the two-state error dynamics with exact
/// `sgn`, bisection on the bracketing step to locate the next zero of
/// `e_alpha`.
///
/// With `e_alpha0 = 0` the initial direction is that of `e_sigma0`, which is
/// where `e_alpha` heads immediately after the crossing.
pub fn oracle_crossing(
    e_alpha0: f64,
    e_sigma0: f64,
    p: &ErrorMapParams,
    dt: f64,
) -> Result<CrossingRecord> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be positive"));
    }
    if e_alpha0 == 0.0 && e_sigma0 == 0.0 {
        return Ok(CrossingRecord {
            e_sigma_in: 0.0,
            t_delta: 0.0,
            e_sigma_out: 0.0,
            r: 0.0,
        });
    }
    let side = if e_alpha0 != 0.0 {
        sgn(e_alpha0)
    } else {
        sgn(e_sigma0)
    };
    // sgn(e_alpha) = side on the whole open interval up to the crossing
    let r = -p.l_delta * side;
    let k = p.k;
    let f = |ea: f64, es: f64| (-k * ea + es, r);
    let rk4 = |ea: f64, es: f64, h: f64| {
        let (a1, s1) = f(ea, es);
        let (a2, s2) = f(ea + 0.5 * h * a1, es + 0.5 * h * s1);
        let (a3, s3) = f(ea + 0.5 * h * a2, es + 0.5 * h * s2);
        let (a4, s4) = f(ea + h * a3, es + h * s3);
        (
            ea + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            es + h / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4),
        )
    };

    let horizon = 10.0 * (e_sigma0.abs() / p.l_delta + 1.0 / p.k);
    let (mut ea, mut es) = (e_alpha0, e_sigma0);
    let mut t = 0.0;
    let mut steps: u64 = 0;
    loop {
        let (na, ns) = rk4(ea, es, dt);
        // a start exactly on the surface counts as "still on the initial side"
        let left = side * na <= 0.0 && (steps > 0 || e_alpha0 != 0.0 || side * na < 0.0);
        if left {
            let (mut lo, mut hi) = (0.0, dt);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let (ma, _) = rk4(ea, es, mid);
                if ma.abs() < 1e-300 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if side * ma > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tau = 0.5 * (lo + hi);
            let (_, s_out) = rk4(ea, es, tau);
            return Ok(CrossingRecord {
                e_sigma_in: e_sigma0,
                t_delta: t + tau,
                e_sigma_out: s_out,
                r,
            });
        }
        ea = na;
        es = ns;
        steps += 1;
        t = steps as f64 * dt;
        if t > horizon {
            return Err(Error::NoCrossing { horizon });
        }
    }
}
