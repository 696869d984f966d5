//! Pose representations, the polar transform and its inverse, the state-space
//! metrics, and the `sinc` / `Si` special functions used by the steering laws.
//!
//! Polar coordinates follow the parking convention: `rho` is the distance to
//! the goal, `delta = atan2(y, x) + pi` is the bearing of the goal and
//! `gamma = delta - theta` is the line-of-sight angle. Angles are unwrapped
//! reals; nothing in this module reduces them modulo `2 pi` except the
//! construction-time branch of `delta`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pose `(x, y, theta)` of the vehicle in the goal frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Polar pose `(rho, delta, gamma)` relative to the goal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarState {
    pub rho: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl CartesianState {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// `|x| + |y| + |theta|`, the Cartesian distance to the goal pose.
    pub fn l1_norm(&self) -> f64 {
        self.x.abs() + self.y.abs() + self.theta.abs()
    }

    pub fn to_polar(&self) -> Result<PolarState> {
        cartesian_to_polar(self)
    }
}

impl PolarState {
    pub const fn new(rho: f64, delta: f64, gamma: f64) -> Self {
        Self { rho, delta, gamma }
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.delta.is_finite() && self.gamma.is_finite()
    }

    /// Membership in `S = {rho > 0} x R^2`.
    pub fn in_s(&self) -> bool {
        self.rho > 0.0 && self.delta.is_finite() && self.gamma.is_finite()
    }

    /// Membership in `S1 = {rho > 0} x R x (-pi, pi)`.
    pub fn in_s1(&self) -> bool {
        self.in_s() && self.gamma.abs() < PI
    }

    pub fn to_cartesian(&self) -> CartesianState {
        polar_to_cartesian(self)
    }

    pub fn norm(&self) -> f64 {
        (self.rho * self.rho + self.delta * self.delta + self.gamma * self.gamma).sqrt()
    }
}

pub fn cartesian_to_polar(s: &CartesianState) -> Result<PolarState> {
    if s.x == 0.0 && s.y == 0.0 {
        return Err(Error::SingularOrigin);
    }
    let rho = s.x.hypot(s.y);
    let mut delta = s.y.atan2(s.x) + PI;
    // atan2(-0.0, x < 0) returns -pi; keep delta in (0, 2pi].
    if delta <= 0.0 {
        delta += TAU;
    }
    Ok(PolarState {
        rho,
        delta,
        gamma: delta - s.theta,
    })
}

pub fn polar_to_cartesian(s: &PolarState) -> CartesianState {
    let (sin_d, cos_d) = s.delta.sin_cos();
    CartesianState {
        x: -s.rho * cos_d,
        y: -s.rho * sin_d,
        theta: s.delta - s.gamma,
    }
}

/// Metric on `S`: `rho + |delta| + |gamma|`.
pub fn metric_s(s: &PolarState) -> f64 {
    s.rho + s.delta.abs() + s.gamma.abs()
}

/// Metric on `S1`: `rho + |delta| + 2 tan(|gamma| / 2)`.
pub fn metric_s1(s: &PolarState) -> Result<f64> {
    if s.gamma.abs() >= PI {
        return Err(Error::OutsideS1 { gamma: s.gamma });
    }
    Ok(s.rho + s.delta.abs() + 2.0 * (0.5 * s.gamma.abs()).tan())
}

const SINC_SERIES_THRESHOLD: f64 = 1e-4;

/// `sin(a) / a`, continuously extended by `sinc(0) = 1`.
pub fn sinc(a: f64) -> f64 {
    if a.abs() < SINC_SERIES_THRESHOLD {
        let a2 = a * a;
        1.0 - a2 / 6.0 + a2 * a2 / 120.0
    } else {
        a.sin() / a
    }
}

const SI_SERIES_LIMIT: f64 = 4.0 * PI;

/// Sine integral `Si(a) = int_0^a sinc`.
///
/// Power series up to `|a| = 4 pi`; beyond that the series loses digits to
/// cancellation and the continued fraction for `E1(i a)` is used instead.
pub fn si(a: f64) -> f64 {
    if !a.is_finite() {
        return if a.is_nan() { a } else { FRAC_PI_2.copysign(a) };
    }
    let t = a.abs();
    let value = if t <= SI_SERIES_LIMIT {
        si_series(t)
    } else {
        si_continued_fraction(t)
    };
    value.copysign(a)
}

fn si_series(t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let t2 = t * t;
    // power = t^(2k+1) / (2k+1)!
    let mut power = t;
    let mut sum = 0.0;
    let mut k = 0u32;
    loop {
        let n = f64::from(2 * k + 1);
        let term = power / n;
        if k.is_multiple_of(2) {
            sum += term;
        } else {
            sum -= term;
        }
        if term.abs() <= 1e-16 * sum.abs() {
            return sum;
        }
        power *= t2 / ((n + 1.0) * (n + 2.0));
        k += 1;
    }
}

fn si_continued_fraction(t: f64) -> f64 {
    const MAX_ITER: usize = 200;
    const TINY: f64 = 1e-300;

    // Modified Lentz evaluation of E1(i t); Si(t) = pi/2 + Im(e^{-it} h).
    let mut b = Complex64::new(1.0, t);
    let mut c = Complex64::new(1.0 / TINY, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 2..MAX_ITER {
        let a = -(((i - 1) * (i - 1)) as f64);
        b += 2.0;
        d = (d * a + b).inv();
        c = b + c.inv() * a;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < f64::EPSILON {
            break;
        }
    }
    let (sin_t, cos_t) = t.sin_cos();
    let h = Complex64::new(cos_t, -sin_t) * h;
    FRAC_PI_2 + h.im
}
