//! Feedback laws for parking in polar coordinates.
//!
//! The unicycle laws share the velocity feedback `v = k1 rho cos(gamma)` and
//! the steering decomposition `omega = (k1/2) sin(2 gamma) + omega_tilde`,
//! where the first term cancels the destabilizing drift of `gamma`. GloFo and
//! BoFo then choose `omega_tilde` by integrator forwarding.
//!
//! The Dubins laws hold `v` constant and steer with
//! `omega = (v / rho) (sin(gamma) + cos^3(gamma) omega_bar)`, which reaches the
//! goal in finite time.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{si, sinc, PolarState};

/// Distance from `pi/2` at which the deadbeat laws stop accepting `gamma`.
pub const DEADBEAT_GAMMA_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnicycleGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl UnicycleGains {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Result<Self> {
        let g = Self { k1, k2, k3 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3)] {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::GainConstraint(format!(
                    "{name} = {k} must be positive"
                )));
            }
        }
        Ok(())
    }

    /// `q = sqrt(k1 / k3)`, the weight of the `gamma` term in the CLFs.
    pub fn q(&self) -> f64 {
        (self.k1 / self.k3).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DubinsGains {
    pub c1: f64,
    pub c2: f64,
    /// Constant forward speed.
    pub v: f64,
}

impl DubinsGains {
    pub fn new(c1: f64, c2: f64, v: f64) -> Result<Self> {
        let g = Self { c1, c2, v };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("c1", self.c1), ("c2", self.c2), ("v", self.v)] {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::GainConstraint(format!(
                    "{name} = {k} must be positive"
                )));
            }
        }
        Ok(())
    }

    /// `min(c1, c2)`.
    pub fn c_min(&self) -> f64 {
        self.c1.min(self.c2)
    }

    /// The power-law deadbeat controller needs `min(c1, c2) > 2`.
    pub fn validate_power(&self) -> Result<()> {
        self.validate()?;
        if self.c_min() <= 2.0 {
            return Err(Error::GainConstraint(format!(
                "min(c1, c2) = {} must exceed 2",
                self.c_min()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub v: f64,
    pub omega: f64,
}

impl ControlInput {
    pub const ZERO: Self = Self { v: 0.0, omega: 0.0 };

    pub const fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

/// Velocity feedback `v = k1 rho cos(gamma)`. Negative values mean reversing.
pub fn velocity_law(s: &PolarState, g: &UnicycleGains) -> f64 {
    g.k1 * s.rho * s.gamma.cos()
}

/// `omega = (k1/2) sin(2 gamma) + omega_tilde`.
pub fn omega_from_tilde(gamma: f64, tilde_omega: f64, g: &UnicycleGains) -> f64 {
    0.5 * g.k1 * (2.0 * gamma).sin() + tilde_omega
}

/// GloFo forwarding variable `zeta = delta + (k1 / 2k2) Si(2 gamma)`.
pub fn glofo_zeta(s: &PolarState, g: &UnicycleGains) -> f64 {
    s.delta + g.k1 / (2.0 * g.k2) * si(2.0 * s.gamma)
}

/// GloFo steering `omega_tilde = k2 gamma + k3 sinc(2 gamma) zeta`.
pub fn glofo_tilde(s: &PolarState, g: &UnicycleGains) -> f64 {
    g.k2 * s.gamma + g.k3 * sinc(2.0 * s.gamma) * glofo_zeta(s, g)
}

/// BoFo forwarding variable `zeta = delta + (k1 / k2) sin(gamma)`.
pub fn bofo_zeta(s: &PolarState, g: &UnicycleGains) -> f64 {
    s.delta + g.k1 / g.k2 * s.gamma.sin()
}

/// `(1 + tan^2(gamma / 2))^-2`, evaluated as `cos^4(gamma / 2)`.
pub(crate) fn half_angle_weight(gamma: f64) -> f64 {
    let c = (0.5 * gamma).cos();
    let c2 = c * c;
    c2 * c2
}

/// BoFo steering, defined on `|gamma| < pi`.
pub fn bofo_tilde(s: &PolarState, g: &UnicycleGains) -> Result<f64> {
    if s.gamma.abs() >= PI {
        return Err(Error::OutsideS1 { gamma: s.gamma });
    }
    let (sin_g, cos_g) = s.gamma.sin_cos();
    Ok(g.k2 * sin_g + g.k3 * cos_g * half_angle_weight(s.gamma) * bofo_zeta(s, g))
}

fn check_deadbeat_state(s: &PolarState) -> Result<()> {
    if !(s.rho > 0.0) {
        return Err(Error::SingularRho { rho: s.rho });
    }
    if !(s.gamma.abs() < FRAC_PI_2 - DEADBEAT_GAMMA_MARGIN) {
        return Err(Error::GammaOutOfRange { gamma: s.gamma });
    }
    Ok(())
}

fn dubins_steering(s: &PolarState, v: f64, omega_bar: f64) -> f64 {
    let (sin_g, cos_g) = s.gamma.sin_cos();
    v / s.rho * (sin_g + cos_g * cos_g * cos_g * omega_bar)
}

/// Forwarding variable of the power-law deadbeat controller, `tan(gamma) + c1 delta`.
pub fn deadbeat_power_zeta(s: &PolarState, g: &DubinsGains) -> f64 {
    s.gamma.tan() + g.c1 * s.delta
}

/// Forwarding variable of the exponential deadbeat controller,
/// `tan(gamma) + delta + (c1 / rho) delta`.
pub fn deadbeat_exp_zeta(s: &PolarState, g: &DubinsGains) -> f64 {
    s.gamma.tan() + s.delta + g.c1 / s.rho * s.delta
}

fn power_omega_bar(s: &PolarState, g: &DubinsGains) -> f64 {
    g.c1 * s.gamma.tan() + g.c2 * deadbeat_power_zeta(s, g)
}

pub(crate) fn deadbeat_power_unchecked(s: &PolarState, g: &DubinsGains) -> Result<f64> {
    check_deadbeat_state(s)?;
    Ok(dubins_steering(s, g.v, power_omega_bar(s, g)))
}

pub(crate) fn deadbeat_backstep_unchecked(s: &PolarState, g: &DubinsGains) -> Result<f64> {
    check_deadbeat_state(s)?;
    Ok(dubins_steering(s, g.v, power_omega_bar(s, g) + s.delta))
}

pub(crate) fn deadbeat_exp_unchecked(s: &PolarState, g: &DubinsGains) -> Result<f64> {
    check_deadbeat_state(s)?;
    let tan_g = s.gamma.tan();
    let zeta = deadbeat_exp_zeta(s, g);
    let omega_bar = (g.c1 * (tan_g + s.delta) + g.c2 * zeta) / s.rho + tan_g;
    Ok(dubins_steering(s, g.v, omega_bar))
}

/// Power-law deadbeat steering with `omega_bar = c1 tan(gamma) + c2 zeta`.
pub fn deadbeat_power_omega(s: &PolarState, g: &DubinsGains) -> Result<f64> {
    g.validate_power()?;
    deadbeat_power_unchecked(s, g)
}

/// Exponential deadbeat steering with
/// `omega_bar = (c1 (tan(gamma) + delta) + c2 zeta) / rho + tan(gamma)`.
pub fn deadbeat_exp_omega(s: &PolarState, g: &DubinsGains) -> Result<f64> {
    g.validate()?;
    deadbeat_exp_unchecked(s, g)
}

/// Backstepping counterpart of [`deadbeat_power_omega`]: identical except that
/// `omega_bar` is increased by `delta`.
pub fn deadbeat_backstep_omega(s: &PolarState, g: &DubinsGains) -> Result<f64> {
    g.validate_power()?;
    deadbeat_backstep_unchecked(s, g)
}

/// A feedback law together with its gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ControllerSpec {
    #[serde(rename = "glofo")]
    GloFo(UnicycleGains),
    #[serde(rename = "bofo")]
    BoFo(UnicycleGains),
    DeadbeatPower(DubinsGains),
    DeadbeatExp(DubinsGains),
    DeadbeatBackstep(DubinsGains),
}

impl ControllerSpec {
    pub fn glofo(g: UnicycleGains) -> Result<Self> {
        g.validate()?;
        Ok(Self::GloFo(g))
    }

    pub fn bofo(g: UnicycleGains) -> Result<Self> {
        g.validate()?;
        Ok(Self::BoFo(g))
    }

    pub fn deadbeat_power(g: DubinsGains) -> Result<Self> {
        g.validate_power()?;
        Ok(Self::DeadbeatPower(g))
    }

    pub fn deadbeat_exp(g: DubinsGains) -> Result<Self> {
        g.validate()?;
        Ok(Self::DeadbeatExp(g))
    }

    pub fn deadbeat_backstep(g: DubinsGains) -> Result<Self> {
        g.validate_power()?;
        Ok(Self::DeadbeatBackstep(g))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::GloFo(g) | Self::BoFo(g) => g.validate(),
            Self::DeadbeatPower(g) | Self::DeadbeatBackstep(g) => g.validate_power(),
            Self::DeadbeatExp(g) => g.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::GloFo(_) => "glofo",
            Self::BoFo(_) => "bofo",
            Self::DeadbeatPower(_) => "deadbeat-power",
            Self::DeadbeatExp(_) => "deadbeat-exp",
            Self::DeadbeatBackstep(_) => "deadbeat-backstep",
        }
    }

    pub fn is_deadbeat(&self) -> bool {
        matches!(
            self,
            Self::DeadbeatPower(_) | Self::DeadbeatExp(_) | Self::DeadbeatBackstep(_)
        )
    }

    pub fn dubins_gains(&self) -> Option<&DubinsGains> {
        match self {
            Self::DeadbeatPower(g) | Self::DeadbeatExp(g) | Self::DeadbeatBackstep(g) => Some(g),
            _ => None,
        }
    }

    pub fn unicycle_gains(&self) -> Option<&UnicycleGains> {
        match self {
            Self::GloFo(g) | Self::BoFo(g) => Some(g),
            _ => None,
        }
    }

    /// Inputs commanded at `s`. Gains are assumed validated.
    pub fn input(&self, s: &PolarState) -> Result<ControlInput> {
        match self {
            Self::GloFo(g) => Ok(ControlInput::new(
                velocity_law(s, g),
                omega_from_tilde(s.gamma, glofo_tilde(s, g), g),
            )),
            Self::BoFo(g) => Ok(ControlInput::new(
                velocity_law(s, g),
                omega_from_tilde(s.gamma, bofo_tilde(s, g)?, g),
            )),
            Self::DeadbeatPower(g) => Ok(ControlInput::new(g.v, deadbeat_power_unchecked(s, g)?)),
            Self::DeadbeatExp(g) => Ok(ControlInput::new(g.v, deadbeat_exp_unchecked(s, g)?)),
            Self::DeadbeatBackstep(g) => {
                Ok(ControlInput::new(g.v, deadbeat_backstep_unchecked(s, g)?))
            }
        }
    }

    /// The controller's forwarding variable, where defined.
    pub fn zeta(&self, s: &PolarState) -> Option<f64> {
        let z = match self {
            Self::GloFo(g) => glofo_zeta(s, g),
            Self::BoFo(g) => bofo_zeta(s, g),
            Self::DeadbeatPower(g) | Self::DeadbeatBackstep(g) => {
                if s.gamma.abs() >= FRAC_PI_2 {
                    return None;
                }
                deadbeat_power_zeta(s, g)
            }
            Self::DeadbeatExp(g) => {
                if s.gamma.abs() >= FRAC_PI_2 || !(s.rho > 0.0) {
                    return None;
                }
                deadbeat_exp_zeta(s, g)
            }
        };
        z.is_finite().then_some(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    const UNIT: UnicycleGains = UnicycleGains {
        k1: 1.0,
        k2: 1.0,
        k3: 1.0,
    };

    fn dubins(c1: f64, c2: f64, v: f64) -> DubinsGains {
        DubinsGains { c1, c2, v }
    }

    #[test]
    fn velocity_law_examples() {
        assert_abs_diff_eq!(velocity_law(&PolarState::new(1.0, 0.0, 0.0), &UNIT), 1.0);
        assert_abs_diff_eq!(
            velocity_law(&PolarState::new(2.0, 0.0, FRAC_PI_2), &UNIT),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(velocity_law(&PolarState::new(1.0, 0.0, PI), &UNIT), -1.0);
    }

    #[test]
    fn omega_from_tilde_examples() {
        assert_eq!(omega_from_tilde(0.0, 0.0, &UNIT), 0.0);
        assert_abs_diff_eq!(
            omega_from_tilde(FRAC_PI_4, 0.0, &UNIT),
            0.5,
            epsilon = 1e-15
        );
        let g = UnicycleGains { k1: 2.0, ..UNIT };
        assert_abs_diff_eq!(omega_from_tilde(FRAC_PI_4, 1.0, &g), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn glofo_examples() {
        assert_eq!(glofo_tilde(&PolarState::new(1.0, 0.0, 0.0), &UNIT), 0.0);
        assert_eq!(glofo_tilde(&PolarState::new(1.0, 1.0, 0.0), &UNIT), 1.0);
        // Si(pi/2) = 1.370762168154... from quadrature.
        let si_half_pi = 1.370_762_168_154_49;
        let s = PolarState::new(1.0, 0.0, FRAC_PI_4);
        assert_abs_diff_eq!(
            glofo_tilde(&s, &UNIT),
            FRAC_PI_4 + 2.0 / PI * (si_half_pi / 2.0),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(glofo_tilde(&s, &UNIT), 1.2217, epsilon = 1e-4);

        assert_eq!(glofo_zeta(&PolarState::new(1.0, 0.0, 0.0), &UNIT), 0.0);
        assert_eq!(glofo_zeta(&PolarState::new(1.0, 1.0, 0.0), &UNIT), 1.0);
        assert_abs_diff_eq!(glofo_zeta(&s, &UNIT), 0.685_381, epsilon = 1e-6);
    }

    #[test]
    fn bofo_examples() {
        assert_eq!(
            bofo_tilde(&PolarState::new(1.0, 0.0, 0.0), &UNIT).unwrap(),
            0.0
        );
        assert_eq!(
            bofo_tilde(&PolarState::new(1.0, 1.0, 0.0), &UNIT).unwrap(),
            1.0
        );
        let near_pi = bofo_tilde(&PolarState::new(1.0, 0.7, PI - 1e-6), &UNIT).unwrap();
        assert_abs_diff_eq!(near_pi, 0.0, epsilon = 1e-4);
        assert!(matches!(
            bofo_tilde(&PolarState::new(1.0, 0.0, -PI), &UNIT),
            Err(Error::OutsideS1 { .. })
        ));

        assert_eq!(bofo_zeta(&PolarState::new(1.0, 0.0, 0.0), &UNIT), 0.0);
        assert_abs_diff_eq!(bofo_zeta(&PolarState::new(1.0, 1.0, FRAC_PI_2), &UNIT), 2.0);
        let g = UnicycleGains { k1: 2.0, ..UNIT };
        assert_abs_diff_eq!(bofo_zeta(&PolarState::new(1.0, 1.0, -FRAC_PI_2), &g), -1.0);
    }

    #[test]
    fn half_angle_weight_matches_tan_form() {
        for &gamma in &[0.0, 0.4, -1.3, 2.5, -3.0] {
            let t = (0.5f64 * gamma).tan();
            let direct = 1.0 / ((1.0 + t * t) * (1.0 + t * t));
            assert_abs_diff_eq!(half_angle_weight(gamma), direct, epsilon = 1e-15);
        }
    }

    #[test]
    fn deadbeat_power_examples() {
        let g = dubins(3.0, 3.0, 1.0);
        assert_eq!(
            deadbeat_power_omega(&PolarState::new(1.0, 0.0, 0.0), &g).unwrap(),
            0.0
        );
        let w = deadbeat_power_omega(&PolarState::new(1.0, 0.0, FRAC_PI_4), &g).unwrap();
        assert_abs_diff_eq!(w, 2.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert!(matches!(
            deadbeat_power_omega(&PolarState::new(1.0, 0.0, 0.1), &dubins(1.5, 3.0, 1.0)),
            Err(Error::GainConstraint(_))
        ));
        assert!(matches!(
            deadbeat_power_omega(&PolarState::new(0.0, 0.0, 0.1), &g),
            Err(Error::SingularRho { .. })
        ));
        assert!(matches!(
            deadbeat_power_omega(&PolarState::new(1.0, 0.0, -FRAC_PI_2), &g),
            Err(Error::GammaOutOfRange { .. })
        ));
    }

    #[test]
    fn deadbeat_exp_examples() {
        let g = dubins(1.0, 1.0, 1.0);
        assert_eq!(
            deadbeat_exp_omega(&PolarState::new(1.0, 0.0, 0.0), &g).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            deadbeat_exp_omega(&PolarState::new(1.0, 1.0, 0.0), &g).unwrap(),
            3.0
        );
        assert!(matches!(
            deadbeat_exp_omega(&PolarState::new(1.0, 0.0, FRAC_PI_2), &g),
            Err(Error::GammaOutOfRange { .. })
        ));
        // only positivity is required of the gains
        assert!(
            deadbeat_exp_omega(&PolarState::new(1.0, 0.0, 0.1), &dubins(0.7, 1.3, 0.5)).is_ok()
        );
    }

    #[test]
    fn deadbeat_backstep_examples() {
        let g = dubins(3.0, 3.0, 1.0);
        assert_abs_diff_eq!(
            deadbeat_backstep_omega(&PolarState::new(1.0, 1.0, 0.0), &g).unwrap(),
            10.0
        );
        let s = PolarState::new(1.0, -2.0, 0.0);
        let diff = deadbeat_backstep_omega(&s, &g).unwrap() - deadbeat_power_omega(&s, &g).unwrap();
        assert_abs_diff_eq!(diff, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn spec_construction_validates_gains() {
        assert!(ControllerSpec::deadbeat_power(dubins(2.05, 2.1, 0.5)).is_ok());
        assert!(ControllerSpec::deadbeat_power(dubins(2.0, 2.1, 0.5)).is_err());
        assert!(ControllerSpec::deadbeat_backstep(dubins(1.0, 3.0, 0.5)).is_err());
        assert!(ControllerSpec::deadbeat_exp(dubins(0.7, 1.3, 0.5)).is_ok());
        assert!(ControllerSpec::deadbeat_exp(dubins(0.7, 1.3, 0.0)).is_err());
        assert!(ControllerSpec::glofo(UnicycleGains {
            k1: 1.0,
            k2: -1.0,
            k3: 1.0
        })
        .is_err());
        assert!(UnicycleGains::new(1.0, 3.0, f64::NAN).is_err());
    }

    #[test]
    fn cancellation_leaves_gamma_stationary() {
        // with omega_tilde = 0, gamma_dot = (k1/2) sin(2 gamma) - omega = 0
        let g = UnicycleGains {
            k1: 1.7,
            k2: 3.0,
            k3: 2.0,
        };
        for &gamma in &[-7.0, -2.0, -0.3, 0.0, 0.9, 2.5, 6.0] {
            let s = PolarState::new(2.0, 0.4, gamma);
            let v = velocity_law(&s, &g);
            let omega = omega_from_tilde(gamma, 0.0, &g);
            let gamma_dot = v * gamma.sin() / s.rho - omega;
            assert!(gamma_dot.abs() < 1e-15, "gamma = {gamma}: {gamma_dot}");
        }
    }

    proptest! {
        #[test]
        fn backstep_minus_forward_is_delta_term(
            rho in 1e-3f64..10.0,
            delta in -10.0f64..10.0,
            gamma in -1.5f64..1.5,
            c1 in 2.01f64..6.0,
            c2 in 2.01f64..6.0,
            v in 0.1f64..3.0,
        ) {
            let s = PolarState::new(rho, delta, gamma);
            let g = dubins(c1, c2, v);
            let diff = deadbeat_backstep_omega(&s, &g).unwrap() - deadbeat_power_omega(&s, &g).unwrap();
            let expected = v / rho * gamma.cos().powi(3) * delta;
            let scale = deadbeat_backstep_omega(&s, &g).unwrap().abs().max(1.0);
            prop_assert!((diff - expected).abs() <= 8.0 * f64::EPSILON * scale);
        }

        #[test]
        fn backstep_equals_forward_when_delta_is_zero(
            rho in 1e-3f64..10.0,
            gamma in -1.5f64..1.5,
            c1 in 2.01f64..6.0,
            c2 in 2.01f64..6.0,
        ) {
            let s = PolarState::new(rho, 0.0, gamma);
            let g = dubins(c1, c2, 0.5);
            prop_assert_eq!(deadbeat_backstep_omega(&s, &g).unwrap(), deadbeat_power_omega(&s, &g).unwrap());
        }
    }
}
