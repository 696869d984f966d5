//! Lyapunov functions of the four controllers, their analytic time
//! derivatives along the closed loop, and a finite-difference cross-check.

use crate::control_laws::{
    bofo_tilde, bofo_zeta, deadbeat_exp_zeta, deadbeat_power_zeta, glofo_tilde, glofo_zeta,
    half_angle_weight, ControllerSpec, DubinsGains, UnicycleGains,
};
use crate::error::{Error, Result};
use crate::geometry::{sinc, PolarState};
use crate::simulator::{rhs, PolarRate};
use std::f64::consts::{FRAC_PI_2, PI};

fn check_s1(s: &PolarState) -> Result<()> {
    if s.gamma.abs() >= PI {
        return Err(Error::OutsideS1 { gamma: s.gamma });
    }
    Ok(())
}

fn check_half_plane(s: &PolarState) -> Result<()> {
    if s.gamma.abs() >= FRAC_PI_2 {
        return Err(Error::GammaOutOfRange { gamma: s.gamma });
    }
    Ok(())
}

/// `V = rho^2 + zeta^2 + q^2 gamma^2` with the GloFo forwarding variable.
pub fn v_glofo(s: &PolarState, g: &UnicycleGains) -> f64 {
    let zeta = glofo_zeta(s, g);
    s.rho * s.rho + zeta * zeta + g.k1 / g.k3 * s.gamma * s.gamma
}

pub fn vdot_glofo_analytic(s: &PolarState, g: &UnicycleGains) -> f64 {
    let cos_g = s.gamma.cos();
    let a = g.k3 / g.k2 * sinc(2.0 * s.gamma) * glofo_zeta(s, g);
    let b = s.gamma;
    -2.0 * g.k1 * s.rho * s.rho * cos_g * cos_g
        - g.k1 * g.k2 / g.k3 * (a * a + b * b + (a + b) * (a + b))
}

/// `V = rho^2 + zeta^2 + 4 q^2 tan^2(gamma / 2)` with the BoFo forwarding variable.
pub fn v_bofo(s: &PolarState, g: &UnicycleGains) -> Result<f64> {
    check_s1(s)?;
    let zeta = bofo_zeta(s, g);
    let t = (0.5 * s.gamma).tan();
    Ok(s.rho * s.rho + zeta * zeta + 4.0 * g.k1 / g.k3 * t * t)
}

pub fn vdot_bofo_analytic(s: &PolarState, g: &UnicycleGains) -> Result<f64> {
    check_s1(s)?;
    let cos_g = s.gamma.cos();
    let half = (0.5 * s.gamma).cos();
    // cos(gamma) / (1 + tan^2(gamma/2)) = cos(gamma) cos^2(gamma/2)
    let a = g.k3 / g.k2 * cos_g * half * half * bofo_zeta(s, g);
    let b = 2.0 * (0.5 * s.gamma).tan();
    Ok(-2.0 * g.k1 * s.rho * s.rho * cos_g * cos_g
        - g.k1 * g.k2 / g.k3 * (a * a + b * b + (a + b) * (a + b)))
}

/// `V = (c2 / c1) zeta^2 + tan^2(gamma)` for the power-law deadbeat controller.
pub fn v_deadbeat_power(s: &PolarState, g: &DubinsGains) -> Result<f64> {
    check_half_plane(s)?;
    let zeta = deadbeat_power_zeta(s, g);
    let t = s.gamma.tan();
    Ok(g.c2 / g.c1 * zeta * zeta + t * t)
}

/// `V = (c2 / c1) zeta^2 + Gamma^2` with `Gamma = tan(gamma) + delta`; `zeta`
/// depends on `rho`.
pub fn v_deadbeat_exp(s: &PolarState, g: &DubinsGains) -> Result<f64> {
    if !(s.rho > 0.0) {
        return Err(Error::SingularRho { rho: s.rho });
    }
    check_half_plane(s)?;
    let zeta = deadbeat_exp_zeta(s, g);
    let big_gamma = s.gamma.tan() + s.delta;
    Ok(g.c2 / g.c1 * zeta * zeta + big_gamma * big_gamma)
}

/// `dV/drho` of the power-law deadbeat certificate.
pub fn dv_drho_deadbeat_power(s: &PolarState, g: &DubinsGains) -> Result<f64> {
    if !(s.rho > 0.0) {
        return Err(Error::SingularRho { rho: s.rho });
    }
    check_half_plane(s)?;
    let a = g.c2 * deadbeat_power_zeta(s, g);
    let b = g.c1 * s.gamma.tan();
    Ok((a * a + b * b + (a + b) * (a + b)) / (g.c1 * s.rho))
}

/// `dV/drho` of the exponential deadbeat certificate.
pub fn dv_drho_deadbeat_exp(s: &PolarState, g: &DubinsGains) -> Result<f64> {
    if !(s.rho > 0.0) {
        return Err(Error::SingularRho { rho: s.rho });
    }
    check_half_plane(s)?;
    let a = g.c2 * deadbeat_exp_zeta(s, g);
    let b = g.c1 * (s.gamma.tan() + s.delta);
    Ok((a * a + b * b + (a + b) * (a + b)) / (g.c1 * s.rho * s.rho))
}

/// Time derivative of the power-law certificate: `rho_dot * dV/drho`.
pub fn vdot_deadbeat_power_analytic(s: &PolarState, g: &DubinsGains) -> Result<f64> {
    Ok(-g.v * s.gamma.cos() * dv_drho_deadbeat_power(s, g)?)
}

pub fn vdot_deadbeat_exp_analytic(s: &PolarState, g: &DubinsGains) -> Result<f64> {
    Ok(-g.v * s.gamma.cos() * dv_drho_deadbeat_exp(s, g)?)
}

/// `B = sqrt(delta^2 + tan^2(gamma))`, defined for `|gamma| < pi/2`.
pub fn b_magnitude(s: &PolarState) -> Option<f64> {
    if s.gamma.abs() >= FRAC_PI_2 {
        return None;
    }
    Some(s.delta.hypot(s.gamma.tan()))
}

/// Closed-loop field of the unicycle laws in the form that stays valid at
/// `rho = 0`: `rho_dot = -k1 rho cos^2(gamma)`, `delta_dot = (k1/2) sin(2 gamma)`,
/// `gamma_dot = -omega_tilde`.
pub fn reduced_unicycle_field(s: &PolarState, tilde_omega: f64, g: &UnicycleGains) -> PolarRate {
    let cos_g = s.gamma.cos();
    PolarRate {
        rho: -g.k1 * s.rho * cos_g * cos_g,
        delta: 0.5 * g.k1 * (2.0 * s.gamma).sin(),
        gamma: -tilde_omega,
    }
}

/// Directional derivative of `v` along `field` at `s` by central differences.
///
/// The stencil steps a distance `h = 1e-6 max(1, |s|)` along the unit
/// direction of `field`, so the truncation error does not grow with the
/// field magnitude.
pub fn directional_derivative<F>(v: F, s: &PolarState, field: &PolarRate) -> Result<f64>
where
    F: Fn(&PolarState) -> Result<f64>,
{
    let speed = field.norm();
    if speed == 0.0 {
        return Ok(0.0);
    }
    let h = 1e-6 * s.norm().max(1.0);
    let step = h / speed;
    let plus = field.advance(s, step);
    let minus = field.advance(s, -step);
    Ok(speed * (v(&plus)? - v(&minus)?) / (2.0 * h))
}

pub fn vdot_glofo_numeric(s: &PolarState, g: &UnicycleGains) -> f64 {
    let field = reduced_unicycle_field(s, glofo_tilde(s, g), g);
    directional_derivative(|p| Ok(v_glofo(p, g)), s, &field).expect("v_glofo is total")
}

pub fn vdot_bofo_numeric(s: &PolarState, g: &UnicycleGains) -> Result<f64> {
    let field = reduced_unicycle_field(s, bofo_tilde(s, g)?, g);
    directional_derivative(|p| v_bofo(p, g), s, &field)
}

/// Residuals of the GloFo closed-loop cascade
/// `zeta_dot = -(k1 k3 / k2) sinc^2(2 gamma) zeta`,
/// `gamma_dot = -k2 gamma - k3 sinc(2 gamma) zeta`,
/// with the left-hand sides taken from the polar kinematics under the full
/// control law. Requires `rho > 0`.
pub fn glofo_cascade_residual(s: &PolarState, g: &UnicycleGains) -> Result<(f64, f64)> {
    let spec = ControllerSpec::GloFo(*g);
    let rate = rhs(s, &spec.input(s)?)?;
    let sc = sinc(2.0 * s.gamma);
    let zeta = glofo_zeta(s, g);
    // d/dt Si(2 gamma) = 2 sinc(2 gamma) gamma_dot
    let zeta_dot = rate.delta + g.k1 / g.k2 * sc * rate.gamma;
    let zeta_target = -g.k1 * g.k3 / g.k2 * sc * sc * zeta;
    let gamma_target = -g.k2 * s.gamma - g.k3 * sc * zeta;
    Ok((zeta_dot - zeta_target, rate.gamma - gamma_target))
}

/// Residuals of the BoFo closed-loop cascade
/// `zeta_dot = -(k1 k3 / k2) cos^2(gamma) cos^4(gamma/2) zeta`,
/// `gamma_dot = -k2 sin(gamma) - k3 cos(gamma) cos^4(gamma/2) zeta`.
pub fn bofo_cascade_residual(s: &PolarState, g: &UnicycleGains) -> Result<(f64, f64)> {
    let spec = ControllerSpec::BoFo(*g);
    let rate = rhs(s, &spec.input(s)?)?;
    let (sin_g, cos_g) = s.gamma.sin_cos();
    let w = half_angle_weight(s.gamma);
    let zeta = bofo_zeta(s, g);
    let zeta_dot = rate.delta + g.k1 / g.k2 * cos_g * rate.gamma;
    let zeta_target = -g.k1 * g.k3 / g.k2 * cos_g * cos_g * w * zeta;
    let gamma_target = -g.k2 * sin_g - g.k3 * cos_g * w * zeta;
    Ok((zeta_dot - zeta_target, rate.gamma - gamma_target))
}

/// The certificate attached to a controller.
pub fn lyapunov_value(spec: &ControllerSpec, s: &PolarState) -> Result<f64> {
    match spec {
        ControllerSpec::GloFo(g) => Ok(v_glofo(s, g)),
        ControllerSpec::BoFo(g) => v_bofo(s, g),
        ControllerSpec::DeadbeatPower(g) | ControllerSpec::DeadbeatBackstep(g) => {
            v_deadbeat_power(s, g)
        }
        ControllerSpec::DeadbeatExp(g) => v_deadbeat_exp(s, g),
    }
}

/// Analytic `V_dot` where the closed form is known. The backstepping law is
/// not analysed against the forwarding certificate, so it has none.
pub fn lyapunov_rate_analytic(spec: &ControllerSpec, s: &PolarState) -> Result<Option<f64>> {
    match spec {
        ControllerSpec::GloFo(g) => Ok(Some(vdot_glofo_analytic(s, g))),
        ControllerSpec::BoFo(g) => vdot_bofo_analytic(s, g).map(Some),
        ControllerSpec::DeadbeatPower(g) => vdot_deadbeat_power_analytic(s, g).map(Some),
        ControllerSpec::DeadbeatExp(g) => vdot_deadbeat_exp_analytic(s, g).map(Some),
        ControllerSpec::DeadbeatBackstep(_) => Ok(None),
    }
}

/// Finite-difference `V_dot` along the closed-loop field of `spec`.
pub fn lyapunov_rate_numeric(spec: &ControllerSpec, s: &PolarState) -> Result<f64> {
    match spec {
        ControllerSpec::GloFo(g) => Ok(vdot_glofo_numeric(s, g)),
        ControllerSpec::BoFo(g) => vdot_bofo_numeric(s, g),
        _ => {
            let field = rhs(s, &spec.input(s)?)?;
            directional_derivative(|p| lyapunov_value(spec, p), s, &field)
        }
    }
}
