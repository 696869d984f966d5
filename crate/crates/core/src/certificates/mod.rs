//! Lyapunov certificates and finite-time bound checks.

mod envelopes;
mod lyapunov;

pub use envelopes::*;
pub use lyapunov::*;

use serde::{Deserialize, Serialize};

use crate::control_laws::ControllerSpec;
use crate::geometry::PolarState;

/// Certificate values recorded alongside each trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateSample {
    pub t: f64,
    /// Lyapunov value; `None` outside the certificate's domain.
    pub v: Option<f64>,
    pub vdot_analytic: Option<f64>,
    pub vdot_numeric: Option<f64>,
    pub rho: f64,
    /// Forwarding variable of the active controller.
    pub zeta: Option<f64>,
    /// `sqrt(delta^2 + tan^2(gamma))` for the deadbeat laws.
    pub b: Option<f64>,
}

pub fn evaluate(spec: &ControllerSpec, t: f64, s: &PolarState) -> CertificateSample {
    let finite = |x: f64| x.is_finite().then_some(x);
    CertificateSample {
        t,
        v: lyapunov_value(spec, s).ok().and_then(finite),
        vdot_analytic: lyapunov_rate_analytic(spec, s)
            .ok()
            .flatten()
            .and_then(finite),
        vdot_numeric: lyapunov_rate_numeric(spec, s).ok().and_then(finite),
        rho: s.rho,
        zeta: spec.zeta(s),
        b: if spec.is_deadbeat() {
            b_magnitude(s).and_then(finite)
        } else {
            None
        },
    }
}
