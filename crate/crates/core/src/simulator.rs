//! Fixed-step RK4 integration of the closed-loop polar kinematics
//!
//! ```text
//! rho_dot   = -v cos(gamma)
//! delta_dot =  v sin(gamma) / rho
//! gamma_dot =  v sin(gamma) / rho - omega
//! ```
//!
//! with the controller evaluated at every stage. A step that crosses the
//! cutoff radius is bisected so the run ends on the cutoff; the deadbeat
//! laws additionally stop the run if `gamma` leaves `(-pi/2, pi/2)`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{self, CertificateSample};
use crate::control_laws::{ControlInput, ControllerSpec, DEADBEAT_GAMMA_MARGIN};
use crate::error::{Error, Result};
use crate::geometry::{CartesianState, PolarState};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_CUTOFF_RHO: f64 = 0.01;
pub const DEFAULT_T_MAX: f64 = 60.0;

/// Cutoff crossings are localized to `dt * CUTOFF_BISECTION_TOL`.
const CUTOFF_BISECTION_TOL: f64 = 1e-6;
/// Deadbeat runs shrink the step to `dt * rho / rho0` below this fraction of `rho0`.
const DEADBEAT_REFINE_FRACTION: f64 = 0.1;

/// Time derivative of a [`PolarState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarRate {
    pub rho: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl PolarRate {
    pub fn norm(&self) -> f64 {
        (self.rho * self.rho + self.delta * self.delta + self.gamma * self.gamma).sqrt()
    }

    /// `s + h * self`.
    pub fn advance(&self, s: &PolarState, h: f64) -> PolarState {
        PolarState {
            rho: s.rho + h * self.rho,
            delta: s.delta + h * self.delta,
            gamma: s.gamma + h * self.gamma,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.delta.is_finite() && self.gamma.is_finite()
    }
}

/// Polar kinematics of the unicycle.
pub fn rhs(s: &PolarState, u: &ControlInput) -> Result<PolarRate> {
    if !(s.rho > 0.0) {
        return Err(Error::SingularRho { rho: s.rho });
    }
    let (sin_g, cos_g) = s.gamma.sin_cos();
    let turn = u.v * sin_g / s.rho;
    Ok(PolarRate {
        rho: -u.v * cos_g,
        delta: turn,
        gamma: turn - u.omega,
    })
}

/// One classical RK4 step of length `h` under the feedback `law`.
pub fn rk4_step<F>(s: &PolarState, h: f64, law: F) -> Result<PolarState>
where
    F: Fn(&PolarState) -> Result<ControlInput>,
{
    let field = |p: &PolarState| -> Result<PolarRate> { rhs(p, &law(p)?) };
    let k1 = field(s)?;
    let k2 = field(&k1.advance(s, 0.5 * h))?;
    let k3 = field(&k2.advance(s, 0.5 * h))?;
    let k4 = field(&k3.advance(s, h))?;
    let w = h / 6.0;
    Ok(PolarState {
        rho: s.rho + w * (k1.rho + 2.0 * k2.rho + 2.0 * k3.rho + k4.rho),
        delta: s.delta + w * (k1.delta + 2.0 * k2.delta + 2.0 * k3.delta + k4.delta),
        gamma: s.gamma + w * (k1.gamma + 2.0 * k2.gamma + 2.0 * k3.gamma + k4.gamma),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub initial: PolarState,
    pub controller: ControllerSpec,
    pub dt: f64,
    pub t_max: f64,
    pub cutoff_rho: f64,
    pub record_stride: usize,
}

impl Scenario {
    /// Scenario with the default step, horizon and cutoff.
    pub fn new(initial: PolarState, controller: ControllerSpec) -> Self {
        Self {
            initial,
            controller,
            dt: DEFAULT_DT,
            t_max: DEFAULT_T_MAX,
            cutoff_rho: DEFAULT_CUTOFF_RHO,
            record_stride: 1,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_cutoff(mut self, cutoff_rho: f64) -> Self {
        self.cutoff_rho = cutoff_rho;
        self
    }

    pub fn with_stride(mut self, record_stride: usize) -> Self {
        self.record_stride = record_stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !self.initial.is_finite() {
            return bad("initial state must be finite".into());
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return bad(format!("t_max = {} must be positive", self.t_max));
        }
        if self.dt > self.t_max {
            return bad(format!("dt = {} exceeds t_max = {}", self.dt, self.t_max));
        }
        if !(self.cutoff_rho.is_finite() && self.cutoff_rho >= 0.0) {
            return bad(format!(
                "cutoff_rho = {} must be non-negative",
                self.cutoff_rho
            ));
        }
        if !(self.cutoff_rho < self.initial.rho) {
            return bad(format!(
                "cutoff_rho = {} must be below the initial rho = {}",
                self.cutoff_rho, self.initial.rho
            ));
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        self.controller.validate()?;
        let gamma0 = self.initial.gamma.abs();
        if self.controller.is_deadbeat() && gamma0 >= FRAC_PI_2 - DEADBEAT_GAMMA_MARGIN {
            return bad(format!(
                "deadbeat controllers need |gamma0| < pi/2, got {}",
                self.initial.gamma
            ));
        }
        if matches!(self.controller, ControllerSpec::BoFo(_)) && gamma0 >= PI {
            return bad(format!(
                "bofo needs |gamma0| < pi, got {}",
                self.initial.gamma
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `rho` reached the cutoff radius; inputs are switched off.
    Cutoff,
    Horizon,
    /// A deadbeat run left `|gamma| < pi/2` (or a BoFo run left `|gamma| < pi`).
    DomainExit,
    NumericalFault,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub polar: PolarState,
    pub cartesian: CartesianState,
    pub input: ControlInput,
    pub certificate: CertificateSample,
}

impl Sample {
    pub fn new(t: f64, polar: PolarState, input: ControlInput, spec: &ControllerSpec) -> Self {
        Self {
            t,
            polar,
            cartesian: polar.to_cartesian(),
            input,
            certificate: certificates::evaluate(spec, t, &polar),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub scenario: Scenario,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples
            .last()
            .expect("trajectory has at least one sample")
    }

    /// Time at which the cutoff fired, if it did.
    pub fn cutoff_time(&self) -> Option<f64> {
        (self.termination == Termination::Cutoff).then(|| self.last().t)
    }

    /// Samples at which the controller was active (everything before the cutoff).
    pub fn active_samples(&self) -> &[Sample] {
        match self.termination {
            Termination::Cutoff => &self.samples[..self.samples.len() - 1],
            _ => &self.samples,
        }
    }
}

fn step_length(scn: &Scenario, s: &PolarState) -> f64 {
    let rho0 = scn.initial.rho;
    if scn.controller.is_deadbeat() && s.rho < DEADBEAT_REFINE_FRACTION * rho0 {
        scn.dt * s.rho / rho0
    } else {
        scn.dt
    }
}

fn classify(err: &Error) -> Termination {
    match err {
        Error::GammaOutOfRange { .. } | Error::OutsideS1 { .. } => Termination::DomainExit,
        _ => Termination::NumericalFault,
    }
}

/// Integrates a scenario until the cutoff, the horizon, or a fault.
pub fn integrate(scn: &Scenario) -> Result<Trajectory> {
    scn.validate()?;
    let spec = scn.controller;
    let law = |p: &PolarState| spec.input(p);
    let deadbeat = spec.is_deadbeat();

    let mut samples = Vec::new();
    let mut s = scn.initial;
    let mut t = 0.0;
    samples.push(Sample::new(t, s, spec.input(&s)?, &spec));

    let mut steps = 0usize;
    let termination = loop {
        let remaining = scn.t_max - t;
        if remaining <= 1e-9 * scn.dt {
            break Termination::Horizon;
        }
        let h = step_length(scn, &s).min(remaining);

        let outcome = rk4_step(&s, h, law);
        if crosses_cutoff(&outcome, scn.cutoff_rho) {
            let (tau, s_cut) = locate_cutoff(&s, h, scn, law);
            samples.push(Sample::new(t + tau, s_cut, ControlInput::ZERO, &spec));
            break Termination::Cutoff;
        }
        let next = match outcome {
            Ok(n) if n.is_finite() => n,
            Ok(_) => break Termination::NumericalFault,
            Err(e) => break classify(&e),
        };
        if deadbeat && next.gamma.abs() >= FRAC_PI_2 - DEADBEAT_GAMMA_MARGIN {
            break Termination::DomainExit;
        }

        s = next;
        t += h;
        steps += 1;
        let at_horizon = scn.t_max - t <= 1e-9 * scn.dt;
        if steps.is_multiple_of(scn.record_stride) || at_horizon {
            match spec.input(&s) {
                Ok(u) => samples.push(Sample::new(t, s, u, &spec)),
                Err(e) => break classify(&e),
            }
        }
    };

    Ok(Trajectory {
        samples,
        termination,
        scenario: *scn,
    })
}

fn crosses_cutoff(outcome: &Result<PolarState>, cutoff_rho: f64) -> bool {
    match outcome {
        Ok(n) => n.rho <= cutoff_rho,
        Err(Error::SingularRho { .. }) => true,
        Err(_) => false,
    }
}

/// Bisects the step `(0, h]` for the first sub-step that ends at or inside
/// the cutoff radius.
fn locate_cutoff<F>(s: &PolarState, h: f64, scn: &Scenario, law: F) -> (f64, PolarState)
where
    F: Fn(&PolarState) -> Result<ControlInput> + Copy,
{
    let (mut lo, mut hi) = (0.0, h);
    while hi - lo > scn.dt * CUTOFF_BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if crosses_cutoff(&rk4_step(s, mid, law), scn.cutoff_rho) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    match rk4_step(s, hi, law) {
        Ok(n) if n.rho >= 0.0 && n.is_finite() => (hi, n),
        _ => (lo, rk4_step(s, lo, law).unwrap_or(*s)),
    }
}

/// Runs each scenario independently; results are in input order and match
/// what [`integrate`] returns for the scenario alone.
pub fn batch_run(scenarios: &[Scenario]) -> Vec<Result<Trajectory>> {
    scenarios.par_iter().map(integrate).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control_laws::{DubinsGains, UnicycleGains};
    use approx::assert_abs_diff_eq;

    #[test]
    fn rhs_examples() {
        let r = rhs(
            &PolarState::new(1.0, 0.0, 0.0),
            &ControlInput::new(1.0, 0.0),
        )
        .unwrap();
        assert_eq!((r.rho, r.delta, r.gamma), (-1.0, 0.0, 0.0));
        let r = rhs(
            &PolarState::new(2.0, 0.0, FRAC_PI_2),
            &ControlInput::new(1.0, 0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(r.rho, 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(r.delta, 0.5);
        assert_abs_diff_eq!(r.gamma, 0.5);
        let r = rhs(
            &PolarState::new(1.0, 0.0, 0.0),
            &ControlInput::new(0.0, 1.0),
        )
        .unwrap();
        assert_eq!((r.rho, r.delta, r.gamma), (0.0, 0.0, -1.0));
        assert!(matches!(
            rhs(&PolarState::new(0.0, 0.0, 0.0), &ControlInput::ZERO),
            Err(Error::SingularRho { .. })
        ));
    }

    #[test]
    fn null_controller_is_an_equilibrium() {
        let s0 = PolarState::new(1.3, 2.0, -0.4);
        let mut s = s0;
        for _ in 0..1000 {
            s = rk4_step(&s, 0.01, |_| Ok(ControlInput::ZERO)).unwrap();
        }
        assert_eq!(s, s0);
    }

    #[test]
    fn scenario_validation() {
        let glofo = ControllerSpec::GloFo(UnicycleGains {
            k1: 1.0,
            k2: 3.0,
            k3: 2.0,
        });
        let ok = Scenario::new(PolarState::new(1.0, 0.0, 0.0), glofo);
        assert!(ok.validate().is_ok());
        assert!(ok.with_dt(0.0).validate().is_err());
        assert!(ok.with_dt(100.0).validate().is_err());
        assert!(ok.with_cutoff(1.0).validate().is_err());
        assert!(ok.with_stride(0).validate().is_err());

        let db = ControllerSpec::DeadbeatPower(DubinsGains {
            c1: 2.05,
            c2: 2.1,
            v: 0.5,
        });
        assert!(Scenario::new(PolarState::new(1.0, 0.0, 1.6), db)
            .validate()
            .is_err());
        let weak = ControllerSpec::DeadbeatPower(DubinsGains {
            c1: 1.0,
            c2: 2.1,
            v: 0.5,
        });
        assert!(Scenario::new(PolarState::new(1.0, 0.0, 0.1), weak)
            .validate()
            .is_err());
    }

    #[test]
    fn horizon_run_records_first_and_last_sample() {
        let glofo = ControllerSpec::GloFo(UnicycleGains {
            k1: 1.0,
            k2: 3.0,
            k3: 2.0,
        });
        let scn = Scenario::new(PolarState::new(1.0, 1.0, 0.5), glofo)
            .with_dt(0.01)
            .with_t_max(1.005)
            .with_stride(7)
            .with_cutoff(0.0);
        let traj = integrate(&scn).unwrap();
        assert_eq!(traj.termination, Termination::Horizon);
        assert_eq!(traj.first().polar, scn.initial);
        assert_eq!(traj.first().t, 0.0);
        assert_abs_diff_eq!(traj.last().t, 1.005, epsilon = 1e-12);
        assert!(traj.samples.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn cutoff_is_localized_and_switches_inputs_off() {
        let db = ControllerSpec::DeadbeatPower(DubinsGains {
            c1: 2.05,
            c2: 2.1,
            v: 0.5,
        });
        let scn = Scenario::new(PolarState::new(1.0, 0.0, -PI / 2.5), db).with_t_max(30.0);
        let traj = integrate(&scn).unwrap();
        assert_eq!(traj.termination, Termination::Cutoff);
        let last = traj.last();
        assert_eq!(last.input, ControlInput::ZERO);
        assert!(last.polar.rho <= scn.cutoff_rho);
        // bisection brackets the crossing to dt * 1e-6 of time, so rho overshoots by at most v times that
        assert!(scn.cutoff_rho - last.polar.rho <= 0.5 * scn.dt * 1e-6 * 1.01);
        assert!(traj.samples.iter().all(|s| s.polar.rho >= 0.0));
    }
}
