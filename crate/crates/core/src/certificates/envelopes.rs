//! Comparison-lemma and finite-time envelope checks for the deadbeat laws.
//!
//! Every envelope is tested as `observed <= bound (1 + ENVELOPE_REL_TOL) + ENVELOPE_ABS_TOL`.
//! Margins are reported relative to that allowance, so a margin of 0 sits
//! exactly on the envelope and negative margins are violations.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::lyapunov::{b_magnitude, v_deadbeat_exp, v_deadbeat_power};
use crate::control_laws::{deadbeat_exp_unchecked, ControllerSpec, DubinsGains};
use crate::error::{Error, Result};
use crate::simulator::{Termination, Trajectory};

pub const ENVELOPE_REL_TOL: f64 = 1e-6;
pub const ENVELOPE_ABS_TOL: f64 = 1e-12;
/// `|omega|` at the cutoff must fall below this fraction of its peak.
pub const TERMINAL_OMEGA_FRACTION: f64 = 1e-3;

fn allowance(bound: f64) -> f64 {
    bound * (1.0 + ENVELOPE_REL_TOL) + ENVELOPE_ABS_TOL
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    pub pass: bool,
    /// Largest `V - envelope`, clamped at zero.
    pub max_violation: f64,
    /// Largest `V / envelope` over samples with a positive envelope.
    pub worst_ratio: f64,
    pub worst_index: usize,
}

fn lemma_check<E>(samples: &[(f64, f64)], envelope: E) -> Result<LemmaCheck>
where
    E: Fn(f64, f64, f64, f64) -> f64,
{
    let &(rho0, v0) = samples.first().ok_or(Error::EmptyTrace)?;
    let mut out = LemmaCheck {
        pass: true,
        max_violation: 0.0,
        worst_ratio: 0.0,
        worst_index: 0,
    };
    for (i, &(rho, v)) in samples.iter().enumerate() {
        let env = envelope(rho0, v0, rho, v);
        if !(v <= allowance(env)) {
            out.pass = false;
        }
        out.max_violation = out.max_violation.max(v - env);
        if env > 0.0 && v / env > out.worst_ratio {
            out.worst_ratio = v / env;
            out.worst_index = i;
        }
    }
    Ok(out)
}

/// `dV/drho >= a V / rho` integrates to `V(rho) <= V(rho0) (rho / rho0)^a`.
/// `samples` are `(rho, V)` pairs in order of decreasing `rho`.
pub fn check_lemma1_power(samples: &[(f64, f64)], a: f64) -> Result<LemmaCheck> {
    lemma_check(samples, |rho0, v0, rho, _| v0 * (rho / rho0).powf(a))
}

/// `dV/drho >= a V / rho^2` integrates to `V(rho) <= V(rho0) exp(a (1/rho0 - 1/rho))`.
pub fn check_lemma1_exp(samples: &[(f64, f64)], a: f64) -> Result<LemmaCheck> {
    lemma_check(samples, |rho0, v0, rho, _| {
        v0 * (a * (1.0 / rho0 - 1.0 / rho)).exp()
    })
}

fn stepwise_check<E>(samples: &[(f64, f64)], rel_tol: f64, envelope: E) -> Result<LemmaCheck>
where
    E: Fn(f64, f64, f64) -> f64,
{
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut out = LemmaCheck {
        pass: true,
        max_violation: 0.0,
        worst_ratio: 0.0,
        worst_index: 0,
    };
    for (i, w) in samples.windows(2).enumerate() {
        let ((rho_a, v_a), (rho_b, v_b)) = (w[0], w[1]);
        let env = envelope(rho_a, v_a, rho_b);
        if !(v_b <= env * (1.0 + rel_tol) + f64::MIN_POSITIVE) {
            out.pass = false;
        }
        out.max_violation = out.max_violation.max(v_b - env);
        if env > 0.0 && v_b / env > out.worst_ratio {
            out.worst_ratio = v_b / env;
            out.worst_index = i + 1;
        }
    }
    Ok(out)
}

/// Finite-difference form of `dV/drho >= a V / rho` between consecutive
/// samples: `V_{i+1} <= V_i (rho_{i+1} / rho_i)^a`. Exact for any spacing
/// whenever the differential inequality holds.
pub fn check_comparison_power(samples: &[(f64, f64)], a: f64, rel_tol: f64) -> Result<LemmaCheck> {
    stepwise_check(samples, rel_tol, |rho_a, v_a, rho_b| {
        v_a * (rho_b / rho_a).powf(a)
    })
}

/// Finite-difference form of `dV/drho >= a V / rho^2`.
pub fn check_comparison_exp(samples: &[(f64, f64)], a: f64, rel_tol: f64) -> Result<LemmaCheck> {
    stepwise_check(samples, rel_tol, |rho_a, v_a, rho_b| {
        v_a * (a * (1.0 / rho_a - 1.0 / rho_b)).exp()
    })
}

/// Checks that a sequence never increases by more than `rel_tol * max(|x_i|, floor)`
/// per step. Returns the worst normalized increase and its index.
pub fn check_nonincreasing(values: &[f64], rel_tol: f64, floor: f64) -> (bool, f64, usize) {
    let mut worst = f64::NEG_INFINITY;
    let mut at = 0;
    for (i, w) in values.windows(2).enumerate() {
        let inc = (w[1] - w[0]) / w[0].abs().max(floor);
        if inc > worst {
            worst = inc;
            at = i + 1;
        }
    }
    (worst <= rel_tol || values.len() < 2, worst, at)
}

/// Settling-time bound of the power-law deadbeat controller,
/// `t1 = (rho0 / v) sqrt(1 + 2 c1 c2 B0^2)`.
pub fn t1_thm3(rho0: f64, b0: f64, g: &DubinsGains) -> f64 {
    rho0 / g.v * (1.0 + 2.0 * g.c1 * g.c2 * b0 * b0).sqrt()
}

/// Settling-time bound of the exponential deadbeat controller for a given
/// growth constant `n1_exp_beta1 = N1 e^{-beta1}`.
pub fn t1_thm4(rho0: f64, b0: f64, n1_exp_beta1: f64, g: &DubinsGains) -> f64 {
    rho0 / g.v * (1.0 + n1_exp_beta1 * b0 * b0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    /// `rho(t) <= rho0 (1 - t/t1)`.
    RhoLinear,
    /// `B^2(t) <= 2 c1 c2 (1 - t/t1)^c B0^2`.
    BPower,
    /// `B^2(t) <= 2 c1 (1 - t/t1)^c B0^2`, the tighter prefactor.
    BPowerTight,
    /// `|omega(t)| <= (v/rho0)(1 + c1 + c2 + c1 c2) sqrt(2 c1 c2) (1 - t/t1)^(c/2 - 1) B0`.
    OmegaPower,
    /// `V(rho) <= V(rho0) (rho/rho0)^c`.
    VPower,
    /// `V(rho) <= V(rho0) exp(c (1/rho0 - 1/rho))`.
    VExp,
    /// Negative least-squares slope of `ln B^2` against `1 / (1 - t/t1)`.
    BDecaySlope,
    /// `|omega|` at the cutoff state below `TERMINAL_OMEGA_FRACTION` of its peak.
    OmegaTerminal,
}

impl EnvelopeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::RhoLinear => "rho_linear",
            Self::BPower => "b_power",
            Self::BPowerTight => "b_power_tight",
            Self::OmegaPower => "omega_power",
            Self::VPower => "v_power",
            Self::VExp => "v_exp",
            Self::BDecaySlope => "b_decay_slope",
            Self::OmegaTerminal => "omega_terminal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub kind: EnvelopeKind,
    /// Informational checks are reported but do not affect the verdict.
    pub enforced: bool,
    pub pass: bool,
    pub worst_margin: f64,
    /// `NaN` when the check is not tied to a single instant.
    pub worst_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Thm3,
    Thm4,
}

impl Suite {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Thm3 => "thm3",
            Self::Thm4 => "thm4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub suite: Suite,
    pub t1: f64,
    pub params: BTreeMap<&'static str, f64>,
    pub checks: Vec<EnvelopeCheck>,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.enforced).all(|c| c.pass)
    }

    pub fn get(&self, kind: EnvelopeKind) -> Option<&EnvelopeCheck> {
        self.checks.iter().find(|c| c.kind == kind)
    }
}

impl fmt::Display for EnvelopeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite={}", self.suite.as_str())?;
        writeln!(f, "pass={}", self.passed())?;
        writeln!(f, "t1={:e}", self.t1)?;
        for (k, v) in &self.params {
            writeln!(f, "param.{k}={v:e}")?;
        }
        for c in &self.checks {
            writeln!(
                f,
                "kind={} pass={} worst_margin={:e} worst_time={:e} enforced={}",
                c.kind.as_str(),
                c.pass,
                c.worst_margin,
                c.worst_time,
                c.enforced
            )?;
        }
        Ok(())
    }
}

struct Margin {
    kind: EnvelopeKind,
    enforced: bool,
    worst: Option<(f64, f64)>,
}

impl Margin {
    fn new(kind: EnvelopeKind, enforced: bool) -> Self {
        Self {
            kind,
            enforced,
            worst: None,
        }
    }

    fn observe(&mut self, t: f64, observed: f64, bound: f64) {
        let allowed = allowance(bound);
        let m = if observed.is_nan() {
            f64::NEG_INFINITY
        } else {
            (allowed - observed) / allowed
        };
        if self.worst.is_none_or(|(w, _)| m < w) {
            self.worst = Some((m, t));
        }
    }

    fn finish(self) -> EnvelopeCheck {
        let (worst_margin, worst_time) = self.worst.unwrap_or((1.0, f64::NAN));
        EnvelopeCheck {
            kind: self.kind,
            enforced: self.enforced,
            pass: worst_margin >= 0.0,
            worst_margin,
            worst_time,
        }
    }
}

fn lemma_to_check(
    kind: EnvelopeKind,
    samples: &[(f64, f64, f64)],
    lemma: LemmaCheck,
) -> EnvelopeCheck {
    let worst_time = samples.get(lemma.worst_index).map_or(f64::NAN, |s| s.0);
    EnvelopeCheck {
        kind,
        enforced: true,
        pass: lemma.pass,
        worst_margin: 1.0 - lemma.worst_ratio * (1.0 - ENVELOPE_REL_TOL),
        worst_time,
    }
}

fn expect_controller(traj: &Trajectory, expected: &'static str) -> Result<()> {
    let found = traj.scenario.controller.name();
    if found != expected {
        return Err(Error::WrongController { expected, found });
    }
    Ok(())
}

/// Initial `rho0` and `B0` of a deadbeat trajectory.
fn initial_magnitudes(traj: &Trajectory) -> Result<(f64, f64)> {
    let first = traj.samples.first().ok_or(Error::EmptyTrace)?;
    let b0 = b_magnitude(&first.polar).ok_or(Error::GammaOutOfRange {
        gamma: first.polar.gamma,
    })?;
    Ok((first.polar.rho, b0))
}

/// Checks the finite-time envelopes of the power-law deadbeat controller on
/// every sample before the cutoff.
pub fn check_thm3_envelopes(traj: &Trajectory, g: &DubinsGains) -> Result<EnvelopeReport> {
    expect_controller(traj, "deadbeat-power")?;
    let (rho0, b0) = initial_magnitudes(traj)?;
    let t1 = t1_thm3(rho0, b0, g);
    let c = g.c_min();
    let b0_sq = b0 * b0;
    let omega_scale =
        g.v / rho0 * (1.0 + g.c1 + g.c2 + g.c1 * g.c2) * (2.0 * g.c1 * g.c2).sqrt() * b0;

    let mut rho_env = Margin::new(EnvelopeKind::RhoLinear, true);
    let mut b_env = Margin::new(EnvelopeKind::BPower, true);
    let mut b_tight = Margin::new(EnvelopeKind::BPowerTight, false);
    let mut omega_env = Margin::new(EnvelopeKind::OmegaPower, true);
    let mut lyap = Vec::new();

    for s in traj.active_samples().iter().filter(|s| s.t < t1) {
        let frac = 1.0 - s.t / t1;
        rho_env.observe(s.t, s.polar.rho, rho0 * frac);
        let b_sq = b_magnitude(&s.polar).map_or(f64::NAN, |b| b * b);
        b_env.observe(s.t, b_sq, 2.0 * g.c1 * g.c2 * frac.powf(c) * b0_sq);
        b_tight.observe(s.t, b_sq, 2.0 * g.c1 * frac.powf(c) * b0_sq);
        omega_env.observe(
            s.t,
            s.input.omega.abs(),
            omega_scale * frac.powf(0.5 * c - 1.0),
        );
        lyap.push((
            s.t,
            s.polar.rho,
            v_deadbeat_power(&s.polar, g).unwrap_or(f64::NAN),
        ));
    }

    let pairs: Vec<_> = lyap.iter().map(|&(_, rho, v)| (rho, v)).collect();
    let v_check = lemma_to_check(EnvelopeKind::VPower, &lyap, check_lemma1_power(&pairs, c)?);

    Ok(EnvelopeReport {
        suite: Suite::Thm3,
        t1,
        params: BTreeMap::from([
            ("rho0", rho0),
            ("b0", b0),
            ("c_min", c),
            ("c1", g.c1),
            ("c2", g.c2),
            ("v", g.v),
        ]),
        checks: vec![
            rho_env.finish(),
            b_env.finish(),
            omega_env.finish(),
            v_check,
            b_tight.finish(),
        ],
    })
}

/// Smallest growth constant `N1 e^{-beta1}` consistent with the trajectory:
/// `max(1, sup_t B^2(t) / B0^2)`. Any admissible constant is at least this
/// large, and with it `tan^2(gamma) <= N1 e^{-beta1} B0^2` holds along the run.
pub fn thm4_growth_constant(traj: &Trajectory) -> Result<f64> {
    let (_, b0) = initial_magnitudes(traj)?;
    if b0 == 0.0 {
        return Ok(1.0);
    }
    let peak = traj
        .active_samples()
        .iter()
        .filter_map(|s| b_magnitude(&s.polar))
        .fold(0.0f64, f64::max);
    Ok((peak * peak / (b0 * b0)).max(1.0))
}

/// Least-squares slope of `y` against `x`.
pub fn regression_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Checks the exponential deadbeat controller with the growth constant from
/// [`thm4_growth_constant`].
pub fn check_thm4_envelopes(traj: &Trajectory, g: &DubinsGains) -> Result<EnvelopeReport> {
    expect_controller(traj, "deadbeat-exp")?;
    let k = thm4_growth_constant(traj)?;
    check_thm4_envelopes_with(traj, g, k)
}

/// Checks the exponential deadbeat controller for a given `N1 e^{-beta1}`.
///
/// The decay constants of this controller are only known to exist, so the
/// `B` bound is checked through its shape: `ln B^2` must fall off linearly in
/// `1 / (1 - t/t1)` (negative fitted slope), and `|omega|` must have decayed
/// to a small fraction of its peak by the cutoff.
pub fn check_thm4_envelopes_with(
    traj: &Trajectory,
    g: &DubinsGains,
    n1_exp_beta1: f64,
) -> Result<EnvelopeReport> {
    expect_controller(traj, "deadbeat-exp")?;
    let (rho0, b0) = initial_magnitudes(traj)?;
    let t1 = t1_thm4(rho0, b0, n1_exp_beta1, g);
    let c = g.c_min();

    let mut rho_env = Margin::new(EnvelopeKind::RhoLinear, true);
    let mut lyap = Vec::new();
    let mut decay = Vec::new();
    let mut omega_peak = 0.0f64;
    for s in traj.active_samples().iter().filter(|s| s.t < t1) {
        let frac = 1.0 - s.t / t1;
        rho_env.observe(s.t, s.polar.rho, rho0 * frac);
        lyap.push((
            s.t,
            s.polar.rho,
            v_deadbeat_exp(&s.polar, g).unwrap_or(f64::NAN),
        ));
        if let Some(b) = b_magnitude(&s.polar) {
            let ln_b_sq = (b * b).ln();
            if ln_b_sq.is_finite() {
                decay.push((1.0 / frac, ln_b_sq));
            }
        }
        omega_peak = omega_peak.max(s.input.omega.abs());
    }

    let slope = regression_slope(&decay);
    let slope_check = match (b0 == 0.0, slope) {
        (true, _) => EnvelopeCheck {
            kind: EnvelopeKind::BDecaySlope,
            enforced: true,
            pass: true,
            worst_margin: 0.0,
            worst_time: f64::NAN,
        },
        (false, Some(m)) => EnvelopeCheck {
            kind: EnvelopeKind::BDecaySlope,
            enforced: true,
            pass: m < 0.0,
            worst_margin: -m,
            worst_time: f64::NAN,
        },
        (false, None) => EnvelopeCheck {
            kind: EnvelopeKind::BDecaySlope,
            enforced: true,
            pass: false,
            worst_margin: f64::NEG_INFINITY,
            worst_time: f64::NAN,
        },
    };

    let terminal = match (traj.termination, traj.samples.last()) {
        (Termination::Cutoff, Some(last)) => {
            let w = deadbeat_exp_unchecked(&last.polar, g).map_or(f64::INFINITY, f64::abs);
            let peak = omega_peak.max(w);
            let limit = TERMINAL_OMEGA_FRACTION * peak;
            let (pass, margin) = if peak == 0.0 {
                (true, 1.0)
            } else {
                (w < limit, 1.0 - w / limit)
            };
            EnvelopeCheck {
                kind: EnvelopeKind::OmegaTerminal,
                enforced: true,
                pass,
                worst_margin: margin,
                worst_time: last.t,
            }
        }
        _ => EnvelopeCheck {
            kind: EnvelopeKind::OmegaTerminal,
            enforced: true,
            pass: false,
            worst_margin: f64::NEG_INFINITY,
            worst_time: f64::NAN,
        },
    };

    let pairs: Vec<_> = lyap.iter().map(|&(_, rho, v)| (rho, v)).collect();
    let v_check = lemma_to_check(EnvelopeKind::VExp, &lyap, check_lemma1_exp(&pairs, c)?);

    let mut params = BTreeMap::from([
        ("rho0", rho0),
        ("b0", b0),
        ("c_min", c),
        ("c1", g.c1),
        ("c2", g.c2),
        ("v", g.v),
        ("n1_exp_beta1", n1_exp_beta1),
        ("omega_peak", omega_peak),
    ]);
    if let Some(m) = slope {
        params.insert("beta1_fit", -m);
    }

    Ok(EnvelopeReport {
        suite: Suite::Thm4,
        t1,
        params,
        checks: vec![rho_env.finish(), slope_check, terminal, v_check],
    })
}

/// Dispatches on the trajectory's controller.
pub fn check_envelopes(traj: &Trajectory, suite: Suite) -> Result<EnvelopeReport> {
    match (suite, &traj.scenario.controller) {
        (Suite::Thm3, ControllerSpec::DeadbeatPower(g)) => check_thm3_envelopes(traj, g),
        (Suite::Thm4, ControllerSpec::DeadbeatExp(g)) => check_thm4_envelopes(traj, g),
        (Suite::Thm3, other) => Err(Error::WrongController {
            expected: "deadbeat-power",
            found: other.name(),
        }),
        (Suite::Thm4, other) => Err(Error::WrongController {
            expected: "deadbeat-exp",
            found: other.name(),
        }),
    }
}
