//! Randomized spot checks of the Lyapunov certificates.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use polarpark::certificates::{
    bofo_cascade_residual, glofo_cascade_residual, vdot_bofo_analytic, vdot_bofo_numeric,
    vdot_glofo_analytic, vdot_glofo_numeric,
};
use polarpark::control_laws::{deadbeat_backstep_omega, deadbeat_power_omega};
use polarpark::{DubinsGains, PolarState, UnicycleGains};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RATE_REL_TOL: f64 = 1e-6;
pub const CASCADE_TOL: f64 = 1e-10;
pub const BACKSTEP_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest normalized error seen; below 1 means within tolerance.
    pub worst: f64,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "property={} pass={} cases={} failures={} worst={:e}",
            self.name,
            self.passed(),
            self.cases,
            self.failures,
            self.worst
        )
    }
}

struct Tally {
    name: &'static str,
    cases: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            worst: 0.0,
        }
    }

    /// Records one case; `ratio` is error over allowance, `ok` any extra condition.
    fn record(&mut self, ratio: f64, ok: bool) {
        self.cases += 1;
        if !(ratio <= 1.0) || !ok {
            self.failures += 1;
        }
        self.worst = if ratio.is_nan() {
            f64::INFINITY
        } else {
            self.worst.max(ratio)
        };
    }

    fn finish(self) -> PropertyResult {
        PropertyResult {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            worst: self.worst,
        }
    }
}

fn unicycle_gains(rng: &mut impl Rng) -> UnicycleGains {
    UnicycleGains::new(
        rng.gen_range(0.2..5.0),
        rng.gen_range(0.2..5.0),
        rng.gen_range(0.2..5.0),
    )
    .expect("positive gains")
}

fn dubins_gains(rng: &mut impl Rng) -> DubinsGains {
    DubinsGains::new(
        rng.gen_range(2.01..6.0),
        rng.gen_range(2.01..6.0),
        rng.gen_range(0.1..2.0),
    )
    .expect("gains above two")
}

fn state(rng: &mut impl Rng, rho_min: f64, gamma_max: f64) -> PolarState {
    PolarState::new(
        rng.gen_range(rho_min..=10.0),
        rng.gen_range(-3.0 * PI..=3.0 * PI),
        rng.gen_range(-gamma_max..=gamma_max),
    )
}

fn glofo_rate(rng: &mut impl Rng, cases: usize) -> PropertyResult {
    let mut tally = Tally::new("glofo-rate");
    for _ in 0..cases {
        let g = unicycle_gains(rng);
        let s = state(rng, 0.0, 3.0 * PI);
        let a = vdot_glofo_analytic(&s, &g);
        let n = vdot_glofo_numeric(&s, &g);
        tally.record((a - n).abs() / (RATE_REL_TOL * (1.0 + a.abs())), a < 0.0);
    }
    tally.finish()
}

fn bofo_rate(rng: &mut impl Rng, cases: usize) -> PropertyResult {
    let mut tally = Tally::new("bofo-rate");
    for _ in 0..cases {
        let g = unicycle_gains(rng);
        let s = state(rng, 0.0, PI - 1e-3);
        match (vdot_bofo_analytic(&s, &g), vdot_bofo_numeric(&s, &g)) {
            (Ok(a), Ok(n)) => {
                tally.record((a - n).abs() / (RATE_REL_TOL * (1.0 + a.abs())), a < 0.0)
            }
            _ => tally.record(f64::INFINITY, false),
        }
    }
    tally.finish()
}

fn cascade(rng: &mut impl Rng, cases: usize) -> PropertyResult {
    let mut tally = Tally::new("cascade");
    for _ in 0..cases {
        let g = unicycle_gains(rng);
        let s = state(rng, 1e-3, PI - 1e-3);
        for r in [
            glofo_cascade_residual(&s, &g),
            bofo_cascade_residual(&s, &g),
        ] {
            match r {
                Ok((rz, rg)) => tally.record(rz.abs().max(rg.abs()) / CASCADE_TOL, true),
                Err(_) => tally.record(f64::INFINITY, false),
            }
        }
    }
    tally.finish()
}

fn backstep(rng: &mut impl Rng, cases: usize) -> PropertyResult {
    let mut tally = Tally::new("backstep-forward");
    for _ in 0..cases {
        let g = dubins_gains(rng);
        let s = state(rng, 1e-2, FRAC_PI_2 - 1e-3);
        let fwd = deadbeat_power_omega(&s, &g);
        let bkst = deadbeat_backstep_omega(&s, &g);
        match (fwd, bkst) {
            (Ok(f), Ok(b)) => {
                let expected = g.v / s.rho * s.gamma.cos().powi(3) * s.delta;
                let scale = f.abs().max(b.abs()).max(expected.abs()).max(1.0);
                tally.record(
                    ((b - f) - expected).abs() / (BACKSTEP_REL_TOL * scale),
                    true,
                );
            }
            _ => tally.record(f64::INFINITY, false),
        }
    }
    tally.finish()
}

/// Runs every property on `cases` random draws from a seeded generator.
pub fn run_suite(seed: u64, cases: usize) -> Vec<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        glofo_rate(&mut rng, cases),
        bofo_rate(&mut rng, cases),
        cascade(&mut rng, cases),
        backstep(&mut rng, cases),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_is_reproducible() {
        let a = run_suite(7, 200);
        assert!(a.iter().all(PropertyResult::passed), "{a:?}");
        assert_eq!(a, run_suite(7, 200));
        assert_eq!(a[2].cases, 400);
    }

    #[test]
    fn tally_flags_nan_and_side_conditions() {
        let mut t = Tally::new("x");
        t.record(0.5, true);
        t.record(0.1, false);
        t.record(f64::NAN, true);
        let r = t.finish();
        assert_eq!(r.failures, 2);
        assert!(r.worst.is_infinite());
    }
}
