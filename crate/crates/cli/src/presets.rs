//! Built-in scenarios reproducing the published simulations.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use polarpark::{ControllerSpec, DubinsGains, PolarState, Scenario, UnicycleGains};

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub scenarios: Vec<Scenario>,
}

/// Offset that keeps grid poses strictly inside `|gamma| < pi`.
pub const FIG2_GAMMA_OFFSET: f64 = 0.05;

pub fn fig2_bofo_gains() -> UnicycleGains {
    UnicycleGains::new(1.0, 3.0, 2.0).expect("valid gains")
}

pub fn fig3_gains() -> DubinsGains {
    DubinsGains::new(2.05, 2.1, 0.5).expect("valid gains")
}

pub fn fig4_gains() -> DubinsGains {
    DubinsGains::new(0.7, 1.3, 0.5).expect("valid gains")
}

pub const FIG3_RED: PolarState = PolarState::new(1.0, 0.0, -PI / 2.5);
pub const FIG3_BLUE: PolarState = PolarState::new(1.0, -FRAC_PI_2, -PI / 2.5);
pub const FIG3_CYAN: PolarState = PolarState::new(1.0, PI, 0.0);

pub fn fig2_bofo_initial_conditions() -> Vec<PolarState> {
    let edge = PI - FIG2_GAMMA_OFFSET;
    vec![
        PolarState::new(1.0, 0.0, edge),
        PolarState::new(1.0, FRAC_PI_2, -edge),
        PolarState::new(1.0, PI, edge),
        PolarState::new(1.0, -FRAC_PI_2, FRAC_PI_2),
        PolarState::new(1.0, FRAC_PI_4, 0.0),
    ]
}

fn unicycle(ic: PolarState, spec: ControllerSpec) -> Scenario {
    Scenario::new(ic, spec)
        .with_cutoff(0.0)
        .with_t_max(60.0)
        .with_stride(10)
}

/// All presets, sorted by name.
pub fn all() -> Vec<Preset> {
    let bofo = ControllerSpec::bofo(fig2_bofo_gains()).expect("valid gains");
    let power = ControllerSpec::deadbeat_power(fig3_gains()).expect("valid gains");
    let exp = ControllerSpec::deadbeat_exp(fig4_gains()).expect("valid gains");
    let glofo = ControllerSpec::glofo(UnicycleGains::new(1.0, 1.0, 1.0).expect("valid gains"))
        .expect("valid gains");

    let mut presets = vec![
        Preset {
            name: "fig2-bofo",
            summary: "BoFo, k=(1,3,2), five poses incl. |gamma0| = pi - 0.05",
            scenarios: fig2_bofo_initial_conditions()
                .into_iter()
                .map(|ic| unicycle(ic, bofo))
                .collect(),
        },
        Preset {
            name: "fig3-blue",
            summary: "power-law deadbeat, c1=2.05 c2=2.1 v=0.5, [1, -pi/2, -pi/2.5]",
            scenarios: vec![Scenario::new(FIG3_BLUE, power)],
        },
        Preset {
            name: "fig3-cyan",
            summary: "power-law deadbeat, c1=2.05 c2=2.1 v=0.5, [1, pi, 0]",
            scenarios: vec![Scenario::new(FIG3_CYAN, power)],
        },
        Preset {
            name: "fig3-red",
            summary: "power-law deadbeat, c1=2.05 c2=2.1 v=0.5, [1, 0, -pi/2.5]",
            scenarios: vec![Scenario::new(FIG3_RED, power)],
        },
        Preset {
            name: "fig4",
            summary: "exponential deadbeat, c1=0.7 c2=1.3 v=0.5, [1, 0, -pi/2.5]",
            scenarios: vec![Scenario::new(FIG3_RED, exp)],
        },
        Preset {
            name: "glofo-default",
            summary: "GloFo, k=(1,1,1), [1, pi, 0]",
            scenarios: vec![unicycle(FIG3_CYAN, glofo)],
        },
    ];
    presets.sort_by_key(|p| p.name);
    presets
}

pub fn find(name: &str) -> Option<Preset> {
    all().into_iter().find(|p| p.name == name)
}

/// One line per preset: name, scenario count, summary.
pub fn listing() -> String {
    all()
        .iter()
        .map(|p| format!("{}\t{}\t{}\n", p.name, p.scenarios.len(), p.summary))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use polarpark::simulator::DEFAULT_CUTOFF_RHO;

    #[test]
    fn listing_is_sorted_and_stable() {
        let names: Vec<_> = all().iter().map(|p| p.name).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        assert_eq!(names, sorted);
        assert_eq!(listing(), listing());
        assert!(listing().contains("fig3-red"));
        assert!(listing().contains("fig4"));
    }

    #[test]
    fn every_preset_scenario_is_valid() {
        for p in all() {
            assert!(!p.scenarios.is_empty());
            for s in &p.scenarios {
                s.validate().unwrap();
            }
        }
    }

    #[test]
    fn deadbeat_presets_carry_the_published_parameters() {
        let cases = [
            (
                "fig3-red",
                [1.0, 0.0, -PI / 2.5],
                [2.05, 2.1, 0.5],
                "deadbeat-power",
            ),
            (
                "fig3-blue",
                [1.0, -PI / 2.0, -PI / 2.5],
                [2.05, 2.1, 0.5],
                "deadbeat-power",
            ),
            (
                "fig3-cyan",
                [1.0, PI, 0.0],
                [2.05, 2.1, 0.5],
                "deadbeat-power",
            ),
            (
                "fig4",
                [1.0, 0.0, -PI / 2.5],
                [0.7, 1.3, 0.5],
                "deadbeat-exp",
            ),
        ];
        for (name, ic, gains, law) in cases {
            let p = find(name).unwrap();
            assert_eq!(p.scenarios.len(), 1);
            let s = p.scenarios[0];
            assert_eq!(
                [s.initial.rho, s.initial.delta, s.initial.gamma],
                ic,
                "{name}"
            );
            let g = s.controller.dubins_gains().unwrap();
            assert_eq!([g.c1, g.c2, g.v], gains, "{name}");
            assert_eq!(s.controller.name(), law);
            assert_eq!(s.cutoff_rho, 0.01);
            assert_eq!(s.cutoff_rho, DEFAULT_CUTOFF_RHO);
        }
    }

    #[test]
    fn bofo_grid_uses_the_figure_gains() {
        let p = find("fig2-bofo").unwrap();
        for s in &p.scenarios {
            let g = s.controller.unicycle_gains().unwrap();
            assert_eq!([g.k1, g.k2, g.k3], [1.0, 3.0, 2.0]);
            assert!(s.initial.gamma.abs() < PI);
        }
        assert!(find("fig5").is_none());
    }
}
