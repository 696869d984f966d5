//! Strict JSON scenario documents.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "rho0": 1.0, "delta0": 0.0, "gamma0": -1.2566370614359172,
//!   "dt": 0.001, "t_max": 60.0, "cutoff_rho": 0.01, "record_stride": 1,
//!   "controller": { "name": "deadbeat-power", "gains": { "c1": 2.05, "c2": 2.1, "v": 0.5 } }
//! }
//! ```
//!
//! `dt`, `t_max`, `cutoff_rho` and `record_stride` may be omitted. Any other
//! unknown key, including an unknown gain name, is an error.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use polarpark::simulator::{DEFAULT_CUTOFF_RHO, DEFAULT_DT, DEFAULT_T_MAX};
use polarpark::{ControllerSpec, DubinsGains, PolarState, Scenario, UnicycleGains};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

const UNICYCLE_GAINS: [&str; 3] = ["k1", "k2", "k3"];
const DUBINS_GAINS: [&str; 3] = ["c1", "c2", "v"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub rho0: f64,
    pub delta0: f64,
    pub gamma0: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff_rho: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    pub controller: ControllerEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerEntry {
    pub name: String,
    pub gains: BTreeMap<String, f64>,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}

fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF_RHO
}

fn default_stride() -> usize {
    1
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let file: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                file.schema_version
            ));
        }
        Ok(file)
    }

    pub fn to_scenario(&self) -> Result<Scenario, String> {
        let controller = self.controller.to_spec()?;
        let scn = Scenario {
            initial: PolarState::new(self.rho0, self.delta0, self.gamma0),
            controller,
            dt: self.dt,
            t_max: self.t_max,
            cutoff_rho: self.cutoff_rho,
            record_stride: self.record_stride,
        };
        scn.validate().map_err(|e| e.to_string())?;
        Ok(scn)
    }

    pub fn from_scenario(scn: &Scenario) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            rho0: scn.initial.rho,
            delta0: scn.initial.delta,
            gamma0: scn.initial.gamma,
            dt: scn.dt,
            t_max: scn.t_max,
            cutoff_rho: scn.cutoff_rho,
            record_stride: scn.record_stride,
            controller: ControllerEntry::from_spec(&scn.controller),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("scenario file serializes");
        text.push('\n');
        text
    }
}

impl ControllerEntry {
    pub fn to_spec(&self) -> Result<ControllerSpec, String> {
        let names: &[&str] = match self.name.as_str() {
            "glofo" | "bofo" => &UNICYCLE_GAINS,
            "deadbeat-power" | "deadbeat-exp" | "deadbeat-backstep" => &DUBINS_GAINS,
            other => return Err(format!("unknown controller `{other}`")),
        };
        if let Some(extra) = self.gains.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(format!(
                "unknown gain `{extra}` for {} (expected {})",
                self.name,
                names.join(", ")
            ));
        }
        let get = |k: &str| {
            self.gains
                .get(k)
                .copied()
                .ok_or_else(|| format!("missing gain `{k}` for {}", self.name))
        };
        let spec = match self.name.as_str() {
            "glofo" | "bofo" => {
                let g = UnicycleGains::new(get("k1")?, get("k2")?, get("k3")?);
                let g = g.map_err(|e| e.to_string())?;
                if self.name == "glofo" {
                    ControllerSpec::glofo(g)
                } else {
                    ControllerSpec::bofo(g)
                }
            }
            name => {
                let g = DubinsGains::new(get("c1")?, get("c2")?, get("v")?);
                let g = g.map_err(|e| e.to_string())?;
                match name {
                    "deadbeat-power" => ControllerSpec::deadbeat_power(g),
                    "deadbeat-exp" => ControllerSpec::deadbeat_exp(g),
                    _ => ControllerSpec::deadbeat_backstep(g),
                }
            }
        };
        spec.map_err(|e| e.to_string())
    }

    pub fn from_spec(spec: &ControllerSpec) -> Self {
        let gains = match (spec.unicycle_gains(), spec.dubins_gains()) {
            (Some(g), _) => BTreeMap::from([
                ("k1".to_owned(), g.k1),
                ("k2".to_owned(), g.k2),
                ("k3".to_owned(), g.k3),
            ]),
            (_, Some(g)) => BTreeMap::from([
                ("c1".to_owned(), g.c1),
                ("c2".to_owned(), g.c2),
                ("v".to_owned(), g.v),
            ]),
            _ => unreachable!("every controller carries gains"),
        };
        Self {
            name: spec.name().to_owned(),
            gains,
        }
    }
}

/// Reads and validates a scenario file.
pub fn load(path: &Path) -> CliResult<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config = |msg| CliError::Config {
        path: path.to_owned(),
        msg,
    };
    ScenarioFile::parse(&text)
        .map_err(config)?
        .to_scenario()
        .map_err(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RED: &str = r#"{
        "schema_version": 1,
        "rho0": 1.0, "delta0": 0.0, "gamma0": -1.2566370614359172,
        "cutoff_rho": 0.01,
        "controller": {"name": "deadbeat-power", "gains": {"c1": 2.05, "c2": 2.1, "v": 0.5}}
    }"#;

    #[test]
    fn parses_a_minimal_document() {
        let scn = ScenarioFile::parse(RED).unwrap().to_scenario().unwrap();
        assert_eq!(scn.dt, DEFAULT_DT);
        assert_eq!(scn.t_max, DEFAULT_T_MAX);
        assert_eq!(scn.record_stride, 1);
        assert_eq!(scn.controller.dubins_gains().unwrap().c2, 2.1);
        assert_eq!(scn.initial.gamma, -std::f64::consts::PI / 2.5);
    }

    #[test]
    fn round_trips_through_json() {
        let scn = ScenarioFile::parse(RED).unwrap().to_scenario().unwrap();
        let text = ScenarioFile::from_scenario(&scn).to_json();
        let back = ScenarioFile::parse(&text).unwrap().to_scenario().unwrap();
        assert_eq!(back, scn);
    }

    #[test]
    fn rejects_unknown_keys() {
        let top = RED.replace("\"cutoff_rho\"", "\"cutof_rho\"");
        assert!(ScenarioFile::parse(&top).unwrap_err().contains("cutof_rho"));
        let gain = RED.replace("\"c2\"", "\"c3\"");
        let err = ScenarioFile::parse(&gain)
            .unwrap()
            .to_scenario()
            .unwrap_err();
        assert!(err.contains("unknown gain `c3`"), "{err}");
    }

    #[test]
    fn rejects_missing_gains_and_bad_versions() {
        let missing = RED.replace(", \"v\": 0.5", "");
        let err = ScenarioFile::parse(&missing)
            .unwrap()
            .to_scenario()
            .unwrap_err();
        assert!(err.contains("missing gain `v`"));
        let version = RED.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(ScenarioFile::parse(&version).is_err());
        let name = RED.replace("deadbeat-power", "deadbeat");
        assert!(ScenarioFile::parse(&name).unwrap().to_scenario().is_err());
    }

    #[test]
    fn rejects_invalid_gains_and_states() {
        let weak = RED.replace("\"c1\": 2.05", "\"c1\": 1.5");
        assert!(ScenarioFile::parse(&weak).unwrap().to_scenario().is_err());
        let steep = RED.replace("-1.2566370614359172", "1.6");
        assert!(ScenarioFile::parse(&steep).unwrap().to_scenario().is_err());
    }
}
