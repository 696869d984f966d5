//! Trajectory CSV files.
//!
//! Header: `t,x,y,theta,rho,delta,gamma,v,omega,V,zeta,B`. Numbers carry 17
//! significant digits so a file reads back to the exact `f64` values; `V`,
//! `zeta` and `B` are left empty where the active controller does not define
//! them.

use std::fs;
use std::io::Write;
use std::path::Path;

use polarpark::certificates::evaluate;
use polarpark::{
    CartesianState, ControlInput, PolarState, Sample, Scenario, Termination, Trajectory,
};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const HEADER: [&str; 12] = [
    "t", "x", "y", "theta", "rho", "delta", "gamma", "v", "omega", "V", "zeta", "B",
];

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Row {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub rho: f64,
    pub delta: f64,
    pub gamma: f64,
    pub v: f64,
    pub omega: f64,
    #[serde(rename = "V")]
    pub lyapunov: Option<f64>,
    pub zeta: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
}

impl Row {
    pub fn from_sample(s: &Sample) -> Self {
        Self {
            t: s.t,
            x: s.cartesian.x,
            y: s.cartesian.y,
            theta: s.cartesian.theta,
            rho: s.polar.rho,
            delta: s.polar.delta,
            gamma: s.polar.gamma,
            v: s.input.v,
            omega: s.input.omega,
            lyapunov: s.certificate.v,
            zeta: s.certificate.zeta,
            b: s.certificate.b,
        }
    }

    fn fields(&self) -> [Option<f64>; 12] {
        [
            Some(self.t),
            Some(self.x),
            Some(self.y),
            Some(self.theta),
            Some(self.rho),
            Some(self.delta),
            Some(self.gamma),
            Some(self.v),
            Some(self.omega),
            self.lyapunov,
            self.zeta,
            self.b,
        ]
    }

    /// Bit patterns of every field, with `None` mapped to an all-ones word.
    pub fn bits(&self) -> [u64; 12] {
        self.fields().map(|f| f.map_or(u64::MAX, f64::to_bits))
    }
}

pub fn rows(traj: &Trajectory) -> Vec<Row> {
    traj.samples.iter().map(Row::from_sample).collect()
}

fn format_value(x: Option<f64>) -> String {
    x.map_or_else(String::new, |x| format!("{x:.16e}"))
}

pub fn render(rows: &[Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(r.fields().map(format_value))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Parses CSV text. The header must match [`HEADER`] exactly and there must be
/// at least one data row.
pub fn parse(text: &str) -> Result<Vec<Row>, String> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(HEADER) {
        return Err(format!(
            "header must be `{}`, found `{}`",
            HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        ));
    }
    let rows = r
        .deserialize()
        .collect::<Result<Vec<Row>, _>>()
        .map_err(|e| e.to_string())?;
    if rows.is_empty() {
        return Err("no data rows".into());
    }
    Ok(rows)
}

pub fn read(path: &Path) -> CliResult<Vec<Row>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text).map_err(|msg| CliError::Csv {
        path: path.to_owned(),
        msg,
    })
}

/// Writes `contents` next to `path` and renames it into place, so readers see
/// either the old file or the complete new one.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// How a stored run ended. The cutoff sample is the only one written with
/// both inputs exactly zero at `rho` on the cutoff radius.
fn infer_termination(rows: &[Row], scn: &Scenario) -> Termination {
    let last = rows.last().expect("parse rejects empty traces");
    let stopped = last.v == 0.0 && last.omega == 0.0;
    if scn.cutoff_rho > 0.0 && stopped && last.rho <= scn.cutoff_rho + scn.dt {
        Termination::Cutoff
    } else if scn.t_max - last.t <= 1e-9 * scn.dt {
        Termination::Horizon
    } else {
        Termination::DomainExit
    }
}

/// Rebuilds a trajectory from stored rows. Stored values are used as-is;
/// certificate rates are re-evaluated at the stored states.
pub fn to_trajectory(rows: &[Row], scn: &Scenario) -> Result<Trajectory, String> {
    if rows.is_empty() {
        return Err("no data rows".into());
    }
    if let Some(w) = rows.windows(2).find(|w| !(w[1].t > w[0].t)) {
        return Err(format!("time is not increasing at t = {}", w[1].t));
    }
    let samples = rows
        .iter()
        .map(|r| {
            let polar = PolarState::new(r.rho, r.delta, r.gamma);
            let mut certificate = evaluate(&scn.controller, r.t, &polar);
            certificate.v = r.lyapunov;
            certificate.zeta = r.zeta;
            certificate.b = r.b;
            Sample {
                t: r.t,
                polar,
                cartesian: CartesianState::new(r.x, r.y, r.theta),
                input: ControlInput::new(r.v, r.omega),
                certificate,
            }
        })
        .collect();
    Ok(Trajectory {
        samples,
        termination: infer_termination(rows, scn),
        scenario: *scn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use polarpark::{integrate, ControllerSpec, DubinsGains, UnicycleGains};

    fn red() -> Scenario {
        let g = DubinsGains::new(2.05, 2.1, 0.5).unwrap();
        Scenario::new(
            PolarState::new(1.0, 0.0, -std::f64::consts::PI / 2.5),
            ControllerSpec::deadbeat_power(g).unwrap(),
        )
        .with_stride(50)
    }

    #[test]
    fn header_is_exact() {
        let text = render(&[]);
        assert_eq!(text, "t,x,y,theta,rho,delta,gamma,v,omega,V,zeta,B\n");
    }

    #[test]
    fn values_carry_seventeen_significant_digits() {
        assert_eq!(format_value(Some(0.1)), "1.0000000000000001e-1");
        assert_eq!(format_value(Some(-0.0)), "-0.0000000000000000e0");
        assert_eq!(format_value(None), "");
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let traj = integrate(&red()).unwrap();
        let original = rows(&traj);
        let back = parse(&render(&original)).unwrap();
        assert_eq!(back.len(), original.len());
        for (a, b) in original.iter().zip(&back) {
            assert_eq!(a.bits(), b.bits());
        }
    }

    #[test]
    fn undefined_quantities_are_empty_fields() {
        let g = UnicycleGains::new(1.0, 1.0, 1.0).unwrap();
        let scn = Scenario::new(
            PolarState::new(1.0, 1.0, 0.5),
            ControllerSpec::glofo(g).unwrap(),
        )
        .with_t_max(0.01);
        let text = render(&rows(&integrate(&scn).unwrap()));
        let first = text.lines().nth(1).unwrap();
        assert!(first.ends_with(','), "{first}");
        let back = parse(&text).unwrap();
        assert!(back.iter().all(|r| r.b.is_none() && r.lyapunov.is_some()));
    }

    #[test]
    fn rejects_bad_headers_and_empty_files() {
        assert!(parse("").is_err());
        assert!(parse("t,x,y,theta,rho,delta,gamma,v,omega,V,zeta,B\n").is_err());
        assert!(parse("t,x,y\n1,2,3\n").is_err());
        let bad = "t,x,y,theta,rho,delta,gamma,v,omega,V,zeta,B\n0,0,0,0,1,0,0,0,0,,,oops\n";
        assert!(parse(bad).is_err());
    }

    #[test]
    fn stored_run_reproduces_the_trajectory() {
        let scn = red();
        let traj = integrate(&scn).unwrap();
        let back = to_trajectory(&parse(&render(&rows(&traj))).unwrap(), &scn).unwrap();
        assert_eq!(back.termination, Termination::Cutoff);
        assert_eq!(back.samples.len(), traj.samples.len());
        for (a, b) in traj.samples.iter().zip(&back.samples) {
            assert_eq!(a.polar, b.polar);
            assert_eq!(a.input, b.input);
            assert_eq!(a.certificate, b.certificate);
        }
    }

    #[test]
    fn rejects_non_increasing_time() {
        let scn = red();
        let mut r = rows(&integrate(&scn).unwrap());
        r[2].t = r[1].t;
        assert!(to_trajectory(&r, &scn).is_err());
    }

    #[test]
    fn atomic_write_replaces_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("out.csv");
        write_atomic(&path, "a\n").unwrap();
        write_atomic(&path, "b\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "b\n");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
