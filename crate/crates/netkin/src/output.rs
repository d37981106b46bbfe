//! CSV serialization of trajectories and the per-run manifest.
//!
//! Floats are written in Rust's shortest round-trip form, so identical runs
//! produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::control::ControlSignal;
use crate::dynamics::MEAN_FLOOR;
use crate::integrate::Trajectory;
use crate::mc::MomentEstimate;

/// Writes `content` through a temporary file and a rename, so readers never
/// observe a partial file and interrupted runs leave nothing behind.
pub fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)
}

fn push_float(out: &mut String, v: f64) {
    let _ = write!(out, "{v}");
}

fn header(n: usize, se_columns: bool) -> String {
    let mut h = String::from("t");
    for tag in ["rho", "mom", "m", "uchi", "uint"] {
        for i in 1..=n {
            let _ = write!(h, ",{tag}_{i}");
        }
    }
    h.push_str(",total_mass,total_mom");
    if se_columns {
        for tag in ["rho_se", "mom_se"] {
            for i in 1..=n {
                let _ = write!(h, ",{tag}_{i}");
            }
        }
    }
    h.push('\n');
    h
}

/// Serializes a macroscopic trajectory:
/// `t, rho_1..n, mom_1..n, m_1..n, uchi_1..n, uint_1..n, total_mass, total_mom`.
/// Undefined means are empty fields.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.states.first().map_or(0, |s| s.n());
    let mut out = header(n, false);
    for (idx, state) in traj.states.iter().enumerate() {
        push_float(&mut out, traj.times[idx]);
        for &r in &state.rho {
            out.push(',');
            push_float(&mut out, r);
        }
        for &w in &state.mom {
            out.push(',');
            push_float(&mut out, w);
        }
        for m in traj.means_at(idx) {
            out.push(',');
            if let Some(m) = m {
                push_float(&mut out, m);
            }
        }
        let sig = &traj.controls[idx];
        for &u in sig.u_chi.iter().chain(&sig.u_interaction) {
            out.push(',');
            push_float(&mut out, u);
        }
        out.push(',');
        push_float(&mut out, traj.diagnostics[idx].total_mass);
        out.push(',');
        push_float(&mut out, traj.diagnostics[idx].total_moment);
        out.push('\n');
    }
    out
}

/// Serializes Monte Carlo samples with the trajectory schema plus
/// `rho_se_1..n, mom_se_1..n` columns.
pub fn mc_csv(times: &[f64], estimates: &[MomentEstimate], controls: &[ControlSignal]) -> String {
    let n = estimates.first().map_or(0, |e| e.rho.len());
    let mut out = header(n, true);
    for (idx, est) in estimates.iter().enumerate() {
        push_float(&mut out, times[idx]);
        for &r in &est.rho {
            out.push(',');
            push_float(&mut out, r);
        }
        for &w in &est.mom {
            out.push(',');
            push_float(&mut out, w);
        }
        for (i, m) in est.mean.iter().enumerate() {
            out.push(',');
            match m {
                Some(m) if est.rho[i] >= MEAN_FLOOR => push_float(&mut out, *m),
                _ => {}
            }
        }
        let sig = &controls[idx];
        for &u in sig.u_chi.iter().chain(&sig.u_interaction) {
            out.push(',');
            push_float(&mut out, u);
        }
        let total_mass: f64 = est.rho.iter().sum();
        let total_mom: f64 = est.mom.iter().sum();
        out.push(',');
        push_float(&mut out, total_mass);
        out.push(',');
        push_float(&mut out, total_mom);
        for &se in est.rho_se.iter().chain(&est.mom_se) {
            out.push(',');
            push_float(&mut out, se);
        }
        out.push('\n');
    }
    out
}

/// Snapshot of a finished run: resolved inputs, outputs, and warnings.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub scenario_name: String,
    pub command: String,
    pub wall_ms: u128,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub chi_floor_overrides: usize,
    /// The scenario exactly as run, after overrides, in scenario format.
    pub resolved_scenario: String,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "command = {}", self.command);
        let _ = writeln!(out, "scenario = {}", self.scenario_name);
        let _ = writeln!(out, "wall_ms = {}", self.wall_ms);
        let _ = writeln!(out, "chi_floor_overrides = {}", self.chi_floor_overrides);
        for w in &self.warnings {
            let _ = writeln!(out, "warning = {w}");
        }
        for o in &self.outputs {
            let _ = writeln!(out, "output = {}", o.display());
        }
        let _ = writeln!(out, "\n# resolved scenario\n{}", self.resolved_scenario);
        out
    }

    /// Writes `<dir>/<scenario>_manifest.txt` atomically, after checking
    /// every listed output exists.
    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        for o in &self.outputs {
            if !o.exists() {
                return Err(io::Error::new(
                    io::ErrorKind::NotFound,
                    format!("listed output {} does not exist", o.display()),
                ));
            }
        }
        let path = dir.join(format!("{}_manifest.txt", self.scenario_name));
        write_atomic(&path, &self.render())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Uncontrolled;
    use crate::dynamics::{MacroState, ModelParams};
    use crate::integrate::{integrate, IntegrationConfig};
    use crate::scenario::five_node;

    #[test]
    fn csv_schema_and_masking() {
        let p = five_node::matrix();
        let params = ModelParams::exchange(vec![0.5; 5], vec![0.5; 5], 1.0, 1.0).unwrap();
        let y0 = MacroState::from_means(five_node::RHO0.to_vec(), &five_node::M0, 0.0).unwrap();
        let cfg = IntegrationConfig { dt: 0.01, t_end: 1.0, record_every: 50 };
        let traj = integrate(&p, &params, &Uncontrolled, &y0, &cfg).unwrap();
        let csv = trajectory_csv(&traj);
        let mut lines = csv.lines();
        let head = lines.next().unwrap();
        assert_eq!(head.split(',').count(), 1 + 5 * 5 + 2);
        assert!(head.starts_with("t,rho_1"));
        assert!(head.ends_with("total_mass,total_mom"));
        for line in lines {
            assert_eq!(line.split(',').count(), 1 + 5 * 5 + 2);
        }
        // A masked mean shows as an empty field.
        let mut empty = MacroState::new(vec![1.0, 0.0], vec![2.0, 0.0], 0.0).unwrap();
        empty.t = 0.0;
        let p2 = crate::graph::TransitionMatrix::identity(2);
        let params2 = ModelParams::exchange(vec![0.5; 2], vec![0.5; 2], 0.0, 1.0).unwrap();
        let cfg2 = IntegrationConfig { dt: 0.5, t_end: 0.5, record_every: 1 };
        let traj2 = integrate(&p2, &params2, &Uncontrolled, &empty, &cfg2).unwrap();
        let csv2 = trajectory_csv(&traj2);
        let row = csv2.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[5], "2"); // m_1
        assert_eq!(fields[6], ""); // m_2 masked
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_atomic(&path, "hello\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "hello\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn manifest_requires_existing_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run.csv");
        let manifest = RunManifest {
            scenario_name: "demo".into(),
            command: "simulate".into(),
            wall_ms: 1,
            outputs: vec![out.clone()],
            warnings: vec!["w".into()],
            chi_floor_overrides: 0,
            resolved_scenario: "name = \"demo\"".into(),
        };
        assert!(manifest.write(dir.path()).is_err());
        fs::write(&out, "x").unwrap();
        let path = manifest.write(dir.path()).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert!(text.contains("scenario = demo"));
        assert!(text.contains("warning = w"));
        assert!(text.contains(concat!("version = ", env!("CARGO_PKG_VERSION"))));
    }
}
