//! File emission: trajectory/profile CSVs, plot-ready two-column data and
//! the run summary. Everything written here is deterministic for a fixed
//! config and seed; wall-clock timing lives in its own file so the rest
//! can be compared byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use opf_core::profile::SpeedProfile;
use opf_core::solver::{OpfProblem, ScpIteration};
use opf_core::timing::Trajectory;

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), String> {
    let dof = traj.samples.first().map_or(0, |s| s.q.len());
    let mut out = String::new();
    out.push_str("t,sigma,z");
    for prefix in ["q", "qd", "qdd", "qddd", "tau"] {
        for i in 1..=dof {
            let _ = write!(out, ",{prefix}_{i}");
        }
    }
    out.push('\n');
    for s in &traj.samples {
        let _ = write!(out, "{},{},{}", s.t, s.sigma, s.z);
        for vec in [&s.q, &s.qd, &s.qdd, &s.qddd, &s.tau] {
            for v in vec.iter() {
                let _ = write!(out, ",{v}");
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| format!("write {}: {e}", path.display()))
}

/// sigma, z, z', z'' on a refined sampling of the grid.
pub fn write_profile_csv(
    path: &Path,
    problem: &OpfProblem,
    profile: &SpeedProfile,
) -> Result<(), String> {
    let mut out = String::from("sigma,z,zp,zpp\n");
    for sigma in problem.grid.refined_samples(10) {
        let (z, zp, zpp) = profile.eval(sigma);
        let _ = writeln!(out, "{sigma},{z},{zp},{zpp}");
    }
    std::fs::write(path, out).map_err(|e| format!("write {}: {e}", path.display()))
}

/// Plain two-column files, one per plotted quantity.
pub fn write_plot_data(
    dir: &Path,
    problem: &OpfProblem,
    profile: &SpeedProfile,
) -> Result<(), String> {
    for (name, pick) in [
        ("plot_z.dat", 0usize),
        ("plot_zp.dat", 1usize),
        ("plot_zpp.dat", 2usize),
    ] {
        let mut out = String::new();
        for sigma in problem.grid.refined_samples(10) {
            let v = profile.eval(sigma);
            let val = [v.0, v.1, v.2][pick];
            let _ = writeln!(out, "{sigma} {val}");
        }
        let path = dir.join(name);
        std::fs::write(&path, out).map_err(|e| format!("write {}: {e}", path.display()))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: String,
    pub method: String,
    pub grid_segments: usize,
    pub objective: f64,
    pub terminal_time: f64,
    pub scp_trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEntry {
    pub objective: f64,
    pub exact_violation: f64,
    pub trust_radius: f64,
}

impl From<&ScpIteration> for TraceEntry {
    fn from(it: &ScpIteration) -> Self {
        Self {
            objective: it.objective,
            exact_violation: it.exact_violation,
            trust_radius: it.trust_radius,
        }
    }
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<(), String> {
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    std::fs::write(path, text + "\n").map_err(|e| format!("write {}: {e}", path.display()))
}

/// Wall-clock data, isolated so the other artifacts stay byte-identical
/// across runs.
pub fn write_timing(path: &Path, seconds: f64) -> Result<(), String> {
    let text = format!("{{\n  \"t_comp_seconds\": {seconds}\n}}\n");
    std::fs::write(path, text).map_err(|e| format!("write {}: {e}", path.display()))
}
