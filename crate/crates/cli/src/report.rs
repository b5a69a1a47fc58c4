//! Method comparison: run several solvers on identical inputs and report
//! terminal times, wall-clock times and relative differences against a
//! designated reference method (the first one listed).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use opf_core::oracle::{cutting_plane_min_time, phase_plane_solve};
use opf_core::profile::SpeedProfile;
use opf_core::solver::{scp_solve, solve, Mode, OpfProblem};
use opf_core::timing::terminal_time;

use crate::config::{Overrides, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pwl,
    Bspline,
    PhasePlane,
    MinTime,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "pwl" => Ok(Method::Pwl),
            "bspline" => Ok(Method::Bspline),
            "phase-plane" => Ok(Method::PhasePlane),
            "min-time" => Ok(Method::MinTime),
            other => Err(format!(
                "unknown method '{other}' (pwl | bspline | phase-plane | min-time)"
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Pwl => "pwl",
            Method::Bspline => "bspline",
            Method::PhasePlane => "phase-plane",
            Method::MinTime => "min-time",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub grid_segments: usize,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub terminal_time: f64,
    pub objective: f64,
    pub t_comp_seconds: f64,
    /// 100 (ref - this) / ref; negative numbers reflect a loss in time
    pub p_terminal_time: f64,
    pub p_t_comp: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub reference: String,
    pub rows: Vec<MethodResult>,
}

fn run_method(
    config: &RunConfig,
    base: &Overrides,
    method: Method,
    segments: usize,
) -> (Result<(f64, f64), String>, f64) {
    let mut ov = base.clone();
    ov.segments = Some(segments);
    ov.method = Some(match method {
        Method::Bspline => "bspline".to_string(),
        // the oracle methods run on the PWL discretization
        _ => "pwl".to_string(),
    });
    let started = Instant::now();
    let outcome = (|| -> Result<(f64, f64), String> {
        let mut problem: OpfProblem = config.to_problem(&ov)?;
        if matches!(method, Method::PhasePlane | Method::MinTime) {
            problem.mode = Mode::Pwl;
            problem.bounds.jerk = None;
        }
        match method {
            Method::Pwl | Method::Bspline => {
                let res = if problem.needs_scp() {
                    scp_solve(&problem)
                } else {
                    solve(&problem)
                }
                .map_err(|e| e.to_string())?;
                let t = terminal_time(&res.profile).map_err(|e| e.to_string())?;
                Ok((t, res.objective))
            }
            Method::PhasePlane => {
                let prof = phase_plane_solve(&problem).map_err(|e| e.to_string())?;
                let profile = SpeedProfile::Pwl(prof);
                let t = terminal_time(&profile).map_err(|e| e.to_string())?;
                Ok((t, speed_integral(&problem, &profile)))
            }
            Method::MinTime => {
                let prof = cutting_plane_min_time(&problem).map_err(|e| e.to_string())?;
                let profile = SpeedProfile::Pwl(prof);
                let t = terminal_time(&profile).map_err(|e| e.to_string())?;
                Ok((t, speed_integral(&problem, &profile)))
            }
        }
    })();
    (outcome, started.elapsed().as_secs_f64())
}

fn speed_integral(problem: &OpfProblem, profile: &SpeedProfile) -> f64 {
    let vals = profile.decision_values();
    let mut acc = 0.0;
    for k in 0..problem.grid.segments() {
        acc += 0.5 * (vals[k] + vals[k + 1]) * problem.grid.delta(k);
    }
    acc
}

/// Run `methods` on identical inputs for each grid size. The first method
/// is the reference for the relative differences. With `sequential` the
/// methods run one at a time so wall clocks are uncontended; otherwise
/// they run concurrently.
pub fn compare(
    config: &RunConfig,
    base: &Overrides,
    methods: &[Method],
    grid_sizes: &[usize],
    sequential: bool,
) -> ExperimentReport {
    let mut rows = Vec::new();
    for &n in grid_sizes {
        let outcomes: Vec<(Result<(f64, f64), String>, f64)> = if sequential {
            methods
                .iter()
                .map(|&m| run_method(config, base, m, n))
                .collect()
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = methods
                    .iter()
                    .map(|&m| scope.spawn(move || run_method(config, base, m, n)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("method thread"))
                    .collect()
            })
        };
        let reference = outcomes[0].clone();
        for (method, (outcome, t_comp)) in methods.iter().zip(outcomes) {
            let (ok, error, (t_t, objective)) = match outcome {
                Ok(pair) => (true, None, pair),
                Err(e) => (false, Some(e), (f64::NAN, f64::NAN)),
            };
            let (p_tt, p_tc) = match &reference.0 {
                Ok((ref_t, _)) if ok => (
                    100.0 * (ref_t - t_t) / ref_t,
                    100.0 * (reference.1 - t_comp) / reference.1,
                ),
                _ => (f64::NAN, f64::NAN),
            };
            rows.push(MethodResult {
                method: method.name().to_string(),
                grid_segments: n,
                ok,
                error,
                terminal_time: t_t,
                objective,
                t_comp_seconds: t_comp,
                p_terminal_time: p_tt,
                p_t_comp: p_tc,
            });
        }
    }
    ExperimentReport {
        reference: methods[0].name().to_string(),
        rows,
    }
}

impl ExperimentReport {
    /// Plain-text table, one block per grid size.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<6} {:<12} {:>12} {:>12} {:>9} {:>9}\n",
            "N", "method", "t_T [s]", "t_comp [s]", "p_tT %", "p_tcomp %"
        ));
        for row in &self.rows {
            if row.ok {
                out.push_str(&format!(
                    "{:<6} {:<12} {:>12.4} {:>12.4} {:>9.3} {:>9.3}\n",
                    row.grid_segments,
                    row.method,
                    row.terminal_time,
                    row.t_comp_seconds,
                    row.p_terminal_time,
                    row.p_t_comp,
                ));
            } else {
                out.push_str(&format!(
                    "{:<6} {:<12} failed: {}\n",
                    row.grid_segments,
                    row.method,
                    row.error.as_deref().unwrap_or("unknown")
                ));
            }
        }
        out
    }
}
