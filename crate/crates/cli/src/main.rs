//! opf: solve optimal path following problems from JSON configs, compare
//! solution methods, and run the independent certification oracles.
//!
//! Exit codes: 0 success/optimal, 2 infeasible problem or failed oracle
//! check, 1 anything else.

mod config;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use opf_core::oracle::{
    cutting_plane_min_time, dp_quantization_cell, dp_solve, mvc_curve, mvc_dominance_violation,
    phase_plane_solve,
};
use opf_core::profile::SpeedProfile;
use opf_core::solver::{scp_solve, solve, SolveError};
use opf_core::timing::{sample_trajectory, terminal_time};

use config::{Overrides, RunConfig};
use report::Method;

#[derive(Parser)]
#[command(
    name = "opf",
    version,
    about = "time-optimal path following along prescribed joint paths"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Override the grid segment count N
    #[arg(long, value_name = "N")]
    n: Option<usize>,
    /// Enable the config's jerk bounds (routes the solve through SCP)
    #[arg(long)]
    jerk: bool,
    /// Override the seed of a seeded-spline path
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing)
    #[arg(long, default_value = "opf-out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write trajectory, profile and summary files
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Solution ansatz: pwl | bspline
        #[arg(long)]
        method: Option<String>,
        /// B-spline degree
        #[arg(long)]
        degree: Option<usize>,
        /// B-spline control point count
        #[arg(long)]
        ctrl: Option<usize>,
        /// Trajectory sample step in seconds (default: terminal time / 512)
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Run several methods on identical inputs and tabulate the times
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated methods; the first is the reference
        #[arg(long, default_value = "min-time,pwl")]
        methods: String,
        /// Comma-separated grid sizes
        #[arg(long, default_value = "100,200", value_name = "N1,N2")]
        grid_sizes: String,
        /// Run methods one at a time for uncontended wall clocks
        #[arg(long)]
        sequential_timing: bool,
    },
    /// Certify a solve against the independent oracles
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        /// Quantization levels for the dynamic-programming oracle
        #[arg(long, default_value_t = 151)]
        levels: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = std::env::var("OPF_LOG")
        .map(|v| v != "0" && !v.is_empty())
        .unwrap_or(false);
    let outcome = match cli.command {
        Command::Solve {
            common,
            method,
            degree,
            ctrl,
            dt,
        } => cmd_solve(common, method, degree, ctrl, dt, verbose),
        Command::Compare {
            common,
            methods,
            grid_sizes,
            sequential_timing,
        } => cmd_compare(common, &methods, &grid_sizes, sequential_timing, verbose),
        Command::Oracle { common, levels } => cmd_oracle(common, levels, verbose),
    };
    match outcome {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load(common: &CommonArgs) -> Result<(RunConfig, Overrides), String> {
    let cfg = RunConfig::from_file(&common.config)?;
    let ov = Overrides {
        method: None,
        segments: common.n,
        degree: None,
        ctrl: None,
        jerk: common.jerk,
        seed: common.seed,
    };
    std::fs::create_dir_all(&common.out_dir)
        .map_err(|e| format!("cannot create {}: {e}", common.out_dir.display()))?;
    Ok((cfg, ov))
}

fn cmd_solve(
    common: CommonArgs,
    method: Option<String>,
    degree: Option<usize>,
    ctrl: Option<usize>,
    dt: Option<f64>,
    verbose: bool,
) -> Result<ExitCode, String> {
    let (cfg, mut ov) = load(&common)?;
    ov.method = method;
    ov.degree = degree;
    ov.ctrl = ctrl;
    let problem = cfg.to_problem(&ov)?;
    let started = Instant::now();
    let result = if problem.needs_scp() {
        scp_solve(&problem)
    } else {
        solve(&problem)
    };
    let t_comp = started.elapsed().as_secs_f64();
    let res = match result {
        Ok(res) => res,
        Err(SolveError::Infeasible(why)) => {
            eprintln!("infeasible: {why}");
            return Ok(ExitCode::from(2));
        }
        Err(SolveError::ScpNoFeasible {
            worst_violation,
            iterations,
        }) => {
            eprintln!(
                "infeasible: no SCP iterate within tolerance after {iterations} iterations \
                 (best violation {worst_violation:.3e})"
            );
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e.to_string()),
    };
    let t_t = terminal_time(&res.profile).map_err(|e| e.to_string())?;
    let step = dt.unwrap_or(t_t / 512.0);
    let traj = sample_trajectory(&res.profile, &problem.path, &problem.model, step)
        .map_err(|e| e.to_string())?;

    let dir = &common.out_dir;
    output::write_trajectory_csv(&dir.join("trajectory.csv"), &traj)?;
    output::write_profile_csv(&dir.join("profile.csv"), &problem, &res.profile)?;
    output::write_plot_data(dir, &problem, &res.profile)?;
    let summary = output::RunSummary {
        status: "optimal".to_string(),
        method: match &problem.mode {
            opf_core::solver::Mode::Pwl => "pwl".to_string(),
            opf_core::solver::Mode::BSpline { degree, ctrl, .. } => {
                format!("bspline(d={degree}, ctrl={ctrl})")
            }
        },
        grid_segments: problem.grid.segments(),
        objective: res.objective,
        terminal_time: t_t,
        scp_trace: res.trace.iter().map(Into::into).collect(),
    };
    output::write_summary(&dir.join("summary.json"), &summary)?;
    output::write_timing(&dir.join("timing.json"), t_comp)?;
    if verbose {
        eprintln!("trace: {:?}", res.trace);
    }
    println!(
        "optimal: objective {:.9}, terminal time {:.6} s, {} SCP iterations, outputs in {}",
        res.objective,
        t_t,
        res.trace.len(),
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(
    common: CommonArgs,
    methods: &str,
    grid_sizes: &str,
    sequential: bool,
    verbose: bool,
) -> Result<ExitCode, String> {
    let (cfg, ov) = load(&common)?;
    let methods: Vec<Method> = methods
        .split(',')
        .map(|s| Method::parse(s.trim()))
        .collect::<Result<_, _>>()?;
    if methods.is_empty() {
        return Err("need at least one method".into());
    }
    let grid_sizes: Vec<usize> = grid_sizes
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad grid size '{s}': {e}"))
        })
        .collect::<Result<_, _>>()?;
    let report = report::compare(&cfg, &ov, &methods, &grid_sizes, sequential);
    print!("{}", report.table());
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let path = common.out_dir.join("report.json");
    std::fs::write(&path, json + "\n").map_err(|e| format!("write {}: {e}", path.display()))?;
    if verbose {
        eprintln!("report written to {}", path.display());
    }
    let any_failed = report.rows.iter().any(|r| !r.ok);
    Ok(if any_failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_oracle(common: CommonArgs, levels: usize, verbose: bool) -> Result<ExitCode, String> {
    let (cfg, ov) = load(&common)?;
    let problem = cfg.to_problem(&ov)?;
    if problem.needs_scp() {
        return Err("oracle certification covers velocity/acceleration/torque problems".into());
    }
    let mut violations: Vec<String> = Vec::new();

    let res = match solve(&problem) {
        Ok(res) => res,
        Err(SolveError::Infeasible(why)) => {
            eprintln!("infeasible: {why}");
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e.to_string()),
    };
    let t_lp = terminal_time(&res.profile).map_err(|e| e.to_string())?;
    println!(
        "max-z solve: objective {:.9}, terminal time {t_lp:.6} s",
        res.objective
    );

    // MVC dominance at the constraint evaluation points
    let (viol, sigma) =
        mvc_dominance_violation(&problem, &res.profile).map_err(|e| e.to_string())?;
    report_check(
        &mut violations,
        viol <= 1e-8,
        format!("MVC dominance: worst excess {viol:.3e} at sigma = {sigma:.4}"),
    );
    if verbose {
        let curve = mvc_curve(&problem).map_err(|e| e.to_string())?;
        eprintln!(
            "mvc at nodes: {:?}",
            &curve.values[..curve.values.len().min(8)]
        );
    }

    // terminal-time agreement against the conventional oracles carries
    // meaning only once the grid resolves the profile; the discrete
    // optima genuinely differ on coarse grids
    let agreement_n = 50;
    if problem.grid.segments() < agreement_n {
        println!(
            "skip: terminal-time agreement checks need N >= {agreement_n} (configured N = {})",
            problem.grid.segments()
        );
    }
    // phase-plane agreement
    match (problem.grid.segments() >= agreement_n).then(|| phase_plane_solve(&problem)) {
        None => {}
        Some(outcome) => match outcome {
            Ok(pp) => {
                let t_pp = terminal_time(&SpeedProfile::Pwl(pp)).map_err(|e| e.to_string())?;
                let rel = (t_lp - t_pp).abs() / t_lp;
                report_check(
                    &mut violations,
                    rel <= 0.01,
                    format!(
                        "phase-plane terminal time {t_pp:.6} s ({:.4}% from max-z)",
                        100.0 * rel
                    ),
                );
            }
            Err(e) => violations.push(format!("phase-plane failed: {e}")),
        },
    }

    // conventional min-time agreement
    match (problem.grid.segments() >= agreement_n).then(|| cutting_plane_min_time(&problem)) {
        None => {}
        Some(outcome) => match outcome {
            Ok(ct) => {
                let t_ct = terminal_time(&SpeedProfile::Pwl(ct)).map_err(|e| e.to_string())?;
                let rel = (t_lp - t_ct).abs() / t_lp;
                report_check(
                    &mut violations,
                    t_ct <= t_lp + 1e-6 && rel <= 0.01,
                    format!(
                        "min-time terminal time {t_ct:.6} s ({:.4}% from max-z)",
                        100.0 * rel
                    ),
                );
            }
            Err(e) => violations.push(format!("cutting-plane failed: {e}")),
        },
    }

    // exhaustive DP sandwich on small grids
    if problem.grid.segments() <= 25 {
        match dp_solve(&problem, levels) {
            Ok((dp_obj, _)) => {
                let cell = dp_quantization_cell(&problem, levels).map_err(|e| e.to_string())?;
                let gap = (dp_obj - res.objective).abs();
                report_check(
                    &mut violations,
                    gap <= cell + 1e-7,
                    format!("LP-DP sandwich: |gap| {gap:.3e} vs quantization cell {cell:.3e}"),
                );
            }
            Err(e) => violations.push(format!("dp oracle failed: {e}")),
        }
    } else {
        println!(
            "skip: DP oracle needs N <= 25 (configured N = {})",
            problem.grid.segments()
        );
    }

    if violations.is_empty() {
        println!("all oracle checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        for v in &violations {
            eprintln!("VIOLATION: {v}");
        }
        Ok(ExitCode::from(2))
    }
}

fn report_check(violations: &mut Vec<String>, ok: bool, message: String) {
    if ok {
        println!("ok: {message}");
    } else {
        violations.push(message);
    }
}
