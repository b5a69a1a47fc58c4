//! Acceptance suite: every release-gating property in one sequential
//! harness. Each criterion prints one pass/fail line; the test fails at
//! the end if any criterion failed. Run with
//! `cargo test -p opf-cli --test acceptance -- --nocapture` to see the
//! lines as they complete.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use opf_core::bspline::ScalarSpline;
use opf_core::lp::LpTolerances;
use opf_core::oracle::{cutting_plane_min_time, dp_quantization_cell, dp_solve, phase_plane_solve};
use opf_core::problems::{
    agreement_problems, path_a_prime_problem, two_link_instance, PATH_A_JERK,
};
use opf_core::profile::{Grid, SpeedProfile, SpeedProfilePwl};
use opf_core::projection::{exact_jerk, project_dynamics};
use opf_core::solver::{
    assemble_bspline, assemble_pwl, exact_violation, scp_solve, solve, EvalPoints, Mode,
};
use opf_core::timing::terminal_time;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Harness {
    failures: Vec<String>,
}

impl Harness {
    fn run(&mut self, id: usize, name: &str, f: impl FnOnce() -> Result<String, String>) {
        match f() {
            Ok(detail) => println!("[criterion {id:>2}] PASS  {name}: {detail}"),
            Err(why) => {
                println!("[criterion {id:>2}] FAIL  {name}: {why}");
                self.failures
                    .push(format!("criterion {id} ({name}): {why}"));
            }
        }
    }
}

#[test]
fn acceptance() {
    let mut h = Harness {
        failures: Vec::new(),
    };
    h.run(1, "analytic bang-bang", criterion_1);
    h.run(2, "projection consistency", criterion_2);
    h.run(3, "LP-vs-DP sandwich", criterion_3);
    h.run(4, "conventional-vs-presented agreement", criterion_4);
    h.run(5, "PWL vs B-spline method agreement", criterion_5);
    h.run(6, "SCP smooth-jerk feasibility", criterion_6);
    h.run(7, "computation-time character", criterion_7);
    h.run(8, "timing exactness", criterion_8);
    h.run(9, "degree-1 B-spline equals PWL", criterion_9);
    h.run(10, "byte determinism", criterion_10);
    assert!(
        h.failures.is_empty(),
        "failed criteria:\n{}",
        h.failures.join("\n")
    );
}

fn check(ok: bool, why: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why)
    }
}

/// 1-DOF linear path, |qdd| <= 1, rest-to-rest, N = 100: the PWL LP must
/// reproduce z = min(2 sigma, 2 (1 - sigma)) to 1e-6 per node with
/// terminal time 2 within 1e-3, in under a second.
fn criterion_1() -> Result<String, String> {
    let problem = opf_core::problems::triangular_1dof(100);
    let started = Instant::now();
    let res = solve(&problem).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed().as_secs_f64();
    let mut worst = 0.0f64;
    for (k, &z) in res.profile.decision_values().iter().enumerate() {
        let sigma = k as f64 / 100.0;
        let want = (2.0 * sigma).min(2.0 * (1.0 - sigma));
        worst = worst.max((z - want).abs());
    }
    let t_t = terminal_time(&res.profile).map_err(|e| e.to_string())?;
    check(
        worst <= 1e-6,
        format!("max node error {worst:.3e} above 1e-6"),
    )?;
    check(
        (t_t - 2.0).abs() <= 1e-3,
        format!("terminal time {t_t} not 2.000 +- 1e-3"),
    )?;
    check(elapsed < 1.0, format!("runtime {elapsed:.3}s not under 1s"))?;
    Ok(format!(
        "node error {worst:.2e}, t_T = {t_t:.6} s, solved in {elapsed:.3}s"
    ))
}

/// 200 random (model, sigma, z, z') tuples: the projected-coefficient
/// torque equals full inverse dynamics to 1e-9.
fn criterion_2() -> Result<String, String> {
    let models = [
        opf_core::RobotModel::new(
            opf_core::ModelKind::SingleRotor { inertia: 0.8 },
            vec![0.2],
            vec![0.15],
        )
        .unwrap(),
        opf_core::RobotModel::new(
            opf_core::ModelKind::TwoLinkPlanar {
                masses: [1.3, 0.7],
                lengths: [1.0, 0.85],
                gravity: 9.81,
            },
            vec![0.1, 0.05],
            vec![0.04, 0.08],
        )
        .unwrap(),
        opf_core::RobotModel::new(
            opf_core::ModelKind::ChainedDecoupled {
                inertias: vec![1.5, 0.6, 0.9],
            },
            vec![0.0, 0.2, 0.1],
            vec![0.3, 0.0, 0.2],
        )
        .unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(424242);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let model = &models[case % models.len()];
        let path = match model.dof() {
            1 => opf_core::JointPath::quintic_rest_to_rest(vec![-0.5], vec![1.2]).unwrap(),
            n => opf_core::problems::seeded_spline_path(n, 7, 1000 + (case % 3) as u64, 1.2),
        };
        let sigma: f64 = rng.random_range(0.0..=1.0);
        let z: f64 = rng.random_range(1e-6..4.0);
        let zp: f64 = rng.random_range(-10.0..10.0);
        let pd = project_dynamics(model, &path, sigma).map_err(|e| e.to_string())?;
        let pt = path.evaluate(sigma).map_err(|e| e.to_string())?;
        let qd = &pt.dq * z.sqrt();
        let qdd = &pt.ddq * z + &pt.dq * (0.5 * zp);
        let tau_full = model.inverse_dynamics(&pt.q, &qd, &qdd);
        let tau_proj = pd.torque(z, zp);
        worst = worst.max((tau_full - tau_proj).abs().max());
    }
    check(
        worst <= 1e-9,
        format!("worst identity error {worst:.3e} above 1e-9"),
    )?;
    Ok(format!("200 tuples, worst error {worst:.2e}"))
}

/// 10 seeded two-link instances, N <= 15, 151 levels: LP within one DP
/// quantization cell, all in under 30 seconds.
fn criterion_3() -> Result<String, String> {
    let started = Instant::now();
    let mut worst_ratio = 0.0f64;
    for seed in 1..=10u64 {
        let p = two_link_instance(seed, 14);
        let lp = solve(&p).map_err(|e| format!("seed {seed}: {e}"))?;
        let (dp_obj, _) = dp_solve(&p, 151).map_err(|e| format!("seed {seed}: {e}"))?;
        let cell = dp_quantization_cell(&p, 151).map_err(|e| e.to_string())?;
        let gap = (dp_obj - lp.objective).abs();
        check(
            gap <= cell + 1e-7,
            format!("seed {seed}: |LP - DP| = {gap:.3e} above one cell {cell:.3e}"),
        )?;
        worst_ratio = worst_ratio.max(gap / cell);
    }
    let elapsed = started.elapsed().as_secs_f64();
    check(elapsed < 30.0, format!("took {elapsed:.1}s, budget 30s"))?;
    Ok(format!(
        "10 instances, worst gap {worst_ratio:.2} cells, {elapsed:.1}s total"
    ))
}

/// The speed-maximizing LP agrees with the conventional oracles on all
/// five shipped problems: phase-plane and cutting-plane minimum-time
/// terminal times within 1%.
fn criterion_4() -> Result<String, String> {
    let mut worst = 0.0f64;
    for (name, p) in agreement_problems(200) {
        let maxz = solve(&p).map_err(|e| format!("{name}: {e}"))?;
        let t_lp = terminal_time(&maxz.profile).map_err(|e| e.to_string())?;
        let pp = phase_plane_solve(&p).map_err(|e| format!("{name}: {e}"))?;
        let t_pp = terminal_time(&SpeedProfile::Pwl(pp)).map_err(|e| e.to_string())?;
        let ct = cutting_plane_min_time(&p).map_err(|e| format!("{name}: {e}"))?;
        let t_ct = terminal_time(&SpeedProfile::Pwl(ct)).map_err(|e| e.to_string())?;
        let rel_pp = (t_lp - t_pp).abs() / t_lp;
        let rel_ct = (t_lp - t_ct).abs() / t_lp;
        check(
            rel_pp <= 0.01,
            format!("{name}: phase-plane differs {:.3}%", 100.0 * rel_pp),
        )?;
        check(
            rel_ct <= 0.01,
            format!("{name}: min-time differs {:.3}%", 100.0 * rel_ct),
        )?;
        worst = worst.max(rel_pp).max(rel_ct);
    }
    Ok(format!(
        "5 problems, worst relative difference {:.4}%",
        100.0 * worst
    ))
}

/// PWL (N = 100) and B-spline (d = 3, 61 control points) terminal times
/// agree within 1% on the shipped 6-DOF problem.
fn criterion_5() -> Result<String, String> {
    let r_pwl = solve(&path_a_prime_problem(100, Mode::Pwl, false)).map_err(|e| e.to_string())?;
    let t_pwl = terminal_time(&r_pwl.profile).map_err(|e| e.to_string())?;
    let r_bs = solve(&path_a_prime_problem(100, Mode::bspline(3, 61), false))
        .map_err(|e| e.to_string())?;
    let t_bs = terminal_time(&r_bs.profile).map_err(|e| e.to_string())?;
    let rel = (t_bs - t_pwl).abs() / t_pwl;
    check(
        rel <= 0.01,
        format!(
            "t_pwl {t_pwl:.5}, t_bs {t_bs:.5}: differ {:.3}%",
            100.0 * rel
        ),
    )?;
    Ok(format!(
        "t_pwl {t_pwl:.5} s vs t_bs {t_bs:.5} s ({:.3}%)",
        100.0 * rel
    ))
}

/// Jerk-limited B-spline SCP: bounds genuinely bind, the exact jerk stays
/// within bounds + 1e-6 on a 10x finer sampling, z through z'' are
/// continuous, and the loop converges within 30 iterations.
fn criterion_6() -> Result<String, String> {
    let p = path_a_prime_problem(100, Mode::bspline(3, 61), true);
    let res = scp_solve(&p).map_err(|e| e.to_string())?;
    check(
        res.trace.len() <= 30,
        format!("SCP used {} iterations, budget 30", res.trace.len()),
    )?;
    let fine = p.grid.refined_samples(10);
    let viol = exact_violation(&p, &res.profile, &fine).map_err(|e| e.to_string())?;
    check(
        viol <= 1e-6,
        format!("exact jerk violation {viol:.3e} above 1e-6"),
    )?;
    // activity: the jerk magnitude reaches its cap somewhere
    let mut peak = 0.0f64;
    for &sigma in &fine {
        let (z, zp, zpp) = res.profile.eval(sigma);
        let pt = p.path.evaluate(sigma).map_err(|e| e.to_string())?;
        peak = peak.max(exact_jerk(&pt, z, zp, zpp).abs().max());
    }
    let cap = PATH_A_JERK[0];
    check(
        peak >= 0.99 * cap,
        format!("jerk peak {peak:.2} never approaches the cap {cap}"),
    )?;
    let free = solve(&path_a_prime_problem(100, Mode::bspline(3, 61), false))
        .map_err(|e| e.to_string())?;
    check(
        res.objective < free.objective - 1e-9,
        format!(
            "objective {:.9} not strictly below jerk-free {:.9}",
            res.objective, free.objective
        ),
    )?;
    // continuity of z, z', z'' across interior knots (one-sided limits)
    let SpeedProfile::BSpline(bs) = &res.profile else {
        return Err("expected a B-spline profile".into());
    };
    let spline = ScalarSpline::new(bs.knots().clone(), bs.control_points().to_vec());
    let mut max_jump = 0.0f64;
    for t in bs.knots().interior_breakpoints() {
        let right = bs.knots().find_span(t);
        let left = (bs.knots().degree()..right)
            .rev()
            .find(|&sp| bs.knots().knots()[sp] < t)
            .unwrap_or(right);
        let l = spline.eval_derivs_in_span(left, t, 2);
        let r = spline.eval_derivs_in_span(right, t, 2);
        for k in 0..=2 {
            max_jump = max_jump.max((l[k] - r[k]).abs());
        }
    }
    check(
        max_jump <= 1e-8,
        format!("z''/z'/z jump {max_jump:.3e} at a knot"),
    )?;
    Ok(format!(
        "{} iterations, violation {viol:.1e}, jerk peak {:.1}% of cap, max z'' jump {max_jump:.1e}",
        res.trace.len(),
        100.0 * peak / cap
    ))
}

/// Adding smoothness must not blow up the computation: B-spline+SCP wall
/// time within 3x the pure PWL LP, and the pure LP solves in under 1 s.
/// Minima over repeated runs suppress scheduler noise.
fn criterion_7() -> Result<String, String> {
    let pwl_problem = path_a_prime_problem(100, Mode::Pwl, false);
    let scp_problem = path_a_prime_problem(100, Mode::bspline(3, 61), true);
    // warm-up (page cache, lazy allocations)
    let _ = solve(&pwl_problem).map_err(|e| e.to_string())?;
    let _ = scp_solve(&scp_problem).map_err(|e| e.to_string())?;
    let mut t_pwl = f64::INFINITY;
    let mut t_scp = f64::INFINITY;
    for _ in 0..5 {
        let s = Instant::now();
        let _ = solve(&pwl_problem).map_err(|e| e.to_string())?;
        t_pwl = t_pwl.min(s.elapsed().as_secs_f64());
        let s = Instant::now();
        let _ = scp_solve(&scp_problem).map_err(|e| e.to_string())?;
        t_scp = t_scp.min(s.elapsed().as_secs_f64());
    }
    check(t_pwl < 1.0, format!("pure LP took {t_pwl:.3}s, budget 1s"))?;
    check(
        t_scp <= 3.0 * t_pwl,
        format!(
            "B-spline+SCP {t_scp:.4}s vs 3x pure PWL {:.4}s",
            3.0 * t_pwl
        ),
    )?;
    Ok(format!(
        "pure PWL {:.1} ms, B-spline+SCP {:.1} ms (ratio {:.2})",
        1e3 * t_pwl,
        1e3 * t_scp,
        t_scp / t_pwl
    ))
}

/// PWL closed-form terminal times match adaptive quadrature to 1e-8 on 20
/// random positive profiles, including zero-speed endpoints.
fn criterion_8() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8080);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let n = rng.random_range(4..16usize);
        let grid = Grid::uniform(n).unwrap();
        let mut vals: Vec<f64> = (0..=n).map(|_| rng.random_range(0.05..5.0)).collect();
        if case % 2 == 0 {
            vals[0] = 0.0;
        }
        if case % 3 == 0 {
            vals[n] = 0.0;
        }
        let profile = SpeedProfile::Pwl(SpeedProfilePwl::new(grid, vals).unwrap());
        let exact = terminal_time(&profile).map_err(|e| e.to_string())?;
        // independent quadrature route: integrate 1 / sqrt(z) with the
        // endpoint substitution, using only profile evaluation
        let quad = quadrature_time(&profile);
        worst = worst.max((exact - quad).abs());
        check(
            (exact - quad).abs() <= 1e-8,
            format!("case {case}: closed form {exact:.12} vs quadrature {quad:.12}"),
        )?;
    }
    Ok(format!("20 profiles, worst disagreement {worst:.2e}"))
}

fn quadrature_time(profile: &SpeedProfile) -> f64 {
    let brk = profile.breakpoints();
    let mut acc = 0.0;
    for w in brk.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let g = |sig: f64, u: f64| {
            let z = profile.z(sig);
            if z <= 0.0 {
                2.0 / profile.eval(sig).1.abs().max(1e-300).sqrt()
            } else {
                2.0 * u / z.sqrt()
            }
        };
        acc +=
            opf_core::numeric::adaptive_simpson(0.0, (mid - a).sqrt(), 1e-11, |u| g(a + u * u, u));
        acc +=
            opf_core::numeric::adaptive_simpson(0.0, (b - mid).sqrt(), 1e-11, |v| g(b - v * v, v));
    }
    acc
}

/// With matching evaluation points, a degree-1 B-spline program equals the
/// PWL program: objectives agree to 1e-9 on five seeded instances.
fn criterion_9() -> Result<String, String> {
    let tols = LpTolerances::default();
    let mut worst = 0.0f64;
    for seed in [3u64, 8, 21, 34, 55] {
        let n = 12 + (seed as usize % 7) * 3;
        let mut pwl = two_link_instance(seed, n);
        pwl.grid = Grid::uniform(n).unwrap();
        let a = assemble_pwl(&pwl)
            .map_err(|e| e.to_string())?
            .solve(&tols)
            .map_err(|e| e.to_string())?;
        let mut bs = pwl.clone();
        bs.mode = Mode::BSpline {
            degree: 1,
            ctrl: n + 1,
            eval: EvalPoints::Midpoints,
        };
        let b = assemble_bspline(&bs)
            .map_err(|e| e.to_string())?
            .solve(&tols)
            .map_err(|e| e.to_string())?;
        let gap = (a.objective - b.objective).abs();
        check(
            gap <= 1e-9 * (1.0 + a.objective.abs()),
            format!("seed {seed}: objectives differ by {gap:.3e}"),
        )?;
        worst = worst.max(gap);
    }
    Ok(format!("5 instances, worst objective gap {worst:.2e}"))
}

/// Two identical CLI runs produce byte-identical artifacts (wall-clock
/// timing lives in its own file and is excluded).
fn criterion_10() -> Result<String, String> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/path_a_prime.json");
    let run = |dir: &PathBuf| -> Result<(), String> {
        let status = Command::new(env!("CARGO_BIN_EXE_opf"))
            .args(["solve", "--config"])
            .arg(&config)
            .args(["--n", "60", "--out-dir"])
            .arg(dir)
            .status()
            .map_err(|e| format!("spawn opf: {e}"))?;
        check(status.success(), format!("solve exited with {status}"))
    };
    let dir_a = std::env::temp_dir().join(format!("opf-acc-det-a-{}", std::process::id()));
    let dir_b = std::env::temp_dir().join(format!("opf-acc-det-b-{}", std::process::id()));
    for d in [&dir_a, &dir_b] {
        let _ = std::fs::remove_dir_all(d);
    }
    run(&dir_a)?;
    run(&dir_b)?;
    let files = [
        "trajectory.csv",
        "profile.csv",
        "summary.json",
        "plot_z.dat",
        "plot_zp.dat",
        "plot_zpp.dat",
    ];
    for f in files {
        let a = std::fs::read(dir_a.join(f)).map_err(|e| format!("read {f}: {e}"))?;
        let b = std::fs::read(dir_b.join(f)).map_err(|e| format!("read {f}: {e}"))?;
        check(a == b, format!("{f} differs between identical runs"))?;
    }
    Ok(format!(
        "{} artifacts byte-identical across two runs",
        files.len()
    ))
}
