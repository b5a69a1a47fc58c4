//! Cross-method agreement: the speed-maximizing LP against the exhaustive
//! DP, the phase-plane construction and the cutting-plane minimum-time
//! solver. These are the working-size versions; the acceptance suite runs
//! the full-size configurations.

use opf_core::oracle::{
    cutting_plane_min_time, dp_quantization_cell, dp_solve, mvc_curve, mvc_dominance_violation,
    phase_plane_solve,
};
use opf_core::problems::{agreement_problems, two_link_instance};
use opf_core::profile::SpeedProfile;
use opf_core::solver::solve;
use opf_core::timing::terminal_time;

#[test]
fn lp_dp_sandwich_on_seeded_two_link_instances() {
    for seed in 1..=5u64 {
        let mut p = two_link_instance(seed, 12);
        p.grid = opf_core::profile::Grid::uniform(12).unwrap();
        let lp = solve(&p).unwrap_or_else(|e| panic!("seed {seed} LP failed: {e}"));
        let (dp_obj, _) =
            dp_solve(&p, 151).unwrap_or_else(|e| panic!("seed {seed} DP failed: {e}"));
        let cell = dp_quantization_cell(&p, 151).unwrap();
        // two-sided sandwich: the DP quantizes (losing up to a cell) and
        // rounds rows by up to a cell (gaining up to about a cell)
        assert!(
            (dp_obj - lp.objective).abs() <= cell + 1e-7,
            "seed {seed}: |DP - LP| = {} above one cell {cell}",
            (dp_obj - lp.objective).abs()
        );
    }
}

#[test]
fn max_z_profile_never_exceeds_mvc_at_evaluation_points() {
    for (name, p) in agreement_problems(40) {
        let res = solve(&p).unwrap_or_else(|e| panic!("{name}: {e}"));
        let (viol, sigma) = mvc_dominance_violation(&p, &res.profile).unwrap();
        assert!(
            viol <= 1e-8,
            "{name}: MVC dominance broken by {viol:.3e} at sigma = {sigma}"
        );
    }
}

#[test]
fn corrupted_profile_fails_mvc_dominance() {
    let (_, p) = &agreement_problems(40)[3];
    let res = solve(p).unwrap();
    let SpeedProfile::Pwl(prof) = &res.profile else {
        unreachable!()
    };
    let mut vals = prof.values().to_vec();
    let peak = vals.iter().cloned().fold(0.0f64, f64::max);
    vals[20] += 3.0 * peak + 1.0;
    let bad = SpeedProfile::Pwl(
        opf_core::profile::SpeedProfilePwl::new(prof.grid().clone(), vals).unwrap(),
    );
    let (viol, _) = mvc_dominance_violation(p, &bad).unwrap();
    assert!(viol > 1.0, "fault injection went undetected: {viol}");
}

#[test]
fn phase_plane_profile_never_exceeds_mvc() {
    for (name, p) in agreement_problems(40) {
        let prof = phase_plane_solve(&p).unwrap_or_else(|e| panic!("{name}: {e}"));
        let curve = mvc_curve(&p).unwrap();
        for (&z, &cap) in prof.values().iter().zip(curve.values.iter()) {
            assert!(z <= cap + 1e-8, "{name}: phase-plane exceeds MVC");
        }
    }
}

#[test]
fn terminal_times_agree_across_methods_at_working_size() {
    // full-size agreement (1%) is an acceptance criterion; at N = 64 the
    // discretizations may differ a little more
    for (name, p) in agreement_problems(64) {
        let maxz = solve(&p).unwrap();
        let t_lp = terminal_time(&maxz.profile).unwrap();
        let pp = phase_plane_solve(&p).unwrap();
        let t_pp = terminal_time(&SpeedProfile::Pwl(pp)).unwrap();
        let rel = (t_lp - t_pp).abs() / t_lp;
        assert!(
            rel < 0.05,
            "{name}: t_lp = {t_lp}, t_pp = {t_pp} ({:.2}%)",
            100.0 * rel
        );
    }
}

#[test]
fn min_time_is_definitionally_no_slower() {
    for (name, p) in agreement_problems(48) {
        let maxz = solve(&p).unwrap();
        let t_maxz = terminal_time(&maxz.profile).unwrap();
        let mint = cutting_plane_min_time(&p).unwrap_or_else(|e| panic!("{name}: {e}"));
        let t_mint = terminal_time(&SpeedProfile::Pwl(mint)).unwrap();
        assert!(
            t_mint <= t_maxz + 1e-6,
            "{name}: min-time {t_mint} slower than max-z {t_maxz}"
        );
    }
}
