//! Randomized stress for the simplex: structured programs with range
//! rows, equalities, free and fixed variables, solved cold and re-solved
//! warm through perturbation chains. Every claimed optimum is already
//! certified internally (primal residuals, dual feasibility, matching
//! objective); these tests assert the outer contract on top.

use opf_core::lp::{LinearProgram, LpStatus, LpTolerances};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn structured_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.random_range(3..20usize);
    let mut lp = LinearProgram::new(n);
    for j in 0..n {
        lp.set_objective_coeff(j, rng.random_range(-3.0..3.0));
        match rng.random_range(0..10u32) {
            // a few free variables
            0 => lp.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY),
            // a few fixed ones
            1 => {
                let v = rng.random_range(-1.0..1.0);
                lp.set_bounds(j, v, v);
            }
            _ => lp.set_bounds(j, rng.random_range(-4.0..0.0), rng.random_range(0.1..4.0)),
        }
    }
    // anchor point keeps most instances feasible
    let anchor: Vec<f64> = (0..n)
        .map(|j| {
            let (lo, hi) = lp.bounds(j);
            if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                0.0
            }
        })
        .collect();
    let rows = rng.random_range(2..60usize);
    for _ in 0..rows {
        let nnz = rng.random_range(1..=n.min(6));
        let mut coeffs = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            coeffs.push((rng.random_range(0..n), rng.random_range(-2.0..2.0)));
        }
        let at_anchor: f64 = coeffs.iter().map(|&(j, c)| c * anchor[j]).sum();
        match rng.random_range(0..8u32) {
            0 => lp.add_eq_row(coeffs, at_anchor),
            1 => lp.add_ge_row(coeffs, at_anchor - rng.random_range(0.0..2.0)),
            2 => lp.add_range_row(
                at_anchor - rng.random_range(0.1..2.0),
                coeffs,
                at_anchor + rng.random_range(0.1..2.0),
            ),
            _ => lp.add_le_row(coeffs, at_anchor + rng.random_range(0.0..2.0)),
        }
    }
    lp
}

#[test]
fn five_hundred_structured_instances() {
    let tols = LpTolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xF00D);
    let mut optimal = 0;
    let mut infeasible = 0;
    let mut unbounded = 0;
    for case in 0..500 {
        let lp = structured_lp(&mut rng);
        let sol = lp
            .solve(&tols)
            .unwrap_or_else(|e| panic!("case {case}: solver error {e}"));
        match sol.status {
            LpStatus::Optimal => {
                optimal += 1;
                let rep = lp.check_feasibility(&sol.x, 1e-9).unwrap();
                assert!(
                    rep.max_violation() <= 1e-7,
                    "case {case}: optimal point violates by {}",
                    rep.max_violation()
                );
            }
            LpStatus::Infeasible => infeasible += 1,
            LpStatus::Unbounded => unbounded += 1,
        }
    }
    // the generator anchors most instances; sanity-check the mix
    assert!(optimal > 300, "only {optimal} optimal of 500");
    println!("mix: {optimal} optimal, {infeasible} infeasible, {unbounded} unbounded");
}

#[test]
fn warm_restart_chains_agree_with_cold() {
    let tols = LpTolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xCAFE);
    for case in 0..60 {
        let mut lp = structured_lp(&mut rng);
        let Ok((first, mut snap)) = lp.solve_warm(&tols, None) else {
            continue;
        };
        if first.status != LpStatus::Optimal {
            continue;
        }
        // chain of bound/objective perturbations, warm each step
        for step in 0..5 {
            let n = lp.num_vars();
            let j = rng.random_range(0..n);
            lp.set_objective_coeff(j, rng.random_range(-3.0..3.0));
            let (lo, hi) = lp.bounds(j);
            if lo.is_finite() && hi.is_finite() && lo < hi {
                lp.set_bounds(
                    j,
                    lo - rng.random_range(0.0..0.3),
                    hi + rng.random_range(0.0..0.3),
                );
            }
            let (warm, next_snap) = lp
                .solve_warm(&tols, snap.as_ref())
                .unwrap_or_else(|e| panic!("case {case} step {step}: warm solve error {e}"));
            let (cold, _) = lp.solve_warm(&tols, None).unwrap();
            assert_eq!(
                warm.status, cold.status,
                "case {case} step {step}: status mismatch"
            );
            if warm.status == LpStatus::Optimal {
                assert!(
                    (warm.objective - cold.objective).abs() <= 1e-7 * (1.0 + cold.objective.abs()),
                    "case {case} step {step}: warm {} vs cold {}",
                    warm.objective,
                    cold.objective
                );
            }
            snap = next_snap;
        }
    }
}

#[test]
fn growing_row_sets_keep_warm_bases_valid() {
    // mirror of the SCP pattern: rows appended after a solve, snapshot reused
    let tols = LpTolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    for case in 0..40 {
        let mut lp = structured_lp(&mut rng);
        let Ok((first, mut snap)) = lp.solve_warm(&tols, None) else {
            continue;
        };
        if first.status != LpStatus::Optimal {
            continue;
        }
        for _ in 0..4 {
            let n = lp.num_vars();
            let nnz = rng.random_range(1..=n.min(4));
            let coeffs: Vec<(usize, f64)> = (0..nnz)
                .map(|_| (rng.random_range(0..n), rng.random_range(-1.5..1.5)))
                .collect();
            let at: f64 = coeffs.iter().map(|&(j, c)| c * first.x[j]).sum();
            lp.add_le_row(coeffs, at + rng.random_range(0.05..1.0));
            let (warm, next) = lp.solve_warm(&tols, snap.as_ref()).unwrap();
            let (cold, _) = lp.solve_warm(&tols, None).unwrap();
            assert_eq!(warm.status, cold.status, "case {case}");
            if warm.status == LpStatus::Optimal {
                assert!(
                    (warm.objective - cold.objective).abs() <= 1e-7 * (1.0 + cold.objective.abs()),
                    "case {case}: warm {} cold {}",
                    warm.objective,
                    cold.objective
                );
            }
            snap = next;
        }
    }
}
