//! Independent certification machinery: the maximum velocity curve,
//! classic phase-plane time-optimal integration, an exhaustive dynamic
//! program on quantized profiles, and a cutting-plane minimizer of the
//! conventional discrete time objective.
//!
//! Everything here exists to cross-check the LP/SCP solvers through a
//! different computational route; none of it shares solution paths with
//! them beyond the projected constraint rows.

use crate::lp::{LinearProgram, LpStatus, LpTolerances};
use crate::profile::{Grid, SpeedProfilePwl};
use crate::projection::{acceleration_rows, velocity_rows, ProjectionError, Relation};
use crate::solver::{assemble_pure, OpfProblem, SolveError};

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    /// Constraints admit no speed at all at this sigma.
    InfeasibleAt {
        sigma: f64,
    },
    /// Boundary speeds cannot be connected below the MVC.
    BoundaryInfeasible {
        detail: String,
    },
    /// Jerk bounds / viscous friction are outside the classic method's scope.
    UnsupportedConstraints,
    /// dp_solve input caps: N <= 25, z_levels <= 200.
    DpTooLarge {
        n: usize,
        levels: usize,
    },
    DpInfeasible,
    CutPlaneStalled {
        iterations: usize,
        gap: f64,
    },
    Projection(ProjectionError),
    Solve(String),
}

impl std::fmt::Display for OracleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleError::InfeasibleAt { sigma } => {
                write!(f, "no feasible speed at sigma = {sigma}")
            }
            OracleError::BoundaryInfeasible { detail } => {
                write!(f, "boundary infeasible: {detail}")
            }
            OracleError::UnsupportedConstraints => {
                write!(f, "phase-plane/cutting-plane oracles cover velocity/acceleration/torque constraints only")
            }
            OracleError::DpTooLarge { n, levels } => {
                write!(
                    f,
                    "dp_solve limited to N <= 25 and <= 200 levels, got N = {n}, levels = {levels}"
                )
            }
            OracleError::DpInfeasible => write!(f, "no feasible quantized profile"),
            OracleError::CutPlaneStalled { iterations, gap } => {
                write!(
                    f,
                    "cutting plane gap {gap:.3e} after {iterations} iterations"
                )
            }
            OracleError::Projection(e) => write!(f, "{e}"),
            OracleError::Solve(s) => write!(f, "{s}"),
        }
    }
}

impl std::error::Error for OracleError {}

impl From<ProjectionError> for OracleError {
    fn from(e: ProjectionError) -> Self {
        OracleError::Projection(e)
    }
}

impl From<SolveError> for OracleError {
    fn from(e: SolveError) -> Self {
        OracleError::Solve(e.to_string())
    }
}

const MVC_UNBOUNDED_CAP: f64 = 1e12;

/// Sampled maximum velocity curve. Values of `MVC_UNBOUNDED_CAP` and above
/// mean "no finite cap".
#[derive(Debug, Clone, PartialEq)]
pub struct MvcCurve {
    pub sigmas: Vec<f64>,
    pub values: Vec<f64>,
}

/// Affine-in-(z, z') constraint rows at one sigma, with the separate
/// velocity cap.
struct PointRows {
    /// (alpha, beta, gamma, is_le): alpha z' + beta z + gamma (<= | >=) 0
    rows: Vec<(f64, f64, f64, bool)>,
    z_cap: f64,
}

fn point_rows(problem: &OpfProblem, sigma: f64) -> Result<PointRows, OracleError> {
    let mut rows = Vec::new();
    let mut z_cap = f64::INFINITY;
    if let Some(vb) = &problem.bounds.velocity {
        for row in velocity_rows(&problem.path, sigma, vb)? {
            // z <= cap
            z_cap = z_cap.min(-row.constant / row.coeff_z);
        }
    }
    if let Some(ab) = &problem.bounds.acceleration {
        for row in acceleration_rows(&problem.path, sigma, ab)? {
            rows.push((
                row.coeff_zp,
                row.coeff_z,
                row.constant,
                row.relation == Relation::Le,
            ));
        }
    }
    if let Some(tb) = &problem.bounds.torque {
        for row in crate::solver::torque_rows_without_viscous(problem, sigma, tb)? {
            rows.push((
                row.coeff_zp,
                row.coeff_z,
                row.constant,
                row.relation == Relation::Le,
            ));
        }
    }
    Ok(PointRows { rows, z_cap })
}

impl PointRows {
    /// Feasible z' interval at fixed z, or None when empty.
    fn zp_interval(&self, z: f64) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for &(alpha, beta, gamma, is_le) in &self.rows {
            let rhs = -(beta * z + gamma);
            if alpha.abs() < 1e-14 {
                // pure test on z
                let ok = if is_le { rhs >= -1e-11 } else { rhs <= 1e-11 };
                if !ok {
                    return None;
                }
                continue;
            }
            let bound = rhs / alpha;
            let upper = is_le == (alpha > 0.0);
            if upper {
                hi = hi.min(bound);
            } else {
                lo = lo.max(bound);
            }
        }
        if lo > hi + 1e-12 {
            None
        } else {
            Some((lo, hi))
        }
    }

    fn feasible(&self, z: f64) -> bool {
        z <= self.z_cap + 1e-12 && self.zp_interval(z).is_some()
    }
}

/// Largest z at `sigma` such that the velocity caps hold and the
/// acceleration/torque system still admits some z'. Infinity when nothing
/// caps the speed.
pub fn mvc(problem: &OpfProblem, sigma: f64) -> Result<f64, OracleError> {
    let pr = point_rows(problem, sigma)?;
    if !pr.feasible(0.0) {
        return Err(OracleError::InfeasibleAt { sigma });
    }
    // grow an upper bracket
    let mut hi = 1.0;
    while pr.feasible(hi) {
        hi *= 2.0;
        if hi >= MVC_UNBOUNDED_CAP {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        if pr.feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// MVC sampled on the problem grid.
pub fn mvc_curve(problem: &OpfProblem) -> Result<MvcCurve, OracleError> {
    let sigmas: Vec<f64> = problem.grid.nodes().to_vec();
    let mut values = Vec::with_capacity(sigmas.len());
    for &s in &sigmas {
        values.push(mvc(problem, s)?.min(MVC_UNBOUNDED_CAP));
    }
    Ok(MvcCurve { sigmas, values })
}

fn require_classic_scope(problem: &OpfProblem) -> Result<(), OracleError> {
    if problem.bounds.jerk.is_some() || problem.model.has_viscous() {
        return Err(OracleError::UnsupportedConstraints);
    }
    Ok(())
}

/// Worst amount by which `profile` exceeds the speed ceilings of the MVC,
/// with each constraint family checked at its own enforcement points:
/// velocity caps at the grid nodes, acceleration/torque consistency at the
/// mode's row evaluation points (for node-evaluated B-splines both checks
/// coincide with the full pointwise MVC at the nodes).
///
/// A positive return beyond the LP tolerance means the profile cannot have
/// come from a feasible solve. Returns (violation, sigma of the worst
/// offender).
pub fn mvc_dominance_violation(
    problem: &OpfProblem,
    profile: &crate::profile::SpeedProfile,
) -> Result<(f64, f64), OracleError> {
    use crate::solver::{EvalPoints, Mode};
    let eval_points: Vec<f64> = match &problem.mode {
        Mode::Pwl
        | Mode::BSpline {
            eval: EvalPoints::Midpoints,
            ..
        } => problem.grid.midpoints(),
        Mode::BSpline {
            eval: EvalPoints::Nodes,
            ..
        } => problem.grid.nodes().to_vec(),
    };
    let mut worst = (f64::NEG_INFINITY, 0.0);
    for &sigma in &eval_points {
        let cap = consistency_cap(problem, sigma)?;
        let v = profile.z(sigma) - cap;
        if v > worst.0 {
            worst = (v, sigma);
        }
    }
    for &sigma in problem.grid.nodes() {
        let cap = point_rows(problem, sigma)?.z_cap;
        let v = profile.z(sigma) - cap;
        if v > worst.0 {
            worst = (v, sigma);
        }
    }
    Ok((worst.0.max(0.0), worst.1))
}

/// Largest z at `sigma` for which the acceleration/torque system still
/// admits some z', ignoring the velocity caps.
fn consistency_cap(problem: &OpfProblem, sigma: f64) -> Result<f64, OracleError> {
    let mut pr = point_rows(problem, sigma)?;
    pr.z_cap = f64::INFINITY;
    if !pr.feasible(0.0) {
        return Err(OracleError::InfeasibleAt { sigma });
    }
    let mut hi = 1.0;
    while pr.feasible(hi) {
        hi *= 2.0;
        if hi >= MVC_UNBOUNDED_CAP {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        if pr.feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Classic time-optimal phase-plane construction: forward integration from
/// z(0) with maximal feasible z', backward integration from z(1) with
/// minimal feasible z', both clipped at the MVC; the profile is the
/// pointwise minimum.
///
/// Integration is fixed-step RK4 on the problem grid, with substeps whose
/// stage states are projected onto [0, mvc(sigma)]. The projection keeps
/// the integrator sane where constraints go vacuous (for example sigma
/// where every q' component vanishes), in which case the extremal field
/// has no finite slope and the profile simply rides the MVC.
pub fn phase_plane_solve(problem: &OpfProblem) -> Result<SpeedProfilePwl, OracleError> {
    require_classic_scope(problem)?;
    let grid = &problem.grid;
    let n = grid.segments();
    const SUB: usize = 8;

    // MVC memoized on the substep stage lattice (16 points per segment)
    let mut mvc_cache: Vec<f64> = Vec::with_capacity(16 * n + 1);
    for k in 0..n {
        let (a, d) = (grid.nodes()[k], grid.delta(k));
        for m in 0..(2 * SUB) {
            mvc_cache.push(mvc(problem, a + d * m as f64 / (2 * SUB) as f64)?);
        }
    }
    mvc_cache.push(mvc(problem, 1.0)?);
    let cap_at = |k: usize, m: usize| -> f64 { mvc_cache[(16 * k + m).min(16 * n)] };

    let slope = |sigma: f64, z: f64, maximal: bool| -> Result<f64, OracleError> {
        let pr = point_rows(problem, sigma)?;
        match pr.zp_interval(z.max(0.0)) {
            Some((lo, hi)) => {
                let s = if maximal { hi } else { lo };
                Ok(s.clamp(-1e9, 1e9))
            }
            None => Ok(0.0),
        }
    };

    // one grid segment, integrated over SUB projected-RK4 substeps;
    // `dir` is +1 for the forward pass and -1 for the backward pass
    let integrate_segment =
        |k: usize, z_start: f64, dir: isize, maximal: bool| -> Result<f64, OracleError> {
            let d = grid.delta(k);
            let h = d / SUB as f64 * dir as f64;
            let base = grid.nodes()[k];
            let mut z = z_start;
            for j in 0..SUB {
                // stage lattice indices within the segment (m in 0..=16)
                let m0 = if dir > 0 { 2 * j } else { 2 * (SUB - j) };
                let mh = if dir > 0 {
                    2 * j + 1
                } else {
                    2 * (SUB - j) - 1
                };
                let m1 = if dir > 0 {
                    2 * j + 2
                } else {
                    2 * (SUB - j) - 2
                };
                let s0 = base + d * m0 as f64 / (2 * SUB) as f64;
                let sh = base + d * mh as f64 / (2 * SUB) as f64;
                let s1 = base + d * m1 as f64 / (2 * SUB) as f64;
                let clamp0 = |z: f64| z.clamp(0.0, cap_at(k, m0));
                let clamph = |z: f64| z.clamp(0.0, cap_at(k, mh));
                let clamp1 = |z: f64| z.clamp(0.0, cap_at(k, m1));
                let k1 = slope(s0, clamp0(z), maximal)?;
                let k2 = slope(sh, clamph(z + 0.5 * h * k1), maximal)?;
                let k3 = slope(sh, clamph(z + 0.5 * h * k2), maximal)?;
                let k4 = slope(s1, clamp1(z + h * k3), maximal)?;
                z = clamp1(z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
            }
            Ok(z)
        };

    let (z0, zt) = problem.boundary;
    if z0 > cap_at(0, 0) + 1e-9 {
        return Err(OracleError::BoundaryInfeasible {
            detail: format!("z(0) = {z0} above MVC {}", cap_at(0, 0)),
        });
    }
    if zt > cap_at(n - 1, 16) + 1e-9 {
        return Err(OracleError::BoundaryInfeasible {
            detail: format!("z(1) = {zt} above MVC {}", cap_at(n - 1, 16)),
        });
    }
    let mut fwd = vec![0.0; n + 1];
    fwd[0] = z0;
    for k in 0..n {
        fwd[k + 1] = integrate_segment(k, fwd[k], 1, true)?;
    }
    let mut bwd = vec![0.0; n + 1];
    bwd[n] = zt;
    for k in (0..n).rev() {
        bwd[k] = integrate_segment(k, bwd[k + 1], -1, false)?;
    }
    if fwd[n] + 1e-7 * (1.0 + zt) < zt {
        return Err(OracleError::BoundaryInfeasible {
            detail: format!("forward reach {} below required z(1) = {zt}", fwd[n]),
        });
    }
    if bwd[0] + 1e-7 * (1.0 + z0) < z0 {
        return Err(OracleError::BoundaryInfeasible {
            detail: format!("backward reach {} below required z(0) = {z0}", bwd[0]),
        });
    }
    let vals: Vec<f64> = (0..=n).map(|k| fwd[k].min(bwd[k])).collect();
    SpeedProfilePwl::new(grid.clone(), vals).map_err(|e| OracleError::Solve(e.to_string()))
}

/// Segment rows in (za, zb) endpoint coefficients plus node velocity caps.
struct DpRows {
    /// per segment: (ca, cb, gamma, is_le) meaning ca za + cb zb + gamma
    seg_rows: Vec<Vec<(f64, f64, f64, bool)>>,
    caps: Vec<f64>,
}

fn dp_rows(problem: &OpfProblem) -> Result<DpRows, OracleError> {
    let grid = &problem.grid;
    let n = grid.segments();
    let mut seg_rows = Vec::with_capacity(n);
    for k in 0..n {
        let sigma = grid.midpoint(k);
        let pr = point_rows(problem, sigma)?;
        let d = grid.delta(k);
        // alpha z' + beta z + gamma with z = (za+zb)/2, z' = (zb-za)/d
        let rows = pr
            .rows
            .iter()
            .map(|&(alpha, beta, gamma, is_le)| {
                (0.5 * beta - alpha / d, 0.5 * beta + alpha / d, gamma, is_le)
            })
            .collect();
        seg_rows.push(rows);
    }
    let mut caps = Vec::with_capacity(n + 1);
    for &s in grid.nodes() {
        caps.push(point_rows(problem, s)?.z_cap);
    }
    Ok(DpRows { seg_rows, caps })
}

impl DpRows {
    /// Largest value at the `to` end of segment `k` reachable from some
    /// value in [0, from_cap] at the other end, capped by `node_cap`.
    /// `forward` chooses which endpoint is "from".
    fn max_reach(&self, k: usize, from_cap: f64, node_cap: f64, forward: bool) -> f64 {
        let hi_cap = node_cap.min(1e9);
        let ok = |y: f64| -> bool {
            let mut zlo: f64 = 0.0;
            let mut zhi = from_cap;
            for &(ca, cb, gamma, is_le) in &self.seg_rows[k] {
                let (c_from, c_to) = if forward { (ca, cb) } else { (cb, ca) };
                let rhs = -(c_to * y + gamma);
                if c_from.abs() < 1e-14 {
                    let fine = if is_le { rhs >= -1e-9 } else { rhs <= 1e-9 };
                    if !fine {
                        return false;
                    }
                    continue;
                }
                let bound = rhs / c_from;
                if is_le == (c_from > 0.0) {
                    zhi = zhi.min(bound);
                } else {
                    zlo = zlo.max(bound);
                }
            }
            zlo <= zhi + 1e-12
        };
        // the feasible y-slice is an interval; scan for a seed, then push
        // its upper edge out by bisection
        let mut best: Option<f64> = None;
        for i in 0..=64 {
            let y = hi_cap * i as f64 / 64.0;
            if ok(y) {
                best = Some(y);
            }
        }
        let Some(seed) = best else { return 0.0 };
        let (mut lo, mut hi) = (seed, (seed + hi_cap / 64.0).min(hi_cap));
        if ok(hi) {
            return hi;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// Per-node quantization ranges: forward and backward reachability
/// intersected with the velocity caps.
fn dp_ranges(problem: &OpfProblem, rows: &DpRows) -> Vec<f64> {
    let n = problem.grid.segments();
    let (z0, zt) = problem.boundary;
    let mut fwd = vec![0.0; n + 1];
    fwd[0] = z0.min(rows.caps[0]);
    for k in 0..n {
        fwd[k + 1] = rows.max_reach(k, fwd[k], rows.caps[k + 1], true);
    }
    let mut bwd = vec![0.0; n + 1];
    bwd[n] = zt.min(rows.caps[n]);
    for k in (0..n).rev() {
        bwd[k] = rows.max_reach(k, bwd[k + 1], rows.caps[k], false);
    }
    (0..=n).map(|k| fwd[k].min(bwd[k]).max(0.0)).collect()
}

/// Quantization cell height a dp_solve call with these arguments uses:
/// the largest per-node level spacing.
pub fn dp_quantization_cell(problem: &OpfProblem, z_levels: usize) -> Result<f64, OracleError> {
    let rows = dp_rows(problem)?;
    let ranges = dp_ranges(problem, &rows);
    let n = problem.grid.segments();
    let den = z_levels.saturating_sub(1).max(1) as f64;
    Ok(ranges[1..n].iter().cloned().fold(0.0f64, f64::max) / den)
}

/// Exhaustive dynamic program over quantized node speeds, maximizing the
/// trapezoidal speed integral under exactly the midpoint-evaluated rows of
/// the PWL program (with a one-cell rounding allowance, so any continuum
/// profile is traceable within one cell). Brute-force oracle for small N.
pub fn dp_solve(
    problem: &OpfProblem,
    z_levels: usize,
) -> Result<(f64, SpeedProfilePwl), OracleError> {
    let n = problem.grid.segments();
    if n > 25 || z_levels > 200 || z_levels < 2 {
        return Err(OracleError::DpTooLarge {
            n,
            levels: z_levels,
        });
    }
    require_classic_scope(problem)?;
    let grid = &problem.grid;
    let (z0, zt) = problem.boundary;

    let rows = dp_rows(problem)?;
    let ranges = dp_ranges(problem, &rows);
    let caps = &rows.caps;
    let den = (z_levels - 1) as f64;
    let cell = ranges[1..n].iter().cloned().fold(0.0f64, f64::max) / den;

    let seg_rows = &rows.seg_rows;
    let seg_ok = |k: usize, za: f64, zb: f64| -> bool {
        for &(ca, cb, gamma, is_le) in &seg_rows[k] {
            let v = ca * za + cb * zb + gamma;
            // one-cell rounding allowance per endpoint coefficient
            let allow = 1e-9 + cell * (ca.abs() + cb.abs());
            if is_le && v > allow {
                return false;
            }
            if !is_le && v < -allow {
                return false;
            }
        }
        true
    };

    // level grids per node: quantized interior, exact boundaries
    let node_levels: Vec<Vec<f64>> = (0..=n)
        .map(|k| {
            if k == 0 {
                vec![z0]
            } else if k == n {
                vec![zt]
            } else {
                (0..z_levels).map(|i| ranges[k] * i as f64 / den).collect()
            }
        })
        .collect();
    if z0 > caps[0] + 1e-12 || zt > caps[n] + 1e-12 {
        return Err(OracleError::DpInfeasible);
    }

    const NEG: f64 = f64::NEG_INFINITY;
    let mut value = vec![vec![NEG; node_levels[0].len()]];
    value[0][0] = 0.0;
    let mut parent: Vec<Vec<usize>> = vec![vec![usize::MAX; node_levels[0].len()]];
    for k in 0..n {
        let d = grid.delta(k);
        let cur = &node_levels[k];
        let nxt = &node_levels[k + 1];
        let mut v_next = vec![NEG; nxt.len()];
        let mut p_next = vec![usize::MAX; nxt.len()];
        for (i, &za) in cur.iter().enumerate() {
            if value[k][i] == NEG {
                continue;
            }
            for (j, &zb) in nxt.iter().enumerate() {
                if !seg_ok(k, za, zb) {
                    continue;
                }
                let cand = value[k][i] + 0.5 * (za + zb) * d;
                if cand > v_next[j] {
                    v_next[j] = cand;
                    p_next[j] = i;
                }
            }
        }
        value.push(v_next);
        parent.push(p_next);
    }
    let (best_idx, &best) = value[n]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .ok_or(OracleError::DpInfeasible)?;
    if best == NEG {
        return Err(OracleError::DpInfeasible);
    }
    let mut idx = best_idx;
    let mut path = vec![0.0; n + 1];
    for k in (0..=n).rev() {
        path[k] = node_levels[k][idx];
        if k > 0 {
            idx = parent[k][idx];
        }
    }
    let profile =
        SpeedProfilePwl::new(grid.clone(), path).map_err(|e| OracleError::Solve(e.to_string()))?;
    Ok((best, profile))
}

/// Discrete conventional time objective: sum of exact segment times of the
/// PWL interpolant, with z floored at `eps` inside the formula.
pub fn discrete_time_objective(grid: &Grid, z: &[f64], eps: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..grid.segments() {
        let za = z[k].max(eps);
        let zb = z[k + 1].max(eps);
        acc += 2.0 * grid.delta(k) / (za.sqrt() + zb.sqrt());
    }
    acc
}

fn time_objective_gradient(grid: &Grid, z: &[f64], eps: f64) -> Vec<f64> {
    let n = grid.segments();
    let mut g = vec![0.0; n + 1];
    for k in 0..n {
        let za = z[k].max(eps);
        let zb = z[k + 1].max(eps);
        let denom = (za.sqrt() + zb.sqrt()).powi(2);
        g[k] += -grid.delta(k) / (denom * za.sqrt());
        g[k + 1] += -grid.delta(k) / (denom * zb.sqrt());
    }
    g
}

/// Minimize the conventional discrete time objective over the pure-LP
/// feasible set with supporting-hyperplane (Kelley) cuts; terminates when
/// the cut-model gap drops below 1e-7 (relative).
pub fn cutting_plane_min_time(problem: &OpfProblem) -> Result<SpeedProfilePwl, OracleError> {
    require_classic_scope(problem)?;
    let mut pwl_problem = problem.clone();
    pwl_problem.mode = crate::solver::Mode::Pwl;
    let base = assemble_pure(&pwl_problem)?;
    let n_z = pwl_problem.grid.nodes().len();
    let eps = 1e-9;
    let grid = &pwl_problem.grid;

    // epigraph variable t appended after the z block
    let mut lp = LinearProgram::new(n_z + 1);
    for j in 0..n_z {
        let (lo, hi) = base.bounds(j);
        lp.set_bounds(j, lo, hi);
    }
    lp.set_bounds(n_z, f64::NEG_INFINITY, f64::INFINITY);
    lp.set_objective_coeff(n_z, -1.0); // maximize -t == minimize t
    for row in base.rows() {
        lp.add_range_row(row.lo, row.coeffs.clone(), row.hi);
    }

    // initial cut at the max-z solution
    let tols = LpTolerances::default();
    let seed = base
        .solve(&tols)
        .map_err(|e| OracleError::Solve(e.to_string()))?;
    if seed.status != LpStatus::Optimal {
        return Err(OracleError::Solve(format!(
            "seed LP status {:?}",
            seed.status
        )));
    }
    let mut cut_point = seed.x.clone();
    let mut snapshot = None;
    let max_iters = 5000;
    for it in 0..max_iters {
        let fval = discrete_time_objective(grid, &cut_point, eps);
        let gvec = time_objective_gradient(grid, &cut_point, eps);
        // t >= f + g'(z - z_bar)
        let mut coeffs: Vec<(usize, f64)> = vec![(n_z, 1.0)];
        let mut rhs = fval;
        for (j, &gj) in gvec.iter().enumerate() {
            if gj != 0.0 {
                coeffs.push((j, -gj));
                rhs -= gj * cut_point[j];
            }
        }
        lp.add_ge_row(coeffs, rhs);
        let (sol, snap) = lp
            .solve_warm(&tols, snapshot.as_ref())
            .map_err(|e| OracleError::Solve(e.to_string()))?;
        if sol.status != LpStatus::Optimal {
            return Err(OracleError::Solve(format!(
                "cut LP status {:?}",
                sol.status
            )));
        }
        snapshot = snap;
        let t_model = sol.x[n_z];
        let z_new: Vec<f64> = sol.x[..n_z].to_vec();
        let f_new = discrete_time_objective(grid, &z_new, eps);
        let gap = f_new - t_model;
        if gap <= 1e-7 * f_new.max(1.0) {
            let profile = SpeedProfilePwl::new(grid.clone(), z_new)
                .map_err(|e| OracleError::Solve(e.to_string()))?;
            return Ok(profile);
        }
        cut_point = z_new;
        if it == max_iters - 1 {
            return Err(OracleError::CutPlaneStalled {
                iterations: max_iters,
                gap,
            });
        }
    }
    unreachable!()
}
