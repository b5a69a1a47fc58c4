//! Assembly and solution of the discrete optimal path following problem:
//! maximize the path-speed integral subject to projected joint limits.
//!
//! Two ansatz families share the machinery: piecewise-linear node values
//! (velocity rows at nodes, acceleration/torque rows at segment midpoints)
//! and clamped B-spline control points (rows at the grid nodes). Both are
//! plain LPs as long as no jerk bound and no viscous friction is present;
//! with either of those, `scp_solve` wraps the LP in a sequential convex
//! programming loop that linearizes the sqrt(z) terms at the previous
//! iterate under a shrinking trust region and accepts only iterates whose
//! exact nonlinear constraints check out on a refined sampling.

use crate::bspline::KnotVector;
use crate::dynamics::RobotModel;
use crate::lp::{BasisSnapshot, LinearProgram, LpError, LpSolution, LpStatus, LpTolerances};
use crate::path::JointPath;
use crate::profile::{Grid, ProfileError, SpeedProfile, SpeedProfileBSpline, SpeedProfilePwl};
use crate::projection::{
    self, acceleration_rows, exact_jerk, project_dynamics_at, velocity_rows, JointBounds, LinPoint,
    ProjectedConstraintRow, ProjectionError, Relation, EPS_Z,
};

#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    Projection(ProjectionError),
    Lp(LpError),
    Profile(ProfileError),
    /// Problem carries jerk bounds or viscous friction; use scp_solve.
    NeedsScp,
    /// LP (or boundary pre-check) proved the discrete problem infeasible.
    Infeasible(String),
    Unbounded,
    /// SCP exhausted its iterations without a feasible iterate.
    ScpNoFeasible {
        worst_violation: f64,
        iterations: usize,
    },
    BadProblem(String),
}

impl std::fmt::Display for SolveError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveError::Projection(e) => write!(f, "{e}"),
            SolveError::Lp(e) => write!(f, "{e}"),
            SolveError::Profile(e) => write!(f, "{e}"),
            SolveError::NeedsScp => {
                write!(f, "jerk bounds or viscous friction present; use scp_solve")
            }
            SolveError::Infeasible(why) => write!(f, "infeasible: {why}"),
            SolveError::Unbounded => write!(f, "objective unbounded (no effective speed limit)"),
            SolveError::ScpNoFeasible { worst_violation, iterations } => write!(
                f,
                "no feasible SCP iterate in {iterations} iterations; best violation {worst_violation:.3e}"
            ),
            SolveError::BadProblem(why) => write!(f, "bad problem: {why}"),
        }
    }
}

impl std::error::Error for SolveError {}

impl From<ProjectionError> for SolveError {
    fn from(e: ProjectionError) -> Self {
        SolveError::Projection(e)
    }
}

impl From<LpError> for SolveError {
    fn from(e: LpError) -> Self {
        SolveError::Lp(e)
    }
}

impl From<ProfileError> for SolveError {
    fn from(e: ProfileError) -> Self {
        SolveError::Profile(e)
    }
}

/// Optional bounds per constraint family. Velocity bounds must straddle
/// zero componentwise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bounds {
    pub velocity: Option<JointBounds>,
    pub acceleration: Option<JointBounds>,
    pub jerk: Option<JointBounds>,
    pub torque: Option<JointBounds>,
}

/// Where B-spline constraint rows are evaluated. `Nodes` is the standard
/// choice; `Midpoints` mirrors the PWL evaluation points so that a
/// degree-1 spline reproduces the PWL program exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPoints {
    Nodes,
    Midpoints,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Pwl,
    BSpline {
        degree: usize,
        ctrl: usize,
        eval: EvalPoints,
    },
}

impl Mode {
    pub fn bspline(degree: usize, ctrl: usize) -> Self {
        Mode::BSpline {
            degree,
            ctrl,
            eval: EvalPoints::Nodes,
        }
    }
}

/// Trust-region and convergence policy for the SCP loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ScpSettings {
    pub max_iterations: usize,
    /// Linearization floor for z.
    pub eps_z: f64,
    /// Relative objective-change tolerance.
    pub tol_objective: f64,
    /// Max exact-constraint violation accepted as feasible.
    pub tol_violation: f64,
    /// Samples per grid segment for linearized rows and the exact
    /// post-check (10 reproduces a "10x finer" sampling).
    pub refine: usize,
    /// Initial trust radius; None derives 0.5 * max z of the pure solution.
    pub rho0: Option<f64>,
    pub rho_floor: f64,
}

impl Default for ScpSettings {
    fn default() -> Self {
        Self {
            max_iterations: 30,
            eps_z: EPS_Z,
            tol_objective: 1e-6,
            tol_violation: 1e-6,
            refine: 10,
            rho0: None,
            rho_floor: 1e-4,
        }
    }
}

/// The discrete optimal path following problem.
#[derive(Debug, Clone)]
pub struct OpfProblem {
    pub model: RobotModel,
    pub path: JointPath,
    pub bounds: Bounds,
    /// Boundary squared speeds (z(0), z(1)), both >= 0.
    pub boundary: (f64, f64),
    pub grid: Grid,
    pub mode: Mode,
    pub scp: ScpSettings,
}

impl OpfProblem {
    pub fn dof(&self) -> usize {
        self.model.dof()
    }

    /// Jerk bounds or viscous friction force the SCP route.
    pub fn needs_scp(&self) -> bool {
        self.bounds.jerk.is_some() || self.model.has_viscous()
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if self.path.dof() != self.model.dof() {
            return Err(SolveError::BadProblem(format!(
                "path dof {} != model dof {}",
                self.path.dof(),
                self.model.dof()
            )));
        }
        if self.boundary.0 < 0.0 || self.boundary.1 < 0.0 {
            return Err(SolveError::BadProblem(
                "boundary squared speeds must be >= 0".into(),
            ));
        }
        for (name, b) in [
            ("velocity", &self.bounds.velocity),
            ("acceleration", &self.bounds.acceleration),
            ("jerk", &self.bounds.jerk),
            ("torque", &self.bounds.torque),
        ] {
            if let Some(b) = b {
                if b.dof() != self.model.dof() {
                    return Err(SolveError::BadProblem(format!(
                        "{name} bounds have {} entries for a {}-dof model",
                        b.dof(),
                        self.model.dof()
                    )));
                }
                if b.lower.iter().zip(b.upper.iter()).any(|(l, u)| l > u) {
                    return Err(SolveError::BadProblem(format!("{name} bounds crossed")));
                }
            }
        }
        if let Mode::BSpline { degree, ctrl, .. } = &self.mode {
            if *ctrl < degree + 1 {
                return Err(SolveError::BadProblem(format!(
                    "B-spline needs at least degree+1 = {} control points, got {ctrl}",
                    degree + 1
                )));
            }
        }
        if self.bounds.velocity.is_none()
            && self.bounds.acceleration.is_none()
            && self.bounds.torque.is_none()
        {
            return Err(SolveError::BadProblem(
                "need at least one of velocity/acceleration/torque bounds".into(),
            ));
        }
        Ok(())
    }
}

/// Maps projected rows at a sigma onto LP variable coefficients.
enum Ansatz {
    Pwl { grid: Grid },
    BSpline { knots: KnotVector },
}

impl Ansatz {
    fn num_vars(&self) -> usize {
        match self {
            Ansatz::Pwl { grid } => grid.nodes().len(),
            Ansatz::BSpline { knots } => knots.num_ctrl(),
        }
    }

    /// Mapping weights at `sigma`: per variable (j, wz, wzp, wzpp) such
    /// that z(sigma) = sum wz_j x_j, z' = sum wzp_j x_j, z'' = sum wzpp_j x_j.
    fn map_weights(&self, sigma: f64) -> Vec<(usize, f64, f64, f64)> {
        match self {
            Ansatz::Pwl { grid } => {
                let k = grid.segment_of(sigma);
                let d = grid.delta(k);
                let t = (sigma - grid.nodes()[k]) / d;
                vec![(k, 1.0 - t, -1.0 / d, 0.0), (k + 1, t, 1.0 / d, 0.0)]
            }
            Ansatz::BSpline { knots } => {
                let (first, table) = knots.basis_with_derivs(sigma, 2);
                (0..table[0].len())
                    .map(|j| (first + j, table[0][j], table[1][j], table[2][j]))
                    .collect()
            }
        }
    }

    fn objective(&self) -> Vec<f64> {
        match self {
            Ansatz::Pwl { grid } => {
                let n = grid.segments();
                let mut c = vec![0.0; n + 1];
                for k in 0..n {
                    c[k] += 0.5 * grid.delta(k);
                    c[k + 1] += 0.5 * grid.delta(k);
                }
                c
            }
            Ansatz::BSpline { knots } => (0..knots.num_ctrl())
                .map(|i| knots.basis_integral(i))
                .collect(),
        }
    }
}

fn ansatz_for(problem: &OpfProblem) -> Result<Ansatz, SolveError> {
    match &problem.mode {
        Mode::Pwl => Ok(Ansatz::Pwl {
            grid: problem.grid.clone(),
        }),
        Mode::BSpline { degree, ctrl, .. } => {
            let knots = KnotVector::clamped_uniform(*degree, *ctrl)
                .map_err(|e| SolveError::Profile(ProfileError::Spline(e)))?;
            Ok(Ansatz::BSpline { knots })
        }
    }
}

/// Map a projected row onto LP coefficients through precomputed weights.
fn map_through(
    weights: &[(usize, f64, f64, f64)],
    row: &ProjectedConstraintRow,
) -> Vec<(usize, f64)> {
    weights
        .iter()
        .filter_map(|&(j, wz, wzp, wzpp)| {
            let c = row.coeff_z * wz + row.coeff_zp * wzp + row.coeff_zpp * wzpp;
            (c != 0.0).then_some((j, c))
        })
        .collect()
}

/// Append a (Ge, Le) projected row pair as one LP range row.
fn push_row_pairs(
    lp: &mut LinearProgram,
    weights: &[(usize, f64, f64, f64)],
    rows: &[ProjectedConstraintRow],
) {
    let mut i = 0;
    while i < rows.len() {
        let (ge, le) = (&rows[i], &rows[i + 1]);
        debug_assert_eq!(ge.relation, Relation::Ge);
        debug_assert_eq!(le.relation, Relation::Le);
        debug_assert_eq!(ge.joint, le.joint);
        // value = expr + constant (>= 0 | <= 0)  =>  -c_ge <= expr <= -c_le
        lp.add_range_row(-ge.constant, map_through(weights, ge), -le.constant);
        i += 2;
    }
}

/// Pure-LP rows: velocity at nodes, acceleration/torque at the mode's
/// evaluation points, boundary equalities, z >= 0 through variable bounds.
pub(crate) fn assemble_pure(problem: &OpfProblem) -> Result<LinearProgram, SolveError> {
    let ansatz = ansatz_for(problem)?;
    let mut lp = LinearProgram::new(ansatz.num_vars());
    lp.set_objective(&ansatz.objective());
    for j in 0..ansatz.num_vars() {
        lp.set_bounds(j, 0.0, f64::INFINITY);
    }

    let eval_sigmas: Vec<f64> = match (&problem.mode, &ansatz) {
        (Mode::Pwl, _) => problem.grid.midpoints(),
        (
            Mode::BSpline {
                eval: EvalPoints::Midpoints,
                ..
            },
            _,
        ) => problem.grid.midpoints(),
        (
            Mode::BSpline {
                eval: EvalPoints::Nodes,
                ..
            },
            _,
        ) => problem.grid.nodes().to_vec(),
    };

    if let Some(vb) = &problem.bounds.velocity {
        for &sigma in problem.grid.nodes() {
            // all velocity rows at one node read z(sigma) <= cap_i, so one
            // row with the tightest cap carries them all
            let rows = velocity_rows(&problem.path, sigma, vb)?;
            if let Some(cap) = rows
                .iter()
                .map(|r| -r.constant)
                .min_by(|a, b| a.partial_cmp(b).expect("finite caps"))
            {
                let weights = ansatz.map_weights(sigma);
                let coeffs: Vec<(usize, f64)> = weights
                    .iter()
                    .filter(|w| w.1 != 0.0)
                    .map(|&(j, wz, _, _)| (j, wz))
                    .collect();
                lp.add_le_row(coeffs, cap);
            }
        }
        // explicit boundary feasibility check: prescribed z must clear the
        // velocity caps at sigma = 0 and 1
        for (sigma, zfix) in [(0.0, problem.boundary.0), (1.0, problem.boundary.1)] {
            for row in velocity_rows(&problem.path, sigma, vb)? {
                if row.coeff_z * zfix + row.constant > 1e-9 {
                    return Err(SolveError::Infeasible(format!(
                        "boundary z = {zfix} violates the velocity cap {} at sigma = {sigma}",
                        -row.constant
                    )));
                }
            }
        }
    }
    if problem.bounds.acceleration.is_some() || problem.bounds.torque.is_some() {
        for &sigma in &eval_sigmas {
            let weights = ansatz.map_weights(sigma);
            if let Some(ab) = &problem.bounds.acceleration {
                let rows = acceleration_rows(&problem.path, sigma, ab)?;
                push_row_pairs(&mut lp, &weights, &rows);
            }
            if let Some(tb) = &problem.bounds.torque {
                // pure assembly drops the viscous term (d = 0 route)
                let rows = torque_rows_without_viscous(problem, sigma, tb)?;
                push_row_pairs(&mut lp, &weights, &rows);
            }
        }
    }

    // boundary equalities on the first/last decision variable (clamped
    // spline ends coincide with z(0), z(1))
    let n = ansatz.num_vars();
    lp.add_eq_row(vec![(0, 1.0)], problem.boundary.0);
    lp.add_eq_row(vec![(n - 1, 1.0)], problem.boundary.1);
    Ok(lp)
}

/// Torque rows with the viscous column zeroed (the parameter-linear case).
pub(crate) fn torque_rows_without_viscous(
    problem: &OpfProblem,
    sigma: f64,
    tb: &JointBounds,
) -> Result<Vec<ProjectedConstraintRow>, SolveError> {
    let p = problem
        .path
        .evaluate(sigma)
        .map_err(ProjectionError::from)?;
    let pd = project_dynamics_at(&problem.model, &p, sigma);
    let mut rows = Vec::with_capacity(2 * problem.dof());
    for i in 0..problem.dof() {
        for (relation, bound) in [(Relation::Ge, tb.lower[i]), (Relation::Le, tb.upper[i])] {
            rows.push(ProjectedConstraintRow {
                coeff_z: pd.b[i],
                coeff_zp: pd.a[i],
                coeff_zpp: 0.0,
                coeff_sqrtz: 0.0,
                constant: pd.c[i] - bound,
                relation,
                kind: projection::ConstraintKind::Torque,
                joint: i,
                sigma,
            });
        }
    }
    Ok(rows)
}

/// Parameter-linear PWL program (jerk-free, viscous-free).
pub fn assemble_pwl(problem: &OpfProblem) -> Result<LinearProgram, SolveError> {
    problem.validate()?;
    if !matches!(problem.mode, Mode::Pwl) {
        return Err(SolveError::BadProblem("mode is not PWL".into()));
    }
    if problem.needs_scp() {
        return Err(SolveError::NeedsScp);
    }
    assemble_pure(problem)
}

/// Parameter-linear B-spline program (jerk-free, viscous-free).
pub fn assemble_bspline(problem: &OpfProblem) -> Result<LinearProgram, SolveError> {
    problem.validate()?;
    if !matches!(problem.mode, Mode::BSpline { .. }) {
        return Err(SolveError::BadProblem("mode is not B-spline".into()));
    }
    if problem.needs_scp() {
        return Err(SolveError::NeedsScp);
    }
    assemble_pure(problem)
}

/// Typed profile from an optimal LP solution; re-validates nonnegativity
/// and the boundary equalities.
pub fn extract_profile(
    solution: &LpSolution,
    problem: &OpfProblem,
) -> Result<SpeedProfile, SolveError> {
    if solution.status != LpStatus::Optimal {
        return Err(SolveError::BadProblem(
            "extract_profile on non-optimal solution".into(),
        ));
    }
    let profile = match &problem.mode {
        Mode::Pwl => SpeedProfile::Pwl(SpeedProfilePwl::new(
            problem.grid.clone(),
            solution.x.clone(),
        )?),
        Mode::BSpline { degree, ctrl, .. } => {
            let knots = KnotVector::clamped_uniform(*degree, *ctrl)
                .map_err(|e| SolveError::Profile(ProfileError::Spline(e)))?;
            SpeedProfile::BSpline(SpeedProfileBSpline::new(knots, solution.x.clone())?)
        }
    };
    for (sigma, want) in [(0.0, problem.boundary.0), (1.0, problem.boundary.1)] {
        let got = profile.z(sigma);
        if (got - want).abs() > 1e-7 * (1.0 + want.abs()) {
            return Err(SolveError::BadProblem(format!(
                "boundary mismatch at sigma = {sigma}: z = {got}, prescribed {want}"
            )));
        }
    }
    Ok(profile)
}

/// One SCP iteration record.
#[derive(Debug, Clone, PartialEq)]
pub struct ScpIteration {
    pub objective: f64,
    pub exact_violation: f64,
    pub trust_radius: f64,
}

/// Solver outcome: the profile, its LP objective and the iteration trace
/// (a single entry for pure-LP problems).
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub profile: SpeedProfile,
    pub objective: f64,
    pub trace: Vec<ScpIteration>,
}

/// Exact nonlinear constraint violation of a profile over `sigmas`:
/// jerk rows when jerk bounds exist, torque rows including the true
/// sqrt(z) viscous term when the model has viscous friction.
pub fn exact_violation(
    problem: &OpfProblem,
    profile: &SpeedProfile,
    sigmas: &[f64],
) -> Result<f64, SolveError> {
    let mut worst = 0.0f64;
    for &sigma in sigmas {
        let (z, zp, zpp) = profile.eval(sigma);
        let p = problem
            .path
            .evaluate(sigma)
            .map_err(ProjectionError::from)?;
        if let Some(jb) = &problem.bounds.jerk {
            let j = exact_jerk(&p, z, zp, zpp);
            for i in 0..problem.dof() {
                worst = worst.max(j[i] - jb.upper[i]).max(jb.lower[i] - j[i]);
            }
        }
        if problem.model.has_viscous() {
            if let Some(tb) = &problem.bounds.torque {
                let pd = project_dynamics_at(&problem.model, &p, sigma);
                let tau = pd.torque(z, zp);
                for i in 0..problem.dof() {
                    worst = worst.max(tau[i] - tb.upper[i]).max(tb.lower[i] - tau[i]);
                }
            }
        }
    }
    Ok(worst.max(0.0))
}

fn lp_outcome(
    lp: &LinearProgram,
    tols: &LpTolerances,
    warm: Option<&BasisSnapshot>,
) -> Result<(LpSolution, Option<BasisSnapshot>), SolveError> {
    let (sol, snap) = lp.solve_warm(tols, warm)?;
    match sol.status {
        LpStatus::Optimal => Ok((sol, snap)),
        LpStatus::Infeasible => Err(SolveError::Infeasible("LP infeasible".into())),
        LpStatus::Unbounded => Err(SolveError::Unbounded),
    }
}

/// Solve dispatcher: pure LP when possible, SCP otherwise.
pub fn solve(problem: &OpfProblem) -> Result<SolveResult, SolveError> {
    if problem.needs_scp() {
        scp_solve(problem)
    } else {
        problem.validate()?;
        let lp = assemble_pure(problem)?;
        let (sol, _) = lp_outcome(&lp, &LpTolerances::default(), None)?;
        let profile = extract_profile(&sol, problem)?;
        Ok(SolveResult {
            profile,
            objective: sol.objective,
            trace: vec![ScpIteration {
                objective: sol.objective,
                exact_violation: 0.0,
                trust_radius: f64::INFINITY,
            }],
        })
    }
}

/// Per-sample data the SCP loop touches every iteration: path point,
/// projected dynamics and the ansatz mapping weights from row space
/// (coeff_z, coeff_zp, coeff_zpp) to LP variable coefficients.
struct ScpSamples {
    sigmas: Vec<f64>,
    points: Vec<crate::path::PathPoint>,
    dynamics: Vec<crate::projection::ProjectedDynamics>,
    /// per sample: (variable, weight of coeff_z, of coeff_zp, of coeff_zpp)
    maps: Vec<Vec<(usize, f64, f64, f64)>>,
}

impl ScpSamples {
    fn build(problem: &OpfProblem, ansatz: &Ansatz) -> Result<Self, SolveError> {
        let sigmas = problem.grid.refined_samples(problem.scp.refine.max(1));
        let mut points = Vec::with_capacity(sigmas.len());
        let mut dynamics = Vec::with_capacity(sigmas.len());
        let mut maps = Vec::with_capacity(sigmas.len());
        let need_dynamics = problem.model.has_viscous();
        for &sigma in &sigmas {
            let p = problem
                .path
                .evaluate(sigma)
                .map_err(ProjectionError::from)?;
            if need_dynamics {
                dynamics.push(project_dynamics_at(&problem.model, &p, sigma));
            }
            maps.push(ansatz.map_weights(sigma));
            points.push(p);
        }
        Ok(Self {
            sigmas,
            points,
            dynamics,
            maps,
        })
    }

    /// z, z', z'' of the ansatz with decision values `x` at sample `idx`,
    /// via the cached mapping weights.
    fn eval_at(&self, idx: usize, x: &[f64]) -> (f64, f64, f64) {
        let (mut z, mut zp, mut zpp) = (0.0, 0.0, 0.0);
        for &(j, wz, wzp, wzpp) in &self.maps[idx] {
            z += wz * x[j];
            zp += wzp * x[j];
            zpp += wzpp * x[j];
        }
        (z, zp, zpp)
    }

    /// Exact jerk/viscous-torque violation of the decision values `x`,
    /// per sample.
    fn exact_violation(&self, problem: &OpfProblem, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.sigmas.len()];
        let viscous = problem.model.has_viscous();
        for idx in 0..self.sigmas.len() {
            let (z, zp, zpp) = self.eval_at(idx, x);
            let s = z.max(0.0).sqrt();
            let mut worst = 0.0f64;
            if let Some(jb) = &problem.bounds.jerk {
                let pt = &self.points[idx];
                for i in 0..problem.dof() {
                    let j = (pt.dddq[i] * z + 1.5 * pt.ddq[i] * zp + 0.5 * pt.dq[i] * zpp) * s;
                    worst = worst.max(j - jb.upper[i]).max(jb.lower[i] - j);
                }
            }
            if viscous {
                if let Some(tb) = &problem.bounds.torque {
                    let pd = &self.dynamics[idx];
                    for i in 0..problem.dof() {
                        let tau = pd.a[i] * zp + pd.b[i] * z + pd.c[i] + pd.d[i] * s;
                        worst = worst.max(tau - tb.upper[i]).max(tb.lower[i] - tau);
                    }
                }
            }
            out[idx] = worst.max(0.0);
        }
        out
    }
}

/// Sequential convex programming around the parameter-linear core.
///
/// Iteration 0 solves the pure LP (jerk rows and viscous terms omitted).
/// Every later iteration linearizes jerk and viscous-torque rows at the
/// previous iterate inside the trust box |x - x_prev| <= rho. The rows
/// live on a `refine`-times finer sampling than the grid; they are
/// generated lazily - enforced where the exact nonlinear constraints are
/// violated or nearly active - and each LP warm-starts from the previous
/// basis. Termination requires both a small relative objective change and
/// exact-constraint violation below tolerance over the full fine sampling;
/// if the iteration budget runs out, the best feasible iterate is
/// returned.
pub fn scp_solve(problem: &OpfProblem) -> Result<SolveResult, SolveError> {
    problem.validate()?;
    let tols = LpTolerances::default();
    let settings = &problem.scp;
    let ansatz = ansatz_for(problem)?;

    // iteration 0: pure LP
    let base_lp = assemble_pure(problem)?;
    let (sol0, snap0) = lp_outcome(&base_lp, &tols, None)?;
    let profile0 = extract_profile(&sol0, problem)?;
    if !problem.needs_scp() {
        return Ok(SolveResult {
            profile: profile0,
            objective: sol0.objective,
            trace: vec![ScpIteration {
                objective: sol0.objective,
                exact_violation: 0.0,
                trust_radius: f64::INFINITY,
            }],
        });
    }

    let samples = ScpSamples::build(problem, &ansatz)?;
    let viol_of = |per_sample: &[f64]| per_sample.iter().cloned().fold(0.0f64, f64::max);
    let viol0_samples = samples.exact_violation(problem, &sol0.x);
    let viol0 = viol_of(&viol0_samples);
    let mut trace = vec![ScpIteration {
        objective: sol0.objective,
        exact_violation: viol0,
        trust_radius: f64::INFINITY,
    }];

    let max_z = sol0.x.iter().cloned().fold(0.0f64, f64::max);
    let mut rho = settings.rho0.unwrap_or(0.5 * max_z.max(1e-3));
    let mut prev_x = sol0.x.clone();
    let mut prev_viol = viol0;
    // The pure solution can violate the exact sqrt(z) constraints so far
    // that their tangents cut off the whole orthant (dominant viscous
    // friction does this). Scaling the iterate toward zero restores exact
    // feasibility - profiles are linear in the decision values - which
    // makes the linearized LP nonempty again. Invoked only when the first
    // subproblem actually comes back infeasible.
    let mut rescue_available = viol0 > settings.tol_violation;
    let rescue =
        |rho: &mut f64, prev_x: &mut Vec<f64>, prev_viol: &mut f64| -> Result<(), SolveError> {
            let viol_at = |t: f64| -> f64 {
                let scaled: Vec<f64> = sol0.x.iter().map(|&v| v * t).collect();
                viol_of(&samples.exact_violation(problem, &scaled))
            };
            let mut t_bad = 1.0;
            while t_bad > 1e-7 && viol_at(t_bad) > settings.tol_violation {
                t_bad *= 0.5;
            }
            // t_bad is feasible now (or hit the floor); stretch it back up
            let mut t_feas = t_bad;
            let mut hi = (2.0 * t_bad).min(1.0);
            for _ in 0..8 {
                let mid = 0.5 * (t_feas + hi);
                if viol_at(mid) <= settings.tol_violation {
                    t_feas = mid;
                } else {
                    hi = mid;
                }
            }
            *prev_x = sol0.x.iter().map(|&v| v * t_feas).collect();
            *prev_viol = viol_at(t_feas);
            // keep the pure optimum inside the trust box so the warm basis
            // starts primal feasible with respect to the box
            *rho = rho.max((1.0 - t_feas) * max_z * 1.05);
            Ok(())
        };
    let mut prev_obj = sol0.objective;
    let mut best: Option<(SpeedProfile, f64)> = if viol0 <= settings.tol_violation {
        Some((profile0, sol0.objective))
    } else {
        None
    };
    let mut snapshot: Option<BasisSnapshot> = snap0;

    // pinned-zero boundaries are exempt from linearized rows exactly there
    let skip_zero_ends = |sigma: f64| -> bool {
        (sigma == 0.0 && problem.boundary.0 < settings.eps_z)
            || (sigma == 1.0 && problem.boundary.1 < settings.eps_z)
    };

    // lazily grown enforcement set, in insertion order so that re-solves
    // see previous rows as a prefix and the warm basis stays valid; the
    // seed set is one sample per grid segment, violations add the rest
    let coarse = settings.refine.max(1);
    let mut enforced: Vec<usize> = (0..samples.sigmas.len())
        .filter(|idx| idx % coarse == coarse / 2 && !skip_zero_ends(samples.sigmas[*idx]))
        .collect();
    let mut in_set = vec![false; samples.sigmas.len()];
    for &idx in &enforced {
        in_set[idx] = true;
    }

    let mut iterations_used = 0;
    for _iter in 1..=settings.max_iterations {
        iterations_used += 1;
        let mut lp = base_lp.clone();
        for &idx in &enforced {
            let sigma = samples.sigmas[idx];
            let (z_raw, zp_bar, zpp_bar) = samples.eval_at(idx, &prev_x);
            let lin = LinPoint {
                z: z_raw.max(settings.eps_z),
                zp: zp_bar,
                zpp: zpp_bar,
            };
            if let Some(jb) = &problem.bounds.jerk {
                let rows = jerk_rows_at(&samples.points[idx], sigma, jb, lin)?;
                push_row_pairs(&mut lp, &samples.maps[idx], &rows);
            }
            if problem.model.has_viscous() {
                if let Some(tb) = &problem.bounds.torque {
                    let rows = viscous_torque_rows_at(&samples.dynamics[idx], tb, lin.z)?;
                    push_row_pairs(&mut lp, &samples.maps[idx], &rows);
                }
            }
        }
        // trust region box around the previous iterate
        for (j, &xj) in prev_x.iter().enumerate() {
            lp.tighten_bounds(j, xj - rho, xj + rho);
        }

        let solved = lp.solve_warm(&tols, snapshot.as_ref());
        let (sol, snap) = match solved {
            Ok((sol, snap)) if sol.status == LpStatus::Optimal => (sol, snap),
            Ok((sol, _)) if sol.status == LpStatus::Infeasible => {
                if rescue_available {
                    // tangents taken at a wildly infeasible point; restart
                    // the linearization from an exactly feasible scaling
                    rescue_available = false;
                    rescue(&mut rho, &mut prev_x, &mut prev_viol)?;
                    continue;
                }
                // trust region too tight around an infeasible linearization
                if rho > settings.rho_floor {
                    rho = (rho * 0.5).max(settings.rho_floor);
                    continue;
                }
                return match best {
                    Some((profile, objective)) => Ok(SolveResult {
                        profile,
                        objective,
                        trace,
                    }),
                    None => Err(SolveError::ScpNoFeasible {
                        worst_violation: prev_viol,
                        iterations: iterations_used,
                    }),
                };
            }
            Ok(_) => return Err(SolveError::Unbounded),
            Err(e) => return Err(e.into()),
        };
        let profile = extract_profile(&sol, problem)?;
        let viol_samples = samples.exact_violation(problem, &sol.x);
        let viol = viol_of(&viol_samples);
        trace.push(ScpIteration {
            objective: sol.objective,
            exact_violation: viol,
            trust_radius: rho,
        });
        // grow the enforcement set where the exact constraints broke
        let mut grew = false;
        for (idx, &v) in viol_samples.iter().enumerate() {
            if v > settings.tol_violation && !in_set[idx] && !skip_zero_ends(samples.sigmas[idx]) {
                in_set[idx] = true;
                enforced.push(idx);
                grew = true;
            }
        }
        if viol <= settings.tol_violation {
            let better = best.as_ref().map_or(true, |&(_, obj)| sol.objective > obj);
            if better {
                best = Some((profile.clone(), sol.objective));
            }
        }
        let obj_settled = (sol.objective - prev_obj).abs()
            <= settings.tol_objective * sol.objective.abs().max(1.0);
        if obj_settled && viol <= settings.tol_violation && !grew {
            return Ok(SolveResult {
                profile,
                objective: sol.objective,
                trace,
            });
        }
        // trust-region schedule: shrink on violation growth, grow on decay
        if viol > prev_viol + 1e-12 {
            rho = (rho * 0.5).max(settings.rho_floor);
        } else {
            rho *= 1.5;
        }
        prev_x = sol.x.clone();
        prev_obj = sol.objective;
        prev_viol = viol;
        snapshot = snap;
    }

    match best {
        Some((profile, objective)) => Ok(SolveResult {
            profile,
            objective,
            trace,
        }),
        None => Err(SolveError::ScpNoFeasible {
            worst_violation: prev_viol,
            iterations: iterations_used,
        }),
    }
}

/// Jerk rows from a cached path point (same construction as
/// [`projection::jerk_rows`]).
fn jerk_rows_at(
    point: &crate::path::PathPoint,
    sigma: f64,
    bounds: &JointBounds,
    lin: LinPoint,
) -> Result<Vec<ProjectedConstraintRow>, SolveError> {
    if lin.z < EPS_Z {
        return Err(SolveError::Projection(
            ProjectionError::LinearizationFloor { z_bar: lin.z },
        ));
    }
    let s_bar = lin.z.sqrt();
    let dof = point.q.len();
    let mut rows = Vec::with_capacity(2 * dof);
    for i in 0..dof {
        let a_bar =
            point.dddq[i] * lin.z + 1.5 * point.ddq[i] * lin.zp + 0.5 * point.dq[i] * lin.zpp;
        let coeff_z = s_bar * point.dddq[i] + a_bar / (2.0 * s_bar);
        let coeff_zp = 1.5 * s_bar * point.ddq[i];
        let coeff_zpp = 0.5 * s_bar * point.dq[i];
        let base_const = -a_bar * lin.z / (2.0 * s_bar);
        for (relation, bound) in [
            (Relation::Ge, bounds.lower[i]),
            (Relation::Le, bounds.upper[i]),
        ] {
            rows.push(ProjectedConstraintRow {
                coeff_z,
                coeff_zp,
                coeff_zpp,
                coeff_sqrtz: 0.0,
                constant: base_const - bound,
                relation,
                kind: projection::ConstraintKind::Jerk,
                joint: i,
                sigma,
            });
        }
    }
    Ok(rows)
}

/// Full torque rows from cached projected dynamics, with the viscous
/// sqrt(z) term replaced by its tangent at `z_bar`.
fn viscous_torque_rows_at(
    pd: &crate::projection::ProjectedDynamics,
    bounds: &JointBounds,
    z_bar: f64,
) -> Result<Vec<ProjectedConstraintRow>, SolveError> {
    if z_bar < EPS_Z {
        return Err(SolveError::Projection(
            ProjectionError::LinearizationFloor { z_bar },
        ));
    }
    let s_bar = z_bar.sqrt();
    let dof = pd.a.len();
    let mut rows = Vec::with_capacity(2 * dof);
    for i in 0..dof {
        for (relation, bound) in [
            (Relation::Ge, bounds.lower[i]),
            (Relation::Le, bounds.upper[i]),
        ] {
            rows.push(ProjectedConstraintRow {
                coeff_z: pd.b[i] + pd.d[i] / (2.0 * s_bar),
                coeff_zp: pd.a[i],
                coeff_zpp: 0.0,
                coeff_sqrtz: 0.0,
                constant: pd.c[i] + pd.d[i] * 0.5 * s_bar - bound,
                relation,
                kind: projection::ConstraintKind::Torque,
                joint: i,
                sigma: pd.sigma,
            });
        }
    }
    Ok(rows)
}
