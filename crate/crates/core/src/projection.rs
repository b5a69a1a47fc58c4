//! Projection of the manipulator dynamics and kinematic limits onto a
//! fixed path.
//!
//! Along q(sigma) with squared path speed z = sigma_dot^2:
//!
//! ```text
//! qd   = q' sqrt(z)
//! qdd  = q'' z + 1/2 q' z'
//! qddd = (q''' z + 3/2 q'' z' + 1/2 q' z'') sqrt(z)
//! ```
//!
//! Substituting the first two into the equations of motion collects the
//! joint torque as
//!
//! ```text
//! tau = a(sigma) z' + b(sigma) z + c(sigma) + d(sigma) sqrt(z)
//! a = 1/2 M q',  b = M q'' + coriolis(q, q'),  c = gravity + coulomb sign(q'),
//! d = viscous .* q'
//! ```
//!
//! which every constraint row in this module is derived from. The defining
//! consistency identity (`tau` above equals full inverse dynamics at the
//! corresponding joint state) is what the tests pin down.

use nalgebra::DVector;

use crate::dynamics::{sign0, RobotModel};
use crate::path::{JointPath, PathError, PathPoint};

/// Floor for linearization points; sqrt(z) is evaluated at z >= EPS_Z.
pub const EPS_Z: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionError {
    Path(PathError),
    /// Velocity bounds must straddle zero per joint.
    InfeasibleVelocityBounds {
        joint: usize,
        lower: f64,
        upper: f64,
    },
    /// Jerk/viscous rows need a linearization point z_bar >= EPS_Z.
    LinearizationFloor {
        z_bar: f64,
    },
    /// Viscous friction present but no linearization point supplied.
    MissingLinearization,
    /// Bound vector length != dof.
    BadDimension {
        expected: usize,
        got: usize,
    },
}

impl std::fmt::Display for ProjectionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProjectionError::Path(e) => write!(f, "{e}"),
            ProjectionError::InfeasibleVelocityBounds { joint, lower, upper } => write!(
                f,
                "velocity bounds for joint {joint} must satisfy lower <= 0 <= upper, got [{lower}, {upper}]"
            ),
            ProjectionError::LinearizationFloor { z_bar } => {
                write!(f, "linearization point {z_bar} below floor {EPS_Z}")
            }
            ProjectionError::MissingLinearization => {
                write!(f, "viscous friction requires a linearization point")
            }
            ProjectionError::BadDimension { expected, got } => {
                write!(f, "expected {expected} bounds, got {got}")
            }
        }
    }
}

impl std::error::Error for ProjectionError {}

impl From<PathError> for ProjectionError {
    fn from(e: PathError) -> Self {
        ProjectionError::Path(e)
    }
}

/// Coefficients of the path-projected equations of motion at one sigma.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedDynamics {
    pub sigma: f64,
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: DVector<f64>,
}

impl ProjectedDynamics {
    /// Torque predicted by the projected coefficients at (z, z').
    pub fn torque(&self, z: f64, zp: f64) -> DVector<f64> {
        &self.a * zp + &self.b * z + &self.c + &self.d * z.max(0.0).sqrt()
    }
}

/// tau = a z' + b z + c + d sqrt(z) at `sigma`; the coefficients satisfy
/// the consistency identity against full inverse dynamics for all z >= 0
/// (z > 0 when Coulomb friction is present, because sign(0) = 0).
pub fn project_dynamics(
    model: &RobotModel,
    path: &JointPath,
    sigma: f64,
) -> Result<ProjectedDynamics, ProjectionError> {
    let p = path.evaluate(sigma)?;
    Ok(project_dynamics_at(model, &p, sigma))
}

/// Same as [`project_dynamics`] from an already-evaluated path point.
pub fn project_dynamics_at(model: &RobotModel, p: &PathPoint, sigma: f64) -> ProjectedDynamics {
    let m = model.mass_matrix(&p.q);
    let a = 0.5 * (&m * &p.dq);
    let b = &m * &p.ddq + model.coriolis(&p.q, &p.dq);
    let mut c = model.gravity_torque(&p.q);
    let mut d = DVector::zeros(model.dof());
    for i in 0..model.dof() {
        c[i] += model.coulomb()[i] * sign0(p.dq[i]);
        d[i] = model.viscous()[i] * p.dq[i];
    }
    ProjectedDynamics { sigma, a, b, c, d }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// row value <= 0
    Le,
    /// row value >= 0
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    VelocitySq,
    Acceleration,
    Jerk,
    Torque,
    Nonnegativity,
}

/// One scalar constraint at a fixed sigma, affine in (z, z', z'') plus an
/// optional exact sqrt(z) term:
///
/// value(z, z', z'') = coeff_z z + coeff_zp z' + coeff_zpp z''
///                   + coeff_sqrtz sqrt(z) + constant  (relation)  0
///
/// Only exact-form torque rows carry coeff_sqrtz != 0 (it equals d_i);
/// the LP-facing builders fold the sqrt term into its tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedConstraintRow {
    pub coeff_z: f64,
    pub coeff_zp: f64,
    pub coeff_zpp: f64,
    pub coeff_sqrtz: f64,
    pub constant: f64,
    pub relation: Relation,
    pub kind: ConstraintKind,
    pub joint: usize,
    pub sigma: f64,
}

impl ProjectedConstraintRow {
    pub fn value(&self, z: f64, zp: f64, zpp: f64) -> f64 {
        self.coeff_z * z
            + self.coeff_zp * zp
            + self.coeff_zpp * zpp
            + self.coeff_sqrtz * z.max(0.0).sqrt()
            + self.constant
    }

    /// Signed violation: positive when the row is broken at (z, z', z'').
    pub fn violation(&self, z: f64, zp: f64, zpp: f64) -> f64 {
        let v = self.value(z, zp, zpp);
        match self.relation {
            Relation::Le => v.max(0.0),
            Relation::Ge => (-v).max(0.0),
        }
    }
}

/// Lower/upper joint bound pair for one constraint family.
#[derive(Debug, Clone, PartialEq)]
pub struct JointBounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl JointBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Self {
            lower: DVector::from_vec(lower),
            upper: DVector::from_vec(upper),
        }
    }

    /// Symmetric bounds [-limit, +limit].
    pub fn symmetric(limits: Vec<f64>) -> Self {
        let upper = DVector::from_vec(limits);
        Self {
            lower: -&upper,
            upper,
        }
    }

    pub fn dof(&self) -> usize {
        self.lower.len()
    }

    fn check_dof(&self, dof: usize) -> Result<(), ProjectionError> {
        if self.dof() != dof {
            return Err(ProjectionError::BadDimension {
                expected: dof,
                got: self.dof(),
            });
        }
        Ok(())
    }
}

/// Squared velocity rows at `sigma`: z <= (bound_i / q'_i)^2 per joint,
/// taking the upper bound when q'_i > 0 and the lower bound when q'_i < 0.
/// Joints with q'_i = 0 contribute no row.
pub fn velocity_rows(
    path: &JointPath,
    sigma: f64,
    bounds: &JointBounds,
) -> Result<Vec<ProjectedConstraintRow>, ProjectionError> {
    bounds.check_dof(path.dof())?;
    for i in 0..bounds.dof() {
        if bounds.lower[i] > 0.0 || bounds.upper[i] < 0.0 {
            return Err(ProjectionError::InfeasibleVelocityBounds {
                joint: i,
                lower: bounds.lower[i],
                upper: bounds.upper[i],
            });
        }
    }
    let p = path.evaluate(sigma)?;
    let mut rows = Vec::new();
    for i in 0..path.dof() {
        let dq = p.dq[i];
        if dq == 0.0 {
            continue;
        }
        let bound = if dq > 0.0 {
            bounds.upper[i]
        } else {
            bounds.lower[i]
        };
        let cap = (bound / dq).powi(2);
        rows.push(ProjectedConstraintRow {
            coeff_z: 1.0,
            coeff_zp: 0.0,
            coeff_zpp: 0.0,
            coeff_sqrtz: 0.0,
            constant: -cap,
            relation: Relation::Le,
            kind: ConstraintKind::VelocitySq,
            joint: i,
            sigma,
        });
    }
    Ok(rows)
}

/// Acceleration rows at `sigma`: lower_i <= q''_i z + 1/2 q'_i z' <=
/// upper_i, emitted as a (Ge, Le) pair per joint.
pub fn acceleration_rows(
    path: &JointPath,
    sigma: f64,
    bounds: &JointBounds,
) -> Result<Vec<ProjectedConstraintRow>, ProjectionError> {
    bounds.check_dof(path.dof())?;
    let p = path.evaluate(sigma)?;
    let mut rows = Vec::with_capacity(2 * path.dof());
    for i in 0..path.dof() {
        for (relation, bound) in [
            (Relation::Ge, bounds.lower[i]),
            (Relation::Le, bounds.upper[i]),
        ] {
            rows.push(ProjectedConstraintRow {
                coeff_z: p.ddq[i],
                coeff_zp: 0.5 * p.dq[i],
                coeff_zpp: 0.0,
                coeff_sqrtz: 0.0,
                constant: -bound,
                relation,
                kind: ConstraintKind::Acceleration,
                joint: i,
                sigma,
            });
        }
    }
    Ok(rows)
}

/// Linearization point for the nonconvex sqrt(z) factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinPoint {
    pub z: f64,
    pub zp: f64,
    pub zpp: f64,
}

/// Jerk rows at `sigma`, linearized around `lin`.
///
/// The exact jerk (A z-affine) * sqrt(z) with
/// A(z, z', z'') = q''' z + 3/2 q'' z' + 1/2 q' z'' is replaced by its
/// first-order expansion at (z_bar, z_bar', z_bar''):
///
/// ```text
/// row = s_bar A(z, z', z'') + A_bar (z - z_bar) / (2 s_bar),  s_bar = sqrt(z_bar)
/// ```
///
/// which agrees with the exact jerk at the expansion point.
pub fn jerk_rows(
    path: &JointPath,
    sigma: f64,
    bounds: &JointBounds,
    lin: LinPoint,
) -> Result<Vec<ProjectedConstraintRow>, ProjectionError> {
    bounds.check_dof(path.dof())?;
    if lin.z < EPS_Z {
        return Err(ProjectionError::LinearizationFloor { z_bar: lin.z });
    }
    let p = path.evaluate(sigma)?;
    let s_bar = lin.z.sqrt();
    let mut rows = Vec::with_capacity(2 * path.dof());
    for i in 0..path.dof() {
        let a_bar = p.dddq[i] * lin.z + 1.5 * p.ddq[i] * lin.zp + 0.5 * p.dq[i] * lin.zpp;
        let coeff_z = s_bar * p.dddq[i] + a_bar / (2.0 * s_bar);
        let coeff_zp = 1.5 * s_bar * p.ddq[i];
        let coeff_zpp = 0.5 * s_bar * p.dq[i];
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
                kind: ConstraintKind::Jerk,
                joint: i,
                sigma,
            });
        }
    }
    Ok(rows)
}

/// Exact jerk value per joint at (sigma, z, z', z''), equation form
/// (q''' z + 3/2 q'' z' + 1/2 q' z'') sqrt(z).
pub fn exact_jerk(p: &PathPoint, z: f64, zp: f64, zpp: f64) -> DVector<f64> {
    let s = z.max(0.0).sqrt();
    let mut out = DVector::zeros(p.q.len());
    for i in 0..p.q.len() {
        out[i] = (p.dddq[i] * z + 1.5 * p.ddq[i] * zp + 0.5 * p.dq[i] * zpp) * s;
    }
    out
}

/// Torque rows at `sigma`. When the model is free of viscous friction the
/// rows are exactly affine; otherwise the sqrt(z) term is replaced by its
/// tangent at `lin_z` (required, >= EPS_Z).
pub fn torque_rows(
    model: &RobotModel,
    path: &JointPath,
    sigma: f64,
    bounds: &JointBounds,
    lin_z: Option<f64>,
) -> Result<Vec<ProjectedConstraintRow>, ProjectionError> {
    bounds.check_dof(model.dof())?;
    let pd = project_dynamics(model, path, sigma)?;
    let has_d = pd.d.iter().any(|&di| di != 0.0);
    let (sqrt_to_z, sqrt_to_const) = if has_d {
        let z_bar = lin_z.ok_or(ProjectionError::MissingLinearization)?;
        if z_bar < EPS_Z {
            return Err(ProjectionError::LinearizationFloor { z_bar });
        }
        let s_bar = z_bar.sqrt();
        // sqrt(z) ~ s_bar + (z - z_bar)/(2 s_bar) = z/(2 s_bar) + s_bar/2
        (1.0 / (2.0 * s_bar), 0.5 * s_bar)
    } else {
        (0.0, 0.0)
    };
    let mut rows = Vec::with_capacity(2 * model.dof());
    for i in 0..model.dof() {
        for (relation, bound) in [
            (Relation::Ge, bounds.lower[i]),
            (Relation::Le, bounds.upper[i]),
        ] {
            rows.push(ProjectedConstraintRow {
                coeff_z: pd.b[i] + pd.d[i] * sqrt_to_z,
                coeff_zp: pd.a[i],
                coeff_zpp: 0.0,
                coeff_sqrtz: 0.0,
                constant: pd.c[i] + pd.d[i] * sqrt_to_const - bound,
                relation,
                kind: ConstraintKind::Torque,
                joint: i,
                sigma,
            });
        }
    }
    Ok(rows)
}

/// Exact-form torque rows keeping the sqrt(z) coefficient (= d_i). Used by
/// violation checks and by the tangency tests; not LP-representable when
/// d != 0.
pub fn torque_rows_exact(
    model: &RobotModel,
    path: &JointPath,
    sigma: f64,
    bounds: &JointBounds,
) -> Result<Vec<ProjectedConstraintRow>, ProjectionError> {
    bounds.check_dof(model.dof())?;
    let pd = project_dynamics(model, path, sigma)?;
    let mut rows = Vec::with_capacity(2 * model.dof());
    for i in 0..model.dof() {
        for (relation, bound) in [
            (Relation::Ge, bounds.lower[i]),
            (Relation::Le, bounds.upper[i]),
        ] {
            rows.push(ProjectedConstraintRow {
                coeff_z: pd.b[i],
                coeff_zp: pd.a[i],
                coeff_zpp: 0.0,
                coeff_sqrtz: pd.d[i],
                constant: pd.c[i] - bound,
                relation,
                kind: ConstraintKind::Torque,
                joint: i,
                sigma,
            });
        }
    }
    Ok(rows)
}
