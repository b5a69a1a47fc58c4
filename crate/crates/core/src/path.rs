//! Geometric joint paths q(sigma) on sigma in [0, 1] with exact analytic
//! derivatives up to third order, as required by the projected jerk
//! expression.

use nalgebra::DVector;

use crate::bspline::{self, BSplineError, ScalarSpline};

#[derive(Debug, Clone, PartialEq)]
pub enum PathError {
    /// sigma outside [0, 1].
    OutOfDomain(f64),
    /// Spline construction failed.
    Spline(BSplineError),
    /// Waypoint matrix empty or ragged.
    BadWaypoints,
    /// Spline paths need degree >= 3 so the third derivative exists
    /// almost everywhere (>= 5 for a jerk-smooth path).
    DegreeTooLow(usize),
}

impl std::fmt::Display for PathError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PathError::OutOfDomain(s) => write!(f, "sigma = {s} outside [0, 1]"),
            PathError::Spline(e) => write!(f, "spline construction: {e}"),
            PathError::BadWaypoints => write!(f, "waypoints must be non-empty and rectangular"),
            PathError::DegreeTooLow(d) => write!(f, "spline path degree {d} < 3"),
        }
    }
}

impl std::error::Error for PathError {}

impl From<BSplineError> for PathError {
    fn from(e: BSplineError) -> Self {
        PathError::Spline(e)
    }
}

/// Path value with derivatives with respect to sigma.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub q: DVector<f64>,
    pub dq: DVector<f64>,
    pub ddq: DVector<f64>,
    pub dddq: DVector<f64>,
}

#[derive(Debug, Clone)]
enum PathRepr {
    /// q(sigma) = q0 + sigma (qt - q0)
    Linear { q0: DVector<f64>, qt: DVector<f64> },
    /// Rest-to-rest quintic blend q0 -> qt: s(u) = 10u^3 - 15u^4 + 6u^5,
    /// so q' = q'' = 0 at both ends.
    Quintic { q0: DVector<f64>, qt: DVector<f64> },
    /// One clamped interpolating spline per joint over shared parameters.
    Spline {
        joints: Vec<ScalarSpline>,
        degree: usize,
    },
}

/// Immutable geometric joint path; evaluation is pure.
#[derive(Debug, Clone)]
pub struct JointPath {
    dof: usize,
    repr: PathRepr,
}

impl JointPath {
    pub fn linear(q0: Vec<f64>, qt: Vec<f64>) -> Result<Self, PathError> {
        if q0.is_empty() || q0.len() != qt.len() {
            return Err(PathError::BadWaypoints);
        }
        Ok(Self {
            dof: q0.len(),
            repr: PathRepr::Linear {
                q0: DVector::from_vec(q0),
                qt: DVector::from_vec(qt),
            },
        })
    }

    pub fn quintic_rest_to_rest(q0: Vec<f64>, qt: Vec<f64>) -> Result<Self, PathError> {
        if q0.is_empty() || q0.len() != qt.len() {
            return Err(PathError::BadWaypoints);
        }
        Ok(Self {
            dof: q0.len(),
            repr: PathRepr::Quintic {
                q0: DVector::from_vec(q0),
                qt: DVector::from_vec(qt),
            },
        })
    }

    /// Clamped interpolating spline through `waypoints` (rows = waypoints,
    /// entries = joints) at chord-length parameters. Degree 5 keeps q'''
    /// continuous; degree 3 is allowed but is only acceleration-smooth.
    pub fn spline_through(waypoints: &[Vec<f64>], degree: usize) -> Result<Self, PathError> {
        if degree < 3 {
            return Err(PathError::DegreeTooLow(degree));
        }
        let rows = waypoints.len();
        if rows < 2 {
            return Err(PathError::BadWaypoints);
        }
        let dof = waypoints[0].len();
        if dof == 0 || waypoints.iter().any(|w| w.len() != dof) {
            return Err(PathError::BadWaypoints);
        }
        // chord-length parameterization over joint-space distance
        let mut params = vec![0.0; rows];
        for j in 1..rows {
            let d: f64 = (0..dof)
                .map(|i| (waypoints[j][i] - waypoints[j - 1][i]).powi(2))
                .sum::<f64>()
                .sqrt();
            params[j] = params[j - 1] + d.max(1e-9);
        }
        let total = params[rows - 1];
        for p in params.iter_mut() {
            *p /= total;
        }
        let joints = (0..dof)
            .map(|i| {
                let vals: Vec<f64> = waypoints.iter().map(|w| w[i]).collect();
                bspline::interpolate(degree, &params, &vals)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            dof,
            repr: PathRepr::Spline { joints, degree },
        })
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    /// Spline degree, when the path is a spline.
    pub fn spline_degree(&self) -> Option<usize> {
        match &self.repr {
            PathRepr::Spline { degree, .. } => Some(*degree),
            _ => None,
        }
    }

    /// q and its first three sigma-derivatives at `sigma`.
    pub fn evaluate(&self, sigma: f64) -> Result<PathPoint, PathError> {
        let s = domain_clamp(sigma)?;
        Ok(match &self.repr {
            PathRepr::Linear { q0, qt } => {
                let dir = qt - q0;
                PathPoint {
                    q: q0 + &dir * s,
                    dq: dir,
                    ddq: DVector::zeros(self.dof),
                    dddq: DVector::zeros(self.dof),
                }
            }
            PathRepr::Quintic { q0, qt } => {
                let dir = qt - q0;
                let s2 = s * s;
                let s3 = s2 * s;
                let s4 = s3 * s;
                let s5 = s4 * s;
                let b = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
                let db = 30.0 * s2 - 60.0 * s3 + 30.0 * s4;
                let ddb = 60.0 * s - 180.0 * s2 + 120.0 * s3;
                let dddb = 60.0 - 360.0 * s + 360.0 * s2;
                PathPoint {
                    q: q0 + &dir * b,
                    dq: &dir * db,
                    ddq: &dir * ddb,
                    dddq: &dir * dddb,
                }
            }
            PathRepr::Spline { joints, .. } => {
                let mut q = DVector::zeros(self.dof);
                let mut dq = DVector::zeros(self.dof);
                let mut ddq = DVector::zeros(self.dof);
                let mut dddq = DVector::zeros(self.dof);
                // all joints share one knot vector; evaluate the basis once
                let (first, table) = joints[0].knots.basis_with_derivs(s, 3);
                for (i, sp) in joints.iter().enumerate() {
                    let mut acc = [0.0f64; 4];
                    for (off, col) in table[0].iter().enumerate() {
                        let c = sp.coeffs[first + off];
                        acc[0] += c * col;
                        acc[1] += c * table[1][off];
                        acc[2] += c * table[2][off];
                        acc[3] += c * table[3][off];
                    }
                    q[i] = acc[0];
                    dq[i] = acc[1];
                    ddq[i] = acc[2];
                    dddq[i] = acc[3];
                }
                PathPoint { q, dq, ddq, dddq }
            }
        })
    }

    /// Per-derivative continuity classification: maximum one-sided jump of
    /// q', q'' and q''' over interior spline knots plus `samples` uniform
    /// interior points. Analytic representations are smooth by construction
    /// and report zero jumps.
    pub fn smoothness_report(&self, samples: usize) -> SmoothnessReport {
        let samples = samples.max(10);
        let mut max_jump = [0.0f64; 3];
        if let PathRepr::Spline { joints, degree } = &self.repr {
            let knots = joints[0].knots.interior_breakpoints();
            for &t in &knots {
                let right_span = joints[0].knots.find_span(t);
                let left_span = (joints[0].knots.degree()..right_span)
                    .rev()
                    .find(|&sp| joints[0].knots.knots()[sp] < t)
                    .unwrap_or(right_span);
                for sp in joints {
                    let l = sp.eval_derivs_in_span(left_span, t, 3);
                    let r = sp.eval_derivs_in_span(right_span, t, 3);
                    for k in 1..=3 {
                        max_jump[k - 1] = max_jump[k - 1].max((l[k] - r[k]).abs());
                    }
                }
            }
            let _ = degree;
        }
        // uniform samples catch representations without explicit knots;
        // one-sided limits coincide for the analytic kinds, so evaluating
        // on each side of the sample detects nothing unless a jump exists.
        let h = 1e-9;
        for j in 1..samples {
            let s = j as f64 / samples as f64;
            if s - h <= 0.0 || s + h >= 1.0 {
                continue;
            }
            let a = self.evaluate(s - h).expect("in domain");
            let b = self.evaluate(s + h).expect("in domain");
            let scale_step = |d: &DVector<f64>, e: &DVector<f64>| (e - d).abs().max();
            // subtract the expected smooth variation bound 2h*|next deriv|
            let smooth1 = 2.0 * h * a.ddq.abs().max().max(b.ddq.abs().max());
            let smooth2 = 2.0 * h * a.dddq.abs().max().max(b.dddq.abs().max());
            max_jump[0] = max_jump[0].max((scale_step(&a.dq, &b.dq) - smooth1).max(0.0));
            max_jump[1] = max_jump[1].max((scale_step(&a.ddq, &b.ddq) - smooth2).max(0.0));
        }
        SmoothnessReport {
            max_jump_dq: max_jump[0],
            max_jump_ddq: max_jump[1],
            max_jump_dddq: max_jump[2],
        }
    }
}

/// Maximum measured one-sided jumps of the first three derivatives. A
/// derivative order counts as continuous when its jump is below 1e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessReport {
    pub max_jump_dq: f64,
    pub max_jump_ddq: f64,
    pub max_jump_dddq: f64,
}

pub const CONTINUITY_TOL: f64 = 1e-8;

impl SmoothnessReport {
    /// Highest derivative order k (0..=3) such that all derivatives through
    /// order k are continuous; q itself is always continuous here.
    pub fn continuous_order(&self) -> usize {
        let jumps = [self.max_jump_dq, self.max_jump_ddq, self.max_jump_dddq];
        let mut order = 0;
        for j in jumps {
            if j < CONTINUITY_TOL {
                order += 1;
            } else {
                break;
            }
        }
        order
    }
}

fn domain_clamp(sigma: f64) -> Result<f64, PathError> {
    if !sigma.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&sigma) {
        return Err(PathError::OutOfDomain(sigma));
    }
    Ok(sigma.clamp(0.0, 1.0))
}
