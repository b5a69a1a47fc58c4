//! Sub-time-optimal path following for robotic manipulators.
//!
//! Given a geometric joint path q(sigma) and joint-space limits, the
//! solvers here maximize the squared path speed z(sigma) = sigma_dot^2
//! along the path. In the decision function z the discretized problem is
//! linear (the 1/sqrt(z) singularity of the classic minimum-time objective
//! never appears), so a piecewise-linear or B-spline ansatz leads to a
//! plain LP; jerk limits and viscous friction enter through a sequential
//! convex programming loop around that LP.
//!
//! The crate keeps its certification machinery next to the solvers:
//! phase-plane integration, an exhaustive dynamic program and a
//! cutting-plane minimum-time solver provide independent optimality
//! cross-checks at desk scale.

pub mod bspline;
pub mod dynamics;
pub mod lp;
pub mod numeric;
pub mod oracle;
pub mod path;
pub mod problems;
pub mod profile;
pub mod projection;
pub mod solver;
pub mod timing;

pub use dynamics::{ModelKind, RobotModel};
pub use path::JointPath;
pub use profile::{Grid, SpeedProfile, SpeedProfileBSpline, SpeedProfilePwl};
pub use projection::JointBounds;
