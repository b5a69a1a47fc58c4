//! JSON run configuration: one file fully determines a solve, so every
//! emitted number can be reproduced from the config alone.

use serde::{Deserialize, Serialize};

use opf_core::dynamics::{ModelKind, RobotModel};
use opf_core::path::JointPath;
use opf_core::problems::seeded_spline_path;
use opf_core::profile::Grid;
use opf_core::projection::JointBounds;
use opf_core::solver::{Bounds, EvalPoints, Mode, OpfProblem, ScpSettings};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub path: PathConfig,
    pub bounds: BoundsConfig,
    pub boundary: BoundaryConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub method: MethodConfig,
    #[serde(default)]
    pub scp: ScpConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    SingleRotor {
        inertia: f64,
        #[serde(default)]
        coulomb: Option<Vec<f64>>,
        #[serde(default)]
        viscous: Option<Vec<f64>>,
    },
    TwoLinkPlanar {
        masses: [f64; 2],
        lengths: [f64; 2],
        #[serde(default)]
        gravity: f64,
        #[serde(default)]
        coulomb: Option<Vec<f64>>,
        #[serde(default)]
        viscous: Option<Vec<f64>>,
    },
    ChainedDecoupled {
        inertias: Vec<f64>,
        #[serde(default)]
        coulomb: Option<Vec<f64>>,
        #[serde(default)]
        viscous: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathConfig {
    Linear {
        from: Vec<f64>,
        to: Vec<f64>,
    },
    Quintic {
        from: Vec<f64>,
        to: Vec<f64>,
    },
    Waypoints {
        waypoints: Vec<Vec<f64>>,
        #[serde(default = "default_path_degree")]
        degree: usize,
    },
    SeededSpline {
        dof: usize,
        waypoints: usize,
        seed: u64,
        amplitude: f64,
    },
}

fn default_path_degree() -> usize {
    5
}

/// Either symmetric limits (plain array) or explicit lower/upper arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundPair {
    Symmetric(Vec<f64>),
    Explicit { lower: Vec<f64>, upper: Vec<f64> },
}

impl BoundPair {
    fn to_joint_bounds(&self) -> JointBounds {
        match self {
            BoundPair::Symmetric(limits) => JointBounds::symmetric(limits.clone()),
            BoundPair::Explicit { lower, upper } => JointBounds::new(lower.clone(), upper.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default)]
    pub velocity: Option<BoundPair>,
    #[serde(default)]
    pub acceleration: Option<BoundPair>,
    #[serde(default)]
    pub jerk: Option<BoundPair>,
    #[serde(default)]
    pub torque: Option<BoundPair>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    #[serde(rename = "z0")]
    pub z_start: f64,
    #[serde(rename = "zT")]
    pub z_end: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N")]
    pub segments: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodConfig {
    Pwl,
    Bspline {
        #[serde(default = "default_bspline_degree")]
        degree: usize,
        #[serde(default = "default_bspline_ctrl")]
        ctrl: usize,
    },
}

fn default_bspline_degree() -> usize {
    3
}

fn default_bspline_ctrl() -> usize {
    61
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig::Pwl
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScpConfig {
    #[serde(default = "d_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "d_eps_z")]
    pub eps_z: f64,
    #[serde(default = "d_tol_objective")]
    pub tol_objective: f64,
    #[serde(default = "d_tol_violation")]
    pub tol_violation: f64,
    #[serde(default = "d_refine")]
    pub refine: usize,
    #[serde(default)]
    pub rho0: Option<f64>,
    #[serde(default = "d_rho_floor")]
    pub rho_floor: f64,
}

fn d_max_iterations() -> usize {
    ScpSettings::default().max_iterations
}
fn d_eps_z() -> f64 {
    ScpSettings::default().eps_z
}
fn d_tol_objective() -> f64 {
    ScpSettings::default().tol_objective
}
fn d_tol_violation() -> f64 {
    ScpSettings::default().tol_violation
}
fn d_refine() -> usize {
    ScpSettings::default().refine
}
fn d_rho_floor() -> f64 {
    ScpSettings::default().rho_floor
}

impl Default for ScpConfig {
    fn default() -> Self {
        let d = ScpSettings::default();
        Self {
            max_iterations: d.max_iterations,
            eps_z: d.eps_z,
            tol_objective: d.tol_objective,
            tol_violation: d.tol_violation,
            refine: d.refine,
            rho0: d.rho0,
            rho_floor: d.rho_floor,
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<String>,
    pub segments: Option<usize>,
    pub degree: Option<usize>,
    pub ctrl: Option<usize>,
    /// enable the config's jerk bounds (without the flag they are ignored)
    pub jerk: bool,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }

    /// Build the solver problem, applying CLI overrides.
    pub fn to_problem(&self, ov: &Overrides) -> Result<OpfProblem, String> {
        let model = self.build_model()?;
        let path = self.build_path(ov.seed)?;
        let segments = ov.segments.unwrap_or(self.grid.segments);
        let grid = Grid::uniform(segments).map_err(|e| e.to_string())?;
        let mode = match ov.method.as_deref() {
            Some("pwl") => Mode::Pwl,
            Some("bspline") => Mode::BSpline {
                degree: ov.degree.unwrap_or(default_bspline_degree()),
                ctrl: ov.ctrl.unwrap_or(default_bspline_ctrl()),
                eval: EvalPoints::Nodes,
            },
            Some(other) => return Err(format!("unknown method '{other}' (pwl | bspline)")),
            None => match &self.method {
                MethodConfig::Pwl => Mode::Pwl,
                MethodConfig::Bspline { degree, ctrl } => Mode::BSpline {
                    degree: ov.degree.unwrap_or(*degree),
                    ctrl: ov.ctrl.unwrap_or(*ctrl),
                    eval: EvalPoints::Nodes,
                },
            },
        };
        let bounds = Bounds {
            velocity: self
                .bounds
                .velocity
                .as_ref()
                .map(BoundPair::to_joint_bounds),
            acceleration: self
                .bounds
                .acceleration
                .as_ref()
                .map(BoundPair::to_joint_bounds),
            jerk: if ov.jerk {
                match &self.bounds.jerk {
                    Some(b) => Some(b.to_joint_bounds()),
                    None => return Err("--jerk requested but the config has no jerk bounds".into()),
                }
            } else {
                None
            },
            torque: self.bounds.torque.as_ref().map(BoundPair::to_joint_bounds),
        };
        let problem = OpfProblem {
            model,
            path,
            bounds,
            boundary: (self.boundary.z_start, self.boundary.z_end),
            grid,
            mode,
            scp: ScpSettings {
                max_iterations: self.scp.max_iterations,
                eps_z: self.scp.eps_z,
                tol_objective: self.scp.tol_objective,
                tol_violation: self.scp.tol_violation,
                refine: self.scp.refine,
                rho0: self.scp.rho0,
                rho_floor: self.scp.rho_floor,
            },
        };
        problem.validate().map_err(|e| e.to_string())?;
        Ok(problem)
    }

    fn build_model(&self) -> Result<RobotModel, String> {
        let (kind, coulomb, viscous, dof) = match &self.model {
            ModelConfig::SingleRotor {
                inertia,
                coulomb,
                viscous,
            } => (
                ModelKind::SingleRotor { inertia: *inertia },
                coulomb,
                viscous,
                1,
            ),
            ModelConfig::TwoLinkPlanar {
                masses,
                lengths,
                gravity,
                coulomb,
                viscous,
            } => (
                ModelKind::TwoLinkPlanar {
                    masses: *masses,
                    lengths: *lengths,
                    gravity: *gravity,
                },
                coulomb,
                viscous,
                2,
            ),
            ModelConfig::ChainedDecoupled {
                inertias,
                coulomb,
                viscous,
            } => {
                let n = inertias.len();
                (
                    ModelKind::ChainedDecoupled {
                        inertias: inertias.clone(),
                    },
                    coulomb,
                    viscous,
                    n,
                )
            }
        };
        let coulomb = coulomb.clone().unwrap_or_else(|| vec![0.0; dof]);
        let viscous = viscous.clone().unwrap_or_else(|| vec![0.0; dof]);
        RobotModel::new(kind, coulomb, viscous).map_err(|e| format!("model: {e}"))
    }

    fn build_path(&self, seed_override: Option<u64>) -> Result<JointPath, String> {
        match &self.path {
            PathConfig::Linear { from, to } => {
                JointPath::linear(from.clone(), to.clone()).map_err(|e| format!("path: {e}"))
            }
            PathConfig::Quintic { from, to } => {
                JointPath::quintic_rest_to_rest(from.clone(), to.clone())
                    .map_err(|e| format!("path: {e}"))
            }
            PathConfig::Waypoints { waypoints, degree } => {
                JointPath::spline_through(waypoints, *degree).map_err(|e| format!("path: {e}"))
            }
            PathConfig::SeededSpline {
                dof,
                waypoints,
                seed,
                amplitude,
            } => Ok(seeded_spline_path(
                *dof,
                *waypoints,
                seed_override.unwrap_or(*seed),
                *amplitude,
            )),
        }
    }
}
