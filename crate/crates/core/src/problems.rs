//! Shipped synthetic problems: every numeric experiment in the tests, the
//! acceptance suite and the example configs is generated from here, so a
//! result can always be traced back to one constructor call and a seed.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{ModelKind, RobotModel};
use crate::path::JointPath;
use crate::profile::Grid;
use crate::projection::JointBounds;
use crate::solver::{Bounds, Mode, OpfProblem, ScpSettings};

/// 1-DOF rest-to-rest problem with |qdd| <= 1 on the unit linear path.
/// The optimum is the triangular profile z = min(2 sigma, 2 (1 - sigma))
/// with terminal time 2.
pub fn triangular_1dof(n: usize) -> OpfProblem {
    OpfProblem {
        model: RobotModel::frictionless(ModelKind::SingleRotor { inertia: 1.0 }),
        path: JointPath::linear(vec![0.0], vec![1.0]).expect("valid path"),
        bounds: Bounds {
            acceleration: Some(JointBounds::symmetric(vec![1.0])),
            ..Bounds::default()
        },
        boundary: (0.0, 0.0),
        grid: Grid::uniform(n).expect("valid grid"),
        mode: Mode::Pwl,
        scp: ScpSettings::default(),
    }
}

/// 1-DOF problem capped only by |qd| <= 2 with free boundary speed 4:
/// the box optimum z = 4 everywhere.
pub fn velocity_only_1dof(n: usize) -> OpfProblem {
    OpfProblem {
        model: RobotModel::frictionless(ModelKind::SingleRotor { inertia: 1.0 }),
        path: JointPath::linear(vec![0.0], vec![1.0]).expect("valid path"),
        bounds: Bounds {
            velocity: Some(JointBounds::symmetric(vec![2.0])),
            ..Bounds::default()
        },
        boundary: (4.0, 4.0),
        grid: Grid::uniform(n).expect("valid grid"),
        mode: Mode::Pwl,
        scp: ScpSettings::default(),
    }
}

/// Single rotor with dominant viscous friction: exact torque
/// 0.05 z' + 2 sqrt(z) <= 1 forces an interior plateau at z = 0.25.
pub fn viscous_rotor(n: usize) -> OpfProblem {
    OpfProblem {
        model: RobotModel::new(
            ModelKind::SingleRotor { inertia: 0.1 },
            vec![0.0],
            vec![2.0],
        )
        .expect("valid model"),
        path: JointPath::linear(vec![0.0], vec![1.0]).expect("valid path"),
        bounds: Bounds {
            torque: Some(JointBounds::symmetric(vec![1.0])),
            ..Bounds::default()
        },
        boundary: (0.0, 0.0),
        grid: Grid::uniform(n).expect("valid grid"),
        mode: Mode::Pwl,
        scp: ScpSettings::default(),
    }
}

/// Stand-in "arbitrary joint path": a 6-DOF quintic spline through 8
/// seeded waypoints. The seed is fixed so every run sees the same path.
pub fn path_a_prime() -> JointPath {
    seeded_spline_path(6, 8, 99, 1.3)
}

/// Degree-5 interpolating spline through `waypoints` seeded random
/// waypoints with entries in [-amplitude, amplitude].
pub fn seeded_spline_path(dof: usize, waypoints: usize, seed: u64, amplitude: f64) -> JointPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wps: Vec<Vec<f64>> = (0..waypoints)
        .map(|_| {
            (0..dof)
                .map(|_| rng.random_range(-amplitude..amplitude))
                .collect()
        })
        .collect();
    JointPath::spline_through(&wps, 5).expect("seeded spline is well posed")
}

/// Inertias of the 6-DOF decoupled test robot.
pub const PATH_A_INERTIAS: [f64; 6] = [1.2, 1.0, 0.8, 0.5, 0.3, 0.2];
/// Per-joint torque caps; mixed ratios to the inertias so that torque
/// rows bind on some joints and acceleration rows on others.
pub const PATH_A_TORQUE: [f64; 6] = [7.2, 10.0, 5.6, 6.0, 2.7, 1.6];
/// Symmetric jerk caps used when the jerk-limited variant is requested.
pub const PATH_A_JERK: [f64; 6] = [75.0, 75.0, 75.0, 75.0, 75.0, 75.0];

/// The 6-DOF chained-decoupled problem on the seeded arbitrary path:
/// velocity, acceleration and torque bounds, rest-to-rest. With
/// `with_jerk` the (active) jerk caps are added, which routes the solve
/// through SCP.
pub fn path_a_prime_problem(n: usize, mode: Mode, with_jerk: bool) -> OpfProblem {
    OpfProblem {
        model: RobotModel::frictionless(ModelKind::ChainedDecoupled {
            inertias: PATH_A_INERTIAS.to_vec(),
        }),
        path: path_a_prime(),
        bounds: Bounds {
            velocity: Some(JointBounds::symmetric(vec![2.5; 6])),
            acceleration: Some(JointBounds::symmetric(vec![8.0; 6])),
            jerk: with_jerk.then(|| JointBounds::symmetric(PATH_A_JERK.to_vec())),
            torque: Some(JointBounds::symmetric(PATH_A_TORQUE.to_vec())),
        },
        boundary: (0.0, 0.0),
        grid: Grid::uniform(n).expect("valid grid"),
        mode,
        scp: ScpSettings::default(),
    }
}

/// Seeded two-link instance with gravity on a degree-5 spline path whose
/// chord parameterization keeps q' nonzero at the ends (so velocity caps
/// stay finite everywhere); torque bounds are sized to clear the static
/// gravity torque with margin.
pub fn two_link_instance(seed: u64, n: usize) -> OpfProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masses = [rng.random_range(0.8..1.4), rng.random_range(0.6..1.1)];
    let lengths = [rng.random_range(0.8..1.2), rng.random_range(0.7..1.1)];
    let g = 9.81;
    // static gravity torque bounds over the whole workspace
    let g1_max = (masses[0] + masses[1]) * g * lengths[0] + masses[1] * g * lengths[1];
    let g2_max = masses[1] * g * lengths[1];
    OpfProblem {
        model: RobotModel::frictionless(ModelKind::TwoLinkPlanar {
            masses,
            lengths,
            gravity: g,
        }),
        path: seeded_spline_path(2, 6, seed.wrapping_mul(0x9e37_79b9).wrapping_add(17), 1.2),
        bounds: Bounds {
            velocity: Some(JointBounds::symmetric(vec![3.0, 3.0])),
            acceleration: Some(JointBounds::symmetric(vec![12.0, 12.0])),
            jerk: None,
            torque: Some(JointBounds::symmetric(vec![1.6 * g1_max, 1.8 * g2_max])),
        },
        boundary: (0.0, 0.0),
        grid: Grid::uniform(n).expect("valid grid"),
        mode: Mode::Pwl,
        scp: ScpSettings::default(),
    }
}

/// Chained-decoupled 3-DOF problem on a seeded spline path.
pub fn decoupled_spline_problem(n: usize) -> OpfProblem {
    OpfProblem {
        model: RobotModel::frictionless(ModelKind::ChainedDecoupled {
            inertias: vec![1.0, 0.6, 0.3],
        }),
        path: seeded_spline_path(3, 6, 0xBEE5, 1.2),
        bounds: Bounds {
            velocity: Some(JointBounds::symmetric(vec![2.0, 2.0, 2.5])),
            acceleration: Some(JointBounds::symmetric(vec![6.0, 7.0, 9.0])),
            jerk: None,
            torque: Some(JointBounds::symmetric(vec![5.0, 3.5, 2.4])),
        },
        boundary: (0.0, 0.0),
        grid: Grid::uniform(n).expect("valid grid"),
        mode: Mode::Pwl,
        scp: ScpSettings::default(),
    }
}

/// Single rotor limited by velocity and torque.
pub fn rotor_velocity_torque(n: usize) -> OpfProblem {
    OpfProblem {
        model: RobotModel::frictionless(ModelKind::SingleRotor { inertia: 1.0 }),
        path: JointPath::linear(vec![0.0], vec![1.0]).expect("valid path"),
        bounds: Bounds {
            velocity: Some(JointBounds::symmetric(vec![1.5])),
            torque: Some(JointBounds::symmetric(vec![1.0])),
            ..Bounds::default()
        },
        boundary: (0.0, 0.0),
        grid: Grid::uniform(n).expect("valid grid"),
        mode: Mode::Pwl,
        scp: ScpSettings::default(),
    }
}

/// The five velocity/acceleration/torque agreement problems used to
/// compare the speed-maximizing route against the conventional
/// minimum-time oracles.
pub fn agreement_problems(n: usize) -> Vec<(&'static str, OpfProblem)> {
    vec![
        ("triangular-1dof", triangular_1dof(n)),
        ("rotor-vel-torque", rotor_velocity_torque(n)),
        ("two-link-gravity", two_link_instance(4, n)),
        ("decoupled-spline-3dof", decoupled_spline_problem(n)),
        (
            "path-a-prime-6dof",
            path_a_prime_problem(n, Mode::Pwl, false),
        ),
    ]
}
