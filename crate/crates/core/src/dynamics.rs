//! Manipulator equations of motion for a small family of analytic test
//! models:
//!
//! ```text
//! M(q) qdd + h(q, qd) = tau,    h = coriolis + gravity + coulomb*sign(qd) + viscous*qd
//! ```
//!
//! Every model kind has closed-form mass matrix, Coriolis/centrifugal and
//! gravity terms, so downstream quantities can be checked against hand
//! derivations.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// Negative Coulomb or viscous coefficient.
    NegativeFriction,
    /// Parameter vector length does not match the model kind.
    BadDimension { expected: usize, got: usize },
    /// Non-positive inertia or link parameter.
    NonPositiveParameter,
}

impl std::fmt::Display for ModelError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelError::NegativeFriction => write!(f, "friction coefficients must be >= 0"),
            ModelError::BadDimension { expected, got } => {
                write!(f, "expected {expected} entries, got {got}")
            }
            ModelError::NonPositiveParameter => write!(f, "inertial parameters must be > 0"),
        }
    }
}

impl std::error::Error for ModelError {}

/// Kind-specific inertial parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// Single actuated rotor with constant inertia (kg m^2). No gravity
    /// moment (balanced rotor).
    SingleRotor { inertia: f64 },
    /// Planar 2R arm with point masses at the link ends, moving in a
    /// vertical plane. `gravity` is the gravitational acceleration; set it
    /// to zero for a horizontal arm.
    TwoLinkPlanar {
        masses: [f64; 2],
        lengths: [f64; 2],
        gravity: f64,
    },
    /// n decoupled joints with constant diagonal mass matrix and no
    /// configuration-dependent terms. Useful when an analytic optimum of a
    /// downstream problem is wanted.
    ChainedDecoupled { inertias: Vec<f64> },
}

/// Immutable manipulator model; shareable across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    kind: ModelKind,
    coulomb: DVector<f64>,
    viscous: DVector<f64>,
}

impl RobotModel {
    pub fn new(kind: ModelKind, coulomb: Vec<f64>, viscous: Vec<f64>) -> Result<Self, ModelError> {
        let dof = match &kind {
            ModelKind::SingleRotor { inertia } => {
                if *inertia <= 0.0 {
                    return Err(ModelError::NonPositiveParameter);
                }
                1
            }
            ModelKind::TwoLinkPlanar {
                masses, lengths, ..
            } => {
                if masses.iter().chain(lengths.iter()).any(|&p| p <= 0.0) {
                    return Err(ModelError::NonPositiveParameter);
                }
                2
            }
            ModelKind::ChainedDecoupled { inertias } => {
                if inertias.is_empty() || inertias.iter().any(|&j| j <= 0.0) {
                    return Err(ModelError::NonPositiveParameter);
                }
                inertias.len()
            }
        };
        if coulomb.len() != dof {
            return Err(ModelError::BadDimension {
                expected: dof,
                got: coulomb.len(),
            });
        }
        if viscous.len() != dof {
            return Err(ModelError::BadDimension {
                expected: dof,
                got: viscous.len(),
            });
        }
        if coulomb.iter().chain(viscous.iter()).any(|&c| c < 0.0) {
            return Err(ModelError::NegativeFriction);
        }
        Ok(Self {
            kind,
            coulomb: DVector::from_vec(coulomb),
            viscous: DVector::from_vec(viscous),
        })
    }

    /// Frictionless convenience constructor.
    pub fn frictionless(kind: ModelKind) -> Self {
        let dof = match &kind {
            ModelKind::SingleRotor { .. } => 1,
            ModelKind::TwoLinkPlanar { .. } => 2,
            ModelKind::ChainedDecoupled { inertias } => inertias.len(),
        };
        Self::new(kind, vec![0.0; dof], vec![0.0; dof]).expect("valid parameters")
    }

    pub fn dof(&self) -> usize {
        self.coulomb.len()
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn coulomb(&self) -> &DVector<f64> {
        &self.coulomb
    }

    pub fn viscous(&self) -> &DVector<f64> {
        &self.viscous
    }

    pub fn has_viscous(&self) -> bool {
        self.viscous.iter().any(|&v| v > 0.0)
    }

    /// Mass matrix M(q); symmetric positive definite.
    pub fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            ModelKind::SingleRotor { inertia } => DMatrix::from_element(1, 1, *inertia),
            ModelKind::TwoLinkPlanar {
                masses: [m1, m2],
                lengths: [l1, l2],
                ..
            } => {
                let c2 = q[1].cos();
                let m11 = (m1 + m2) * l1 * l1 + m2 * l2 * l2 + 2.0 * m2 * l1 * l2 * c2;
                let m12 = m2 * l2 * l2 + m2 * l1 * l2 * c2;
                let m22 = m2 * l2 * l2;
                DMatrix::from_row_slice(2, 2, &[m11, m12, m12, m22])
            }
            ModelKind::ChainedDecoupled { inertias } => {
                DMatrix::from_diagonal(&DVector::from_column_slice(inertias))
            }
        }
    }

    /// Coriolis/centrifugal torque C(q, qd) qd - exactly quadratic in qd.
    pub fn coriolis(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            ModelKind::SingleRotor { .. } => DVector::zeros(1),
            ModelKind::TwoLinkPlanar {
                masses: [_, m2],
                lengths: [l1, l2],
                ..
            } => {
                let hc = -m2 * l1 * l2 * q[1].sin();
                DVector::from_vec(vec![
                    hc * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]),
                    -hc * qd[0] * qd[0],
                ])
            }
            ModelKind::ChainedDecoupled { inertias } => DVector::zeros(inertias.len()),
        }
    }

    /// Gravity torque g(q).
    pub fn gravity_torque(&self, q: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            ModelKind::SingleRotor { .. } => DVector::zeros(1),
            ModelKind::TwoLinkPlanar {
                masses: [m1, m2],
                lengths: [l1, l2],
                gravity,
            } => {
                let g = *gravity;
                DVector::from_vec(vec![
                    (m1 + m2) * g * l1 * q[0].cos() + m2 * g * l2 * (q[0] + q[1]).cos(),
                    m2 * g * l2 * (q[0] + q[1]).cos(),
                ])
            }
            ModelKind::ChainedDecoupled { inertias } => DVector::zeros(inertias.len()),
        }
    }

    /// Bias vector h(q, qd) = coriolis + gravity + coulomb sign(qd) +
    /// viscous qd, with sign(0) = 0.
    pub fn bias_forces(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        let mut h = self.coriolis(q, qd) + self.gravity_torque(q);
        for i in 0..self.dof() {
            h[i] += self.coulomb[i] * sign0(qd[i]) + self.viscous[i] * qd[i];
        }
        h
    }

    /// Inverse dynamics tau = M(q) qdd + h(q, qd).
    pub fn inverse_dynamics(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        qdd: &DVector<f64>,
    ) -> DVector<f64> {
        self.mass_matrix(q) * qdd + self.bias_forces(q, qd)
    }
}

/// sign with sign(0) = 0; Coulomb friction stays single-valued at rest.
pub fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_link_unit() -> RobotModel {
        RobotModel::frictionless(ModelKind::TwoLinkPlanar {
            masses: [1.0, 1.0],
            lengths: [1.0, 1.0],
            gravity: 0.0,
        })
    }

    #[test]
    fn single_rotor_mass_matrix_is_inertia() {
        let m = RobotModel::frictionless(ModelKind::SingleRotor { inertia: 1.0 });
        let mm = m.mass_matrix(&DVector::from_vec(vec![0.7]));
        assert_eq!(mm[(0, 0)], 1.0);
    }

    #[test]
    fn two_link_mass_matrix_closed_form_at_right_angle() {
        // point-mass 2R arm, unit masses/lengths, q = (0, pi/2):
        // M = [[3, 1], [1, 1]] from the Lagrangian closed form.
        let m = two_link_unit();
        let q = DVector::from_vec(vec![0.0, std::f64::consts::FRAC_PI_2]);
        let mm = m.mass_matrix(&q);
        assert_abs_diff_eq!(mm[(0, 0)], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mm[(0, 1)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mm[(1, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mm[(1, 1)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn negative_friction_rejected() {
        let bad = RobotModel::new(
            ModelKind::SingleRotor { inertia: 1.0 },
            vec![-0.1],
            vec![0.0],
        );
        assert!(matches!(bad, Err(ModelError::NegativeFriction)));
        let bad = RobotModel::new(
            ModelKind::SingleRotor { inertia: 1.0 },
            vec![0.0],
            vec![-1.0],
        );
        assert!(matches!(bad, Err(ModelError::NegativeFriction)));
        let bad = RobotModel::new(
            ModelKind::SingleRotor { inertia: 0.0 },
            vec![0.0],
            vec![0.0],
        );
        assert!(matches!(bad, Err(ModelError::NonPositiveParameter)));
    }

    #[test]
    fn chained_decoupled_mass_matrix_is_diagonal() {
        let m = RobotModel::frictionless(ModelKind::ChainedDecoupled {
            inertias: vec![2.0, 3.0],
        });
        let mm = m.mass_matrix(&DVector::from_vec(vec![0.4, -1.1]));
        assert_eq!(mm[(0, 0)], 2.0);
        assert_eq!(mm[(1, 1)], 3.0);
        assert_eq!(mm[(0, 1)], 0.0);
    }

    #[test]
    fn bias_is_zero_at_rest_without_gravity() {
        let m = two_link_unit();
        let q = DVector::from_vec(vec![0.3, -0.8]);
        let h = m.bias_forces(&q, &DVector::zeros(2));
        assert_abs_diff_eq!(h.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn single_rotor_friction_sum() {
        let m = RobotModel::new(
            ModelKind::SingleRotor { inertia: 1.0 },
            vec![0.5],
            vec![0.1],
        )
        .unwrap();
        let h = m.bias_forces(&DVector::zeros(1), &DVector::from_vec(vec![2.0]));
        assert_abs_diff_eq!(h[0], 0.7, epsilon = 1e-15);
    }

    #[test]
    fn two_link_gravity_torque_hanging() {
        // q = (0, 0), g = 9.81: g1 = 3 g, g2 = g for unit masses/lengths.
        let m = RobotModel::frictionless(ModelKind::TwoLinkPlanar {
            masses: [1.0, 1.0],
            lengths: [1.0, 1.0],
            gravity: 9.81,
        });
        let h = m.bias_forces(&DVector::zeros(2), &DVector::zeros(2));
        assert_abs_diff_eq!(h[0], 3.0 * 9.81, epsilon = 1e-12);
        assert_abs_diff_eq!(h[1], 9.81, epsilon = 1e-12);
    }

    #[test]
    fn single_rotor_torque_is_inertia_times_acceleration() {
        let m = RobotModel::frictionless(ModelKind::SingleRotor { inertia: 1.0 });
        let tau = m.inverse_dynamics(
            &DVector::zeros(1),
            &DVector::zeros(1),
            &DVector::from_vec(vec![2.0]),
        );
        assert_abs_diff_eq!(tau[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn chained_decoupled_inverse_dynamics_componentwise() {
        let m = RobotModel::new(
            ModelKind::ChainedDecoupled {
                inertias: vec![2.0, 3.0],
            },
            vec![0.0, 0.0],
            vec![0.1, 0.2],
        )
        .unwrap();
        let ones = DVector::from_vec(vec![1.0, 1.0]);
        let tau = m.inverse_dynamics(&DVector::zeros(2), &ones, &ones);
        assert_abs_diff_eq!(tau[0], 2.1, epsilon = 1e-14);
        assert_abs_diff_eq!(tau[1], 3.2, epsilon = 1e-14);
    }

    #[test]
    fn static_frictionless_equilibrium_is_torque_free() {
        let m = two_link_unit();
        let q = DVector::from_vec(vec![1.0, -0.5]);
        let tau = m.inverse_dynamics(&q, &DVector::zeros(2), &DVector::zeros(2));
        assert_abs_diff_eq!(tau.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn mass_matrix_positive_definite_sampled() {
        let m = two_link_unit();
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 * std::f64::consts::PI
        };
        for _ in 0..100 {
            let q = DVector::from_vec(vec![next(), next()]);
            let mm = m.mass_matrix(&q);
            let eig = nalgebra::SymmetricEigen::new(mm.clone());
            assert!(
                eig.eigenvalues.iter().all(|&l| l > 1e-10),
                "M not PD at q = {q}"
            );
        }
    }

    #[test]
    fn energy_rate_matches_joint_power_frictionless() {
        // d/dt (1/2 qd' M qd) == qd' tau along a smooth test motion,
        // checked by central differences of the kinetic energy.
        let m = two_link_unit();
        let motion = |t: f64| {
            let q = DVector::from_vec(vec![(0.9 * t).sin(), (1.7 * t).cos()]);
            let qd = DVector::from_vec(vec![0.9 * (0.9 * t).cos(), -1.7 * (1.7 * t).sin()]);
            let qdd = DVector::from_vec(vec![-0.81 * (0.9 * t).sin(), -2.89 * (1.7 * t).cos()]);
            (q, qd, qdd)
        };
        let kinetic = |t: f64| {
            let (q, qd, _) = motion(t);
            0.5 * (qd.transpose() * m.mass_matrix(&q) * &qd)[(0, 0)]
        };
        let h = 1e-6;
        for &t in &[0.0, 0.4, 1.3, 2.2, 3.0] {
            let (q, qd, qdd) = motion(t);
            let tau = m.inverse_dynamics(&q, &qd, &qdd);
            let power = qd.dot(&tau);
            let fd = (kinetic(t + h) - kinetic(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(power, fd, epsilon = 1e-4 * (1.0 + power.abs()));
        }
    }

    proptest! {
        #[test]
        fn mass_matrix_symmetry(q1 in -6.3f64..6.3, q2 in -6.3f64..6.3) {
            let m = two_link_unit();
            let mm = m.mass_matrix(&DVector::from_vec(vec![q1, q2]));
            let asym = (&mm - mm.transpose()).abs().max();
            prop_assert!(asym < 1e-12);
        }

        #[test]
        fn inverse_dynamics_linear_in_acceleration(
            q1 in -3.0f64..3.0, q2 in -3.0f64..3.0,
            v1 in -2.0f64..2.0, v2 in -2.0f64..2.0,
            a1 in -4.0f64..4.0, a2 in -4.0f64..4.0,
            b1 in -4.0f64..4.0, b2 in -4.0f64..4.0,
        ) {
            let m = two_link_unit();
            let q = DVector::from_vec(vec![q1, q2]);
            let qd = DVector::from_vec(vec![v1, v2]);
            let qa = DVector::from_vec(vec![a1, a2]);
            let qb = DVector::from_vec(vec![b1, b2]);
            let lhs = m.inverse_dynamics(&q, &qd, &(&qa + &qb));
            let rhs = m.inverse_dynamics(&q, &qd, &qa)
                + m.inverse_dynamics(&q, &qd, &qb)
                - m.inverse_dynamics(&q, &qd, &DVector::zeros(2));
            prop_assert!((lhs - rhs).abs().max() < 1e-10);
        }
    }
}
