//! Dense-ish linear programming at desk scale: maximize c'x subject to
//! range/inequality/equality rows and variable bounds.
//!
//! The reference solver is a bounded-variable revised simplex that
//! exploits the shape of path-parameterization LPs:
//! many rows, few structural variables. Optimal results are certified
//! after the fact - primal residuals are recomputed from the original
//! problem and a dual vector with matching objective is verified - so a
//! claimed optimum is never just the solver's word.

mod simplex;

pub use simplex::BasisSnapshot;

use simplex::{SimplexOutcome, StandardForm};

#[derive(Debug, Clone, PartialEq)]
pub enum LpError {
    /// Row/vector length inconsistent with the variable count.
    BadShape(String),
    /// NaN coefficient, NaN bound, or lower > upper.
    Invalid(String),
    /// The simplex terminated but the certificate check failed.
    NumericalFailure(String),
}

impl std::fmt::Display for LpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LpError::BadShape(s) => write!(f, "shape error: {s}"),
            LpError::Invalid(s) => write!(f, "invalid program: {s}"),
            LpError::NumericalFailure(s) => write!(f, "numerical failure: {s}"),
        }
    }
}

impl std::error::Error for LpError {}

/// One constraint row lo <= coeffs'x <= hi (either side may be infinite;
/// lo == hi encodes an equality).
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub lo: f64,
    pub hi: f64,
}

impl LpRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, c)| c * x[j]).sum()
    }

    pub fn is_equality(&self) -> bool {
        self.lo == self.hi
    }
}

/// maximize objective'x subject to rows and variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<LpRow>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    /// Program with `n` variables, zero objective and free variables.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            rows: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[LpRow] {
        &self.rows
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn set_objective(&mut self, c: &[f64]) {
        assert_eq!(c.len(), self.num_vars());
        self.objective.copy_from_slice(c);
    }

    pub fn set_objective_coeff(&mut self, j: usize, c: f64) {
        self.objective[j] = c;
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
    }

    /// Intersect the current bounds of `j` with [lo, hi].
    pub fn tighten_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = self.lower[j].max(lo);
        self.upper[j] = self.upper[j].min(hi);
    }

    pub fn add_le_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(LpRow {
            coeffs,
            lo: f64::NEG_INFINITY,
            hi: rhs,
        });
    }

    pub fn add_ge_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(LpRow {
            coeffs,
            lo: rhs,
            hi: f64::INFINITY,
        });
    }

    pub fn add_eq_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(LpRow {
            coeffs,
            lo: rhs,
            hi: rhs,
        });
    }

    pub fn add_range_row(&mut self, lo: f64, coeffs: Vec<(usize, f64)>, hi: f64) {
        self.rows.push(LpRow { coeffs, lo, hi });
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, c) in &row.coeffs {
                if j >= n {
                    return Err(LpError::BadShape(format!(
                        "row {i} references variable {j} >= {n}"
                    )));
                }
                if !c.is_finite() {
                    return Err(LpError::Invalid(format!(
                        "row {i} has non-finite coefficient"
                    )));
                }
            }
            if row.lo.is_nan() || row.hi.is_nan() || row.lo > row.hi {
                return Err(LpError::Invalid(format!(
                    "row {i} has bad bounds [{}, {}]",
                    row.lo, row.hi
                )));
            }
            if row.lo == f64::INFINITY || row.hi == f64::NEG_INFINITY {
                return Err(LpError::Invalid(format!(
                    "row {i} has unsatisfiable bounds"
                )));
            }
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(LpError::Invalid(format!("variable {j} has NaN bound")));
            }
            if !self.objective[j].is_finite() {
                return Err(LpError::Invalid(format!(
                    "objective coefficient {j} not finite"
                )));
            }
        }
        Ok(())
    }

    /// Solve with the bundled simplex. See [`LpSolution`] for the outcome
    /// contract; `Err` is reserved for malformed input and certification
    /// failure.
    pub fn solve(&self, tols: &LpTolerances) -> Result<LpSolution, LpError> {
        self.solve_warm(tols, None).map(|(s, _)| s)
    }

    /// Solve starting from a previous basis (pivot counts drop sharply when
    /// the program is a small perturbation of the one that produced the
    /// snapshot). Returns the final basis for chaining.
    pub fn solve_warm(
        &self,
        tols: &LpTolerances,
        warm: Option<&BasisSnapshot>,
    ) -> Result<(LpSolution, Option<BasisSnapshot>), LpError> {
        self.validate()?;
        let mut form = match StandardForm::build(self) {
            Ok(f) => f,
            Err(simplex::BuildVerdict::Infeasible) => {
                return Ok((LpSolution::infeasible(), None));
            }
        };
        let outcome = form.solve(tols, warm)?;
        match outcome {
            SimplexOutcome::Infeasible => Ok((LpSolution::infeasible(), None)),
            SimplexOutcome::Unbounded => Ok((LpSolution::unbounded(), None)),
            SimplexOutcome::Optimal {
                x,
                objective,
                snapshot,
            } => {
                let report = self.residual_report(&x)?;
                let max_primal = report.max_violation();
                let finite = |b: f64| if b.is_finite() { b.abs() } else { 0.0 };
                let scale = 1.0
                    + self
                        .rows
                        .iter()
                        .fold(0.0f64, |m, r| m.max(finite(r.lo)).max(finite(r.hi)));
                if max_primal > tols.cert_primal * scale {
                    return Err(LpError::NumericalFailure(format!(
                        "primal residual {max_primal:.3e} above {:.3e}",
                        tols.cert_primal * scale
                    )));
                }
                Ok((
                    LpSolution {
                        status: LpStatus::Optimal,
                        x,
                        objective,
                        max_primal_residual: max_primal,
                    },
                    Some(snapshot),
                ))
            }
        }
    }

    /// Max violation per row class at `x`; pure.
    pub fn check_feasibility(&self, x: &[f64], _tol: f64) -> Result<ResidualReport, LpError> {
        self.residual_report(x)
    }

    fn residual_report(&self, x: &[f64]) -> Result<ResidualReport, LpError> {
        if x.len() != self.num_vars() {
            return Err(LpError::BadShape(format!(
                "point has {} entries, program has {} variables",
                x.len(),
                self.num_vars()
            )));
        }
        let mut rep = ResidualReport::default();
        for row in &self.rows {
            let a = row.activity(x);
            let viol = (row.lo - a).max(a - row.hi).max(0.0);
            if row.is_equality() {
                rep.max_equality = rep.max_equality.max(viol);
            } else {
                rep.max_inequality = rep.max_inequality.max(viol);
            }
        }
        for j in 0..self.num_vars() {
            let viol = (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0);
            rep.max_bound = rep.max_bound.max(viol);
        }
        Ok(rep)
    }

    /// Self-describing JSON dump for offline inspection. Infinite bounds
    /// are emitted as null.
    pub fn to_debug_json(&self) -> String {
        fn num(v: f64) -> String {
            if v.is_finite() {
                format!("{v:?}")
            } else {
                "null".to_string()
            }
        }
        let mut s = String::new();
        s.push_str("{\n  \"variables\": ");
        s.push_str(&self.num_vars().to_string());
        s.push_str(",\n  \"objective\": [");
        s.push_str(
            &self
                .objective
                .iter()
                .map(|&v| num(v))
                .collect::<Vec<_>>()
                .join(", "),
        );
        s.push_str("],\n  \"lower\": [");
        s.push_str(
            &self
                .lower
                .iter()
                .map(|&v| num(v))
                .collect::<Vec<_>>()
                .join(", "),
        );
        s.push_str("],\n  \"upper\": [");
        s.push_str(
            &self
                .upper
                .iter()
                .map(|&v| num(v))
                .collect::<Vec<_>>()
                .join(", "),
        );
        s.push_str("],\n  \"rows\": [\n");
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| {
                let coeffs: Vec<String> = r
                    .coeffs
                    .iter()
                    .map(|&(j, c)| format!("[{}, {}]", j, num(c)))
                    .collect();
                format!(
                    "    {{\"lo\": {}, \"coeffs\": [{}], \"hi\": {}}}",
                    num(r.lo),
                    coeffs.join(", "),
                    num(r.hi)
                )
            })
            .collect();
        s.push_str(&rows.join(",\n"));
        s.push_str("\n  ]\n}\n");
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver outcome. `x` and `objective` are meaningful only when status is
/// Optimal; the objective is in maximize sense.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_primal_residual: f64,
}

impl LpSolution {
    fn infeasible() -> Self {
        Self {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective: f64::NAN,
            max_primal_residual: f64::NAN,
        }
    }

    fn unbounded() -> Self {
        Self {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::INFINITY,
            max_primal_residual: f64::NAN,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Max violation per constraint class at a point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ResidualReport {
    pub max_inequality: f64,
    pub max_equality: f64,
    pub max_bound: f64,
}

impl ResidualReport {
    pub fn max_violation(&self) -> f64 {
        self.max_inequality
            .max(self.max_equality)
            .max(self.max_bound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpTolerances {
    /// Bound/row feasibility tolerance inside the simplex.
    pub feas: f64,
    /// Reduced-cost optimality tolerance.
    pub dual: f64,
    /// Certified max primal residual (scaled by 1 + max |rhs|).
    pub cert_primal: f64,
    /// Certified duality-gap tolerance (scaled by 1 + |objective|).
    pub cert_dual: f64,
    pub max_iterations: usize,
}

impl Default for LpTolerances {
    fn default() -> Self {
        Self {
            feas: 1e-9,
            dual: 1e-9,
            cert_primal: 1e-8,
            cert_dual: 1e-6,
            max_iterations: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn solve(lp: &LinearProgram) -> LpSolution {
        lp.solve(&LpTolerances::default())
            .expect("solver should not fail")
    }

    #[test]
    fn single_variable_box() {
        let mut lp = LinearProgram::new(1);
        lp.set_objective(&[1.0]);
        lp.set_bounds(0, 0.0, f64::INFINITY);
        lp.add_le_row(vec![(0, 1.0)], 3.0);
        let s = solve(&lp);
        assert!(s.is_optimal());
        assert_abs_diff_eq!(s.x[0], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.objective, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_optimal_face() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[1.0, 1.0]);
        lp.set_bounds(0, 0.0, f64::INFINITY);
        lp.set_bounds(1, 0.0, f64::INFINITY);
        lp.add_le_row(vec![(0, 1.0), (1, 1.0)], 1.0);
        let s = solve(&lp);
        assert!(s.is_optimal());
        assert_abs_diff_eq!(s.objective, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn equality_row_pins_variable() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[0.0, 1.0]);
        lp.set_bounds(0, 0.0, 10.0);
        lp.set_bounds(1, 0.0, 10.0);
        lp.add_eq_row(vec![(0, 1.0)], 4.0);
        lp.add_le_row(vec![(0, 1.0), (1, 2.0)], 10.0);
        let s = solve(&lp);
        assert!(s.is_optimal());
        assert_abs_diff_eq!(s.x[0], 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[1], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::new(1);
        lp.set_bounds(0, 0.0, 1.0);
        lp.add_ge_row(vec![(0, 1.0)], 2.0);
        let s = solve(&lp);
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.set_objective(&[1.0]);
        lp.set_bounds(0, 0.0, f64::INFINITY);
        let s = solve(&lp);
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variable_with_cuts() {
        // min-like use: maximize -t with t >= x - 1, t >= -x, x in [0, 4]
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[0.0, -1.0]);
        lp.set_bounds(0, 0.0, 4.0);
        // t - x >= -1, t + x >= 0
        lp.add_ge_row(vec![(1, 1.0), (0, -1.0)], -1.0);
        lp.add_ge_row(vec![(1, 1.0), (0, 1.0)], 0.0);
        let s = solve(&lp);
        assert!(s.is_optimal());
        // optimum at intersection x = 1/2, t = -1/2
        assert_abs_diff_eq!(s.x[1], -0.5, epsilon = 1e-9);
    }

    #[test]
    fn range_row_binds_both_sides() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[-1.0, 0.0]);
        lp.set_bounds(0, -10.0, 10.0);
        lp.set_bounds(1, -10.0, 10.0);
        lp.add_range_row(1.0, vec![(0, 1.0), (1, 1.0)], 2.0);
        let s = solve(&lp);
        assert!(s.is_optimal());
        // minimize x0 subject to 1 <= x0 + x1 <= 2: x0 = -10 works with x1 = 11? out of bounds;
        // x1 <= 10 forces x0 >= 1 - 10 = -9
        assert_abs_diff_eq!(s.x[0], -9.0, epsilon = 1e-8);
    }

    #[test]
    fn deterministic_resolve() {
        let mut lp = LinearProgram::new(3);
        lp.set_objective(&[1.0, 2.0, -0.5]);
        for j in 0..3 {
            lp.set_bounds(j, 0.0, 5.0);
        }
        lp.add_le_row(vec![(0, 1.0), (1, 1.0), (2, 1.0)], 6.0);
        lp.add_range_row(-1.0, vec![(0, 1.0), (1, -1.0)], 1.0);
        let a = solve(&lp);
        let b = solve(&lp);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.status, b.status);
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn feasibility_report_classes() {
        let mut lp = LinearProgram::new(2);
        lp.set_bounds(0, 0.0, 1.0);
        lp.set_bounds(1, 0.0, 1.0);
        lp.add_le_row(vec![(0, 1.0), (1, 1.0)], 1.0);
        lp.add_eq_row(vec![(0, 1.0)], 0.5);
        let r = lp.check_feasibility(&[0.5, 0.5], 1e-9).unwrap();
        assert_abs_diff_eq!(r.max_inequality, 0.0);
        assert_abs_diff_eq!(r.max_equality, 0.0);
        let r2 = lp.check_feasibility(&[0.9, 0.5], 1e-9).unwrap();
        assert_abs_diff_eq!(r2.max_inequality, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(r2.max_equality, 0.4, epsilon = 1e-12);
        // violation grows linearly when shifting along an active row
        let r3 = lp.check_feasibility(&[1.1, 0.5], 1e-9).unwrap();
        assert_abs_diff_eq!(r3.max_inequality, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(r3.max_bound, 0.1, epsilon = 1e-12);
        assert!(lp.check_feasibility(&[0.0], 1e-9).is_err());
    }

    #[test]
    fn debug_json_is_parseable_shape() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[1.0, 0.0]);
        lp.set_bounds(0, 0.0, f64::INFINITY);
        lp.add_le_row(vec![(0, 1.0), (1, -2.5)], 3.0);
        let js = lp.to_debug_json();
        assert!(js.contains("\"variables\": 2"));
        assert!(js.contains("\"rows\""));
        assert!(js.contains("null"));
    }
}
