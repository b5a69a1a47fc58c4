//! Squared-path-speed profiles z(sigma): the decision function of the
//! optimal path following problem, either as piecewise-linear grid values
//! or as a nonnegative clamped B-spline.

use crate::bspline::{BSplineError, KnotVector, ScalarSpline};

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileError {
    /// Grid nodes must start at 0, end at 1 and strictly increase; N >= 2.
    BadGrid,
    /// Negative value beyond tolerance at construction.
    NegativeValue {
        index: usize,
        value: f64,
    },
    ValueCountMismatch {
        expected: usize,
        got: usize,
    },
    Spline(BSplineError),
}

impl std::fmt::Display for ProfileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProfileError::BadGrid => write!(f, "grid must be 0 = s_0 < ... < s_N = 1 with N >= 2"),
            ProfileError::NegativeValue { index, value } => {
                write!(f, "profile value {value} at index {index} below -1e-10")
            }
            ProfileError::ValueCountMismatch { expected, got } => {
                write!(f, "expected {expected} values, got {got}")
            }
            ProfileError::Spline(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ProfileError {}

impl From<BSplineError> for ProfileError {
    fn from(e: BSplineError) -> Self {
        ProfileError::Spline(e)
    }
}

/// Discretization nodes sigma_0 = 0 < ... < sigma_N = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
}

impl Grid {
    /// Uniform grid with `n` segments (N = n, N + 1 nodes).
    pub fn uniform(n: usize) -> Result<Self, ProfileError> {
        if n < 2 {
            return Err(ProfileError::BadGrid);
        }
        let nodes = (0..=n).map(|k| k as f64 / n as f64).collect();
        Ok(Self { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, ProfileError> {
        if nodes.len() < 3
            || nodes[0] != 0.0
            || *nodes.last().unwrap() != 1.0
            || nodes.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(ProfileError::BadGrid);
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of segments N.
    pub fn segments(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn delta(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.nodes[k] + self.nodes[k + 1])
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.segments()).map(|k| self.midpoint(k)).collect()
    }

    /// Segment index containing sigma (last segment for sigma = 1).
    pub fn segment_of(&self, sigma: f64) -> usize {
        let n = self.segments();
        if sigma >= self.nodes[n] {
            return n - 1;
        }
        if sigma <= self.nodes[0] {
            return 0;
        }
        let mut lo = 0;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if sigma < self.nodes[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Nodes plus `refine - 1` equispaced interior points per segment.
    pub fn refined_samples(&self, refine: usize) -> Vec<f64> {
        let r = refine.max(1);
        let mut out = Vec::with_capacity(self.segments() * r + 1);
        for k in 0..self.segments() {
            for j in 0..r {
                out.push(self.nodes[k] + self.delta(k) * j as f64 / r as f64);
            }
        }
        out.push(1.0);
        out
    }
}

/// Piecewise-linear profile: z interpolates the node values, z' is
/// piecewise constant and z'' vanishes inside segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfilePwl {
    grid: Grid,
    values: Vec<f64>,
}

impl SpeedProfilePwl {
    /// Values below -1e-10 are rejected; tiny negative dust is clamped.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, ProfileError> {
        if values.len() != grid.nodes().len() {
            return Err(ProfileError::ValueCountMismatch {
                expected: grid.nodes().len(),
                got: values.len(),
            });
        }
        let mut values = values;
        for (i, v) in values.iter_mut().enumerate() {
            if *v < -1e-10 {
                return Err(ProfileError::NegativeValue {
                    index: i,
                    value: *v,
                });
            }
            *v = v.max(0.0);
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// (z, z', z'') at sigma; z' takes the right-segment slope at interior
    /// nodes and the left slope at sigma = 1.
    pub fn eval(&self, sigma: f64) -> (f64, f64, f64) {
        let k = self.grid.segment_of(sigma);
        let d = self.grid.delta(k);
        let t = (sigma - self.grid.nodes()[k]) / d;
        let z = self.values[k] + (self.values[k + 1] - self.values[k]) * t;
        let zp = (self.values[k + 1] - self.values[k]) / d;
        (z.max(0.0), zp, 0.0)
    }
}

/// B-spline profile: z = sum_i p_i B_i^d with p_i >= 0, so z >= 0 by the
/// convex-hull property, and z(0) = p_0, z(1) = p_n.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfileBSpline {
    spline: ScalarSpline,
}

impl SpeedProfileBSpline {
    pub fn new(knots: KnotVector, control: Vec<f64>) -> Result<Self, ProfileError> {
        if control.len() != knots.num_ctrl() {
            return Err(ProfileError::ValueCountMismatch {
                expected: knots.num_ctrl(),
                got: control.len(),
            });
        }
        let mut control = control;
        for (i, p) in control.iter_mut().enumerate() {
            if *p < -1e-10 {
                return Err(ProfileError::NegativeValue {
                    index: i,
                    value: *p,
                });
            }
            *p = p.max(0.0);
        }
        Ok(Self {
            spline: ScalarSpline::new(knots, control),
        })
    }

    pub fn degree(&self) -> usize {
        self.spline.knots.degree()
    }

    pub fn control_points(&self) -> &[f64] {
        &self.spline.coeffs
    }

    pub fn knots(&self) -> &KnotVector {
        &self.spline.knots
    }

    pub fn eval(&self, sigma: f64) -> (f64, f64, f64) {
        let d = self.spline.eval_derivs(sigma, 2);
        (d[0].max(0.0), d[1], d[2])
    }
}

/// Either profile ansatz behind one evaluation surface.
#[derive(Debug, Clone, PartialEq)]
pub enum SpeedProfile {
    Pwl(SpeedProfilePwl),
    BSpline(SpeedProfileBSpline),
}

impl SpeedProfile {
    /// (z, z', z'') at sigma.
    pub fn eval(&self, sigma: f64) -> (f64, f64, f64) {
        match self {
            SpeedProfile::Pwl(p) => p.eval(sigma),
            SpeedProfile::BSpline(p) => p.eval(sigma),
        }
    }

    pub fn z(&self, sigma: f64) -> f64 {
        self.eval(sigma).0
    }

    /// Breakpoints of the underlying piecewise-polynomial structure
    /// (grid nodes or distinct knots), including both endpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            SpeedProfile::Pwl(p) => p.grid().nodes().to_vec(),
            SpeedProfile::BSpline(p) => {
                let mut out = vec![0.0];
                out.extend(p.knots().interior_breakpoints());
                out.push(1.0);
                out
            }
        }
    }

    /// The decision values: node values for PWL, control points otherwise.
    pub fn decision_values(&self) -> &[f64] {
        match self {
            SpeedProfile::Pwl(p) => p.values(),
            SpeedProfile::BSpline(p) => p.control_points(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_invariants() {
        assert!(Grid::uniform(1).is_err());
        let g = Grid::uniform(4).unwrap();
        assert_eq!(g.segments(), 4);
        assert_abs_diff_eq!(g.midpoint(1), 0.375);
        assert!(Grid::from_nodes(vec![0.0, 0.5, 0.4, 1.0]).is_err());
        assert!(Grid::from_nodes(vec![0.1, 0.5, 1.0]).is_err());
    }

    #[test]
    fn refined_samples_cover_nodes() {
        let g = Grid::uniform(3).unwrap();
        let s = g.refined_samples(4);
        assert_eq!(s.len(), 13);
        assert_abs_diff_eq!(s[0], 0.0);
        assert_abs_diff_eq!(s[4], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(*s.last().unwrap(), 1.0);
    }

    #[test]
    fn pwl_midpoint_average() {
        let g = Grid::uniform(2).unwrap();
        let p = SpeedProfilePwl::new(g, vec![0.0, 1.0, 0.5]).unwrap();
        let (z, zp, zpp) = p.eval(0.25);
        assert_abs_diff_eq!(z, 0.5);
        assert_abs_diff_eq!(zp, 2.0);
        assert_abs_diff_eq!(zpp, 0.0);
        let (z1, zp1, _) = p.eval(0.75);
        assert_abs_diff_eq!(z1, 0.75);
        assert_abs_diff_eq!(zp1, -1.0);
    }

    #[test]
    fn pwl_rejects_negative_values() {
        let g = Grid::uniform(2).unwrap();
        assert!(matches!(
            SpeedProfilePwl::new(g, vec![0.0, -1e-3, 0.0]),
            Err(ProfileError::NegativeValue { .. })
        ));
    }

    #[test]
    fn bspline_clamped_end_values() {
        let kv = KnotVector::clamped_uniform(3, 6).unwrap();
        let p = SpeedProfileBSpline::new(kv, vec![0.25, 1.0, 2.0, 2.0, 1.0, 0.5]).unwrap();
        assert_abs_diff_eq!(p.eval(0.0).0, 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(p.eval(1.0).0, 0.5, epsilon = 1e-14);
        // nonnegative everywhere by convex hull
        for i in 0..=50 {
            assert!(p.eval(i as f64 / 50.0).0 >= 0.0);
        }
    }
}
