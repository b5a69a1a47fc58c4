//! Clamped B-spline machinery: knot vectors, basis functions with
//! derivatives (triangular-table recursion), scalar splines, exact basis
//! integrals and global interpolation.
//!
//! Everything here works on the parameter interval [0, 1] with a clamped
//! knot vector, which pins the end values of a spline to its first and last
//! control points.

use nalgebra::{DMatrix, DVector};

use crate::numeric::gauss5;

/// Maximum supported degree. The exact integral rule (5-point Gauss) is
/// exact through polynomial degree 9.
pub const MAX_DEGREE: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub enum BSplineError {
    /// Fewer control points than degree + 1.
    TooFewControlPoints {
        ctrl: usize,
        degree: usize,
    },
    DegreeOutOfRange(usize),
    /// Interpolation collocation system is singular.
    SingularInterpolation,
}

impl std::fmt::Display for BSplineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BSplineError::TooFewControlPoints { ctrl, degree } => {
                write!(
                    f,
                    "need at least degree+1 = {} control points, got {}",
                    degree + 1,
                    ctrl
                )
            }
            BSplineError::DegreeOutOfRange(d) => {
                write!(f, "degree {} not in 1..={}", d, MAX_DEGREE)
            }
            BSplineError::SingularInterpolation => {
                write!(f, "singular spline interpolation system")
            }
        }
    }
}

impl std::error::Error for BSplineError {}

/// Clamped knot vector on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    /// Clamped knot vector with uniformly spaced interior knots for
    /// `ctrl` control points of the given degree.
    pub fn clamped_uniform(degree: usize, ctrl: usize) -> Result<Self, BSplineError> {
        Self::check(degree, ctrl)?;
        let interior = ctrl - degree - 1;
        let mut knots = vec![0.0; degree + 1];
        for j in 1..=interior {
            knots.push(j as f64 / (interior + 1) as f64);
        }
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        Ok(Self { degree, knots })
    }

    /// Clamped knot vector with prescribed interior knots (strictly inside
    /// (0, 1), non-decreasing).
    pub fn clamped_with_interior(degree: usize, interior: &[f64]) -> Result<Self, BSplineError> {
        let ctrl = interior.len() + degree + 1;
        Self::check(degree, ctrl)?;
        let mut knots = vec![0.0; degree + 1];
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        Ok(Self { degree, knots })
    }

    fn check(degree: usize, ctrl: usize) -> Result<(), BSplineError> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(BSplineError::DegreeOutOfRange(degree));
        }
        if ctrl < degree + 1 {
            return Err(BSplineError::TooFewControlPoints { ctrl, degree });
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_ctrl(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Distinct interior knot values (span breakpoints, endpoints excluded).
    pub fn interior_breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for &t in &self.knots[self.degree + 1..self.knots.len() - self.degree - 1] {
            if out.last().map_or(true, |&l: &f64| t > l) && t > 0.0 && t < 1.0 {
                out.push(t);
            }
        }
        out
    }

    /// Index i of the span `[knots[i], knots[i+1])` containing u, with the
    /// closed right end mapped to the last non-empty span.
    pub fn find_span(&self, u: f64) -> usize {
        let n = self.num_ctrl() - 1;
        let p = self.degree;
        if u >= self.knots[n + 1] {
            return n;
        }
        if u <= self.knots[p] {
            return p;
        }
        // binary search: knots[lo] <= u < knots[lo+1]
        let (mut lo, mut hi) = (p, n + 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if u < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// All non-vanishing basis functions and their derivatives at `u`,
    /// through derivative order `n_ders`.
    ///
    /// Returns `(first, table)` where `first` is the index of the first
    /// non-vanishing basis function and `table[k][j]` is the k-th derivative
    /// of basis `first + j` (j = 0..=degree).
    pub fn basis_with_derivs(&self, u: f64, n_ders: usize) -> (usize, Vec<Vec<f64>>) {
        let span = self.find_span(u);
        (span - self.degree, self.basis_in_span(span, u, n_ders))
    }

    /// Same as [`basis_with_derivs`](Self::basis_with_derivs) but with an
    /// explicit span index, which permits exact one-sided limits at knots:
    /// evaluating at an interior knot with the left-hand span yields the
    /// left polynomial piece.
    pub fn basis_in_span(&self, span: usize, u: f64, n_ders: usize) -> Vec<Vec<f64>> {
        let p = self.degree;
        let nd = n_ders.min(p);
        // triangular table of basis values plus knot differences
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = u - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = if ndu[j][r].abs() < 1e-300 {
                    0.0
                } else {
                    ndu[r][j - 1] / ndu[j][r]
                };
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; n_ders + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        if nd == 0 {
            return ders;
        }

        // derivative accumulation (two alternating rows of coefficients)
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let mut s1 = 0;
            let mut s2 = 1;
            a[0].iter_mut().for_each(|v| *v = 0.0);
            a[1].iter_mut().for_each(|v| *v = 0.0);
            a[0][0] = 1.0;
            for k in 1..=nd {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = (p - k) as isize;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk as usize];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk { k - 1 } else { p - r };
                for j in j1..=j2 {
                    a[s2][j] = (a[s1][j] - a[s1][j - 1])
                        / ndu[(pk + 1) as usize][(rk + j as isize) as usize];
                    d += a[s2][j] * ndu[(rk + j as isize) as usize][pk as usize];
                }
                if r as isize <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[(pk + 1) as usize][r];
                    d += a[s2][k] * ndu[r][pk as usize];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        // multiply through by p!/(p-k)!
        let mut r = p as f64;
        for k in 1..=nd {
            for j in 0..=p {
                ders[k][j] *= r;
            }
            r *= (p - k) as f64;
        }
        ders
    }

    /// Exact integral of basis function `i` over [0, 1], via per-span
    /// Gauss quadrature of sufficient order.
    pub fn basis_integral(&self, i: usize) -> f64 {
        let p = self.degree;
        let mut acc = 0.0;
        // support of B_i is [knots[i], knots[i+p+1]]
        for span in i..=(i + p).min(self.knots.len() - p - 2) {
            let (a, b) = (self.knots[span], self.knots[span + 1]);
            if b <= a {
                continue;
            }
            acc += gauss5(a, b, |u| {
                let ders = self.basis_in_span(span, u, 0);
                let first = span - p;
                if i >= first && i <= span {
                    ders[0][i - first]
                } else {
                    0.0
                }
            });
        }
        acc
    }

    /// Closed-form integral `(knots[i+p+1] - knots[i]) / (p + 1)`; used as an
    /// independent cross-check of [`basis_integral`](Self::basis_integral).
    pub fn basis_integral_closed_form(&self, i: usize) -> f64 {
        (self.knots[i + self.degree + 1] - self.knots[i]) / (self.degree as f64 + 1.0)
    }
}

/// Scalar spline z(u) = sum_i c_i B_i(u) on a clamped knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSpline {
    pub knots: KnotVector,
    pub coeffs: Vec<f64>,
}

impl ScalarSpline {
    pub fn new(knots: KnotVector, coeffs: Vec<f64>) -> Self {
        assert_eq!(
            knots.num_ctrl(),
            coeffs.len(),
            "control point count mismatch"
        );
        Self { knots, coeffs }
    }

    /// Value and derivatives up to `n_ders` at `u`.
    pub fn eval_derivs(&self, u: f64, n_ders: usize) -> Vec<f64> {
        let (first, table) = self.knots.basis_with_derivs(u, n_ders);
        let mut out = vec![0.0; n_ders + 1];
        for (k, row) in table.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                out[k] += self.coeffs[first + j] * b;
            }
        }
        out
    }

    /// One-sided value/derivatives at `u` evaluated on the polynomial piece
    /// of the given span (for exact jump measurement at knots).
    pub fn eval_derivs_in_span(&self, span: usize, u: f64, n_ders: usize) -> Vec<f64> {
        let table = self.knots.basis_in_span(span, u, n_ders);
        let first = span - self.knots.degree();
        let mut out = vec![0.0; n_ders + 1];
        for (k, row) in table.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                out[k] += self.coeffs[first + j] * b;
            }
        }
        out
    }
}

/// Solve the global interpolation problem: a clamped spline of `degree`
/// through `values[j]` at parameters `params[j]` (strictly increasing,
/// `params[0] = 0`, `params.last() = 1`). Knots follow the averaging rule,
/// which keeps the collocation matrix nonsingular.
pub fn interpolate(
    degree: usize,
    params: &[f64],
    values: &[f64],
) -> Result<ScalarSpline, BSplineError> {
    let knots = interpolation_knots(degree, params)?;
    let m = params.len();
    let mut a = DMatrix::zeros(m, m);
    for (j, &u) in params.iter().enumerate() {
        let (first, table) = knots.basis_with_derivs(u, 0);
        for (off, &b) in table[0].iter().enumerate() {
            a[(j, first + off)] = b;
        }
    }
    let rhs = DVector::from_column_slice(values);
    let lu = a.lu();
    let sol = lu.solve(&rhs).ok_or(BSplineError::SingularInterpolation)?;
    Ok(ScalarSpline::new(knots, sol.iter().copied().collect()))
}

/// Averaged (de Boor) interpolation knot vector for the given parameters.
pub fn interpolation_knots(degree: usize, params: &[f64]) -> Result<KnotVector, BSplineError> {
    let m = params.len();
    if m < degree + 1 {
        return Err(BSplineError::TooFewControlPoints { ctrl: m, degree });
    }
    let mut interior = Vec::with_capacity(m.saturating_sub(degree + 1));
    for j in 1..m - degree {
        let avg = params[j..j + degree].iter().sum::<f64>() / degree as f64;
        interior.push(avg);
    }
    KnotVector::clamped_with_interior(degree, &interior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn partition_of_unity_and_nonnegativity() {
        let kv = KnotVector::clamped_uniform(3, 8).unwrap();
        for i in 0..=100 {
            let u = i as f64 / 100.0;
            let (_, t) = kv.basis_with_derivs(u, 0);
            let sum: f64 = t[0].iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-13);
            assert!(t[0].iter().all(|&b| b >= -1e-14));
        }
    }

    #[test]
    fn degree_one_is_hat_basis() {
        let kv = KnotVector::clamped_uniform(1, 5).unwrap();
        // hats at 0, .25, .5, .75, 1 - at u = .375 the active hats split 1/2 1/2
        let (first, t) = kv.basis_with_derivs(0.375, 1);
        assert_eq!(first, 1);
        assert_abs_diff_eq!(t[0][0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(t[0][1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(t[1][0], -4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t[1][1], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let kv = KnotVector::clamped_uniform(5, 11).unwrap();
        let coeffs: Vec<f64> = (0..11)
            .map(|i| ((i * 37 + 11) % 17) as f64 / 7.0 - 1.0)
            .collect();
        let sp = ScalarSpline::new(kv, coeffs);
        let h = 1e-6;
        for i in 1..20 {
            let u = i as f64 / 20.0;
            if !(h..=1.0 - h).contains(&u) {
                continue;
            }
            let d = sp.eval_derivs(u, 3);
            let fd1 = (sp.eval_derivs(u + h, 0)[0] - sp.eval_derivs(u - h, 0)[0]) / (2.0 * h);
            let fd2 = (sp.eval_derivs(u + h, 1)[1] - sp.eval_derivs(u - h, 1)[1]) / (2.0 * h);
            let fd3 = (sp.eval_derivs(u + h, 2)[2] - sp.eval_derivs(u - h, 2)[2]) / (2.0 * h);
            assert_abs_diff_eq!(d[1], fd1, epsilon = 1e-5 * (1.0 + d[1].abs()));
            assert_abs_diff_eq!(d[2], fd2, epsilon = 1e-4 * (1.0 + d[2].abs()));
            assert_abs_diff_eq!(d[3], fd3, epsilon = 1e-3 * (1.0 + d[3].abs()));
        }
    }

    #[test]
    fn clamped_ends_hit_first_and_last_coefficient() {
        let kv = KnotVector::clamped_uniform(3, 7).unwrap();
        let coeffs = vec![2.5, 0.0, 1.0, -1.0, 0.5, 3.0, -4.0];
        let sp = ScalarSpline::new(kv, coeffs);
        assert_abs_diff_eq!(sp.eval_derivs(0.0, 0)[0], 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sp.eval_derivs(1.0, 0)[0], -4.0, epsilon = 1e-14);
    }

    #[test]
    fn basis_integrals_match_closed_form_and_sum_to_one() {
        for (degree, ctrl) in [(1, 5), (2, 6), (3, 9), (5, 8)] {
            let kv = KnotVector::clamped_uniform(degree, ctrl).unwrap();
            let mut total = 0.0;
            for i in 0..ctrl {
                let q = kv.basis_integral(i);
                let cf = kv.basis_integral_closed_form(i);
                assert_relative_eq!(q, cf, epsilon = 1e-13, max_relative = 1e-12);
                total += q;
            }
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn interpolation_passes_through_values() {
        let params = [0.0, 0.15, 0.35, 0.5, 0.62, 0.8, 0.93, 1.0];
        let values = [0.3, -0.5, 1.2, 0.0, 2.0, -1.0, 0.7, 0.1];
        for degree in [3, 5] {
            let sp = interpolate(degree, &params, &values).unwrap();
            for (u, v) in params.iter().zip(values.iter()) {
                assert_abs_diff_eq!(sp.eval_derivs(*u, 0)[0], *v, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn one_sided_evaluation_detects_cubic_third_derivative_jump() {
        let params = [0.0, 0.25, 0.5, 0.75, 1.0];
        let values = [0.0, 1.0, -1.0, 2.0, 0.0];
        let sp = interpolate(3, &params, &values).unwrap();
        let brks = sp.knots.interior_breakpoints();
        assert!(!brks.is_empty());
        let mut max_jump = 0.0f64;
        for &t in &brks {
            let right_span = sp.knots.find_span(t);
            let left_span = (self::left_span_of(&sp.knots, t)).unwrap();
            let l = sp.eval_derivs_in_span(left_span, t, 3);
            let r = sp.eval_derivs_in_span(right_span, t, 3);
            assert_abs_diff_eq!(l[0], r[0], epsilon = 1e-10);
            assert_abs_diff_eq!(l[1], r[1], epsilon = 1e-9);
            assert_abs_diff_eq!(l[2], r[2], epsilon = 1e-8);
            max_jump = max_jump.max((l[3] - r[3]).abs());
        }
        assert!(
            max_jump > 1.0,
            "cubic spline should have a visible q''' jump, got {max_jump}"
        );
    }

    fn left_span_of(kv: &KnotVector, t: f64) -> Option<usize> {
        let p = kv.degree();
        (p..kv.num_ctrl())
            .rev()
            .find(|&s| kv.knots()[s] < t && kv.knots()[s + 1] >= t)
    }
}
