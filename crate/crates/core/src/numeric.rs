//! Small numerical helpers shared across the crate: fixed-order
//! Gauss-Legendre rules and an adaptive Simpson integrator.

/// 5-point Gauss-Legendre nodes/weights on [-1, 1]; exact through degree 9.
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568888888888888889),
    (0.538469310105683091, 0.478628670499366468),
    (-0.538469310105683091, 0.478628670499366468),
    (0.906179845938663993, 0.236926885056189088),
    (-0.906179845938663993, 0.236926885056189088),
];

/// Integrate `f` over [a, b] with the 5-point Gauss-Legendre rule.
/// Exact for polynomials of degree <= 9.
pub fn gauss5<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for &(x, w) in &GL5 {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Adaptive Simpson quadrature on [a, b] with absolute tolerance `tol`.
///
/// The integrand must be finite on the closed interval; integrable endpoint
/// singularities have to be removed by substitution before calling this.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(a: f64, b: f64, tol: f64, f: F) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(&f, a, b, fa, fm, fb, whole, tol, 52)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
