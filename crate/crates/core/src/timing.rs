//! Time-domain reconstruction from a speed profile: terminal time
//! t_T = integral of 1/sqrt(z) over [0, 1], the cumulative map t(sigma)
//! and uniform-in-time trajectory sampling.
//!
//! z = 0 at an endpoint makes the integrand singular but integrable when
//! z grows linearly off the boundary. The piecewise-linear case has an
//! exact antiderivative per segment; the quadrature route substitutes
//! u = sqrt of the offset near each endpoint, which removes the
//! singularity from the transformed integrand.

use nalgebra::DVector;

use crate::dynamics::RobotModel;
use crate::numeric::adaptive_simpson;
use crate::path::{JointPath, PathError};
use crate::profile::{SpeedProfile, SpeedProfilePwl};
use crate::projection::exact_jerk;

#[derive(Debug, Clone, PartialEq)]
pub enum TimingError {
    /// z identically ~0 over an interval: unbounded travel time.
    InfiniteTime {
        segment_start: f64,
    },
    Path(PathError),
    /// Requested step must be positive.
    BadStep(f64),
}

impl std::fmt::Display for TimingError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimingError::InfiniteTime { segment_start } => {
                write!(
                    f,
                    "z vanishes on a segment starting at sigma = {segment_start}; infinite time"
                )
            }
            TimingError::Path(e) => write!(f, "{e}"),
            TimingError::BadStep(dt) => write!(f, "sample step {dt} must be > 0"),
        }
    }
}

impl std::error::Error for TimingError {}

impl From<PathError> for TimingError {
    fn from(e: PathError) -> Self {
        TimingError::Path(e)
    }
}

const QUAD_TOL: f64 = 1e-10;
/// z below this over a whole segment counts as "stopped".
const Z_DEAD: f64 = 1e-14;

/// Terminal time of a profile. PWL profiles use the exact closed form
/// 2 dsigma / (sqrt(z_k) + sqrt(z_{k+1})) per segment; everything else is
/// integrated adaptively with endpoint substitution.
pub fn terminal_time(profile: &SpeedProfile) -> Result<f64, TimingError> {
    match profile {
        SpeedProfile::Pwl(p) => pwl_terminal_time(p),
        SpeedProfile::BSpline(_) => {
            let brk = profile.breakpoints();
            let mut acc = 0.0;
            for w in brk.windows(2) {
                acc += quad_segment_time(profile, w[0], w[1])?;
            }
            Ok(acc)
        }
    }
}

fn pwl_terminal_time(p: &SpeedProfilePwl) -> Result<f64, TimingError> {
    let mut acc = 0.0;
    for k in 0..p.grid().segments() {
        acc += pwl_segment_time(p, k)?;
    }
    Ok(acc)
}

fn pwl_segment_time(p: &SpeedProfilePwl, k: usize) -> Result<f64, TimingError> {
    let (za, zb) = (p.values()[k], p.values()[k + 1]);
    let d = p.grid().delta(k);
    let denom = za.sqrt() + zb.sqrt();
    if denom < Z_DEAD {
        return Err(TimingError::InfiniteTime {
            segment_start: p.grid().nodes()[k],
        });
    }
    Ok(2.0 * d / denom)
}

/// Adaptive quadrature of 1/sqrt(z) over [a, b] with sqrt substitutions at
/// both ends: sigma = a + u^2 on the left half, sigma = b - v^2 on the
/// right half, which keeps the transformed integrand bounded when z has a
/// simple zero at an endpoint.
fn quad_segment_time(profile: &SpeedProfile, a: f64, b: f64) -> Result<f64, TimingError> {
    let len = b - a;
    if len <= 0.0 {
        return Ok(0.0);
    }
    let mid = 0.5 * (a + b);
    let zmid = profile.z(mid);
    if zmid < Z_DEAD && profile.z(a) < Z_DEAD && profile.z(b) < Z_DEAD {
        return Err(TimingError::InfiniteTime { segment_start: a });
    }
    let transformed = |sig: f64, u: f64| -> f64 {
        let z = profile.z(sig);
        if z <= 0.0 {
            // integrable endpoint: z ~ |z'| (sigma - a) => 2u/sqrt(z) -> 2/sqrt(|z'|)
            let zp = profile.eval(sig).1.abs().max(1e-300);
            2.0 / zp.sqrt()
        } else {
            2.0 * u / z.sqrt()
        }
    };
    let left = adaptive_simpson(0.0, (mid - a).sqrt(), QUAD_TOL, |u| {
        transformed(a + u * u, u)
    });
    let right = adaptive_simpson(0.0, (b - mid).sqrt(), QUAD_TOL, |v| {
        transformed(b - v * v, v)
    });
    let total = left + right;
    if !total.is_finite() {
        return Err(TimingError::InfiniteTime { segment_start: a });
    }
    Ok(total)
}

/// Cumulative time at `sigma`, integrating from 0, given precomputed
/// breakpoint cumulative times.
fn time_at(
    profile: &SpeedProfile,
    brk: &[f64],
    cum: &[f64],
    sigma: f64,
) -> Result<f64, TimingError> {
    if sigma >= *brk.last().unwrap() {
        return Ok(*cum.last().unwrap());
    }
    let mut lo = 0usize;
    let mut hi = brk.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if brk[mid] <= sigma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let partial = match profile {
        SpeedProfile::Pwl(p) => {
            // exact closed form for a partial linear segment
            let (za, _, _) = p.eval(brk[lo]);
            let (zs, _, _) = p.eval(sigma);
            let denom = za.sqrt() + zs.sqrt();
            if denom < Z_DEAD {
                if sigma - brk[lo] < 1e-15 {
                    0.0
                } else {
                    return Err(TimingError::InfiniteTime {
                        segment_start: brk[lo],
                    });
                }
            } else {
                2.0 * (sigma - brk[lo]) / denom
            }
        }
        _ => quad_segment_time(profile, brk[lo], sigma)?,
    };
    Ok(cum[lo] + partial)
}

/// Monotone table (sigma_j, t_j) over `samples` + 1 uniform sigma values;
/// the last entry is (1, terminal time).
pub fn time_map(profile: &SpeedProfile, samples: usize) -> Result<Vec<(f64, f64)>, TimingError> {
    let samples = samples.max(2);
    let (brk, cum) = cumulative_at_breakpoints(profile)?;
    let mut out = Vec::with_capacity(samples + 1);
    for j in 0..=samples {
        let sigma = j as f64 / samples as f64;
        out.push((sigma, time_at(profile, &brk, &cum, sigma)?));
    }
    Ok(out)
}

fn cumulative_at_breakpoints(profile: &SpeedProfile) -> Result<(Vec<f64>, Vec<f64>), TimingError> {
    let brk = profile.breakpoints();
    let mut cum = Vec::with_capacity(brk.len());
    cum.push(0.0);
    match profile {
        SpeedProfile::Pwl(p) => {
            for k in 0..p.grid().segments() {
                let t = pwl_segment_time(p, k)?;
                cum.push(cum[k] + t);
            }
        }
        _ => {
            for (k, w) in brk.windows(2).enumerate() {
                let t = quad_segment_time(profile, w[0], w[1])?;
                cum.push(cum[k] + t);
            }
        }
    }
    Ok((brk, cum))
}

/// One uniform-in-time sample of the full state along the path.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub sigma: f64,
    pub z: f64,
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    pub qdd: DVector<f64>,
    pub qddd: DVector<f64>,
    pub tau: DVector<f64>,
}

/// Time-sampled trajectory; sigma is non-decreasing and the last sample
/// sits exactly at the terminal time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub terminal_time: f64,
}

/// Sample the trajectory uniformly in time with step `dt` (a terminal
/// sample is appended when t_T is not a multiple of dt).
///
/// All kinematic channels are recomputed from the path and profile at the
/// inverted sigma(t); torques come from full inverse dynamics, not from
/// any linearization used while solving.
pub fn sample_trajectory(
    profile: &SpeedProfile,
    path: &JointPath,
    model: &RobotModel,
    dt: f64,
) -> Result<Trajectory, TimingError> {
    if !(dt > 0.0) {
        return Err(TimingError::BadStep(dt));
    }
    let (brk, cum) = cumulative_at_breakpoints(profile)?;
    let t_total = *cum.last().unwrap();
    let mut times: Vec<f64> = Vec::new();
    let mut t = 0.0;
    while t < t_total - 1e-12 {
        times.push(t);
        t += dt;
    }
    times.push(t_total);

    let mut samples = Vec::with_capacity(times.len());
    for &tj in &times {
        let sigma = invert_time(profile, &brk, &cum, tj)?;
        let (z, zp, zpp) = profile.eval(sigma);
        let p = path.evaluate(sigma)?;
        let s = z.max(0.0).sqrt();
        let qd = &p.dq * s;
        let qdd = &p.ddq * z + &p.dq * (0.5 * zp);
        let qddd = exact_jerk(&p, z, zp, zpp);
        let tau = model.inverse_dynamics(&p.q, &qd, &qdd);
        samples.push(TrajectorySample {
            t: tj,
            sigma,
            z,
            q: p.q,
            qd,
            qdd,
            qddd,
            tau,
        });
    }
    Ok(Trajectory {
        samples,
        terminal_time: t_total,
    })
}

/// sigma(t) by bisection on the cumulative map (monotone for z > 0).
fn invert_time(
    profile: &SpeedProfile,
    brk: &[f64],
    cum: &[f64],
    t: f64,
) -> Result<f64, TimingError> {
    let t_total = *cum.last().unwrap();
    if t <= 0.0 {
        return Ok(0.0);
    }
    if t >= t_total {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let tm = time_at(profile, brk, cum, mid)?;
        if tm < t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ModelKind;
    use crate::profile::Grid;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pwl(n: usize, f: impl Fn(f64) -> f64) -> SpeedProfile {
        let g = Grid::uniform(n).unwrap();
        let vals = g.nodes().iter().map(|&s| f(s)).collect();
        SpeedProfile::Pwl(SpeedProfilePwl::new(g, vals).unwrap())
    }

    #[test]
    fn constant_speed_half_second() {
        let p = pwl(4, |_| 4.0);
        assert_abs_diff_eq!(terminal_time(&p).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn triangular_profile_takes_two_seconds() {
        let p = pwl(100, |s| (2.0 * s).min(2.0 * (1.0 - s)));
        assert_abs_diff_eq!(terminal_time(&p).unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn all_zero_profile_is_infinite_time() {
        let p = pwl(4, |_| 0.0);
        assert!(matches!(
            terminal_time(&p),
            Err(TimingError::InfiniteTime { .. })
        ));
    }

    #[test]
    fn pwl_closed_form_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..20 {
            let n = rng.random_range(3..12usize);
            let g = Grid::uniform(n).unwrap();
            let mut vals: Vec<f64> = (0..=n).map(|_| rng.random_range(0.05..4.0)).collect();
            // include zero-endpoint profiles
            if case % 3 == 0 {
                vals[0] = 0.0;
            }
            if case % 4 == 0 {
                vals[n] = 0.0;
            }
            let p = SpeedProfilePwl::new(g.clone(), vals).unwrap();
            let exact = pwl_terminal_time(&p).unwrap();
            let sp = SpeedProfile::Pwl(p);
            let brk = sp.breakpoints();
            let mut quad = 0.0;
            for w in brk.windows(2) {
                quad += quad_segment_time(&sp, w[0], w[1]).unwrap();
            }
            assert_abs_diff_eq!(exact, quad, epsilon = 1e-8);
        }
    }

    #[test]
    fn time_map_constant_profile_is_identity() {
        let p = pwl(5, |_| 1.0);
        let tm = time_map(&p, 10).unwrap();
        for &(s, t) in &tm {
            assert_abs_diff_eq!(t, s, epsilon = 1e-12);
        }
    }

    #[test]
    fn time_map_triangular_half_at_one_second() {
        let p = pwl(200, |s| (2.0 * s).min(2.0 * (1.0 - s)));
        let tm = time_map(&p, 2).unwrap();
        assert_abs_diff_eq!(tm[1].0, 0.5);
        assert_abs_diff_eq!(tm[1].1, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(tm[2].1, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn time_map_strictly_increasing_and_inverse_consistent() {
        let p = pwl(50, |s| 0.5 + s * (1.0 - s));
        let tm = time_map(&p, 64).unwrap();
        for w in tm.windows(2) {
            assert!(w[1].1 > w[0].1);
        }
        let (brk, cum) = cumulative_at_breakpoints(&p).unwrap();
        for &(s, t) in tm.iter() {
            let s_back = invert_time(&p, &brk, &cum, t).unwrap();
            assert_abs_diff_eq!(s_back, s, epsilon = 1e-8);
        }
    }

    #[test]
    fn closed_form_invariant_under_grid_subdivision() {
        // the same piecewise-linear function on a subdivided grid must
        // integrate to the same time exactly (the per-segment formula is
        // an antiderivative, not a quadrature)
        let g = Grid::uniform(8).unwrap();
        let vals: Vec<f64> = g
            .nodes()
            .iter()
            .map(|&s| 0.3 + 2.0 * s * (1.0 - s))
            .collect();
        let coarse = SpeedProfilePwl::new(g.clone(), vals.clone()).unwrap();
        let mut fine_nodes = Vec::new();
        let mut fine_vals = Vec::new();
        for k in 0..g.segments() {
            fine_nodes.push(g.nodes()[k]);
            fine_vals.push(vals[k]);
            fine_nodes.push(g.midpoint(k));
            fine_vals.push(0.5 * (vals[k] + vals[k + 1]));
        }
        fine_nodes.push(1.0);
        fine_vals.push(*vals.last().unwrap());
        let fine = SpeedProfilePwl::new(Grid::from_nodes(fine_nodes).unwrap(), fine_vals).unwrap();
        let a = pwl_terminal_time(&coarse).unwrap();
        let b = pwl_terminal_time(&fine).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn sampled_trajectory_channels_consistent() {
        let model = RobotModel::frictionless(ModelKind::SingleRotor { inertia: 1.0 });
        let path = JointPath::linear(vec![0.0], vec![2.0]).unwrap();
        let prof = pwl(100, |s| (2.0 * s).min(2.0 * (1.0 - s)));
        let traj = sample_trajectory(&prof, &path, &model, 0.01).unwrap();
        assert_relative_eq!(traj.terminal_time, 2.0, max_relative = 1e-8);
        // rest-to-rest: qd = 0 at both ends
        assert_abs_diff_eq!(traj.samples.first().unwrap().qd[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(traj.samples.last().unwrap().qd[0], 0.0, epsilon = 1e-9);
        for s in &traj.samples {
            let p = path.evaluate(s.sigma).unwrap();
            assert_abs_diff_eq!(s.qd[0], p.dq[0] * s.z.sqrt(), epsilon = 1e-9);
        }
        for w in traj.samples.windows(2) {
            assert!(w[1].sigma >= w[0].sigma);
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn constant_profile_constant_velocity() {
        let model = RobotModel::frictionless(ModelKind::SingleRotor { inertia: 1.0 });
        let path = JointPath::linear(vec![0.0], vec![1.0]).unwrap();
        let prof = pwl(4, |_| 2.25);
        let traj = sample_trajectory(&prof, &path, &model, 0.05).unwrap();
        for s in &traj.samples {
            assert_abs_diff_eq!(s.qd[0], 1.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn finite_difference_of_sampled_positions() {
        let model = RobotModel::frictionless(ModelKind::SingleRotor { inertia: 1.0 });
        let path = JointPath::quintic_rest_to_rest(vec![0.0], vec![1.0]).unwrap();
        let prof = pwl(100, |s| 0.2 + s * (1.0 - s));
        let dt = 1e-3;
        let traj = sample_trajectory(&prof, &path, &model, dt).unwrap();
        let mut worst = 0.0f64;
        for w in traj.samples.windows(3) {
            if (w[2].t - w[1].t - dt).abs() > 1e-12 {
                continue; // final partial step
            }
            let fd = (w[2].q[0] - w[0].q[0]) / (2.0 * dt);
            worst = worst.max((fd - w[1].qd[0]).abs());
        }
        // central difference error is O(dt^2)
        assert!(worst < 50.0 * dt * dt, "worst qd mismatch {worst}");
    }
}
