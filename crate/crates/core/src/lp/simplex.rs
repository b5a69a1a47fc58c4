//! Bounded-variable revised simplex with a composite phase-1 objective.
//!
//! Standard form: every row lo <= a'x <= hi gets a logical "activity"
//! variable r with a'x - r = 0 and r in [lo, hi], so the constraint matrix
//! is [A | -I] with rhs zero and all structure lives in variable bounds.
//!
//! The path LPs this crate produces have far more rows than structural
//! variables, so a basis always contains at most n_structural non-logical
//! columns. All linear algebra is done on the k x k "kernel"
//! K = A[uncovered rows, basic structurals] (k <= n_structural), whose
//! inverse W is maintained explicitly with rank-one updates and rebuilt
//! from scratch periodically and before any verdict is accepted.

use nalgebra::DMatrix;

use super::{LinearProgram, LpError, LpTolerances};

const PIVOT_TOL: f64 = 1e-10;
const REFACTOR_EVERY: usize = 100;
const BLAND_TRIGGER: usize = 40;

/// Basis of a solved program, reusable as a warm start for a perturbed
/// program with identical variable count and a row prefix of equal layout.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSnapshot {
    n_structural: usize,
    n_rows: usize,
    basic_structurals: Vec<usize>,
    covered_rows: Vec<usize>,
    nonbasic_at_upper: Vec<usize>,
}

pub(super) enum BuildVerdict {
    Infeasible,
}

pub(super) enum SimplexOutcome {
    Optimal {
        x: Vec<f64>,
        objective: f64,
        snapshot: BasisSnapshot,
    },
    Infeasible,
    Unbounded,
}

/// Presolved minimize-form program: columns are sparse over kept rows.
pub(super) struct StandardForm {
    n_structural: usize,
    m: usize,
    /// minimize costs for structural variables (negated maximize objective)
    cost: Vec<f64>,
    /// structural columns: (row, coefficient)
    cols: Vec<Vec<(usize, f64)>>,
    /// the same matrix row-major: (variable, coefficient)
    rows: Vec<Vec<(usize, f64)>>,
    /// bounds for structural (0..n_structural) then activity (row) variables
    lo: Vec<f64>,
    up: Vec<f64>,
}

impl StandardForm {
    pub(super) fn build(lp: &LinearProgram) -> Result<Self, BuildVerdict> {
        let n = lp.num_vars();
        let mut lo: Vec<f64> = (0..n).map(|j| lp.bounds(j).0).collect();
        let mut up: Vec<f64> = (0..n).map(|j| lp.bounds(j).1).collect();

        // fold singleton rows into bounds; drop empty and free rows.
        // duplicate variable references within a row are merged first so
        // every kept row has unique column indices (the kernel algebra
        // depends on that).
        let mut kept_rows: Vec<(Vec<(usize, f64)>, f64, f64)> = Vec::new();
        for row in lp.rows() {
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len());
            for &(j, c) in &row.coeffs {
                match merged.iter_mut().find(|(jj, _)| *jj == j) {
                    Some((_, acc)) => *acc += c,
                    None => merged.push((j, c)),
                }
            }
            let nz: Vec<(usize, f64)> = merged
                .into_iter()
                .filter(|&(_, c)| c.abs() > 1e-13)
                .collect();
            match nz.len() {
                0 => {
                    if row.lo > 1e-12 || row.hi < -1e-12 {
                        return Err(BuildVerdict::Infeasible);
                    }
                }
                1 => {
                    let (j, c) = nz[0];
                    let (mut a, mut b) = (row.lo / c, row.hi / c);
                    if c < 0.0 {
                        std::mem::swap(&mut a, &mut b);
                    }
                    lo[j] = lo[j].max(a);
                    up[j] = up[j].min(b);
                }
                _ => {
                    if row.lo.is_finite() || row.hi.is_finite() {
                        kept_rows.push((nz, row.lo, row.hi));
                    }
                }
            }
        }
        for j in 0..n {
            let gap = lo[j] - up[j];
            if gap > 0.0 {
                if gap <= 1e-9 * (1.0 + lo[j].abs()) {
                    let mid = 0.5 * (lo[j] + up[j]);
                    lo[j] = mid;
                    up[j] = mid;
                } else {
                    return Err(BuildVerdict::Infeasible);
                }
            }
        }

        let m = kept_rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        for (i, (coeffs, rlo, rhi)) in kept_rows.into_iter().enumerate() {
            for &(j, c) in &coeffs {
                cols[j].push((i, c));
            }
            rows.push(coeffs);
            lo.push(rlo);
            up.push(rhi);
        }
        let cost = lp.objective().iter().map(|&c| -c).collect();
        Ok(Self {
            n_structural: n,
            m,
            cost,
            cols,
            rows,
            lo,
            up,
        })
    }

    pub(super) fn solve(
        &mut self,
        tols: &LpTolerances,
        warm: Option<&BasisSnapshot>,
    ) -> Result<SimplexOutcome, LpError> {
        let mut st = State::new(self, tols);
        st.install_start(warm);
        st.refactor()?;
        st.run()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// nonbasic with both bounds infinite, parked at 0
    Free,
}

enum Entering {
    None,
    Var { var: usize, dir: f64 },
}

enum Blocking {
    /// entering travels to its own opposite bound
    Flip {
        theta: f64,
    },
    /// a basic variable reaches `to_upper` bound after `theta`
    Leave {
        var: usize,
        theta: f64,
        to_upper: bool,
    },
    Unbounded,
}

struct State<'a> {
    f: &'a StandardForm,
    tols: LpTolerances,
    status: Vec<VarStatus>,
    value: Vec<f64>,
    /// basic structural variables, aligned with kernel columns
    s_vars: Vec<usize>,
    /// uncovered rows (activity nonbasic), aligned with kernel rows
    r_rows: Vec<usize>,
    pos_in_s: Vec<usize>,
    pos_in_r: Vec<usize>,
    covered: Vec<bool>,
    /// kernel inverse, W[s_pos][r_pos]
    w: DMatrix<f64>,
    pivots_since_refactor: usize,
    degenerate_streak: usize,
    bland: bool,
    iterations: usize,
    // scratch
    y_rows: Vec<f64>,
    dir_s: Vec<f64>,
    dir_act: Vec<f64>,
    ratio_scan: std::cell::RefCell<Vec<(usize, f64, f64, bool)>>,
    /// phase-2 scans that later turn infeasible hint at drift or cycling
    was_feasible: bool,
    phase_flips: usize,
    bland_sticky: bool,
    feas_tols: Vec<f64>,
    /// static column scales for pricing (approximate steepest edge)
    col_scale: Vec<f64>,
    d_struct: Vec<f64>,
    /// set once a fresh factorization confirms primal feasibility; pivots
    /// preserve it, so the per-iteration infeasibility scan can be skipped
    phase2_locked: bool,
}

const NONE: usize = usize::MAX;

impl<'a> State<'a> {
    fn new(f: &'a StandardForm, tols: &LpTolerances) -> Self {
        let nv = f.n_structural + f.m;
        Self {
            f,
            tols: *tols,
            status: vec![VarStatus::AtLower; nv],
            value: vec![0.0; nv],
            s_vars: Vec::new(),
            r_rows: Vec::new(),
            pos_in_s: vec![NONE; f.n_structural],
            pos_in_r: vec![NONE; f.m],
            covered: vec![true; f.m],
            w: DMatrix::zeros(0, 0),
            pivots_since_refactor: 0,
            degenerate_streak: 0,
            bland: false,
            iterations: 0,
            y_rows: vec![0.0; f.m],
            dir_s: Vec::new(),
            dir_act: vec![0.0; f.m],
            ratio_scan: std::cell::RefCell::new(Vec::new()),
            was_feasible: false,
            phase_flips: 0,
            bland_sticky: false,
            feas_tols: (0..nv)
                .map(|v| {
                    let finite = |b: f64| if b.is_finite() { b.abs() } else { 0.0 };
                    tols.feas * (1.0 + finite(f.lo[v]) + finite(f.up[v]))
                })
                .collect(),
            d_struct: vec![0.0; f.n_structural],
            col_scale: {
                let mut sc = Vec::with_capacity(nv);
                for j in 0..f.n_structural {
                    let n2: f64 = f.cols[j].iter().map(|&(_, c)| c * c).sum();
                    sc.push((1.0 + n2).sqrt());
                }
                sc.extend(std::iter::repeat(std::f64::consts::SQRT_2).take(f.m));
                sc
            },
            phase2_locked: false,
        }
    }

    fn nonbasic_park(&self, var: usize) -> VarStatus {
        let (lo, up) = (self.f.lo[var], self.f.up[var]);
        if lo.is_finite() {
            VarStatus::AtLower
        } else if up.is_finite() {
            VarStatus::AtUpper
        } else {
            VarStatus::Free
        }
    }

    fn install_start(&mut self, warm: Option<&BasisSnapshot>) {
        let valid = warm.is_some_and(|s| {
            s.n_structural == self.f.n_structural
                && s.n_rows <= self.f.m
                && s.basic_structurals.iter().all(|&v| v < self.f.n_structural)
                && s.covered_rows.iter().all(|&r| r < s.n_rows)
                && s.basic_structurals.len() + s.covered_rows.len() + (self.f.m - s.n_rows)
                    == self.f.m
        });
        if let (Some(snap), true) = (warm, valid) {
            for j in 0..self.f.n_structural {
                self.status[j] = self.nonbasic_park(j);
            }
            for r in 0..self.f.m {
                self.covered[r] = r >= snap.n_rows;
                self.status[self.f.n_structural + r] = if r >= snap.n_rows {
                    VarStatus::Basic
                } else {
                    self.nonbasic_park(self.f.n_structural + r)
                };
            }
            for &r in &snap.covered_rows {
                self.covered[r] = true;
                self.status[self.f.n_structural + r] = VarStatus::Basic;
            }
            self.s_vars = snap.basic_structurals.clone();
            for (p, &v) in self.s_vars.iter().enumerate() {
                self.status[v] = VarStatus::Basic;
                self.pos_in_s[v] = p;
            }
            self.r_rows = (0..self.f.m).filter(|&r| !self.covered[r]).collect();
            for (p, &r) in self.r_rows.iter().enumerate() {
                self.pos_in_r[r] = p;
            }
            for &v in &snap.nonbasic_at_upper {
                if v < self.status.len()
                    && self.status[v] != VarStatus::Basic
                    && self.f.up[v].is_finite()
                {
                    self.status[v] = VarStatus::AtUpper;
                }
            }
        } else {
            // cold start: every activity variable basic, structurals parked
            for j in 0..self.f.n_structural {
                self.status[j] = self.nonbasic_park(j);
            }
            for r in 0..self.f.m {
                self.covered[r] = true;
                self.status[self.f.n_structural + r] = VarStatus::Basic;
            }
        }
    }

    fn kernel_size(&self) -> usize {
        self.s_vars.len()
    }

    /// Rebuild W = K^{-1} from scratch and recompute all values.
    fn refactor(&mut self) -> Result<(), LpError> {
        let k = self.kernel_size();
        let mut kmat = DMatrix::zeros(k, k);
        for (j, &var) in self.s_vars.iter().enumerate() {
            for &(row, c) in &self.f.cols[var] {
                if !self.covered[row] {
                    kmat[(self.pos_in_r[row], j)] = c;
                }
            }
        }
        match kmat.try_inverse() {
            Some(inv) => self.w = inv,
            None => return Err(LpError::NumericalFailure("singular basis kernel".into())),
        }
        self.pivots_since_refactor = 0;
        self.phase2_locked = false;
        self.recompute_values();
        Ok(())
    }

    fn recompute_values(&mut self) {
        let ns = self.f.n_structural;
        for v in 0..self.value.len() {
            match self.status[v] {
                VarStatus::AtLower => self.value[v] = self.f.lo[v],
                VarStatus::AtUpper => self.value[v] = self.f.up[v],
                VarStatus::Free => self.value[v] = 0.0,
                VarStatus::Basic => {}
            }
        }
        let k = self.kernel_size();
        // rhs over uncovered rows: activity bound minus nonbasic structural part
        let mut rhs = vec![0.0; k];
        for (p, &r) in self.r_rows.iter().enumerate() {
            rhs[p] = self.value[ns + r];
        }
        for j in 0..ns {
            if self.status[j] != VarStatus::Basic && self.value[j] != 0.0 {
                for &(row, c) in &self.f.cols[j] {
                    if !self.covered[row] {
                        rhs[self.pos_in_r[row]] -= c * self.value[j];
                    }
                }
            }
        }
        for (p, &var) in self.s_vars.iter().enumerate() {
            let mut acc = 0.0;
            for q in 0..k {
                acc += self.w[(p, q)] * rhs[q];
            }
            self.value[var] = acc;
        }
        // covered activities from full structural sums
        let mut act = vec![0.0; self.f.m];
        for j in 0..ns {
            let xj = self.value[j];
            if xj != 0.0 {
                for &(row, c) in &self.f.cols[j] {
                    act[row] += c * xj;
                }
            }
        }
        for r in 0..self.f.m {
            if self.covered[r] {
                self.value[ns + r] = act[r];
            }
        }
    }

    fn violation(&self, v: usize) -> f64 {
        (self.f.lo[v] - self.value[v])
            .max(self.value[v] - self.f.up[v])
            .max(0.0)
    }

    /// One pass over the basics: worst scaled violation (0 when primal
    /// feasible). Cheaper than separate scans for phase choice and costs.
    fn scan_infeasibility(&self) -> f64 {
        let mut worst = 0.0f64;
        for &var in &self.s_vars {
            worst = worst.max(self.violation(var) - self.feas_tol_for(var));
        }
        let ns = self.f.n_structural;
        for r in 0..self.f.m {
            if self.covered[r] {
                worst = worst.max(self.violation(ns + r) - self.feas_tol_for(ns + r));
            }
        }
        worst.max(0.0)
    }

    fn feas_tol_for(&self, v: usize) -> f64 {
        self.feas_tols[v]
    }

    /// phase-1 cost of a basic variable: -1 below range, +1 above, else 0
    fn phase1_cost(&self, v: usize) -> f64 {
        if self.value[v] < self.f.lo[v] - self.feas_tol_for(v) {
            -1.0
        } else if self.value[v] > self.f.up[v] + self.feas_tol_for(v) {
            1.0
        } else {
            0.0
        }
    }

    fn structural_cost(&self, v: usize, phase1: bool) -> f64 {
        if phase1 {
            if self.status[v] == VarStatus::Basic {
                self.phase1_cost(v)
            } else {
                0.0
            }
        } else if v < self.f.n_structural {
            self.f.cost[v]
        } else {
            0.0
        }
    }

    /// Row duals y for the current basis and cost choice.
    fn compute_duals(&mut self, phase1: bool) {
        let ns = self.f.n_structural;
        let k = self.kernel_size();
        for r in 0..self.f.m {
            self.y_rows[r] = if self.covered[r] {
                -self.structural_cost(ns + r, phase1)
            } else {
                0.0
            };
        }
        // g_j = c_j - sum_{covered t} y_t a_j[t] for basic structurals
        let mut g = vec![0.0; k];
        for (p, &var) in self.s_vars.iter().enumerate() {
            let mut acc = self.structural_cost(var, phase1);
            for &(row, c) in &self.f.cols[var] {
                if self.covered[row] {
                    acc -= self.y_rows[row] * c;
                }
            }
            g[p] = acc;
        }
        // y_R = W' g (solve y' K = g')
        for (q, &r) in self.r_rows.iter().enumerate() {
            let mut acc = 0.0;
            for p in 0..k {
                acc += g[p] * self.w[(p, q)];
            }
            self.y_rows[r] = acc;
        }
    }

    fn reduced_cost(&self, var: usize, phase1: bool) -> f64 {
        let ns = self.f.n_structural;
        if var < ns {
            let mut d = self.structural_cost(var, phase1);
            for &(row, c) in &self.f.cols[var] {
                d -= self.y_rows[row] * c;
            }
            d
        } else {
            // activity column is -e_row
            self.structural_cost(var, phase1) + self.y_rows[var - ns]
        }
    }

    /// Structural reduced costs via the rows with nonzero duals (uncovered
    /// rows plus phase-1-infeasible covered rows; usually few).
    fn fill_structural_reduced_costs(&mut self, phase1: bool) {
        for j in 0..self.f.n_structural {
            self.d_struct[j] = self.structural_cost(j, phase1);
        }
        for r in 0..self.f.m {
            let y = self.y_rows[r];
            if y != 0.0 {
                for &(j, c) in &self.f.rows[r] {
                    self.d_struct[j] -= y * c;
                }
            }
        }
    }

    fn price(&mut self, phase1: bool) -> Entering {
        self.compute_duals(phase1);
        self.fill_structural_reduced_costs(phase1);
        let dtol = self.tols.dual * (1.0 + self.f.cost.iter().fold(0.0f64, |m, &c| m.max(c.abs())));
        let mut best: Option<(usize, f64, f64)> = None; // (var, dir, score)
        let nv = self.f.n_structural + self.f.m;
        for var in 0..nv {
            let stat = self.status[var];
            if stat == VarStatus::Basic {
                continue;
            }
            if self.f.lo[var] == self.f.up[var] {
                continue; // fixed
            }
            let d = if var < self.f.n_structural {
                self.d_struct[var]
            } else {
                self.structural_cost(var, phase1) + self.y_rows[var - self.f.n_structural]
            };
            let cand: Option<(f64, f64)> = match stat {
                VarStatus::AtLower if d < -dtol => Some((1.0, -d / self.col_scale[var])),
                VarStatus::AtUpper if d > dtol => Some((-1.0, d / self.col_scale[var])),
                VarStatus::Free if d.abs() > dtol => {
                    Some((-d.signum(), d.abs() / self.col_scale[var]))
                }
                _ => None,
            };
            if let Some((dir, score)) = cand {
                if self.bland {
                    return Entering::Var { var, dir };
                }
                if best.map_or(true, |(_, _, s)| score > s) {
                    best = Some((var, dir, score));
                }
            }
        }
        match best {
            Some((var, dir, _)) => Entering::Var { var, dir },
            None => Entering::None,
        }
    }

    /// Basic-variable rates for a unit increase of `var`: fills dir_s
    /// (kernel positions) and dir_act (covered rows). Basic value change
    /// per unit theta along `dir` is -dir * component.
    fn ftran(&mut self, var: usize) {
        let ns = self.f.n_structural;
        let k = self.kernel_size();
        self.dir_s.clear();
        self.dir_s.resize(k, 0.0);
        for v in self.dir_act.iter_mut() {
            *v = 0.0;
        }
        if var < ns {
            // y_S = W a[R]
            for &(row, c) in &self.f.cols[var] {
                if !self.covered[row] {
                    let q = self.pos_in_r[row];
                    for p in 0..k {
                        self.dir_s[p] += self.w[(p, q)] * c;
                    }
                }
            }
            // y_act[t] = A_S[t, :] y_S - a[t]; components below the pivot
            // threshold can never block the ratio test, so skip them
            for (p, &svar) in self.s_vars.iter().enumerate() {
                let ys = self.dir_s[p];
                if ys.abs() > 1e-13 {
                    for &(row, c) in &self.f.cols[svar] {
                        if self.covered[row] {
                            self.dir_act[row] += c * ys;
                        }
                    }
                }
            }
            for &(row, c) in &self.f.cols[var] {
                if self.covered[row] {
                    self.dir_act[row] -= c;
                }
            }
        } else {
            let t0 = var - ns;
            debug_assert!(!self.covered[t0]);
            let q = self.pos_in_r[t0];
            for p in 0..k {
                self.dir_s[p] = -self.w[(p, q)];
            }
            for (p, &svar) in self.s_vars.iter().enumerate() {
                let ys = self.dir_s[p];
                if ys.abs() > 1e-13 {
                    for &(row, c) in &self.f.cols[svar] {
                        if self.covered[row] {
                            self.dir_act[row] += c * ys;
                        }
                    }
                }
            }
        }
    }

    fn basic_rate(&self, var: usize, dir: f64) -> f64 {
        let ns = self.f.n_structural;
        let comp = if var < ns {
            self.dir_s[self.pos_in_s[var]]
        } else {
            self.dir_act[var - ns]
        };
        -dir * comp
    }

    /// Long-step phase-1 ratio test: walk the breakpoints of the piecewise
    /// linear infeasibility sum in increasing theta, accumulating slope
    /// until it turns nonnegative. One pivot can carry many basics through
    /// their bounds, which keeps warm restarts cheap.
    fn ratio_test_phase1(&self, entering: usize, dir: f64, d_entering: f64) -> Blocking {
        // breakpoints: (var, |rate|, theta, to_upper)
        let mut brk = self.ratio_scan.borrow_mut();
        brk.clear();
        // each breakpoint adds |rate| to the directional derivative of the
        // infeasibility sum. A variable that starts beyond one bound and
        // moves across the whole range contributes at BOTH bounds (for an
        // equality pair lo == up the two increments coincide), so both
        // crossings must be emitted or the walk overshoots the minimizer.
        let mut push_var = |var: usize, rate: f64| {
            if rate.abs() <= PIVOT_TOL * 1e-2 {
                return;
            }
            let v = self.value[var];
            let (lo, up) = (self.f.lo[var], self.f.up[var]);
            let tol = self.feas_tol_for(var);
            if rate > 0.0 {
                if v < lo - tol {
                    brk.push((var, rate.abs(), ((lo - v) / rate).max(0.0), false));
                }
                if v < up + tol && up.is_finite() {
                    brk.push((var, rate.abs(), ((up - v) / rate).max(0.0), true));
                }
            } else {
                if v > up + tol {
                    brk.push((var, rate.abs(), ((up - v) / rate).max(0.0), true));
                }
                if v > lo - tol && lo.is_finite() {
                    brk.push((var, rate.abs(), ((lo - v) / rate).max(0.0), false));
                }
            }
        };
        for &var in self.s_vars.iter() {
            push_var(var, self.basic_rate(var, dir));
        }
        let ns = self.f.n_structural;
        for r in 0..self.f.m {
            if self.covered[r] {
                push_var(ns + r, self.basic_rate(ns + r, dir));
            }
        }
        brk.sort_unstable_by(|a, b| a.2.partial_cmp(&b.2).expect("finite thetas"));

        let own_span = self.f.up[entering] - self.f.lo[entering];
        let own = if own_span.is_finite() {
            own_span
        } else {
            f64::INFINITY
        };
        // slope of the infeasibility sum along the move; negative at start
        let mut slope = -d_entering.abs();
        let mut fallback: Option<(usize, f64, bool, f64)> = None;
        for &(var, rate_abs, theta, to_upper) in brk.iter() {
            if theta >= own {
                break;
            }
            slope += rate_abs;
            if slope >= -1e-12 {
                if rate_abs >= PIVOT_TOL {
                    return Blocking::Leave {
                        var,
                        theta,
                        to_upper,
                    };
                }
                // too small to pivot on; remember the best nearby candidate
                match fallback {
                    Some((_, _, _, r)) if r >= rate_abs => {}
                    _ => fallback = Some((var, theta, to_upper, rate_abs)),
                }
            } else if rate_abs >= PIVOT_TOL {
                // keep a solid pivot in reserve in case only tiny rates
                // remain after the slope turns
                fallback = Some((var, theta, to_upper, rate_abs));
            }
        }
        if slope >= -1e-12 {
            if let Some((var, theta, to_upper, _)) = fallback {
                return Blocking::Leave {
                    var,
                    theta,
                    to_upper,
                };
            }
        }
        if own < f64::INFINITY {
            return Blocking::Flip { theta: own };
        }
        Blocking::Unbounded
    }

    /// Two-pass ratio test over all basic variables plus the entering
    /// variable's own bound flip.
    fn ratio_test(&self, entering: usize, dir: f64, phase1: bool) -> Blocking {
        // pass 1: relaxed minimum step
        let mut theta_relaxed = f64::INFINITY;
        let slack = self.tols.feas;
        let consider = |var: usize, rate: f64| -> Option<(f64, bool)> {
            // returns (distance, to_upper)
            if rate.abs() <= PIVOT_TOL * 1e-2 {
                return None;
            }
            let v = self.value[var];
            let (lo, up) = (self.f.lo[var], self.f.up[var]);
            let tol = self.feas_tol_for(var);
            let below = v < lo - tol;
            let above = v > up + tol;
            if phase1 && below {
                if rate > 0.0 {
                    return Some(((lo - v) / rate, false));
                }
                return None;
            }
            if phase1 && above {
                if rate < 0.0 {
                    return Some(((up - v) / rate, true));
                }
                return None;
            }
            if rate > 0.0 && up.is_finite() {
                return Some((((up - v) / rate).max(0.0), true));
            }
            if rate < 0.0 && lo.is_finite() {
                return Some((((lo - v) / rate).max(0.0), false));
            }
            None
        };

        let ns = self.f.n_structural;
        let mut scan = self.ratio_scan.borrow_mut(); // var, rate, theta, to_upper
        scan.clear();
        for &var in self.s_vars.iter() {
            let rate = self.basic_rate(var, dir);
            if let Some((theta, to_upper)) = consider(var, rate) {
                scan.push((var, rate, theta, to_upper));
                let relaxed = theta + slack / rate.abs();
                theta_relaxed = theta_relaxed.min(relaxed);
            }
        }
        for r in 0..self.f.m {
            if self.covered[r] {
                let var = ns + r;
                let rate = self.basic_rate(var, dir);
                if let Some((theta, to_upper)) = consider(var, rate) {
                    scan.push((var, rate, theta, to_upper));
                    let relaxed = theta + slack / rate.abs();
                    theta_relaxed = theta_relaxed.min(relaxed);
                }
            }
        }
        // entering's own travel
        let own_span = self.f.up[entering] - self.f.lo[entering];
        let own = if own_span.is_finite() {
            own_span
        } else {
            f64::INFINITY
        };
        if own < f64::INFINITY {
            theta_relaxed = theta_relaxed.min(own);
        }
        if theta_relaxed == f64::INFINITY {
            return Blocking::Unbounded;
        }
        // pass 2: among candidates within the relaxed step, largest pivot
        let mut chosen: Option<(usize, f64, f64, bool)> = None;
        for &(var, rate, theta, to_upper) in scan.iter() {
            if theta <= theta_relaxed {
                let better = match (chosen, self.bland) {
                    (None, _) => true,
                    (Some((cv, cr, _, _)), true) => var < cv && cr.abs() > 0.0,
                    (Some((_, cr, _, _)), false) => rate.abs() > cr.abs(),
                };
                if better {
                    chosen = Some((var, rate, theta, to_upper));
                }
            }
        }
        match chosen {
            Some((var, _rate, theta, to_upper)) => {
                if own < theta.max(0.0) {
                    Blocking::Flip { theta: own }
                } else {
                    Blocking::Leave {
                        var,
                        theta: theta.max(0.0),
                        to_upper,
                    }
                }
            }
            None => {
                if own < f64::INFINITY {
                    Blocking::Flip { theta: own }
                } else {
                    Blocking::Unbounded
                }
            }
        }
    }

    fn apply_motion(&mut self, entering: usize, dir: f64, theta: f64) {
        if theta == 0.0 {
            return;
        }
        let ns = self.f.n_structural;
        for (p, &var) in self.s_vars.iter().enumerate() {
            self.value[var] -= dir * theta * self.dir_s[p];
        }
        for r in 0..self.f.m {
            if self.covered[r] {
                self.value[ns + r] -= dir * theta * self.dir_act[r];
            }
        }
        self.value[entering] += dir * theta;
    }

    /// Replace basis membership when `leaving` exits for `entering`,
    /// updating the kernel inverse by the appropriate rank-one formula.
    fn pivot(&mut self, entering: usize, leaving: usize) -> Result<(), LpError> {
        let ns = self.f.n_structural;
        let k = self.kernel_size();
        let w = &self.w;
        match (entering < ns, leaving < ns) {
            (true, true) => {
                // column replacement at cp
                let cp = self.pos_in_s[leaving];
                let u: Vec<f64> = (0..k)
                    .map(|p| {
                        let mut acc = 0.0;
                        for &(row, c) in &self.f.cols[entering] {
                            if !self.covered[row] {
                                acc += w[(p, self.pos_in_r[row])] * c;
                            }
                        }
                        acc
                    })
                    .collect();
                let piv = u[cp];
                if piv.abs() < PIVOT_TOL {
                    return Err(LpError::NumericalFailure("tiny pivot (col replace)".into()));
                }
                let wrow: Vec<f64> = (0..k).map(|q| w[(cp, q)]).collect();
                for p in 0..k {
                    let factor = (u[p] - if p == cp { 1.0 } else { 0.0 }) / piv;
                    if factor != 0.0 {
                        for q in 0..k {
                            self.w[(p, q)] -= factor * wrow[q];
                        }
                    }
                }
                self.pos_in_s[leaving] = NONE;
                self.pos_in_s[entering] = cp;
                self.s_vars[cp] = entering;
            }
            (true, false) => {
                // border growth: leaving activity's row t joins the kernel
                let t = leaving - ns;
                let b: Vec<f64> = (0..k)
                    .map(|q| {
                        let r = self.r_rows[q];
                        self.f.cols[entering]
                            .iter()
                            .find(|&&(row, _)| row == r)
                            .map_or(0.0, |&(_, c)| c)
                    })
                    .collect();
                let c_row: Vec<f64> = self
                    .s_vars
                    .iter()
                    .map(|&sv| {
                        self.f.cols[sv]
                            .iter()
                            .find(|&&(row, _)| row == t)
                            .map_or(0.0, |&(_, c)| c)
                    })
                    .collect();
                let delta = self.f.cols[entering]
                    .iter()
                    .find(|&&(row, _)| row == t)
                    .map_or(0.0, |&(_, c)| c);
                let wb: Vec<f64> = (0..k)
                    .map(|p| (0..k).map(|q| w[(p, q)] * b[q]).sum())
                    .collect();
                let cw: Vec<f64> = (0..k)
                    .map(|q| (0..k).map(|p| c_row[p] * w[(p, q)]).sum())
                    .collect();
                let s = delta - c_row.iter().zip(wb.iter()).map(|(a, b)| a * b).sum::<f64>();
                if s.abs() < PIVOT_TOL {
                    return Err(LpError::NumericalFailure("tiny pivot (border)".into()));
                }
                let mut nw = DMatrix::zeros(k + 1, k + 1);
                for p in 0..k {
                    for q in 0..k {
                        nw[(p, q)] = w[(p, q)] + wb[p] * cw[q] / s;
                    }
                    nw[(p, k)] = -wb[p] / s;
                }
                for q in 0..k {
                    nw[(k, q)] = -cw[q] / s;
                }
                nw[(k, k)] = 1.0 / s;
                self.w = nw;
                self.covered[t] = false;
                self.pos_in_r[t] = k;
                self.r_rows.push(t);
                self.pos_in_s[entering] = k;
                self.s_vars.push(entering);
            }
            (false, true) => {
                // shrink: entering activity covers its row, a structural leaves
                let t0 = entering - ns;
                let rp = self.pos_in_r[t0];
                let cp = self.pos_in_s[leaving];
                let piv = w[(cp, rp)];
                if piv.abs() < PIVOT_TOL {
                    return Err(LpError::NumericalFailure("tiny pivot (shrink)".into()));
                }
                let mut nw = DMatrix::zeros(k - 1, k - 1);
                let mut pi = 0;
                for p in 0..k {
                    if p == cp {
                        continue;
                    }
                    let mut qi = 0;
                    for q in 0..k {
                        if q == rp {
                            continue;
                        }
                        nw[(pi, qi)] = w[(p, q)] - w[(p, rp)] * w[(cp, q)] / piv;
                        qi += 1;
                    }
                    pi += 1;
                }
                self.w = nw;
                self.covered[t0] = true;
                self.pos_in_r[t0] = NONE;
                self.pos_in_s[leaving] = NONE;
                self.r_rows.remove(rp);
                self.s_vars.remove(cp);
                for (p, &r) in self.r_rows.iter().enumerate() {
                    self.pos_in_r[r] = p;
                }
                for (p, &v) in self.s_vars.iter().enumerate() {
                    self.pos_in_s[v] = p;
                }
            }
            (false, false) => {
                // row replacement: entering covers t0, leaving uncovers t1
                let t0 = entering - ns;
                let t1 = leaving - ns;
                let rp = self.pos_in_r[t0];
                let v_row: Vec<f64> = self
                    .s_vars
                    .iter()
                    .map(|&sv| {
                        self.f.cols[sv]
                            .iter()
                            .find(|&&(row, _)| row == t1)
                            .map_or(0.0, |&(_, c)| c)
                    })
                    .collect();
                let vw: Vec<f64> = (0..k)
                    .map(|q| (0..k).map(|p| v_row[p] * w[(p, q)]).sum())
                    .collect();
                let piv = vw[rp];
                if piv.abs() < PIVOT_TOL {
                    return Err(LpError::NumericalFailure("tiny pivot (row replace)".into()));
                }
                let wcol: Vec<f64> = (0..k).map(|p| w[(p, rp)]).collect();
                for p in 0..k {
                    if wcol[p] == 0.0 {
                        continue;
                    }
                    for q in 0..k {
                        let corr = vw[q] - if q == rp { 1.0 } else { 0.0 };
                        self.w[(p, q)] -= wcol[p] * corr / piv;
                    }
                }
                self.covered[t0] = true;
                self.pos_in_r[t0] = NONE;
                self.covered[t1] = false;
                self.pos_in_r[t1] = rp;
                self.r_rows[rp] = t1;
            }
        }
        self.pivots_since_refactor += 1;
        Ok(())
    }

    fn run(&mut self) -> Result<SimplexOutcome, LpError> {
        let max_iters = if self.tols.max_iterations > 0 {
            self.tols.max_iterations
        } else {
            200 * (self.f.m + self.f.n_structural) + 20_000
        };
        loop {
            self.iterations += 1;
            if self.iterations > max_iters {
                return Err(LpError::NumericalFailure(format!(
                    "iteration limit {max_iters} exceeded"
                )));
            }
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let phase1 = if self.phase2_locked {
                false
            } else {
                let mut infeasible = self.scan_infeasibility() > 0.0;
                if infeasible && self.was_feasible && self.pivots_since_refactor > 0 {
                    // a feasible iterate cannot become infeasible through
                    // exact pivots; revalidate against a fresh factorization
                    self.refactor()?;
                    infeasible = self.scan_infeasibility() > 0.0;
                }
                if infeasible && self.was_feasible {
                    self.phase_flips += 1;
                    if self.phase_flips > 8 {
                        // repeated phase flip-flop: pin the pivot order
                        self.bland_sticky = true;
                    }
                }
                if !infeasible && self.pivots_since_refactor == 0 {
                    self.phase2_locked = true;
                }
                self.was_feasible = !infeasible;
                infeasible
            };
            match self.price(phase1) {
                Entering::None => {
                    // confirm any verdict on a freshly factorized basis
                    if self.pivots_since_refactor > 0 {
                        self.refactor()?;
                        continue;
                    }
                    if phase1 {
                        return Ok(SimplexOutcome::Infeasible);
                    }
                    return self.finish();
                }
                Entering::Var { var, dir } => {
                    self.ftran(var);
                    let blocking = if phase1 {
                        let d = self.reduced_cost(var, true);
                        self.ratio_test_phase1(var, dir, d)
                    } else {
                        self.ratio_test(var, dir, false)
                    };
                    match blocking {
                        Blocking::Unbounded => {
                            if phase1 {
                                return Err(LpError::NumericalFailure(
                                    "unbounded infeasibility direction".into(),
                                ));
                            }
                            if self.pivots_since_refactor > 0 {
                                self.refactor()?;
                                continue;
                            }
                            return Ok(SimplexOutcome::Unbounded);
                        }
                        Blocking::Flip { theta } => {
                            self.apply_motion(var, dir, theta);
                            self.status[var] = match self.status[var] {
                                VarStatus::AtLower => VarStatus::AtUpper,
                                VarStatus::AtUpper => VarStatus::AtLower,
                                other => other,
                            };
                            self.value[var] = if self.status[var] == VarStatus::AtUpper {
                                self.f.up[var]
                            } else {
                                self.f.lo[var]
                            };
                            self.note_step(theta);
                        }
                        Blocking::Leave {
                            var: leaving,
                            theta,
                            to_upper,
                        } => {
                            self.apply_motion(var, dir, theta);
                            match self.pivot(var, leaving) {
                                Ok(()) => {}
                                Err(_) if self.pivots_since_refactor > 0 => {
                                    // stale inverse; rebuild and retry this pass
                                    self.refactor()?;
                                    continue;
                                }
                                Err(e) => return Err(e),
                            }
                            self.status[var] = VarStatus::Basic;
                            self.status[leaving] = if to_upper {
                                VarStatus::AtUpper
                            } else {
                                VarStatus::AtLower
                            };
                            self.value[leaving] = if to_upper {
                                self.f.up[leaving]
                            } else {
                                self.f.lo[leaving]
                            };
                            self.note_step(theta);
                        }
                    }
                }
            }
        }
    }

    fn note_step(&mut self, theta: f64) {
        if theta.abs() <= 1e-12 {
            self.degenerate_streak += 1;
            if self.degenerate_streak > BLAND_TRIGGER {
                self.bland = true;
            }
        } else {
            self.degenerate_streak = 0;
            self.bland = self.bland_sticky;
        }
    }

    /// Optimality certificate plus solution extraction.
    fn finish(&mut self) -> Result<SimplexOutcome, LpError> {
        self.compute_duals(false);
        let ns = self.f.n_structural;
        let cert_tol =
            self.tols.cert_dual * (1.0 + self.f.cost.iter().fold(0.0f64, |m, &c| m.max(c.abs())));
        let mut dual_obj = 0.0;
        for var in 0..(ns + self.f.m) {
            if self.status[var] == VarStatus::Basic {
                continue;
            }
            let d = self.reduced_cost(var, false);
            let ok = if self.f.lo[var] == self.f.up[var] {
                true
            } else {
                match self.status[var] {
                    VarStatus::AtLower => d >= -cert_tol,
                    VarStatus::AtUpper => d <= cert_tol,
                    VarStatus::Free => d.abs() <= cert_tol,
                    VarStatus::Basic => unreachable!(),
                }
            };
            if !ok {
                return Err(LpError::NumericalFailure(format!(
                    "dual feasibility violated at variable {var}: d = {d:.3e}"
                )));
            }
            dual_obj += d * self.value[var];
        }
        let min_obj: f64 = (0..ns).map(|j| self.f.cost[j] * self.value[j]).sum();
        if (min_obj - dual_obj).abs() > self.tols.cert_dual * (1.0 + min_obj.abs()) {
            return Err(LpError::NumericalFailure(format!(
                "duality gap {:.3e} above tolerance",
                (min_obj - dual_obj).abs()
            )));
        }
        let x: Vec<f64> = self.value[..ns].to_vec();
        let snapshot = BasisSnapshot {
            n_structural: ns,
            n_rows: self.f.m,
            basic_structurals: self.s_vars.clone(),
            covered_rows: (0..self.f.m).filter(|&r| self.covered[r]).collect(),
            nonbasic_at_upper: (0..(ns + self.f.m))
                .filter(|&v| self.status[v] == VarStatus::AtUpper)
                .collect(),
        };
        Ok(SimplexOutcome::Optimal {
            x,
            objective: -min_obj,
            snapshot,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn solve(lp: &LinearProgram) -> super::super::LpSolution {
        lp.solve(&LpTolerances::default()).unwrap()
    }

    #[test]
    fn kernel_updates_survive_many_pivots() {
        // transportation-flavored LP exercising all four pivot cases
        let n = 8;
        let mut lp = LinearProgram::new(n);
        for j in 0..n {
            lp.set_bounds(j, 0.0, 3.0 + j as f64 * 0.25);
            lp.set_objective_coeff(j, ((j * 7 + 3) % 5) as f64 - 2.0);
        }
        for i in 0..12 {
            let coeffs: Vec<(usize, f64)> = (0..n)
                .filter(|j| (i + j) % 3 != 0)
                .map(|j| (j, 1.0 + ((i * j) % 4) as f64 * 0.5))
                .collect();
            lp.add_range_row(-4.0, coeffs, 6.0 + i as f64 * 0.3);
        }
        let s = solve(&lp);
        assert!(s.is_optimal());
        let rep = lp.check_feasibility(&s.x, 1e-9).unwrap();
        assert!(
            rep.max_violation() < 1e-8,
            "violation {}",
            rep.max_violation()
        );
    }

    #[test]
    fn warm_start_agrees_with_cold() {
        let mut lp = LinearProgram::new(4);
        for j in 0..4 {
            lp.set_bounds(j, 0.0, 10.0);
            lp.set_objective_coeff(j, 1.0 + j as f64);
        }
        lp.add_le_row(vec![(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)], 5.0);
        lp.add_range_row(0.0, vec![(0, 1.0), (2, -1.0)], 2.0);
        let tols = LpTolerances::default();
        let (s1, snap) = lp.solve_warm(&tols, None).unwrap();
        // perturb objective slightly and re-solve warm
        lp.set_objective_coeff(0, 1.05);
        let (s2_cold, _) = lp.solve_warm(&tols, None).unwrap();
        let (s2_warm, _) = lp.solve_warm(&tols, snap.as_ref()).unwrap();
        assert!(s1.is_optimal());
        assert_abs_diff_eq!(s2_cold.objective, s2_warm.objective, epsilon = 1e-9);
    }
}
