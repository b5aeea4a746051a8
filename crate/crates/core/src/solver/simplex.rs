//! Bounded-variable primal simplex on a dense tableau.
//!
//! Two phases with artificial variables, preceded by a crash step that makes
//! row slacks basic wherever the initial point already satisfies the row, so
//! well-posed models (every equality row carrying a signed slack pair, for
//! instance) skip phase 1 entirely.
//!
//! Pivot rules are deterministic: Dantzig pricing with lowest-index
//! tie-breaks, switching to Bland's rule after a run of degenerate steps.
//! Row elimination is data-parallel over tableau rows when the `parallel`
//! feature is enabled; per-row arithmetic order is identical either way, so
//! results are bit-reproducible.

use crate::error::LpError;
use crate::par;

use super::lp::{LinearProgram, LpSolution, LpStatus, RowSense, Sense};

const TOL_RC: f64 = 1e-9;
const TOL_PIVOT: f64 = 1e-9;
const TOL_DEGEN_STEP: f64 = 1e-10;
const FEAS_EPS: f64 = 1e-7;
const BLAND_TRIGGER: usize = 60;
const REFRESH_EVERY: usize = 512;
const PAR_MIN_CELLS: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable parked at zero.
    FreeZero,
}

enum Step {
    Flip,
    Pivot { row: usize, t: f64 },
    Unbounded,
}

enum LoopExit {
    Optimal,
    Unbounded,
}

struct Simplex {
    m: usize,
    n_struct: usize,
    n_total: usize,
    /// Row length: all columns plus the `B^-1 b` column at index `n_total`.
    stride: usize,
    tab: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Phase-2 cost in internal minimize form (zero on slacks/artificials).
    cost: Vec<f64>,
    /// Active-phase cost and its reduced costs.
    phase_cost: Vec<f64>,
    rc: Vec<f64>,
    basic_vals: Vec<f64>,
    n_art: usize,
    bland: bool,
    degen_run: usize,
    pivots: usize,
    max_pivots: usize,
    scratch_row: Vec<f64>,
}

/// Solves `lp`, returning primal values, row duals and reduced costs.
///
/// Infeasible and unbounded models come back as statuses. `Err` is reserved
/// for malformed input and iteration-limit exhaustion.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut s = Simplex::build(lp);
    let status = s.run()?;
    let sol = s.extract(lp, status);
    #[cfg(debug_assertions)]
    if sol.status == LpStatus::Optimal {
        let report = sol.verify(lp);
        let scale = 1.0 + sol.objective.abs();
        debug_assert!(
            report.within(1e-6 * scale.max(1.0), 1e-6 * scale),
            "simplex certificate out of tolerance: {report:?} (objective {})",
            sol.objective
        );
    }
    Ok(sol)
}

impl Simplex {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.n_rows();
        let n = lp.n_vars();
        let max_sense = lp.sense == Sense::Maximize;

        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut state = Vec::with_capacity(n + m);
        for j in 0..n {
            state.push(if lower[j].is_finite() {
                State::AtLower
            } else if upper[j].is_finite() {
                State::AtUpper
            } else {
                State::FreeZero
            });
        }
        // Slack bounds per row sense.
        for sense in &lp.row_senses {
            let (lo, hi) = match sense {
                RowSense::Le => (0.0, f64::INFINITY),
                RowSense::Ge => (f64::NEG_INFINITY, 0.0),
                RowSense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
            state.push(State::AtLower); // provisional, fixed up below
        }

        // Residuals at the initial nonbasic point decide slack vs artificial.
        let nb_val = |j: usize, st: State| -> f64 {
            match st {
                State::AtLower => lower[j],
                State::AtUpper => upper[j],
                _ => 0.0,
            }
        };
        let mut residual = vec![0.0; m];
        for i in 0..m {
            let mut act = 0.0;
            for j in 0..n {
                let a = lp.rows[i][j];
                if a != 0.0 {
                    act += a * nb_val(j, state[j]);
                }
            }
            residual[i] = lp.rhs[i] - act;
        }

        let mut art_rows: Vec<(usize, f64)> = Vec::new(); // (row, sigma)
        let mut basis = vec![0usize; m];
        let mut basic_vals = vec![0.0; m];
        for i in 0..m {
            let sj = n + i;
            let r = residual[i];
            if r >= lower[sj] - 1e-11 && r <= upper[sj] + 1e-11 {
                basis[i] = sj;
                basic_vals[i] = r;
                state[sj] = State::Basic(i);
            } else {
                // Slack parks at its zero bound; artificial absorbs the rest.
                state[sj] = match lp.row_senses[i] {
                    RowSense::Ge => State::AtUpper,
                    _ => State::AtLower,
                };
                art_rows.push((i, if r >= 0.0 { 1.0 } else { -1.0 }));
            }
        }

        let n_art = art_rows.len();
        let n_total = n + m + n_art;
        let stride = n_total + 1;
        let mut tab = vec![0.0; m * stride];
        for i in 0..m {
            let row = &mut tab[i * stride..(i + 1) * stride];
            row[..n].copy_from_slice(&lp.rows[i]);
            row[n + i] = 1.0;
            row[n_total] = lp.rhs[i];
        }
        let mut art_col = n + m;
        for &(i, sigma) in &art_rows {
            let row = &mut tab[i * stride..(i + 1) * stride];
            row[art_col] = sigma;
            if sigma < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
            lower.push(0.0);
            upper.push(f64::INFINITY);
            state.push(State::Basic(i));
            basis[i] = art_col;
            basic_vals[i] = residual[i].abs();
            art_col += 1;
        }

        let mut cost = vec![0.0; n_total];
        for j in 0..n {
            cost[j] = if max_sense { -lp.objective[j] } else { lp.objective[j] };
        }

        let max_pivots = 20_000 + 40 * (m + n_total);
        Simplex {
            m,
            n_struct: n,
            n_total,
            stride,
            tab,
            basis,
            state,
            lower,
            upper,
            cost,
            phase_cost: Vec::new(),
            rc: vec![0.0; n_total],
            basic_vals,
            n_art,
            bland: false,
            degen_run: 0,
            pivots: 0,
            max_pivots,
            scratch_row: vec![0.0; stride],
        }
    }

    fn run(&mut self) -> Result<LpStatus, LpError> {
        if self.n_art > 0 {
            let mut c1 = vec![0.0; self.n_total];
            for j in self.n_struct + self.m..self.n_total {
                c1[j] = 1.0;
            }
            self.phase_cost = c1;
            self.recompute_rc();
            match self.optimize()? {
                LoopExit::Unbounded => {
                    // Phase-1 objective is bounded below by zero.
                    return Err(LpError::Malformed(
                        "phase-1 simplex reported an unbounded direction".into(),
                    ));
                }
                LoopExit::Optimal => {}
            }
            let infeas: f64 = (self.n_struct + self.m..self.n_total)
                .map(|j| self.value_of(j))
                .sum();
            if infeas > FEAS_EPS {
                return Ok(LpStatus::Infeasible);
            }
            self.retire_artificials();
        }
        self.phase_cost = self.cost.clone();
        self.recompute_rc();
        match self.optimize()? {
            LoopExit::Optimal => Ok(LpStatus::Optimal),
            LoopExit::Unbounded => Ok(LpStatus::Unbounded),
        }
    }

    /// Pins artificials at zero; pivots basic ones out where possible.
    fn retire_artificials(&mut self) {
        for j in self.n_struct + self.m..self.n_total {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
        }
        for r in 0..self.m {
            let b = self.basis[r];
            if b < self.n_struct + self.m {
                continue;
            }
            // Degenerate swap onto any usable non-artificial column.
            let row = &self.tab[r * self.stride..(r + 1) * self.stride];
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n_struct + self.m {
                if matches!(self.state[j], State::Basic(_)) {
                    continue;
                }
                let a = row[j].abs();
                if a > 1e-7 && best.map_or(true, |(_, ba)| a > ba) {
                    best = Some((j, a));
                }
            }
            if let Some((q, _)) = best {
                let dir = match self.state[q] {
                    State::AtUpper => -1.0,
                    _ => 1.0,
                };
                self.pivot(r, q, 0.0, dir);
            }
            // No usable column: the row was redundant; the artificial stays
            // basic, pinned at zero, and can never be driven off it.
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::AtLower => self.lower[j],
            State::AtUpper => self.upper[j],
            State::FreeZero => 0.0,
            State::Basic(_) => unreachable!("nonbasic_value on basic column"),
        }
    }

    fn value_of(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Basic(r) => self.basic_vals[r],
            _ => self.nonbasic_value(j),
        }
    }

    fn recompute_rc(&mut self) {
        self.rc.copy_from_slice(&self.phase_cost);
        for r in 0..self.m {
            let cb = self.phase_cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.tab[r * self.stride..r * self.stride + self.n_total];
                for (rcj, a) in self.rc.iter_mut().zip(row) {
                    *rcj -= cb * a;
                }
            }
        }
    }

    /// Recomputes basic values from the `B^-1 b` column and the nonbasic point.
    fn refresh_basic_vals(&mut self) {
        for r in 0..self.m {
            self.basic_vals[r] = self.tab[r * self.stride + self.n_total];
        }
        for j in 0..self.n_total {
            if matches!(self.state[j], State::Basic(_)) {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for r in 0..self.m {
                    let a = self.tab[r * self.stride + j];
                    if a != 0.0 {
                        self.basic_vals[r] -= a * v;
                    }
                }
            }
        }
    }

    fn optimize(&mut self) -> Result<LoopExit, LpError> {
        loop {
            if self.pivots >= self.max_pivots {
                return Err(LpError::IterationLimit(self.pivots));
            }
            if self.pivots > 0 && self.pivots % REFRESH_EVERY == 0 {
                self.refresh_basic_vals();
                self.recompute_rc();
            }
            let Some((q, dir)) = self.choose_entering() else {
                return Ok(LoopExit::Optimal);
            };
            match self.ratio_test(q, dir) {
                Step::Unbounded => return Ok(LoopExit::Unbounded),
                Step::Flip => {
                    self.bound_flip(q);
                    self.pivots += 1;
                }
                Step::Pivot { row, t } => {
                    if t <= TOL_DEGEN_STEP {
                        self.degen_run += 1;
                        if self.degen_run >= BLAND_TRIGGER {
                            self.bland = true;
                        }
                    } else {
                        self.degen_run = 0;
                    }
                    self.pivot(row, q, t, dir);
                    self.pivots += 1;
                }
            }
        }
    }

    /// Entering column and its movement direction, or `None` at optimality.
    ///
    /// Dantzig pricing (most negative effective reduced cost, lowest index on
    /// ties); Bland mode takes the lowest eligible index outright.
    fn choose_entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None; // (col, dir, score)
        for j in 0..self.n_total {
            let (dir, score) = match self.state[j] {
                State::Basic(_) => continue,
                State::AtLower => {
                    if self.upper[j] - self.lower[j] <= 1e-12 {
                        continue; // fixed
                    }
                    (1.0, -self.rc[j])
                }
                State::AtUpper => {
                    if self.upper[j] - self.lower[j] <= 1e-12 {
                        continue;
                    }
                    (-1.0, self.rc[j])
                }
                State::FreeZero => (-self.rc[j].signum(), self.rc[j].abs()),
            };
            if score <= TOL_RC {
                continue;
            }
            if self.bland {
                return Some((j, dir));
            }
            if best.map_or(true, |(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ratio_test(&self, q: usize, dir: f64) -> Step {
        let span = self.upper[q] - self.lower[q]; // may be inf
        let mut t_best = if span.is_finite() { span } else { f64::INFINITY };
        let mut leave: Option<(usize, f64)> = None; // (row, |pivot|)
        for i in 0..self.m {
            let a = self.tab[i * self.stride + q];
            let rate = a * dir; // basic value changes by -rate * t
            if rate > TOL_PIVOT {
                let lo = self.lower[self.basis[i]];
                if lo == f64::NEG_INFINITY {
                    continue;
                }
                let room = (self.basic_vals[i] - lo).max(0.0);
                let t = room / rate;
                if self.beats(t, a.abs(), i, t_best, &leave) {
                    t_best = t;
                    leave = Some((i, a.abs()));
                }
            } else if rate < -TOL_PIVOT {
                let hi = self.upper[self.basis[i]];
                if hi == f64::INFINITY {
                    continue;
                }
                let room = (hi - self.basic_vals[i]).max(0.0);
                let t = room / (-rate);
                if self.beats(t, a.abs(), i, t_best, &leave) {
                    t_best = t;
                    leave = Some((i, a.abs()));
                }
            }
        }
        match leave {
            None if t_best.is_infinite() => Step::Unbounded,
            None => Step::Flip,
            Some((row, _)) => Step::Pivot { row, t: t_best },
        }
    }

    /// Leaving-row preference: strictly smaller ratio wins; ties prefer a
    /// larger pivot element, then the lower basic variable index (always the
    /// lower index in Bland mode).
    fn beats(&self, t: f64, piv: f64, row: usize, t_best: f64, leave: &Option<(usize, f64)>) -> bool {
        if t < t_best - 1e-12 {
            return true;
        }
        if t > t_best + 1e-12 {
            return false;
        }
        match leave {
            None => true, // ties with the entering variable's own span: pivot
            Some((r0, p0)) => {
                if self.bland {
                    self.basis[row] < self.basis[*r0]
                } else if (piv - p0).abs() > 1e-12 {
                    piv > *p0
                } else {
                    self.basis[row] < self.basis[*r0]
                }
            }
        }
    }

    fn bound_flip(&mut self, q: usize) {
        let span = self.upper[q] - self.lower[q];
        let dir = match self.state[q] {
            State::AtLower => 1.0,
            State::AtUpper => -1.0,
            _ => unreachable!("free variables cannot bound-flip"),
        };
        for i in 0..self.m {
            let a = self.tab[i * self.stride + q];
            if a != 0.0 {
                self.basic_vals[i] -= a * dir * span;
            }
        }
        self.state[q] = match self.state[q] {
            State::AtLower => State::AtUpper,
            _ => State::AtLower,
        };
    }

    fn pivot(&mut self, r: usize, q: usize, t: f64, dir: f64) {
        let stride = self.stride;
        let entering_val = self.nonbasic_value(q) + dir * t;
        let a_r = self.tab[r * stride + q];
        debug_assert!(a_r.abs() > TOL_PIVOT * 0.5, "pivot element too small");

        for i in 0..self.m {
            if i != r {
                let a = self.tab[i * stride + q];
                if a != 0.0 {
                    self.basic_vals[i] -= a * dir * t;
                }
            }
        }
        let leaving = self.basis[r];
        let moved_down = a_r * dir > 0.0;
        self.state[leaving] = if moved_down { State::AtLower } else { State::AtUpper };

        // Normalize the pivot row into scratch, then eliminate.
        {
            let row = &mut self.tab[r * stride..(r + 1) * stride];
            let inv = 1.0 / a_r;
            for v in row.iter_mut() {
                *v *= inv;
            }
            self.scratch_row.copy_from_slice(row);
        }
        let scratch = &self.scratch_row;
        par::for_each_row(&mut self.tab, stride, PAR_MIN_CELLS, |i, row| {
            if i == r {
                return;
            }
            let f = row[q];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(scratch) {
                    *v -= f * p;
                }
                row[q] = 0.0; // exact zero instead of rounding residue
            }
        });
        let f = self.rc[q];
        if f != 0.0 {
            for (v, p) in self.rc.iter_mut().zip(&scratch[..self.n_total]) {
                *v -= f * p;
            }
            self.rc[q] = 0.0;
        }

        self.basis[r] = q;
        self.state[q] = State::Basic(r);
        self.basic_vals[r] = entering_val;
    }

    fn extract(&mut self, lp: &LinearProgram, status: LpStatus) -> LpSolution {
        if status != LpStatus::Optimal {
            return LpSolution {
                status,
                x: Vec::new(),
                duals: Vec::new(),
                reduced_costs: Vec::new(),
                objective: f64::NAN,
            };
        }
        self.refresh_basic_vals();
        self.phase_cost = self.cost.clone();
        self.recompute_rc();

        let n = self.n_struct;
        let x: Vec<f64> = (0..n).map(|j| self.value_of(j)).collect();
        let sgn = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
        // y_i = -rc(slack_i) in internal minimize form.
        let duals: Vec<f64> = (0..self.m).map(|i| sgn * -self.rc[n + i]).collect();
        let reduced_costs: Vec<f64> = (0..n).map(|j| sgn * self.rc[j]).collect();
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpSolution {
            status,
            x,
            duals,
            reduced_costs,
            objective,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::lp::{LinearProgram, LpStatus, RowSense, Sense};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn one_variable_box() {
        // max x s.t. x <= 3, x >= 0
        let mut lp = LinearProgram::new(Sense::Maximize, 1);
        lp.set_objective(0, 1.0);
        lp.add_row(vec![1.0], RowSense::Le, 3.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.duals[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_objective_equality() {
        // min 0 s.t. x = 5
        let mut lp = LinearProgram::new(Sense::Minimize, 1);
        lp.add_row(vec![1.0], RowSense::Eq, 5.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.objective, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_optimum_resolved_by_lowest_index() {
        // max x + y s.t. x + y <= 1: the documented tie-break lets x enter first.
        let mut lp = LinearProgram::new(Sense::Maximize, 2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.add_row(vec![1.0, 1.0], RowSense::Le, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::new(Sense::Minimize, 1);
        lp.add_row(vec![1.0], RowSense::Ge, 2.0);
        lp.add_row(vec![1.0], RowSense::Le, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::new(Sense::Maximize, 1);
        lp.set_objective(0, 1.0);
        lp.add_row(vec![1.0], RowSense::Ge, 0.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_negative_variables() {
        // min x + y s.t. x + y >= -4, x in [-10, 10], y free
        let mut lp = LinearProgram::new(Sense::Minimize, 2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.set_bounds(0, -10.0, 10.0);
        lp.set_bounds(1, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(vec![1.0, 1.0], RowSense::Ge, -4.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, -4.0, epsilon = 1e-9);
    }

    #[test]
    fn equality_rows_both_signs() {
        // Rows that need artificials of both orientations.
        let mut lp = LinearProgram::new(Sense::Minimize, 3);
        lp.set_objective(0, 2.0);
        lp.set_objective(1, 3.0);
        lp.set_objective(2, 1.0);
        lp.add_row(vec![1.0, 1.0, 1.0], RowSense::Eq, 4.0);
        lp.add_row(vec![1.0, -1.0, 0.0], RowSense::Eq, -1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // x=0, y=1, z=3 -> 6 is optimal: check by vertex enumeration below.
        assert_abs_diff_eq!(sol.objective, 6.0, epsilon = 1e-8);
        let report = sol.verify(&lp);
        assert!(report.within(1e-8, 1e-8), "{report:?}");
    }

    #[test]
    fn bound_flip_path() {
        // max x + 2y with x,y in [0,1], x + y <= 10: both variables flip to
        // their upper bounds without a single row pivot.
        let mut lp = LinearProgram::new(Sense::Maximize, 2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 2.0);
        lp.set_bounds(0, 0.0, 1.0);
        lp.set_bounds(1, 0.0, 1.0);
        lp.add_row(vec![1.0, 1.0], RowSense::Le, 10.0);
        let sol = solve_lp(&lp).unwrap();
        assert_abs_diff_eq!(sol.objective, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn two_runs_are_bit_identical() {
        let mut lp = LinearProgram::new(Sense::Minimize, 4);
        for j in 0..4 {
            lp.set_objective(j, (j as f64 + 1.0) * 0.7);
            lp.set_bounds(j, -1.0, 5.0);
        }
        lp.add_row(vec![1.0, 2.0, -1.0, 0.5], RowSense::Ge, 2.0);
        lp.add_row(vec![0.0, 1.0, 1.0, 1.0], RowSense::Le, 4.0);
        lp.add_row(vec![1.0, 0.0, 1.0, 0.0], RowSense::Eq, 1.5);
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp(&lp).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.duals, b.duals);
        assert!(a.objective.to_bits() == b.objective.to_bits());
    }

    /// Brute-force oracle for 2-variable boxes: dense grid scan.
    fn grid_best(lp: &LinearProgram, lo: [f64; 2], hi: [f64; 2]) -> f64 {
        let steps = 400;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = [
                    lo[0] + (hi[0] - lo[0]) * i as f64 / steps as f64,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / steps as f64,
                ];
                let mut ok = true;
                for r in 0..lp.n_rows() {
                    let act = lp.rows[r][0] * x[0] + lp.rows[r][1] * x[1];
                    let good = match lp.row_senses[r] {
                        RowSense::Le => act <= lp.rhs[r] + 1e-9,
                        RowSense::Ge => act >= lp.rhs[r] - 1e-9,
                        RowSense::Eq => (act - lp.rhs[r]).abs() <= 2e-2,
                    };
                    if !good {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    let v = lp.objective[0] * x[0] + lp.objective[1] * x[1];
                    let v = if lp.sense == Sense::Maximize { v } else { -v };
                    best = best.max(v);
                }
            }
        }
        if lp.sense == Sense::Maximize {
            best
        } else {
            -best
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_two_var_lps_match_grid_oracle(
            c0 in -3.0f64..3.0, c1 in -3.0f64..3.0,
            a in -2.0f64..2.0, b in -2.0f64..2.0, r1 in -1.0f64..4.0,
            c in -2.0f64..2.0, d in -2.0f64..2.0, r2 in -1.0f64..4.0,
            maximize in proptest::bool::ANY,
        ) {
            prop_assume!(a.abs() + b.abs() > 0.1 && c.abs() + d.abs() > 0.1);
            let sense = if maximize { Sense::Maximize } else { Sense::Minimize };
            let mut lp = LinearProgram::new(sense, 2);
            lp.set_objective(0, c0);
            lp.set_objective(1, c1);
            lp.set_bounds(0, 0.0, 3.0);
            lp.set_bounds(1, 0.0, 3.0);
            lp.add_row(vec![a, b], RowSense::Le, r1);
            lp.add_row(vec![c, d], RowSense::Ge, r2);
            let sol = solve_lp(&lp).unwrap();
            match sol.status {
                LpStatus::Optimal => {
                    let oracle = grid_best(&lp, [0.0, 0.0], [3.0, 3.0]);
                    // Grid resolution limits the oracle; allow slack.
                    prop_assert!((sol.objective - oracle).abs() < 0.05,
                        "lp {} vs oracle {}", sol.objective, oracle);
                    let report = sol.verify(&lp);
                    prop_assert!(report.within(1e-7, 1e-6), "{report:?}");
                }
                LpStatus::Infeasible => {
                    let oracle = grid_best(&lp, [0.0, 0.0], [3.0, 3.0]);
                    prop_assert!(oracle.is_infinite(), "solver infeasible, grid found {oracle}");
                }
                LpStatus::Unbounded => prop_assert!(false, "bounded box cannot be unbounded"),
            }
        }

        #[test]
        fn strong_duality_on_random_feasible_lps(
            seed in 0u64..500, m in 1usize..6, n in 2usize..7,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // Build around a known feasible point so the instance is feasible.
            let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let mut lp = LinearProgram::new(
                if rng.gen_bool(0.5) { Sense::Maximize } else { Sense::Minimize }, n);
            for j in 0..n {
                lp.set_objective(j, rng.gen_range(-2.0..2.0));
                lp.set_bounds(j, 0.0, rng.gen_range(2.0..4.0));
            }
            for _ in 0..m {
                let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.5)).collect();
                let act: f64 = coeffs.iter().zip(&x0).map(|(a, v)| a * v).sum();
                match rng.gen_range(0..3) {
                    0 => { lp.add_row(coeffs, RowSense::Le, act + rng.gen_range(0.0..1.0)); }
                    1 => { lp.add_row(coeffs, RowSense::Ge, act - rng.gen_range(0.0..1.0)); }
                    _ => { lp.add_row(coeffs, RowSense::Eq, act); }
                };
            }
            let sol = solve_lp(&lp).unwrap();
            prop_assert_eq!(sol.status, LpStatus::Optimal);
            let report = sol.verify(&lp);
            prop_assert!(report.duality_gap < 1e-6 * (1.0 + sol.objective.abs()), "{report:?}");
            prop_assert!(report.complementarity < 1e-6 * (1.0 + sol.objective.abs()), "{report:?}");
        }
    }
}
