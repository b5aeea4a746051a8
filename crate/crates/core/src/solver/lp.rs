//! Linear program description and solution types.

use std::io::Write;

use crate::error::LpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

/// Dense-row LP: `sense c'x` subject to `A x {<=,=,>=} b`, `lower <= x <= upper`.
///
/// Bounds may be infinite on either side. Rows are stored dense; the problems
/// in this crate are small enough that sparsity bookkeeping isn't worth it.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub row_senses: Vec<RowSense>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// New program over `n_vars` variables, all with bounds `[0, +inf)` and
    /// zero objective.
    pub fn new(sense: Sense, n_vars: usize) -> Self {
        Self {
            sense,
            objective: vec![0.0; n_vars],
            rows: Vec::new(),
            row_senses: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends a row, returning its index.
    pub fn add_row(&mut self, coeffs: Vec<f64>, sense: RowSense, rhs: f64) -> usize {
        debug_assert_eq!(coeffs.len(), self.n_vars());
        self.rows.push(coeffs);
        self.row_senses.push(sense);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    /// Appends `count` variables with bounds `[0, +inf)` and zero objective,
    /// padding existing rows. Returns the index of the first new variable.
    pub fn add_vars(&mut self, count: usize) -> usize {
        let start = self.n_vars();
        self.objective.resize(start + count, 0.0);
        self.lower.resize(start + count, 0.0);
        self.upper.resize(start + count, f64::INFINITY);
        for row in &mut self.rows {
            row.resize(start + count, 0.0);
        }
        start
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn row_activity(&self, row: usize, x: &[f64]) -> f64 {
        self.rows[row].iter().zip(x).map(|(a, v)| a * v).sum()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed("bound vectors mismatch variable count".into()));
        }
        if self.rows.len() != self.rhs.len() || self.rows.len() != self.row_senses.len() {
            return Err(LpError::Malformed("row arrays differ in length".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("objective has non-finite coefficients".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != n {
                return Err(LpError::Malformed(format!("row {i} has wrong length")));
            }
            if row.iter().any(|a| !a.is_finite()) {
                return Err(LpError::Malformed(format!("row {i} has non-finite coefficients")));
            }
            if !self.rhs[i].is_finite() {
                return Err(LpError::Malformed(format!("row {i} has non-finite rhs")));
            }
            if row.iter().all(|&a| a == 0.0) {
                return Err(LpError::Malformed(format!("row {i} has no nonzero coefficient")));
            }
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(LpError::Malformed(format!("variable {j} has invalid bounds")));
            }
        }
        Ok(())
    }

    /// Plain-text dump in the CPLEX LP interchange format, for cross-checking
    /// against external solvers.
    pub fn write_lp_format<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "{}",
            match self.sense {
                Sense::Minimize => "Minimize",
                Sense::Maximize => "Maximize",
            }
        )?;
        write!(w, " obj:")?;
        let mut first = true;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write!(w, " {}{} x{}", if c < 0.0 { "- " } else if first { "" } else { "+ " }, c.abs(), j)?;
                first = false;
            }
        }
        if first {
            write!(w, " 0 x0")?;
        }
        writeln!(w, "\nSubject To")?;
        for (i, row) in self.rows.iter().enumerate() {
            write!(w, " r{i}:")?;
            let mut first = true;
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    write!(w, " {}{} x{}", if a < 0.0 { "- " } else if first { "" } else { "+ " }, a.abs(), j)?;
                    first = false;
                }
            }
            let op = match self.row_senses[i] {
                RowSense::Le => "<=",
                RowSense::Eq => "=",
                RowSense::Ge => ">=",
            };
            writeln!(w, " {op} {}", self.rhs[i])?;
        }
        writeln!(w, "Bounds")?;
        for j in 0..self.n_vars() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                writeln!(w, " x{j} free")?;
            } else if hi == f64::INFINITY {
                writeln!(w, " {lo} <= x{j}")?;
            } else if lo == f64::NEG_INFINITY {
                writeln!(w, " x{j} <= {hi}")?;
            } else {
                writeln!(w, " {lo} <= x{j} <= {hi}")?;
            }
        }
        writeln!(w, "End")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver output.
///
/// `duals[i]` is the sensitivity of the optimal objective to the rhs of row
/// `i` in the problem's own sense (so a binding `<=` row of a maximization
/// has a non-negative dual). `reduced_costs[j] = c_j - y' A_j` in the same
/// convention; a variable sitting at a finite bound carries its bound
/// multiplier there.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
}

/// Residuals of the optimality certificate for a solved LP.
#[derive(Debug, Clone, Copy)]
pub struct VerifyReport {
    /// Worst violation of rows and bounds by the primal point.
    pub primal_violation: f64,
    /// Worst dual sign violation or basic reduced cost.
    pub dual_violation: f64,
    /// `|c'x - (y'b + sum of bound-multiplier terms)|`.
    pub duality_gap: f64,
    /// Worst `|dual_i * row_slack_i|`.
    pub complementarity: f64,
}

impl VerifyReport {
    pub fn within(&self, feas_tol: f64, gap_tol: f64) -> bool {
        self.primal_violation <= feas_tol
            && self.dual_violation <= feas_tol
            && self.duality_gap <= gap_tol
            && self.complementarity <= gap_tol
    }
}

impl LpSolution {
    /// Checks primal feasibility, dual sign feasibility, strong duality and
    /// complementary slackness against `lp`. Only meaningful for `Optimal`.
    pub fn verify(&self, lp: &LinearProgram) -> VerifyReport {
        let n = lp.n_vars();
        let mut primal: f64 = 0.0;
        let mut dual: f64 = 0.0;
        let mut compl_: f64 = 0.0;

        for j in 0..n {
            primal = primal.max(lp.lower[j] - self.x[j]).max(self.x[j] - lp.upper[j]);
        }
        let max_sense = lp.sense == Sense::Maximize;
        let mut dual_obj = 0.0;
        for i in 0..lp.n_rows() {
            let act = lp.row_activity(i, &self.x);
            let slack = self.rhs_slack(lp, i, act);
            primal = primal.max(slack.1);
            compl_ = compl_.max((self.duals[i] * slack.0).abs());
            // sign rules: max/<= wants y >= 0, max/>= wants y <= 0; min flips.
            let y = self.duals[i];
            let viol = match (lp.row_senses[i], max_sense) {
                (RowSense::Le, true) | (RowSense::Ge, false) => (-y).max(0.0),
                (RowSense::Ge, true) | (RowSense::Le, false) => y.max(0.0),
                (RowSense::Eq, _) => 0.0,
            };
            dual = dual.max(viol);
            dual_obj += y * lp.rhs[i];
        }
        // reduced-cost identity and bound contributions
        for j in 0..n {
            let rc = self.reduced_costs[j];
            let at_lower = (self.x[j] - lp.lower[j]).abs() <= 1e-7 * (1.0 + lp.lower[j].abs());
            let at_upper = (self.x[j] - lp.upper[j]).abs() <= 1e-7 * (1.0 + lp.upper[j].abs());
            if at_lower && lp.lower[j].is_finite() {
                dual_obj += rc * lp.lower[j];
            } else if at_upper && lp.upper[j].is_finite() {
                dual_obj += rc * lp.upper[j];
            } else {
                // interior variable: reduced cost must vanish
                dual = dual.max(rc.abs());
            }
        }
        let gap = (self.objective - dual_obj).abs();
        VerifyReport {
            primal_violation: primal,
            dual_violation: dual,
            duality_gap: gap,
            complementarity: compl_,
        }
    }

    /// (signed slack used for complementarity, feasibility violation) of row `i`.
    fn rhs_slack(&self, lp: &LinearProgram, i: usize, activity: f64) -> (f64, f64) {
        let b = lp.rhs[i];
        match lp.row_senses[i] {
            RowSense::Le => (b - activity, (activity - b).max(0.0)),
            RowSense::Ge => (activity - b, (b - activity).max(0.0)),
            RowSense::Eq => (0.0, (activity - b).abs()),
        }
    }
}
