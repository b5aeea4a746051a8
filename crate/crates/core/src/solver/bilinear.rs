//! Penalty alternation for programs with a single bilinear form.
//!
//! The problem couples two disjoint variable blocks through linear
//! constraints plus one bilinear expression `sum c_k x_{i_k} y_{j_k}` that
//! must end up below a relaxation level `iota`. With either block fixed,
//! every subproblem is an LP, so the driver alternates block minimizations
//! under a growing penalty on the bilinear value while tightening `iota`
//! geometrically, and only ever accepts iterates that keep the linear
//! constraints satisfied.

use crate::error::LpError;
use crate::Result;

use super::lp::{LinearProgram, LpStatus, RowSense, Sense};
use super::simplex::solve_lp;

/// Geometric schedule for the relaxation level and the penalty weight.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PenaltySchedule {
    pub iotas: Vec<f64>,
    pub penalties: Vec<f64>,
    /// Hard cap on outer iterations (the schedule's last entry repeats).
    pub max_outer: usize,
}

impl Default for PenaltySchedule {
    /// `iota_k = 0.1^k` for k = 1..=6 with penalties growing tenfold from 1.
    fn default() -> Self {
        let iotas = (1..=6).map(|k| 0.1f64.powi(k)).collect();
        let penalties = (0..6).map(|k| 10f64.powi(k)).collect();
        Self {
            iotas,
            penalties,
            max_outer: 50,
        }
    }
}

impl PenaltySchedule {
    pub fn final_iota(&self) -> f64 {
        self.iotas.last().copied().unwrap_or(0.0)
    }

    pub fn step(&self, k: usize) -> (f64, f64) {
        let i = k.min(self.iotas.len().saturating_sub(1));
        (self.iotas[i], self.penalties[i.min(self.penalties.len() - 1)])
    }

    /// Empty schedule: no refinement steps at all.
    pub fn is_empty(&self) -> bool {
        self.iotas.is_empty()
    }
}

/// A linear row over the concatenated blocks `(x, y)`.
#[derive(Debug, Clone)]
pub struct BilinearRow {
    pub x_coeffs: Vec<f64>,
    pub y_coeffs: Vec<f64>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// Two variable blocks, linear constraints across them, a linear objective on
/// the first block and one bilinear form pairing the blocks.
#[derive(Debug, Clone)]
pub struct BilinearPenaltyProblem {
    pub n_x: usize,
    pub n_y: usize,
    pub x_bounds: Vec<(f64, f64)>,
    pub y_bounds: Vec<(f64, f64)>,
    /// Objective on the primal block (minimized).
    pub objective_x: Vec<f64>,
    pub rows: Vec<BilinearRow>,
    /// Terms `coeff * x_i * y_j`.
    pub bilinear: Vec<(usize, usize, f64)>,
}

impl BilinearPenaltyProblem {
    pub fn bilinear_value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.bilinear.iter().map(|&(i, j, c)| c * x[i] * y[j]).sum()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.objective_x.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Worst linear-constraint or bound violation at `(x, y)`.
    pub fn linear_violation(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &(lo, hi)) in x.iter().zip(&self.x_bounds) {
            worst = worst.max(lo - v).max(v - hi);
        }
        for (v, &(lo, hi)) in y.iter().zip(&self.y_bounds) {
            worst = worst.max(lo - v).max(v - hi);
        }
        for row in &self.rows {
            let act: f64 = row.x_coeffs.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
                + row.y_coeffs.iter().zip(y).map(|(a, v)| a * v).sum::<f64>();
            let viol = match row.sense {
                RowSense::Le => act - row.rhs,
                RowSense::Ge => row.rhs - act,
                RowSense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// LP over one block with the other fixed. `solve_x = true` minimizes
    /// `objective_x + penalty * bilinear` over x; otherwise
    /// `penalty * bilinear` over y.
    fn block_lp(&self, solve_x: bool, other: &[f64], penalty: f64) -> LinearProgram {
        let n = if solve_x { self.n_x } else { self.n_y };
        let mut lp = LinearProgram::new(Sense::Minimize, n);
        let bounds = if solve_x { &self.x_bounds } else { &self.y_bounds };
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            lp.set_bounds(j, lo, hi);
        }
        if solve_x {
            for (j, &c) in self.objective_x.iter().enumerate() {
                lp.set_objective(j, c);
            }
        }
        for &(i, j, c) in &self.bilinear {
            if solve_x {
                lp.objective[i] += penalty * c * other[j];
            } else {
                lp.objective[j] += penalty * c * other[i];
            }
        }
        for row in &self.rows {
            let (own, cross) = if solve_x {
                (&row.x_coeffs, &row.y_coeffs)
            } else {
                (&row.y_coeffs, &row.x_coeffs)
            };
            if own.iter().all(|&a| a == 0.0) {
                continue; // row touches only the fixed block
            }
            let shift: f64 = cross.iter().zip(other).map(|(a, v)| a * v).sum();
            lp.add_row(own.clone(), row.sense, row.rhs - shift);
        }
        lp
    }
}

#[derive(Debug, Clone)]
pub struct BilinearOutcome {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub bilinear_value: f64,
    pub objective: f64,
    pub converged: bool,
    pub outer_iterations: usize,
}

/// Alternating penalty minimization from a linearly feasible warm start.
///
/// Returns the best accepted iterate: lowest primal objective among those
/// with bilinear value at or below the final relaxation level; the warm
/// start itself qualifies when it meets that level. If no iterate qualifies
/// the best-bilinear iterate is returned flagged as non-converged.
pub fn solve_bilinear_penalty(
    prob: &BilinearPenaltyProblem,
    init: (&[f64], &[f64]),
    schedule: &PenaltySchedule,
) -> Result<BilinearOutcome> {
    let (x0, y0) = init;
    if x0.len() != prob.n_x || y0.len() != prob.n_y {
        return Err(LpError::Malformed("warm start has wrong block sizes".into()).into());
    }
    let viol = prob.linear_violation(x0, y0);
    if viol > 1e-7 {
        return Err(LpError::Malformed(format!(
            "warm start violates linear constraints by {viol:.3e}"
        ))
        .into());
    }
    if prob.bilinear.is_empty() {
        // Degenerates to a single LP over the concatenated blocks.
        let n = prob.n_x + prob.n_y;
        let mut lp = LinearProgram::new(Sense::Minimize, n);
        for (j, &(lo, hi)) in prob.x_bounds.iter().chain(&prob.y_bounds).enumerate() {
            lp.set_bounds(j, lo, hi);
        }
        for (j, &c) in prob.objective_x.iter().enumerate() {
            lp.set_objective(j, c);
        }
        for row in &prob.rows {
            let mut coeffs = row.x_coeffs.clone();
            coeffs.extend_from_slice(&row.y_coeffs);
            lp.add_row(coeffs, row.sense, row.rhs);
        }
        let sol = solve_lp(&lp)?;
        require_optimal(&sol.status)?;
        let (x, y) = sol.x.split_at(prob.n_x);
        return Ok(BilinearOutcome {
            objective: prob.objective(x),
            bilinear_value: 0.0,
            x: x.to_vec(),
            y: y.to_vec(),
            converged: true,
            outer_iterations: 1,
        });
    }

    let iota_final = schedule.final_iota();
    let warm_bilinear = prob.bilinear_value(x0, y0);
    if warm_bilinear <= iota_final + 1e-12 {
        // Warm start already satisfies the tightest relaxation.
        return Ok(BilinearOutcome {
            x: x0.to_vec(),
            y: y0.to_vec(),
            bilinear_value: warm_bilinear,
            objective: prob.objective(x0),
            converged: true,
            outer_iterations: 0,
        });
    }

    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut best: Option<BilinearOutcome> = None;
    let mut fallback = BilinearOutcome {
        x: x.clone(),
        y: y.clone(),
        bilinear_value: warm_bilinear,
        objective: prob.objective(&x),
        converged: false,
        outer_iterations: 0,
    };
    let steps = schedule.max_outer.max(schedule.iotas.len());
    for k in 0..steps {
        let (iota_k, pen) = schedule.step(k);
        let xs = solve_lp(&prob.block_lp(true, &y, pen))?;
        require_optimal(&xs.status)?;
        x = xs.x;
        let ys = solve_lp(&prob.block_lp(false, &x, pen))?;
        require_optimal(&ys.status)?;
        y = ys.x;
        let iters = k + 1;
        let bv = prob.bilinear_value(&x, &y);
        let obj = prob.objective(&x);
        if bv < fallback.bilinear_value {
            fallback = BilinearOutcome {
                x: x.clone(),
                y: y.clone(),
                bilinear_value: bv,
                objective: obj,
                converged: false,
                outer_iterations: iters,
            };
        }
        if bv <= iota_final + 1e-12 {
            let better = best.as_ref().map_or(true, |b| obj < b.objective - 1e-12);
            if better {
                best = Some(BilinearOutcome {
                    x: x.clone(),
                    y: y.clone(),
                    bilinear_value: bv,
                    objective: obj,
                    converged: true,
                    outer_iterations: iters,
                });
            }
        }
        // Past the schedule tail with a qualifying iterate: stop early.
        if k + 1 >= schedule.iotas.len() && best.is_some() && bv <= iota_k {
            break;
        }
    }
    Ok(best.unwrap_or(fallback))
}

fn require_optimal(status: &LpStatus) -> Result<()> {
    if *status != LpStatus::Optimal {
        return Err(LpError::Malformed(format!(
            "alternation subproblem ended {status:?}; the warm start should have prevented this"
        ))
        .into());
    }
    Ok(())
}
