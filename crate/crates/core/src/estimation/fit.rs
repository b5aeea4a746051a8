//! Fitting the marginal-utility coefficients.
//!
//! For fixed homothetic parameters and block limits, the optimality problem
//! asks for regression coefficients `(nu, rho)` and per-day dual variables
//! minimizing the summed relaxed strong-duality gaps of the forecasting LP
//! at a reference primal point (the observed block powers, or the current
//! iterate inside the refinement).
//!
//! With `(nu, rho)` fixed, the inner minimization over each day's duals is
//! exactly the day's LP dual, so its optimum equals the day's forward
//! optimum `v_d(m)` and the best duals fall out of the forward solve itself.
//! That turns the coupled LP into the minimization of
//!
//! ```text
//! G(nu, rho) = sum_d max(v_d(m) - reference_objective_d(m), 0)
//! ```
//!
//! a convex piecewise-linear function of the few shared coefficients, with
//! subgradients read off the forward optimizers. A cutting-plane loop with a
//! small LP master (variables `nu`, `rho` and one epigraph value per day)
//! minimizes it; monotonicity of `nu` lives in the master.

use ndarray::Array2;

use crate::error::Error;
use crate::forecast::{
    solve_forecast_day_with, DayRecord, PriceResponseModel, RegionBounds, UtilityModel,
};
use crate::homothety::{BlockLimits, Homothety};
use crate::par;
use crate::solver::{solve_lp, LinearProgram, LpStatus, RowSense, Sense};
use crate::Result;

/// Reference primal point for one day: block powers and the slack cost
/// already charged to it.
#[derive(Debug, Clone)]
pub(crate) struct FitRef {
    pub power: Array2<f64>,
    pub slack_cost: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct FitOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 60,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct FitResult {
    pub nu: Vec<f64>,
    pub rho: Vec<f64>,
    /// Total gap at the fitted coefficients.
    pub gap: f64,
    pub per_day_gap: Vec<f64>,
    pub iterations: usize,
    pub lower_bound: f64,
    pub converged: bool,
}

pub(crate) struct FitProblem<'a> {
    pub days: &'a [DayRecord],
    pub bounds: &'a [RegionBounds],
    pub hom: &'a Homothety,
    pub blocks: &'a BlockLimits,
    pub c_s: &'a [f64],
    pub refs: &'a [FitRef],
    pub n_b: usize,
}

struct Evaluation {
    total: f64,
    per_day: Vec<f64>,
    /// Per day: subgradient over (nu, rho), present only where the gap is
    /// active.
    grads: Vec<Option<Vec<f64>>>,
}

impl<'a> FitProblem<'a> {
    fn n_r(&self) -> usize {
        self.days.first().map_or(0, |d| d.regressors.ncols())
    }

    fn model_with(&self, util: UtilityModel) -> PriceResponseModel {
        PriceResponseModel {
            hom: self.hom.clone(),
            util,
            blocks: self.blocks.clone(),
            c_s: self.c_s.to_vec(),
            mode: self.bounds[0].mode,
        }
    }

    fn evaluate(&self, nu: &[f64], rho: &[f64]) -> Result<Evaluation> {
        let util = UtilityModel {
            nu: nu.to_vec(),
            rho: rho.to_vec(),
        };
        let model = self.model_with(util);
        let n_b = self.n_b;
        let n_r = self.n_r();
        let outputs: Vec<Result<(f64, Option<Vec<f64>>)>> =
            par::map_indexed(self.days.len(), |d| {
                let day = &self.days[d];
                let sol = solve_forecast_day_with(day, &self.bounds[d], &model)?;
                let m = model.util.marginal_utilities(&day.regressors);
                let reference = &self.refs[d];
                let mut ref_obj = -reference.slack_cost;
                for b in 0..n_b {
                    for h in 0..day.n_h() {
                        ref_obj += (m[[b, h]] - day.prices[h]) * reference.power[[b, h]];
                    }
                }
                let f = sol.objective - ref_obj;
                let grad = if f > 0.0 {
                    let mut g = vec![0.0; n_b + n_r];
                    for b in 0..n_b {
                        for h in 0..day.n_h() {
                            let diff = sol.block_power[[b, h]] - reference.power[[b, h]];
                            g[b] += diff;
                            for r in 0..n_r {
                                g[n_b + r] += day.regressors[[h, r]] * diff;
                            }
                        }
                    }
                    Some(g)
                } else {
                    None
                };
                Ok((f.max(0.0), grad))
            });
        let mut per_day = Vec::with_capacity(self.days.len());
        let mut grads = Vec::with_capacity(self.days.len());
        for out in outputs {
            let (f, g) = out?;
            per_day.push(f);
            grads.push(g);
        }
        let total = per_day.iter().sum();
        Ok(Evaluation {
            total,
            per_day,
            grads,
        })
    }

    /// Coefficient box for the master problem, wide enough to cover prices
    /// plus the largest shadow-price swing the temperature duals can induce.
    fn coefficient_box(&self, widen: f64) -> (f64, f64, f64) {
        let mut lam_min = f64::INFINITY;
        let mut lam_max = f64::NEG_INFINITY;
        let mut z_max: f64 = 0.0;
        for day in self.days {
            for &l in &day.prices {
                lam_min = lam_min.min(l);
                lam_max = lam_max.max(l);
            }
            for z in day.regressors.iter() {
                z_max = z_max.max(z.abs());
            }
        }
        let c_s_max = self.c_s.iter().cloned().fold(0.0, f64::max);
        let lb = &self.bounds[0].lambda_b;
        let n_h = lb.nrows();
        let mut colsum: f64 = 0.0;
        for h in 0..n_h {
            let mut acc = 0.0;
            for k in h..n_h {
                acc += lb[[k, h]].abs();
            }
            colsum = colsum.max(acc);
        }
        let span = (lam_max - lam_min).max(0.1 * (1.0 + lam_max.abs()));
        let amp = (c_s_max * colsum + 2.0 * span + 1.0) * widen;
        (lam_min - amp, lam_max + amp, amp / z_max.max(0.5))
    }
}

struct Cut {
    day: usize,
    grad: Vec<f64>,
    offset: f64,
}

/// Cutting-plane minimization of the total gap.
pub(crate) fn fit_utilities(
    prob: &FitProblem,
    init: (&[f64], &[f64]),
    opts: FitOptions,
) -> Result<FitResult> {
    if prob.days.is_empty() {
        return Err(Error::InvalidParameter("utility fit needs at least one day".into()));
    }
    let n_b = prob.n_b;
    let n_r = prob.n_r();
    let n_days = prob.days.len();

    let mut widen = 1.0;
    loop {
        let (nu_lo, nu_hi, rho_box) = prob.coefficient_box(widen);
        let clip = |v: f64, lo: f64, hi: f64| v.clamp(lo, hi);
        let mut x: Vec<f64> = init
            .0
            .iter()
            .map(|&v| clip(v, nu_lo, nu_hi))
            .chain(init.1.iter().map(|&v| clip(v, -rho_box, rho_box)))
            .collect();
        enforce_monotone(&mut x[..n_b]);

        let mut cuts: Vec<Cut> = Vec::new();
        let mut best_val = f64::INFINITY;
        let mut best_x = x.clone();
        let mut lower_bound = 0.0f64;
        let mut iterations = 0;
        let mut converged = false;

        for it in 0..opts.max_iters {
            iterations = it + 1;
            let eval = prob.evaluate(&x[..n_b], &x[n_b..])?;
            if eval.total < best_val {
                best_val = eval.total;
                best_x = x.clone();
            }
            let stop_tol = opts.tol.max(opts.tol * best_val.abs());
            if best_val <= stop_tol || best_val - lower_bound <= stop_tol {
                converged = true;
                break;
            }
            for d in 0..n_days {
                if eval.per_day[d] <= 0.0 && eval.grads[d].is_none() {
                    continue;
                }
                let grad = eval.grads[d].clone().unwrap_or_else(|| vec![0.0; n_b + n_r]);
                let gx: f64 = grad.iter().zip(&x).map(|(g, v)| g * v).sum();
                cuts.push(Cut {
                    day: d,
                    grad,
                    offset: eval.per_day[d] - gx,
                });
            }
            // Master: min sum t_d over the cuts, monotonicity and the box.
            let n_master = n_b + n_r + n_days;
            let mut master = LinearProgram::new(Sense::Minimize, n_master);
            for b in 0..n_b {
                master.set_bounds(b, nu_lo, nu_hi);
            }
            for r in 0..n_r {
                master.set_bounds(n_b + r, -rho_box, rho_box);
            }
            for d in 0..n_days {
                master.set_objective(n_b + n_r + d, 1.0);
            }
            for b in 0..n_b.saturating_sub(1) {
                let mut row = vec![0.0; n_master];
                row[b] = 1.0;
                row[b + 1] = -1.0;
                master.add_row(row, RowSense::Ge, 0.0);
            }
            for cut in &cuts {
                let mut row = vec![0.0; n_master];
                for (j, g) in cut.grad.iter().enumerate() {
                    row[j] = -g;
                }
                row[n_b + n_r + cut.day] = 1.0;
                master.add_row(row, RowSense::Ge, cut.offset);
            }
            let sol = solve_lp(&master)?;
            if sol.status != LpStatus::Optimal {
                return Err(Error::Data(format!("utility-fit master ended {:?}", sol.status)));
            }
            lower_bound = lower_bound.max(sol.objective);
            x = sol.x[..n_b + n_r].to_vec();
            enforce_monotone(&mut x[..n_b]);
        }

        // A solution pinned to the box suggests the box was too small.
        let at_edge = best_x[..n_b]
            .iter()
            .any(|&v| (v - nu_lo).abs() < 1e-6 * (1.0 + nu_lo.abs()) || (nu_hi - v).abs() < 1e-6 * (1.0 + nu_hi.abs()))
            || best_x[n_b..]
                .iter()
                .any(|&v| (v.abs() - rho_box).abs() < 1e-6 * (1.0 + rho_box));
        if at_edge && widen < 10.0 {
            log::debug!("utility fit hit the coefficient box; widening");
            widen = 10.0;
            continue;
        }

        let final_eval = prob.evaluate(&best_x[..n_b], &best_x[n_b..])?;
        return Ok(FitResult {
            nu: best_x[..n_b].to_vec(),
            rho: best_x[n_b..].to_vec(),
            gap: final_eval.total,
            per_day_gap: final_eval.per_day,
            iterations,
            lower_bound,
            converged,
        });
    }
}

fn enforce_monotone(nu: &mut [f64]) {
    for b in 1..nu.len() {
        if nu[b] > nu[b - 1] {
            nu[b] = nu[b - 1];
        }
    }
}
