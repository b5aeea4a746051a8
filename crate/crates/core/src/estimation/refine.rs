//! Regularized refinement of the marginal-utility curves.
//!
//! With the homothetic parameters fixed, the single-level program minimizes
//! training error subject to the forecasting LP's KKT system with the summed
//! complementarity products relaxed to `iota`. All nonconvexity sits in one
//! bilinear form pairing the primal block (powers, slacks) with the
//! dual/utility block, so the driver alternates:
//!
//! - primal step: per day, minimize `|deviation from observed|_1` plus the
//!   penalty-weighted complementarity, which for fixed duals is an LP in the
//!   primal block (the penalty term reduces to `-pen * welfare`);
//! - dual step: refit `(nu, rho)` and the per-day duals to minimize the
//!   total complementarity of the current primal iterate, which is exactly
//!   the utility-fit problem of [`super::fit`];
//! - snap: under the refreshed utilities, re-solve each day exactly and pick
//!   the error-minimizing point of the optimal face, yielding an iterate
//!   whose complementarity is zero up to solver precision.
//!
//! The returned model is the best-error iterate among those meeting the
//! final relaxation level; the warm start qualifies by construction, so the
//! training error never regresses.

use ndarray::Array2;

use crate::error::Error;
use crate::eval::mae;
use crate::forecast::{
    build_forecast_lp, solve_forecast_day_with, DayRecord, ForecastSolution, PriceResponseModel,
    RegionBounds, UtilityModel,
};
use crate::homothety::{BlockLimits, Homothety};
use crate::par;
use crate::solver::{solve_lp, LpStatus, PenaltySchedule, RowSense, Sense};
use crate::Result;

use super::fit::{fit_utilities, FitOptions, FitProblem, FitRef};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RefineStep {
    pub outer: usize,
    pub mae: f64,
    pub complementarity: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub util: UtilityModel,
    pub solutions: Vec<ForecastSolution>,
    pub warm_mae: f64,
    pub final_mae: f64,
    pub complementarity: f64,
    pub converged: bool,
    pub fell_back: bool,
    pub trace: Vec<RefineStep>,
}

struct Candidate {
    util: UtilityModel,
    solutions: Vec<ForecastSolution>,
    mae: f64,
    comp: f64,
}

pub(crate) struct RefineProblem<'a> {
    pub days: &'a [DayRecord],
    pub bounds: &'a [RegionBounds],
    pub hom: &'a Homothety,
    pub blocks: &'a BlockLimits,
    pub c_s: &'a [f64],
    pub n_b: usize,
    pub fit_opts: FitOptions,
}

impl<'a> RefineProblem<'a> {
    fn model_with(&self, util: UtilityModel) -> PriceResponseModel {
        PriceResponseModel {
            hom: self.hom.clone(),
            util,
            blocks: self.blocks.clone(),
            c_s: self.c_s.to_vec(),
            mode: self.bounds[0].mode,
        }
    }

    fn train_mae(&self, sols: &[ForecastSolution]) -> f64 {
        let mut acc = 0.0;
        for (sol, day) in sols.iter().zip(self.days) {
            acc += mae(&sol.total_power, &day.observed).expect("equal lengths");
        }
        acc / self.days.len() as f64
    }

    /// Total complementarity of `(solutions, util)`: per day, the forward
    /// optimum under `util` minus the iterate's objective value.
    fn complementarity(&self, util: &UtilityModel, sols: &[ForecastSolution]) -> Result<f64> {
        let model = self.model_with(util.clone());
        let gaps: Vec<Result<f64>> = par::map_indexed(self.days.len(), |d| {
            let day = &self.days[d];
            let fresh = solve_forecast_day_with(day, &self.bounds[d], &model)?;
            let m = model.util.marginal_utilities(&day.regressors);
            let slack_cost: f64 = sols[d]
                .slack
                .iter()
                .zip(self.c_s)
                .map(|(s, c)| s * c)
                .sum();
            let value = sols[d].welfare(&m, &day.prices) - slack_cost;
            Ok((fresh.objective - value).max(0.0))
        });
        let mut total = 0.0;
        for g in gaps {
            total += g?;
        }
        Ok(total)
    }

    /// Primal step: per day, maximize `pen * (welfare - slack cost) - |dev|_1`
    /// over the feasible region, with deviations measured against the
    /// observed totals.
    fn primal_step(&self, util: &UtilityModel, pen: f64) -> Result<Vec<FitRef>> {
        let model = self.model_with(util.clone());
        let outs: Vec<Result<FitRef>> = par::map_indexed(self.days.len(), |d| {
            let day = &self.days[d];
            let m = model.util.marginal_utilities(&day.regressors);
            let (mut lp, layout) = build_forecast_lp(day, &m, &self.bounds[d], &model)?;
            for c in lp.objective.iter_mut() {
                *c *= pen;
            }
            let n_h = day.n_h();
            let e_plus = lp.add_vars(n_h);
            let e_minus = lp.add_vars(n_h);
            for h in 0..n_h {
                lp.set_objective(e_plus + h, -1.0);
                lp.set_objective(e_minus + h, -1.0);
                let mut row = vec![0.0; lp.n_vars()];
                for b in 0..layout.n_b {
                    row[layout.var_p(b, h)] = 1.0;
                }
                row[e_plus + h] = -1.0;
                row[e_minus + h] = 1.0;
                lp.add_row(row, RowSense::Eq, day.observed[h]);
            }
            let sol = solve_lp(&lp)?;
            if sol.status != LpStatus::Optimal {
                return Err(Error::Data(format!(
                    "primal step for day {} ended {:?}",
                    day.index, sol.status
                )));
            }
            let mut power = Array2::zeros((layout.n_b, n_h));
            for b in 0..layout.n_b {
                for h in 0..n_h {
                    power[[b, h]] = sol.x[layout.var_p(b, h)].max(0.0);
                }
            }
            let slack_cost = match layout.mode {
                crate::forecast::RegionMode::Thermal => (0..n_h)
                    .map(|h| sol.x[layout.var_s(h)].max(0.0) * self.c_s[h])
                    .sum(),
                crate::forecast::RegionMode::PowerOnly => 0.0,
            };
            Ok(FitRef { power, slack_cost })
        });
        outs.into_iter().collect()
    }

    /// Exact re-solve of every day under `util`, breaking ties on the
    /// optimal face toward the observed totals. Returns the solutions and
    /// the summed face gaps (complementarity of the snapped iterate).
    fn snap(&self, util: &UtilityModel, face_eps: f64) -> Result<(Vec<ForecastSolution>, f64)> {
        let model = self.model_with(util.clone());
        let outs: Vec<Result<(ForecastSolution, f64)>> =
            par::map_indexed(self.days.len(), |d| {
                let day = &self.days[d];
                let stage1 = solve_forecast_day_with(day, &self.bounds[d], &model)?;
                let m = model.util.marginal_utilities(&day.regressors);
                let (mut lp, layout) = build_forecast_lp(day, &m, &self.bounds[d], &model)?;
                let welfare_row = lp.objective.clone();
                for c in lp.objective.iter_mut() {
                    *c = 0.0;
                }
                let n_h = day.n_h();
                let e_plus = lp.add_vars(n_h);
                let e_minus = lp.add_vars(n_h);
                for h in 0..n_h {
                    lp.set_objective(e_plus + h, -1.0);
                    lp.set_objective(e_minus + h, -1.0);
                    let mut row = vec![0.0; lp.n_vars()];
                    for b in 0..layout.n_b {
                        row[layout.var_p(b, h)] = 1.0;
                    }
                    row[e_plus + h] = -1.0;
                    row[e_minus + h] = 1.0;
                    lp.add_row(row, RowSense::Eq, day.observed[h]);
                }
                let mut face = welfare_row;
                face.resize(lp.n_vars(), 0.0);
                lp.add_row(face, RowSense::Ge, stage1.objective - face_eps);
                debug_assert_eq!(lp.sense, Sense::Maximize);
                let sol = solve_lp(&lp)?;
                if sol.status != LpStatus::Optimal {
                    return Err(Error::Data(format!(
                        "face tie-break for day {} ended {:?}",
                        day.index, sol.status
                    )));
                }
                let mut snapped = stage1.clone();
                for b in 0..layout.n_b {
                    for h in 0..n_h {
                        snapped.block_power[[b, h]] = sol.x[layout.var_p(b, h)].max(0.0);
                    }
                }
                for h in 0..n_h {
                    snapped.total_power[h] =
                        (0..layout.n_b).map(|b| snapped.block_power[[b, h]]).sum();
                    if layout.mode == crate::forecast::RegionMode::Thermal {
                        snapped.slack[h] = sol.x[layout.var_s(h)].max(0.0);
                    }
                }
                let slack_cost: f64 = snapped
                    .slack
                    .iter()
                    .zip(self.c_s)
                    .map(|(s, c)| s * c)
                    .sum();
                let value = snapped.welfare(&m, &day.prices) - slack_cost;
                snapped.objective = value;
                Ok((snapped, (stage1.objective - value).max(0.0)))
            });
        let mut sols = Vec::with_capacity(self.days.len());
        let mut total_gap = 0.0;
        for out in outs {
            let (s, g) = out?;
            sols.push(s);
            total_gap += g;
        }
        Ok((sols, total_gap))
    }
}

/// Runs the alternation. `warm_solutions` must be exact forward solutions of
/// the training days under `warm_util` (step 2 of the pipeline).
pub(crate) fn regularized_refinement(
    prob: &RefineProblem,
    warm_util: &UtilityModel,
    warm_solutions: Vec<ForecastSolution>,
    schedule: &PenaltySchedule,
) -> Result<RefineOutcome> {
    if warm_solutions.len() != prob.days.len() {
        return Err(Error::DimensionMismatch(
            "warm start does not cover the training days".into(),
        ));
    }
    let iota_final = schedule.final_iota();
    let warm_comp = prob.complementarity(warm_util, &warm_solutions)?;
    let warm_mae = prob.train_mae(&warm_solutions);
    let mut candidates = vec![Candidate {
        util: warm_util.clone(),
        solutions: warm_solutions,
        mae: warm_mae,
        comp: warm_comp,
    }];
    let mut trace = Vec::new();

    let mut current = warm_util.clone();
    let steps = schedule.iotas.len();
    // Per-day slice of the final relaxation level used to break optimal-face
    // ties without spending the whole complementarity budget.
    let face_eps = if steps > 0 {
        (0.4 * iota_final / prob.days.len() as f64).max(1e-12)
    } else {
        0.0
    };
    for k in 0..steps {
        let (_iota_k, pen) = schedule.step(k);
        let refs = prob.primal_step(&current, pen)?;
        let fit = fit_utilities(
            &FitProblem {
                days: prob.days,
                bounds: prob.bounds,
                hom: prob.hom,
                blocks: prob.blocks,
                c_s: prob.c_s,
                refs: &refs,
                n_b: prob.n_b,
            },
            (&current.nu, &current.rho),
            prob.fit_opts,
        )?;
        current = UtilityModel::new(fit.nu, fit.rho)?;
        let (snapped, comp) = prob.snap(&current, face_eps)?;
        let mae_k = prob.train_mae(&snapped);
        let accepted = comp <= iota_final;
        trace.push(RefineStep {
            outer: k,
            mae: mae_k,
            complementarity: comp,
            accepted,
        });
        candidates.push(Candidate {
            util: current.clone(),
            solutions: snapped,
            mae: mae_k,
            comp,
        });
    }

    let qualifying = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.comp <= iota_final)
        .min_by(|(ia, a), (ib, b)| {
            a.mae
                .partial_cmp(&b.mae)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i);
    let (best_idx, converged) = match qualifying {
        Some(i) => (i, true),
        None => {
            // Nothing met the final level (the warm start itself must have
            // been loose): hand back the lowest-complementarity iterate.
            let i = candidates
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    a.comp.partial_cmp(&b.comp).unwrap_or(std::cmp::Ordering::Equal)
                })
                .map(|(i, _)| i)
                .expect("warm start is always present");
            (i, false)
        }
    };
    let fell_back = best_idx == 0 && steps > 0;
    let best = candidates.swap_remove(best_idx);
    Ok(RefineOutcome {
        util: best.util,
        solutions: best.solutions,
        warm_mae,
        final_mae: best.mae,
        complementarity: best.comp,
        converged,
        fell_back,
        trace,
    })
}
