//! The per-day forecasting problem.
//!
//! Given marginal utilities `m`, prices `lambda` and the homothetic region,
//! each day solves
//!
//! ```text
//! max  sum_b (m_b - lambda)' p_b - c_s' s
//! s.t. p_lo_a <= sum_b p_b <= p_hi_a                      (eps_lo, eps_hi)
//!      temp_lo - s <= Lambda B sum_b p_b <= temp_hi + s   (kappa_lo, kappa_hi)
//!      0 <= p_b <= e_hi_b                                 (phi_lo, phi_hi)
//!      s >= 0                                             (phi_slack)
//! ```
//!
//! The row ordering is fixed and documented by [`RowLayout`] so dual
//! extraction is unambiguous. Temperature rows are dropped in
//! [`RegionMode::PowerOnly`] (the power-bounds-only baseline).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::homothety::{aggregate_bounds, BlockLimits, Homothety};
use crate::par;
use crate::solver::{solve_lp, LinearProgram, LpSolution, LpStatus, RowSense, Sense};
use crate::thermal::{DayConditions, PrototypeParams, ThermalSystem};
use crate::Result;

/// Ambient-temperature regressor offsets, clamped at the day edges.
pub const REGRESSOR_OFFSETS: [i64; 5] = [-2, -1, 0, 1, 2];

/// Whether the feasible region carries the thermal-dynamics rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionMode {
    Thermal,
    PowerOnly,
}

/// One day of exogenous and observed series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DayRecord {
    pub index: usize,
    /// Electricity prices (EUR/kWh), length `n_h`.
    pub prices: Vec<f64>,
    /// Ambient temperature (deg C), length `n_h`.
    pub ambient: Vec<f64>,
    /// Regressor matrix, `n_h x n_r`: ambient at clamped hour offsets.
    pub regressors: Array2<f64>,
    /// Observed aggregate power (kW), length `n_h`.
    pub observed: Vec<f64>,
    /// Aggregate initial indoor temperature (deg C).
    pub theta0: f64,
}

impl DayRecord {
    pub fn new(
        index: usize,
        prices: Vec<f64>,
        ambient: Vec<f64>,
        observed: Vec<f64>,
        theta0: f64,
    ) -> Result<Self> {
        let n_h = prices.len();
        if ambient.len() != n_h || observed.len() != n_h {
            return Err(Error::DimensionMismatch(format!(
                "day {index}: series lengths differ ({} prices, {} ambient, {} observed)",
                n_h,
                ambient.len(),
                observed.len()
            )));
        }
        let regressors = regressor_matrix(&ambient);
        Ok(Self {
            index,
            prices,
            ambient,
            regressors,
            observed,
            theta0,
        })
    }

    pub fn n_h(&self) -> usize {
        self.prices.len()
    }
}

/// Ambient temperature at hour offsets, clamped to the day.
pub fn regressor_matrix(ambient: &[f64]) -> Array2<f64> {
    let n_h = ambient.len();
    let mut z = Array2::zeros((n_h, REGRESSOR_OFFSETS.len()));
    for h in 0..n_h {
        for (r, off) in REGRESSOR_OFFSETS.iter().enumerate() {
            let k = (h as i64 + off).clamp(0, n_h as i64 - 1) as usize;
            z[[h, r]] = ambient[k];
        }
    }
    z
}

/// Step-wise utility model: time-invariant block intercepts plus an affine
/// regressor term shared by all blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityModel {
    /// Block intercepts, monotone non-increasing (EUR/kWh).
    pub nu: Vec<f64>,
    /// Regressor coefficients (EUR/kWh per deg C).
    pub rho: Vec<f64>,
}

impl UtilityModel {
    pub fn new(nu: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if nu.is_empty() {
            return Err(Error::InvalidParameter("need at least one utility block".into()));
        }
        for w in nu.windows(2) {
            if w[1] > w[0] + 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "block intercepts must be non-increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { nu, rho })
    }

    pub fn n_b(&self) -> usize {
        self.nu.len()
    }

    /// Marginal utilities `m[b][h] = nu_b + (Z rho)_h` for one day.
    pub fn marginal_utilities(&self, regressors: &Array2<f64>) -> Array2<f64> {
        let n_h = regressors.nrows();
        let mut m = Array2::zeros((self.nu.len(), n_h));
        for h in 0..n_h {
            let mut shift = 0.0;
            for (r, rho) in self.rho.iter().enumerate() {
                shift += regressors[[h, r]] * rho;
            }
            for (b, nu) in self.nu.iter().enumerate() {
                m[[b, h]] = nu + shift;
            }
        }
        m
    }
}

/// Everything the forecasting LP needs besides the day itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriceResponseModel {
    pub hom: Homothety,
    pub util: UtilityModel,
    pub blocks: BlockLimits,
    /// Slack penalty per hour (EUR/deg C).
    pub c_s: Vec<f64>,
    pub mode: RegionMode,
}

impl PriceResponseModel {
    pub fn n_b(&self) -> usize {
        self.util.n_b()
    }
}

/// Stable row/variable ordering of the forecasting LP.
///
/// Variables: `p[b * n_h + h]` block-major, then (thermal mode) `s[h]`.
/// Rows: power-lower, power-upper, temperature-lower, temperature-upper
/// (thermal mode only), then block-upper rows block-major.
#[derive(Debug, Clone, Copy)]
pub struct RowLayout {
    pub n_h: usize,
    pub n_b: usize,
    pub mode: RegionMode,
}

impl RowLayout {
    pub fn var_p(&self, b: usize, h: usize) -> usize {
        b * self.n_h + h
    }

    pub fn var_s(&self, h: usize) -> usize {
        debug_assert!(self.mode == RegionMode::Thermal);
        self.n_b * self.n_h + h
    }

    pub fn n_vars(&self) -> usize {
        match self.mode {
            RegionMode::Thermal => (self.n_b + 1) * self.n_h,
            RegionMode::PowerOnly => self.n_b * self.n_h,
        }
    }

    pub fn row_power_lo(&self, h: usize) -> usize {
        h
    }

    pub fn row_power_hi(&self, h: usize) -> usize {
        self.n_h + h
    }

    pub fn row_temp_lo(&self, k: usize) -> usize {
        debug_assert!(self.mode == RegionMode::Thermal);
        2 * self.n_h + k
    }

    pub fn row_temp_hi(&self, k: usize) -> usize {
        debug_assert!(self.mode == RegionMode::Thermal);
        3 * self.n_h + k
    }

    pub fn row_block_hi(&self, b: usize, h: usize) -> usize {
        let base = match self.mode {
            RegionMode::Thermal => 4 * self.n_h,
            RegionMode::PowerOnly => 2 * self.n_h,
        };
        base + b * self.n_h + h
    }

    pub fn n_rows(&self) -> usize {
        self.row_block_hi(self.n_b - 1, self.n_h - 1) + 1
    }
}

/// Aggregate-region data in the shape the LP rows need: power bounds, the
/// temperature window on `Lambda B p`, and the transform matrix itself.
#[derive(Debug, Clone)]
pub struct RegionBounds {
    pub p_lo: Vec<f64>,
    pub p_hi: Vec<f64>,
    pub temp_lo: Vec<f64>,
    pub temp_hi: Vec<f64>,
    pub lambda_b: Array2<f64>,
    pub mode: RegionMode,
}

/// Applies the homothety to a day's conditions.
pub fn region_bounds(
    hom: &Homothety,
    cond: &DayConditions,
    system: &ThermalSystem,
    mode: RegionMode,
) -> RegionBounds {
    let base = aggregate_bounds(hom, cond, system);
    RegionBounds {
        p_lo: base.p_lo,
        p_hi: base.p_hi,
        temp_lo: base.temp_lo,
        temp_hi: base.temp_hi,
        lambda_b: system.lambda_b.clone(),
        mode,
    }
}

/// All dual variables of the forecasting LP, in the roles they play in the
/// stationarity system. Non-negative by LP duality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastDuals {
    pub eps_lo: Vec<f64>,
    pub eps_hi: Vec<f64>,
    pub kappa_lo: Vec<f64>,
    pub kappa_hi: Vec<f64>,
    pub phi_lo: Array2<f64>,
    pub phi_hi: Array2<f64>,
    pub phi_slack: Vec<f64>,
}

/// Primal/dual solution of one day's forecasting problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastSolution {
    pub day_index: usize,
    /// Per-block power, `n_b x n_h` (kW).
    pub block_power: Array2<f64>,
    /// Total power per hour (kW).
    pub total_power: Vec<f64>,
    /// Temperature slack per hour (deg C); zeros in power-only mode.
    pub slack: Vec<f64>,
    pub duals: ForecastDuals,
    /// Optimal LP objective (EUR): welfare minus slack penalty.
    pub objective: f64,
}

impl ForecastSolution {
    /// Welfare part of the objective under utilities `m`.
    pub fn welfare(&self, m: &Array2<f64>, prices: &[f64]) -> f64 {
        let (n_b, n_h) = self.block_power.dim();
        let mut acc = 0.0;
        for b in 0..n_b {
            for h in 0..n_h {
                acc += (m[[b, h]] - prices[h]) * self.block_power[[b, h]];
            }
        }
        acc
    }

    /// Residuals of the stationarity system: worst violation of the
    /// power-block row and of the slack row.
    pub fn kkt_residuals(
        &self,
        m: &Array2<f64>,
        prices: &[f64],
        c_s: &[f64],
        system: &ThermalSystem,
        mode: RegionMode,
    ) -> (f64, f64) {
        let (n_b, n_h) = self.block_power.dim();
        let lbt_klo = system.lambda_b_transpose_apply(&self.duals.kappa_lo);
        let lbt_khi = system.lambda_b_transpose_apply(&self.duals.kappa_hi);
        let mut stat: f64 = 0.0;
        for b in 0..n_b {
            for h in 0..n_h {
                let lhs = -self.duals.eps_lo[h] + self.duals.eps_hi[h] - lbt_klo[h] + lbt_khi[h]
                    - self.duals.phi_lo[[b, h]]
                    + self.duals.phi_hi[[b, h]];
                stat = stat.max((lhs - (m[[b, h]] - prices[h])).abs());
            }
        }
        let mut slack_row: f64 = 0.0;
        if mode == RegionMode::Thermal {
            for h in 0..n_h {
                let lhs =
                    self.duals.kappa_lo[h] + self.duals.kappa_hi[h] + self.duals.phi_slack[h];
                slack_row = slack_row.max((lhs - c_s[h]).abs());
            }
        }
        (stat, slack_row)
    }
}

/// Shared read-only context for forecasting.
#[derive(Debug, Clone, Copy)]
pub struct ForecastContext<'a> {
    pub params: &'a PrototypeParams,
    pub system: &'a ThermalSystem,
}

impl<'a> ForecastContext<'a> {
    pub fn conditions(&self, day: &DayRecord) -> Result<DayConditions> {
        DayConditions::new(self.params, self.system, day.theta0, &day.ambient)
    }
}

fn check_capacity(day: usize, bounds: &RegionBounds, blocks: &BlockLimits) -> Result<()> {
    let caps = blocks.column_sums();
    for h in 0..caps.len() {
        let lower = bounds.p_lo[h].max(0.0);
        let upper = bounds.p_hi[h].min(caps[h]);
        if lower > upper + 1e-7 {
            return Err(Error::InfeasibleDay {
                day,
                hour: h,
                lower: bounds.p_lo[h],
                capacity: caps[h],
            });
        }
    }
    Ok(())
}

/// Builds the forecasting LP for one day with marginal utilities `m`.
pub fn build_forecast_lp(
    day: &DayRecord,
    m: &Array2<f64>,
    bounds: &RegionBounds,
    model: &PriceResponseModel,
) -> Result<(LinearProgram, RowLayout)> {
    let n_h = day.n_h();
    let n_b = model.n_b();
    if m.dim() != (n_b, n_h) || model.blocks.e_hi.dim() != (n_b, n_h) {
        return Err(Error::DimensionMismatch(
            "marginal utilities / block limits do not match the horizon".into(),
        ));
    }
    if model.c_s.len() != n_h {
        return Err(Error::DimensionMismatch("slack penalty length".into()));
    }
    let layout = RowLayout {
        n_h,
        n_b,
        mode: model.mode,
    };
    let mut lp = LinearProgram::new(Sense::Maximize, layout.n_vars());
    for b in 0..n_b {
        for h in 0..n_h {
            let j = layout.var_p(b, h);
            lp.set_objective(j, m[[b, h]] - day.prices[h]);
        }
    }
    if model.mode == RegionMode::Thermal {
        for h in 0..n_h {
            lp.set_objective(layout.var_s(h), -model.c_s[h]);
        }
    }

    for h in 0..n_h {
        let mut row = vec![0.0; layout.n_vars()];
        for b in 0..n_b {
            row[layout.var_p(b, h)] = 1.0;
        }
        lp.add_row(row, RowSense::Ge, bounds.p_lo[h]);
    }
    for h in 0..n_h {
        let mut row = vec![0.0; layout.n_vars()];
        for b in 0..n_b {
            row[layout.var_p(b, h)] = 1.0;
        }
        lp.add_row(row, RowSense::Le, bounds.p_hi[h]);
    }
    if model.mode == RegionMode::Thermal {
        let temp_row = |k: usize, sign_s: f64| {
            let mut row = vec![0.0; layout.n_vars()];
            for b in 0..n_b {
                for j in 0..=k {
                    row[layout.var_p(b, j)] = bounds.lambda_b[[k, j]];
                }
            }
            row[layout.var_s(k)] = sign_s;
            row
        };
        for k in 0..n_h {
            lp.add_row(temp_row(k, 1.0), RowSense::Ge, bounds.temp_lo[k]);
        }
        for k in 0..n_h {
            lp.add_row(temp_row(k, -1.0), RowSense::Le, bounds.temp_hi[k]);
        }
    }
    for b in 0..n_b {
        for h in 0..n_h {
            let mut row = vec![0.0; layout.n_vars()];
            row[layout.var_p(b, h)] = 1.0;
            lp.add_row(row, RowSense::Le, model.blocks.e_hi[[b, h]]);
        }
    }
    Ok((lp, layout))
}

fn assemble_solution(day: &DayRecord, sol: &LpSolution, layout: &RowLayout) -> ForecastSolution {
    let (n_b, n_h) = (layout.n_b, layout.n_h);
    let mut block_power = Array2::zeros((n_b, n_h));
    for b in 0..n_b {
        for h in 0..n_h {
            block_power[[b, h]] = sol.x[layout.var_p(b, h)].max(0.0);
        }
    }
    let total_power: Vec<f64> = (0..n_h)
        .map(|h| (0..n_b).map(|b| block_power[[b, h]]).sum())
        .collect();
    let slack: Vec<f64> = match layout.mode {
        RegionMode::Thermal => (0..n_h).map(|h| sol.x[layout.var_s(h)].max(0.0)).collect(),
        RegionMode::PowerOnly => vec![0.0; n_h],
    };
    let mut duals = ForecastDuals {
        eps_lo: vec![0.0; n_h],
        eps_hi: vec![0.0; n_h],
        kappa_lo: vec![0.0; n_h],
        kappa_hi: vec![0.0; n_h],
        phi_lo: Array2::zeros((n_b, n_h)),
        phi_hi: Array2::zeros((n_b, n_h)),
        phi_slack: vec![0.0; n_h],
    };
    for h in 0..n_h {
        duals.eps_lo[h] = (-sol.duals[layout.row_power_lo(h)]).max(0.0);
        duals.eps_hi[h] = sol.duals[layout.row_power_hi(h)].max(0.0);
        if layout.mode == RegionMode::Thermal {
            duals.kappa_lo[h] = (-sol.duals[layout.row_temp_lo(h)]).max(0.0);
            duals.kappa_hi[h] = sol.duals[layout.row_temp_hi(h)].max(0.0);
            duals.phi_slack[h] = (-sol.reduced_costs[layout.var_s(h)]).max(0.0);
        }
    }
    for b in 0..n_b {
        for h in 0..n_h {
            duals.phi_hi[[b, h]] = sol.duals[layout.row_block_hi(b, h)].max(0.0);
            duals.phi_lo[[b, h]] = (-sol.reduced_costs[layout.var_p(b, h)]).max(0.0);
        }
    }
    ForecastSolution {
        day_index: day.index,
        block_power,
        total_power,
        slack,
        duals,
        objective: sol.objective,
    }
}

/// Solves one day's forecasting problem.
pub fn solve_forecast_day(
    ctx: &ForecastContext,
    day: &DayRecord,
    model: &PriceResponseModel,
) -> Result<ForecastSolution> {
    let cond = ctx.conditions(day)?;
    let bounds = region_bounds(&model.hom, &cond, ctx.system, model.mode);
    solve_forecast_day_with(day, &bounds, model)
}

/// As [`solve_forecast_day`], with the aggregate bounds precomputed (the
/// estimation loops reuse them across many utility evaluations).
pub fn solve_forecast_day_with(
    day: &DayRecord,
    bounds: &RegionBounds,
    model: &PriceResponseModel,
) -> Result<ForecastSolution> {
    check_capacity(day.index, bounds, &model.blocks)?;
    let m = model.util.marginal_utilities(&day.regressors);
    let (lp, layout) = build_forecast_lp(day, &m, bounds, model)?;
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        // Slacks keep the thermal rows feasible and block caps bound the
        // objective; anything else is a capacity conflict caught above.
        return Err(Error::Data(format!(
            "day {}: forecasting LP ended {:?}",
            day.index, sol.status
        )));
    }
    Ok(assemble_solution(day, &sol, &layout))
}

/// Independent per-day forecasts for a horizon of days.
pub fn forecast_horizon(
    ctx: &ForecastContext,
    days: &[DayRecord],
    model: &PriceResponseModel,
) -> Result<Vec<ForecastSolution>> {
    let results = par::map_indexed(days.len(), |i| solve_forecast_day(ctx, &days[i], model));
    results.into_iter().collect()
}

/// Minimal temperature slack that makes an observed total-power trajectory
/// feasible; zero in power-only mode.
pub fn minimal_slack(bounds: &RegionBounds, total_power: &[f64]) -> Vec<f64> {
    let n_h = total_power.len();
    if bounds.mode == RegionMode::PowerOnly {
        return vec![0.0; n_h];
    }
    let mut out = vec![0.0; n_h];
    for k in 0..n_h {
        let mut lbp = 0.0;
        for j in 0..=k {
            lbp += bounds.lambda_b[[k, j]] * total_power[j];
        }
        out[k] = (bounds.temp_lo[k] - lbp).max(lbp - bounds.temp_hi[k]).max(0.0);
    }
    out
}

/// Splits an observed total greedily across blocks in block order, clamped
/// at the block caps.
pub fn split_observed(total: &[f64], blocks: &BlockLimits) -> Array2<f64> {
    let (n_b, n_h) = blocks.e_hi.dim();
    let mut out = Array2::zeros((n_b, n_h));
    for h in 0..n_h {
        let mut rest = total[h].max(0.0);
        for b in 0..n_b {
            let take = rest.min(blocks.e_hi[[b, h]]);
            out[[b, h]] = take;
            rest -= take;
        }
        if rest > 1e-7 {
            log::debug!("hour {h}: observed power exceeds block capacity by {rest:.4} kW");
        }
    }
    out
}
