//! Error metrics and baseline forecasters.

use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::Error;
use crate::estimation::{heuristic_pipeline, EstimatedModel, EstimatorConfig, Method};
use crate::forecast::{forecast_horizon, DayRecord, ForecastContext, RegionMode};
use crate::thermal::{PrototypeParams, ThermalSystem};
use crate::Result;

/// Mean absolute hourly deviation.
pub fn mae(forecast: &[f64], observed: &[f64]) -> Result<f64> {
    check_lengths(forecast, observed)?;
    Ok(forecast
        .iter()
        .zip(observed)
        .map(|(f, o)| (f - o).abs())
        .sum::<f64>()
        / forecast.len() as f64)
}

/// Root mean square hourly deviation.
pub fn rmse(forecast: &[f64], observed: &[f64]) -> Result<f64> {
    check_lengths(forecast, observed)?;
    let ms = forecast
        .iter()
        .zip(observed)
        .map(|(f, o)| (f - o) * (f - o))
        .sum::<f64>()
        / forecast.len() as f64;
    Ok(ms.sqrt())
}

fn check_lengths(forecast: &[f64], observed: &[f64]) -> Result<()> {
    if forecast.len() != observed.len() || forecast.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "metric over series of lengths {} and {}",
            forecast.len(),
            observed.len()
        )));
    }
    Ok(())
}

/// Per-model error metrics over one day set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub split: String,
    pub n_b: usize,
    pub mae_kw: f64,
    pub rmse_kw: f64,
    /// Per-day (mae, rmse) breakdown.
    pub per_day: Vec<(f64, f64)>,
}

/// Flattens per-day forecasts and observations into one report.
pub fn metric_report(
    model: &str,
    split: &str,
    n_b: usize,
    forecasts: &[Vec<f64>],
    days: &[DayRecord],
) -> Result<MetricReport> {
    if forecasts.len() != days.len() || days.is_empty() {
        return Err(Error::DimensionMismatch(
            "forecasts do not cover the day set".into(),
        ));
    }
    let mut flat_f = Vec::new();
    let mut flat_o = Vec::new();
    let mut per_day = Vec::with_capacity(days.len());
    for (f, d) in forecasts.iter().zip(days) {
        per_day.push((mae(f, &d.observed)?, rmse(f, &d.observed)?));
        flat_f.extend_from_slice(f);
        flat_o.extend_from_slice(&d.observed);
    }
    let report = MetricReport {
        model: model.to_string(),
        split: split.to_string(),
        n_b,
        mae_kw: mae(&flat_f, &flat_o)?,
        rmse_kw: rmse(&flat_f, &flat_o)?,
        per_day,
    };
    debug_assert!(report.rmse_kw >= report.mae_kw - 1e-12);
    Ok(report)
}

/// Persistence forecast: each target day repeats the previous day's
/// observation. `target` indexes into `all_days`, which must be in
/// chronological order; every target needs a predecessor.
pub fn naive_forecast(
    all_days: &[DayRecord],
    target: std::ops::Range<usize>,
) -> Result<Vec<Vec<f64>>> {
    if target.start == 0 {
        return Err(Error::Data(
            "naive forecast needs a predecessor for every target day".into(),
        ));
    }
    if target.end > all_days.len() {
        return Err(Error::Data("naive forecast target out of range".into()));
    }
    Ok(target.map(|d| all_days[d - 1].observed.clone()).collect())
}

/// Outcome of the power-bounds-only baseline.
#[derive(Debug, Clone)]
pub struct S2sOutcome {
    pub model: EstimatedModel,
    /// Block count selected on validation RMSE.
    pub selected_n_b: usize,
    pub validation_rmse: f64,
    /// Test-split forecasts.
    pub forecasts: Vec<Vec<f64>>,
}

/// Power-bounds-only baseline: the same feasibility/optimality estimation
/// with every temperature row removed, block count selected on validation
/// RMSE, forecasts from the welfare LP without thermal rows.
pub fn s2s_baseline(
    dataset: &Dataset,
    params: &PrototypeParams,
    system: &ThermalSystem,
    cfg: &EstimatorConfig,
    n_b_grid: &[usize],
) -> Result<S2sOutcome> {
    if n_b_grid.is_empty() {
        return Err(Error::InvalidParameter("empty block-count grid".into()));
    }
    let train = dataset.days_in(&dataset.splits.train);
    let validation = dataset.days_in(&dataset.splits.validation);
    let test = dataset.days_in(&dataset.splits.test);
    let ctx = ForecastContext { params, system };

    let mut best: Option<(usize, f64, EstimatedModel)> = None;
    for &n_b in n_b_grid {
        let mut sub = cfg.clone();
        sub.n_b = n_b;
        let model = heuristic_pipeline(train, params, system, &sub, RegionMode::PowerOnly)
            .map_err(Error::in_stage("s2s-estimation"))?;
        // Selection set: validation when present, else training.
        let sel_days = if validation.is_empty() { train } else { validation };
        let sols = forecast_horizon(&ctx, sel_days, &model.price_response())?;
        let forecasts: Vec<Vec<f64>> = sols.into_iter().map(|s| s.total_power).collect();
        let report = metric_report("s2s-lite", "validation", n_b, &forecasts, sel_days)?;
        let better = best
            .as_ref()
            .map_or(true, |(_, rmse, _)| report.rmse_kw < *rmse - 1e-12);
        if better {
            best = Some((n_b, report.rmse_kw, model));
        }
    }
    let (selected_n_b, validation_rmse, mut model) = best.expect("grid is non-empty");
    model.method = Method::S2sLite;
    let sols = forecast_horizon(&ctx, test, &model.price_response())?;
    let forecasts = sols.into_iter().map(|s| s.total_power).collect();
    Ok(S2sOutcome {
        model,
        selected_n_b,
        validation_rmse,
        forecasts,
    })
}
