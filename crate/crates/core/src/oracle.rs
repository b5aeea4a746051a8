//! Brute-force reference implementations.
//!
//! Everything here is deliberately independent of the simplex path: the
//! forward-problem oracle enumerates total-power trajectories on a fixed
//! grid and evaluates welfare and minimal slack in closed form. The test
//! suites compare LP solutions against these references; nothing in the
//! production pipeline calls them.

use ndarray::Array2;

use crate::error::Error;
use crate::forecast::{RegionBounds, RegionMode};
use crate::homothety::BlockLimits;
use crate::Result;

/// Result of an exhaustive grid search over total-power trajectories.
#[derive(Debug, Clone)]
pub struct GridOptimum {
    pub total_power: Vec<f64>,
    pub objective: f64,
    /// Another grid point exists with near-equal objective but a total-power
    /// trajectory farther than `dist_tol` away: the instance's optimum is not
    /// unique enough for pointwise comparisons.
    pub ambiguous: bool,
}

/// Exhaustively scans per-hour total power in steps of `step`, splitting
/// each total optimally across blocks (sorted by utility) and charging the
/// minimal temperature slack.
///
/// Errors when the grid would exceed fifty million points.
#[allow(clippy::too_many_arguments)]
pub fn grid_forecast_optimum(
    prices: &[f64],
    m: &Array2<f64>,
    bounds: &RegionBounds,
    blocks: &BlockLimits,
    c_s: &[f64],
    step: f64,
    obj_tol: f64,
    dist_tol: f64,
) -> Result<GridOptimum> {
    let n_h = prices.len();
    let (n_b, _) = m.dim();
    let caps = blocks.column_sums();
    let mut lo = vec![0.0; n_h];
    let mut counts = vec![0usize; n_h];
    let mut total_points = 1usize;
    for h in 0..n_h {
        lo[h] = bounds.p_lo[h].max(0.0);
        let hi = bounds.p_hi[h].min(caps[h]);
        if hi < lo[h] - 1e-9 {
            return Err(Error::Data(format!("grid oracle: hour {h} infeasible")));
        }
        counts[h] = ((hi - lo[h]).max(0.0) / step).floor() as usize + 1;
        total_points = total_points.saturating_mul(counts[h]);
        if total_points > 50_000_000 {
            return Err(Error::Data("grid oracle: too many grid points".into()));
        }
    }

    // Best welfare achievable for a given hourly total: fill blocks in order
    // of decreasing utility, independent of the production code's
    // monotonicity assumption.
    let welfare_of = |h: usize, total: f64| -> f64 {
        let mut order: Vec<usize> = (0..n_b).collect();
        order.sort_by(|&a, &b| m[[b, h]].partial_cmp(&m[[a, h]]).unwrap());
        let mut rest = total;
        let mut acc = 0.0;
        for &b in &order {
            let take = rest.min(blocks.e_hi[[b, h]]);
            acc += (m[[b, h]] - prices[h]) * take;
            rest -= take;
            if rest <= 1e-12 {
                break;
            }
        }
        acc
    };

    let slack_cost = |total: &[f64]| -> f64 {
        if bounds.mode == RegionMode::PowerOnly {
            return 0.0;
        }
        let mut cost = 0.0;
        for k in 0..n_h {
            let mut lbp = 0.0;
            for j in 0..=k {
                lbp += bounds.lambda_b[[k, j]] * total[j];
            }
            let s = (bounds.temp_lo[k] - lbp).max(lbp - bounds.temp_hi[k]).max(0.0);
            cost += c_s[k] * s;
        }
        cost
    };

    let mut idx = vec![0usize; n_h];
    let mut best_obj = f64::NEG_INFINITY;
    let mut best_p = vec![0.0; n_h];
    let mut runner_up: Option<(f64, Vec<f64>)> = None;
    let mut point = vec![0.0; n_h];
    loop {
        for h in 0..n_h {
            point[h] = lo[h] + idx[h] as f64 * step;
        }
        let obj = point
            .iter()
            .enumerate()
            .map(|(h, &t)| welfare_of(h, t))
            .sum::<f64>()
            - slack_cost(&point);
        if obj > best_obj {
            if best_obj > f64::NEG_INFINITY {
                let dist = max_abs_diff(&best_p, &point);
                if dist > dist_tol && best_obj > obj - obj_tol {
                    runner_up = Some((best_obj, best_p.clone()));
                }
            }
            best_obj = obj;
            best_p.copy_from_slice(&point);
        } else if obj > best_obj - obj_tol {
            let dist = max_abs_diff(&best_p, &point);
            if dist > dist_tol {
                match &runner_up {
                    Some((o, _)) if *o >= obj => {}
                    _ => runner_up = Some((obj, point.clone())),
                }
            }
        }
        // Odometer increment.
        let mut h = 0;
        loop {
            if h == n_h {
                let ambiguous = runner_up
                    .as_ref()
                    .map_or(false, |(o, _)| *o > best_obj - obj_tol);
                return Ok(GridOptimum {
                    total_power: best_p,
                    objective: best_obj,
                    ambiguous,
                });
            }
            idx[h] += 1;
            if idx[h] < counts[h] {
                break;
            }
            idx[h] = 0;
            h += 1;
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Exact per-hour optimum of the single-block, power-bounds-only response:
/// consume at the cap when utility exceeds price, at the floor when it falls
/// short. `None` marks an indifferent hour (utility within `tie_tol` of the
/// price), where any feasible value is optimal.
pub fn step_response_power(
    nu: f64,
    prices: &[f64],
    floor: &[f64],
    cap: &[f64],
    tie_tol: f64,
) -> Vec<Option<f64>> {
    prices
        .iter()
        .enumerate()
        .map(|(h, &lam)| {
            if nu > lam + tie_tol {
                Some(cap[h])
            } else if nu < lam - tie_tol {
                Some(floor[h].max(0.0))
            } else {
                None
            }
        })
        .collect()
}

/// Mean absolute error between two equal-length series.
pub fn mae_of(forecast: &[f64], observed: &[f64]) -> f64 {
    forecast
        .iter()
        .zip(observed)
        .map(|(f, o)| (f - o).abs())
        .sum::<f64>()
        / forecast.len() as f64
}
