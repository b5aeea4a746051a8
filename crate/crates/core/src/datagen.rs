//! Synthetic pool generation.
//!
//! Samples a heterogeneous pool of buildings around the prototype, simulates
//! each building's cost-minimizing consumption day by day (electricity cost
//! plus a comfort-violation penalty), and aggregates the results into
//! [`DayRecord`]s with chronological train/validation/test splits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::Error;
use crate::forecast::DayRecord;
use crate::par;
use crate::solver::{solve_lp, LinearProgram, LpStatus, RowSense, Sense};
use crate::thermal::{simulate_recursive, DayConditions, PrototypeParams, ThermalSystem};
use crate::Result;

/// Per-building parameters are drawn around the prototype's.
pub type BuildingParams = PrototypeParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub n_buildings: usize,
    /// Heterogeneity factor in `[0, 1)`: half-width of the relative sampling
    /// interval around each prototype parameter.
    pub het: f64,
    /// Comfort-violation penalty (EUR per deg C and hour).
    pub rho_pen: f64,
    pub seed: u64,
    /// Simulated length in days, burn-in included.
    pub days: usize,
    /// Leading days discarded from the dataset.
    pub burn_in: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            n_buildings: 100,
            het: 0.1,
            rho_pen: 0.01,
            seed: 1,
            days: 78,
            burn_in: 1,
        }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.het) {
            return Err(Error::InvalidParameter(format!(
                "heterogeneity must lie in [0, 1), got {}",
                self.het
            )));
        }
        if !(self.rho_pen > 0.0) {
            return Err(Error::InvalidParameter(
                "comfort penalty must be positive".into(),
            ));
        }
        if self.n_buildings == 0 {
            return Err(Error::InvalidParameter("need at least one building".into()));
        }
        if self.days <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "{} simulated days do not cover burn-in of {}",
                self.days, self.burn_in
            )));
        }
        Ok(())
    }
}

/// Exogenous hourly series over the full simulation horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesBundle {
    /// EUR/kWh.
    pub prices: Vec<f64>,
    /// Deg C.
    pub ambient: Vec<f64>,
}

impl SeriesBundle {
    pub fn n_hours(&self) -> usize {
        self.prices.len()
    }

    pub fn day_slice(&self, day: usize, n_h: usize) -> (&[f64], &[f64]) {
        let r = day * n_h..(day + 1) * n_h;
        (&self.prices[r.clone()], &self.ambient[r])
    }
}

/// Diurnal ambient and price curves with slow multi-day drift and seeded
/// uniform noise. The ambient mean sits above the comfort band so cooling
/// demand exists every day; prices stay strictly positive.
pub fn synthesize_series(seed: u64, days: usize) -> Result<SeriesBundle> {
    if days == 0 {
        return Err(Error::InvalidParameter("need at least one day".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xA5B1_E17);
    let hours = days * 24;
    let mut prices = Vec::with_capacity(hours);
    let mut ambient = Vec::with_capacity(hours);
    let tau = std::f64::consts::TAU;
    for t in 0..hours {
        let day = (t / 24) as f64;
        let h = (t % 24) as f64;
        let diurnal = 6.0 * (tau * (h - 15.0) / 24.0).cos();
        let drift = 2.0 * (tau * day / 9.0 + 0.7).sin() + 1.5 * (tau * day / 23.0 + 2.1).sin();
        let amb = 23.5 + diurnal + drift + rng.gen_range(-0.8..=0.8);
        ambient.push(amb);

        let evening = 0.05 * (tau * (h - 19.0) / 24.0).cos();
        let weekly = 0.02 * (tau * day / 7.0 + 1.3).sin();
        let price = 0.12 + evening + weekly + rng.gen_range(-0.012..=0.012);
        prices.push(price.max(0.01));
    }
    Ok(SeriesBundle { prices, ambient })
}

/// Draws each building's parameters independently and uniformly from
/// `[(1 - het) v, (1 + het) v]` around the prototype value `v`. The
/// discretization period is not sampled. Deterministic under the seed: each
/// building gets its own counter-derived stream.
pub fn sample_pool(proto: &PrototypeParams, cfg: &PoolConfig) -> Result<Vec<BuildingParams>> {
    cfg.validate()?;
    proto.validate()?;
    let mut pool = Vec::with_capacity(cfg.n_buildings);
    for i in 0..cfg.n_buildings {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1 + i as u64);
        let mut draw = |v: f64| -> f64 {
            let lo = (1.0 - cfg.het) * v;
            let hi = (1.0 + cfg.het) * v;
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            rng.gen_range(lo..=hi)
        };
        let b = BuildingParams {
            r: draw(proto.r),
            c: draw(proto.c),
            eta: draw(proto.eta),
            p_rated: draw(proto.p_rated),
            theta_ref: draw(proto.theta_ref),
            delta_band: draw(proto.delta_band),
            theta0: draw(proto.theta0),
            dt: proto.dt,
        };
        b.validate().map_err(|e| {
            Error::InvalidParameter(format!(
                "building {i} sampled invalid parameters (heterogeneity {} too large): {e}",
                cfg.het
            ))
        })?;
        pool.push(b);
    }
    Ok(pool)
}

/// One day of a building's cost-minimizing consumption:
/// `min sum_h (lambda_h p_h + rho_pen s_h)` subject to the thermal dynamics,
/// comfort bounds relaxed by `s`, and the rated-power box.
///
/// Returns the hourly power and the end-of-day indoor temperature.
pub fn simulate_building(
    building: &BuildingParams,
    system: &ThermalSystem,
    prices: &[f64],
    ambient: &[f64],
    theta_start: f64,
    rho_pen: f64,
) -> Result<(Vec<f64>, f64)> {
    let n_h = system.n_h;
    if prices.len() != n_h || ambient.len() != n_h {
        return Err(Error::DimensionMismatch(
            "series slice does not match the horizon".into(),
        ));
    }
    let cond = DayConditions::new(building, system, theta_start, ambient)?;
    let lam_ct = system.lambda_apply(&cond.c_plus_t());

    // Variables: p[0..n_h], s[0..n_h].
    let mut lp = LinearProgram::new(Sense::Minimize, 2 * n_h);
    for h in 0..n_h {
        lp.set_objective(h, prices[h]);
        lp.set_bounds(h, 0.0, building.p_rated);
        lp.set_objective(n_h + h, rho_pen);
    }
    for k in 0..n_h {
        let mut row = vec![0.0; 2 * n_h];
        for j in 0..=k {
            row[j] = system.lambda_b[[k, j]];
        }
        row[n_h + k] = 1.0;
        lp.add_row(row, RowSense::Ge, cond.theta_lo[k] - lam_ct[k]);
    }
    for k in 0..n_h {
        let mut row = vec![0.0; 2 * n_h];
        for j in 0..=k {
            row[j] = system.lambda_b[[k, j]];
        }
        row[n_h + k] = -1.0;
        lp.add_row(row, RowSense::Le, cond.theta_hi[k] - lam_ct[k]);
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Data(format!(
            "building simulation LP ended {:?}",
            sol.status
        )));
    }
    let power: Vec<f64> = sol.x[..n_h].iter().map(|&p| p.max(0.0)).collect();
    let theta = simulate_recursive(building, theta_start, ambient, &power)?;
    Ok((power, *theta.last().expect("nonempty horizon")))
}

/// Chronological split boundaries into the post-burn-in day list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl Splits {
    pub fn chronological(train: usize, validation: usize, test: usize, available: usize) -> Result<Self> {
        if train + validation + test > available {
            return Err(Error::InvalidParameter(format!(
                "splits {train}/{validation}/{test} exceed the {available} usable days"
            )));
        }
        if train == 0 || test == 0 {
            return Err(Error::InvalidParameter(
                "train and test splits must be non-empty".into(),
            ));
        }
        Ok(Self {
            train: 0..train,
            validation: train..train + validation,
            test: train + validation..train + validation + test,
        })
    }
}

/// Aggregate-power statistics over the usable days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStats {
    pub peak_kw: f64,
    pub mean_kw: f64,
    pub total_mwh: f64,
    /// Share of hours with zero aggregate consumption.
    pub zero_hour_share: f64,
}

/// The generated dataset: day records after burn-in, split boundaries, the
/// sampled pool and summary statistics.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub days: Vec<DayRecord>,
    pub splits: Splits,
    pub pool: Vec<BuildingParams>,
    pub stats: PowerStats,
}

impl Dataset {
    pub fn days_in(&self, range: &Range<usize>) -> &[DayRecord] {
        &self.days[range.clone()]
    }
}

/// Simulates the pool against the series and assembles the dataset.
///
/// Buildings simulate independently (in parallel) with their indoor state
/// chained day to day; the aggregate initial temperature of a day is the
/// pool mean of the buildings' chained start temperatures.
pub fn build_dataset(
    proto: &PrototypeParams,
    cfg: &PoolConfig,
    series: &SeriesBundle,
    split_sizes: (usize, usize, usize),
) -> Result<Dataset> {
    cfg.validate()?;
    let n_h = 24;
    if series.n_hours() < cfg.days * n_h {
        return Err(Error::DimensionMismatch(format!(
            "series covers {} hours, simulation needs {}",
            series.n_hours(),
            cfg.days * n_h
        )));
    }
    let pool = sample_pool(proto, cfg)?;

    struct BuildingRun {
        power: Vec<Vec<f64>>,
        theta_start: Vec<f64>,
    }
    let runs: Vec<Result<BuildingRun>> = par::map_indexed(pool.len(), |i| {
        let b = &pool[i];
        let system = ThermalSystem::new(b, n_h)?;
        let mut theta = b.theta0;
        let mut power = Vec::with_capacity(cfg.days);
        let mut theta_start = Vec::with_capacity(cfg.days);
        for d in 0..cfg.days {
            theta_start.push(theta);
            let (prices, ambient) = series.day_slice(d, n_h);
            let (p, end) = simulate_building(b, &system, prices, ambient, theta, cfg.rho_pen)?;
            power.push(p);
            theta = end;
        }
        Ok(BuildingRun { power, theta_start })
    });
    let runs: Vec<BuildingRun> = runs.into_iter().collect::<Result<_>>()?;

    let usable = cfg.days - cfg.burn_in;
    let mut days = Vec::with_capacity(usable);
    for (rec_idx, d) in (cfg.burn_in..cfg.days).enumerate() {
        let mut aggregate = vec![0.0; n_h];
        for run in &runs {
            for h in 0..n_h {
                aggregate[h] += run.power[d][h];
            }
        }
        let theta0 =
            runs.iter().map(|r| r.theta_start[d]).sum::<f64>() / runs.len() as f64;
        let (prices, ambient) = series.day_slice(d, n_h);
        days.push(DayRecord::new(
            rec_idx,
            prices.to_vec(),
            ambient.to_vec(),
            aggregate,
            theta0,
        )?);
    }

    let splits = Splits::chronological(split_sizes.0, split_sizes.1, split_sizes.2, days.len())?;
    let stats = power_stats(&days);
    Ok(Dataset {
        days,
        splits,
        pool,
        stats,
    })
}

pub fn power_stats(days: &[DayRecord]) -> PowerStats {
    let mut peak = 0.0f64;
    let mut sum = 0.0;
    let mut zeros = 0usize;
    let mut hours = 0usize;
    for day in days {
        for &p in &day.observed {
            peak = peak.max(p);
            sum += p;
            if p <= 1e-7 {
                zeros += 1;
            }
            hours += 1;
        }
    }
    PowerStats {
        peak_kw: peak,
        mean_kw: sum / hours.max(1) as f64,
        total_mwh: sum / 1000.0,
        zero_hour_share: zeros as f64 / hours.max(1) as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn series_is_deterministic_and_positive() {
        let a = synthesize_series(7, 10).unwrap();
        let b = synthesize_series(7, 10).unwrap();
        assert_eq!(a, b);
        assert!(a.prices.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn series_guarantees_cooling_demand_every_day() {
        let proto = PrototypeParams::default();
        for seed in [1, 2, 3, 9, 42] {
            let s = synthesize_series(seed, 30).unwrap();
            for d in 0..30 {
                let (_, amb) = s.day_slice(d, 24);
                let max = amb.iter().cloned().fold(f64::MIN, f64::max);
                assert!(
                    max > proto.theta_ref + proto.delta_band,
                    "seed {seed} day {d}: max ambient {max}"
                );
            }
        }
    }

    #[test]
    fn zero_heterogeneity_reproduces_the_prototype() {
        let proto = PrototypeParams::default();
        let cfg = PoolConfig {
            n_buildings: 3,
            het: 0.0,
            days: 2,
            ..PoolConfig::default()
        };
        let pool = sample_pool(&proto, &cfg).unwrap();
        for b in pool {
            assert_eq!(b, proto);
        }
    }

    #[test]
    fn sampled_parameters_stay_in_the_interval() {
        let proto = PrototypeParams::default();
        let cfg = PoolConfig {
            n_buildings: 50,
            het: 0.1,
            days: 2,
            ..PoolConfig::default()
        };
        let pool = sample_pool(&proto, &cfg).unwrap();
        for b in &pool {
            assert!(b.c >= 9.0 - 1e-12 && b.c <= 11.0 + 1e-12);
            assert!(b.r >= 1.8 - 1e-12 && b.r <= 2.2 + 1e-12);
        }
    }

    #[test]
    fn pool_mean_approaches_the_prototype() {
        let proto = PrototypeParams::default();
        let cfg = PoolConfig {
            n_buildings: 100,
            het: 0.5,
            days: 2,
            seed: 11,
            ..PoolConfig::default()
        };
        let pool = sample_pool(&proto, &cfg).unwrap();
        let mean_c = pool.iter().map(|b| b.c).sum::<f64>() / pool.len() as f64;
        // Uniform on [5, 15]: sd of the mean is 10*0.5/sqrt(3)/10 ~ 0.29.
        assert!((mean_c - proto.c).abs() < 3.0 * 0.29, "mean C {mean_c}");
    }

    #[test]
    fn cold_day_needs_no_cooling() {
        let proto = PrototypeParams::default();
        let system = ThermalSystem::new(&proto, 24).unwrap();
        let prices = vec![0.2; 24];
        let ambient = vec![15.0; 24]; // below the comfort band
        let (power, _) =
            simulate_building(&proto, &system, &prices, &ambient, 20.0, 0.01).unwrap();
        for p in power {
            assert_abs_diff_eq!(p, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_penalty_makes_violations_free() {
        let proto = PrototypeParams::default();
        let system = ThermalSystem::new(&proto, 6).unwrap();
        let prices = vec![0.2; 6];
        let ambient = vec![35.0; 6];
        // rho_pen ~ 0 by validation; use a tiny positive value that still
        // never beats any positive price.
        let (power, _) =
            simulate_building(&proto, &system, &prices, &ambient, 22.0, 1e-9).unwrap();
        for p in power {
            assert_abs_diff_eq!(p, 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn hot_day_rides_the_upper_comfort_bound() {
        // Expensive violations and generous rated power: the trajectory pins
        // theta_hi. Cross-checked against the grid oracle at small horizon.
        let proto = PrototypeParams {
            p_rated: 4.0,
            ..PrototypeParams::default()
        };
        let system = ThermalSystem::new(&proto, 3).unwrap();
        let prices = vec![0.1; 3];
        let ambient = vec![35.0; 3];
        let (power, _) =
            simulate_building(&proto, &system, &prices, &ambient, 21.0, 10.0).unwrap();
        let theta = simulate_recursive(&proto, 21.0, &ambient, &power).unwrap();
        for x in &theta {
            assert!(*x <= proto.theta_hi() + 1e-6);
            assert_abs_diff_eq!(*x, proto.theta_hi(), epsilon = 1e-5);
        }

        // Grid check: enumerate power on a 0.02 kW lattice.
        let step = 0.02;
        let counts = (proto.p_rated / step) as usize + 1;
        let mut best = f64::INFINITY;
        let mut best_p = [0.0; 3];
        for i in 0..counts {
            for j in 0..counts {
                for k in 0..counts {
                    let p = [i as f64 * step, j as f64 * step, k as f64 * step];
                    let theta = simulate_recursive(&proto, 21.0, &ambient, &p).unwrap();
                    let viol: f64 = theta
                        .iter()
                        .map(|&t| (t - proto.theta_hi()).max(proto.theta_lo() - t).max(0.0))
                        .sum();
                    let cost = p.iter().map(|x| x * 0.1).sum::<f64>() + 10.0 * viol;
                    if cost < best {
                        best = cost;
                        best_p = p;
                    }
                }
            }
        }
        let lp_cost = power.iter().map(|x| x * 0.1).sum::<f64>();
        assert!(lp_cost <= best + 0.01, "lp {lp_cost} grid {best}");
        for h in 0..3 {
            assert!((power[h] - best_p[h]).abs() < 0.1);
        }
    }

    #[test]
    fn aggregate_is_the_exact_sum_and_chaining_holds() {
        let proto = PrototypeParams::default();
        let cfg = PoolConfig {
            n_buildings: 4,
            het: 0.2,
            days: 3,
            burn_in: 1,
            seed: 5,
            ..PoolConfig::default()
        };
        let series = synthesize_series(5, 3).unwrap();
        let ds = build_dataset(&proto, &cfg, &series, (1, 0, 1)).unwrap();
        assert_eq!(ds.days.len(), 2);

        // Rebuild by hand to confirm the aggregate and theta0 chaining.
        let pool = sample_pool(&proto, &cfg).unwrap();
        let mut sum_day1 = vec![0.0; 24];
        let mut theta0_day1 = 0.0;
        for b in &pool {
            let system = ThermalSystem::new(b, 24).unwrap();
            let mut theta = b.theta0;
            for d in 0..2 {
                let (pr, am) = series.day_slice(d, 24);
                let (p, end) =
                    simulate_building(b, &system, pr, am, theta, cfg.rho_pen).unwrap();
                if d == 1 {
                    theta0_day1 += theta / pool.len() as f64;
                    for h in 0..24 {
                        sum_day1[h] += p[h];
                    }
                }
                theta = end;
            }
        }
        for h in 0..24 {
            assert_abs_diff_eq!(ds.days[0].observed[h], sum_day1[h], epsilon = 1e-9);
        }
        assert_abs_diff_eq!(ds.days[0].theta0, theta0_day1, epsilon = 1e-9);
    }

    #[test]
    fn singleton_pool_at_zero_heterogeneity_equals_prototype_run() {
        let proto = PrototypeParams::default();
        let cfg = PoolConfig {
            n_buildings: 1,
            het: 0.0,
            days: 2,
            burn_in: 0,
            seed: 3,
            ..PoolConfig::default()
        };
        let series = synthesize_series(3, 2).unwrap();
        let ds = build_dataset(&proto, &cfg, &series, (1, 0, 1)).unwrap();
        let system = ThermalSystem::new(&proto, 24).unwrap();
        let (pr, am) = series.day_slice(0, 24);
        let (p, _) = simulate_building(&proto, &system, pr, am, proto.theta0, 0.01).unwrap();
        for h in 0..24 {
            assert_abs_diff_eq!(ds.days[0].observed[h], p[h], epsilon = 1e-12);
        }
    }

    #[test]
    fn splits_reject_oversubscription() {
        assert!(Splits::chronological(35, 35, 7, 77).is_ok());
        assert!(Splits::chronological(35, 35, 8, 77).is_err());
    }
}
