//! End-to-end estimation behavior on synthetic and crafted data.

use poolcast::datagen::{build_dataset, synthesize_series, PoolConfig};
use poolcast::estimation::{
    feasibility_problem, heuristic_pipeline, optimality_problem, rnp_pipeline, EstimatorConfig,
};
use poolcast::eval::{mae, naive_forecast};
use poolcast::forecast::{
    forecast_horizon, solve_forecast_day, DayRecord, ForecastContext, PriceResponseModel,
    RegionMode, UtilityModel,
};
use poolcast::homothety::{block_limits_uniform, Homothety};
use poolcast::thermal::{DayConditions, PrototypeParams, ThermalSystem};

/// Generates observations as exact forward-LP optima of a known model.
///
/// Wide comfort band and sign-flipping welfare make every hour sit on a
/// power bound, which pins the homothetic fit.
fn noise_free_instance(n_days: usize) -> (PrototypeParams, ThermalSystem, Vec<DayRecord>, PriceResponseModel) {
    let params = PrototypeParams {
        delta_band: 30.0,
        theta0: 20.5,
        ..PrototypeParams::default()
    };
    let n_h = 24;
    let system = ThermalSystem::new(&params, n_h).unwrap();
    let beta_true = 2.5;
    let tau_true: Vec<f64> = (0..n_h)
        .map(|h| 1.0 + 0.5 * (h as f64 / 24.0 * std::f64::consts::TAU).sin())
        .collect();
    let hom = Homothety::new(beta_true, tau_true).unwrap();
    let p_hi: Vec<f64> = (0..n_h).map(|h| beta_true * params.p_rated + hom.tau[h]).collect();
    let blocks = block_limits_uniform(&p_hi, 2).unwrap();
    let util = UtilityModel::new(vec![0.1, 0.0], vec![0.0, 0.0, 0.004, 0.0, 0.0]).unwrap();
    let truth = PriceResponseModel {
        hom,
        util,
        blocks,
        c_s: vec![1.0; n_h],
        mode: RegionMode::Thermal,
    };

    let series = synthesize_series(21, n_days).unwrap();
    let ctx = ForecastContext {
        params: &params,
        system: &system,
    };
    let mut days = Vec::new();
    for d in 0..n_days {
        let (prices, ambient) = series.day_slice(d, n_h);
        let skeleton = DayRecord::new(d, prices.to_vec(), ambient.to_vec(), vec![0.0; n_h], 20.5)
            .unwrap();
        let sol = solve_forecast_day(&ctx, &skeleton, &truth).unwrap();
        days.push(
            DayRecord::new(d, prices.to_vec(), ambient.to_vec(), sol.total_power, 20.5).unwrap(),
        );
    }
    (params, system, days, truth)
}

#[test]
fn noise_free_recovery_closes_every_stage() {
    let (params, system, days, truth) = noise_free_instance(10);
    let conds: Vec<DayConditions> = days
        .iter()
        .map(|d| DayConditions::new(&params, &system, d.theta0, &d.ambient).unwrap())
        .collect();

    let feas = feasibility_problem(&days, &conds, &system, 0.99, RegionMode::Thermal).unwrap();
    assert!(
        feas.max_violation < 1e-6,
        "feasibility violation {}",
        feas.max_violation
    );
    assert!(
        (feas.hom.beta - truth.hom.beta).abs() / truth.hom.beta < 0.05,
        "recovered beta {} vs true {}",
        feas.hom.beta,
        truth.hom.beta
    );

    let cfg = EstimatorConfig {
        n_b: 2,
        ..EstimatorConfig::default()
    };
    let blocks = poolcast::homothety::block_limits_heuristic(
        &feas.hom.tau,
        &(0..24)
            .map(|h| feas.hom.beta * params.p_rated + feas.hom.tau[h])
            .collect::<Vec<_>>(),
        2,
    )
    .unwrap();
    let (_, diag) =
        optimality_problem(&days, &conds, &system, &feas.hom, &blocks, &cfg, RegionMode::Thermal)
            .unwrap();
    assert!(diag.gap < 1e-5, "optimality gap {}", diag.gap);

    let model = rnp_pipeline(&days, &params, &system, &cfg, RegionMode::Thermal).unwrap();
    assert!(
        model.diagnostics.train_mae < 0.1,
        "refined training MAE {}",
        model.diagnostics.train_mae
    );
    let refine = model.diagnostics.refinement.as_ref().unwrap();
    assert!(refine.final_mae <= refine.warm_mae + 1e-9);
    assert!(refine.complementarity <= cfg.schedule.final_iota());
}

#[test]
fn pipeline_beats_naive_on_generated_data() {
    let proto = PrototypeParams::default();
    let cfg = PoolConfig {
        n_buildings: 12,
        het: 0.3,
        seed: 17,
        days: 14,
        burn_in: 1,
        ..PoolConfig::default()
    };
    let series = synthesize_series(17, 14).unwrap();
    let ds = build_dataset(&proto, &cfg, &series, (9, 0, 3)).unwrap();
    let system = ThermalSystem::new(&proto, 24).unwrap();
    let est_cfg = EstimatorConfig {
        n_b: 1,
        ..EstimatorConfig::default()
    };
    let model = rnp_pipeline(
        ds.days_in(&ds.splits.train),
        &proto,
        &system,
        &est_cfg,
        RegionMode::Thermal,
    )
    .unwrap();
    let ctx = ForecastContext {
        params: &proto,
        system: &system,
    };
    let test_days = ds.days_in(&ds.splits.test);
    let sols = forecast_horizon(&ctx, test_days, &model.price_response()).unwrap();
    let naive = naive_forecast(&ds.days, ds.splits.test.clone()).unwrap();

    let mut rnp_err = 0.0;
    let mut naive_err = 0.0;
    for (i, day) in test_days.iter().enumerate() {
        rnp_err += mae(&sols[i].total_power, &day.observed).unwrap();
        naive_err += mae(&naive[i], &day.observed).unwrap();
    }
    assert!(
        rnp_err < naive_err,
        "rnp {} should beat naive {}",
        rnp_err / 3.0,
        naive_err / 3.0
    );
}

#[test]
fn power_only_pipeline_matches_thermal_when_dynamics_are_vacuous() {
    // With an enormous comfort band the temperature rows never matter, so
    // the power-bounds-only estimate must agree with the thermal one.
    let proto = PrototypeParams {
        delta_band: 500.0,
        ..PrototypeParams::default()
    };
    let cfg = PoolConfig {
        n_buildings: 6,
        het: 0.2,
        seed: 23,
        days: 9,
        burn_in: 1,
        ..PoolConfig::default()
    };
    let series = synthesize_series(23, 9).unwrap();
    let ds = build_dataset(&proto, &cfg, &series, (6, 0, 2)).unwrap();
    let system = ThermalSystem::new(&proto, 24).unwrap();
    let est_cfg = EstimatorConfig {
        n_b: 1,
        ..EstimatorConfig::default()
    };
    let train = ds.days_in(&ds.splits.train);
    let full = heuristic_pipeline(train, &proto, &system, &est_cfg, RegionMode::Thermal).unwrap();
    let power = heuristic_pipeline(train, &proto, &system, &est_cfg, RegionMode::PowerOnly).unwrap();
    let ctx = ForecastContext {
        params: &proto,
        system: &system,
    };
    let test_days = ds.days_in(&ds.splits.test);
    let f_full = forecast_horizon(&ctx, test_days, &full.price_response()).unwrap();
    let f_power = forecast_horizon(&ctx, test_days, &power.price_response()).unwrap();
    for (a, b) in f_full.iter().zip(&f_power) {
        for h in 0..24 {
            assert!(
                (a.total_power[h] - b.total_power[h]).abs() < 1e-3,
                "hour {h}: thermal {} power-only {}",
                a.total_power[h],
                b.total_power[h]
            );
        }
    }
}
