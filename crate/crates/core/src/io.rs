//! Dataset CSV schemas, model serialization and result tables.
//!
//! Numeric CSV fields are written with nine decimal places so round trips
//! stay lossless at the solver's tolerance scale.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{BuildingParams, Dataset, PowerStats, Splits};
use crate::error::Error;
use crate::estimation::EstimatedModel;
use crate::eval::MetricReport;
use crate::forecast::{DayRecord, ForecastSolution};
use crate::Result;

fn fmt(v: f64) -> String {
    format!("{v:.9}")
}

/// Writes the five dataset files into `dir`: `prices.csv`, `ambient.csv`,
/// `observed.csv`, `theta0.csv` and `pool_params.csv`.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut prices = csv::Writer::from_path(dir.join("prices.csv"))?;
    prices.write_record(["day", "hour", "price"])?;
    let mut ambient = csv::Writer::from_path(dir.join("ambient.csv"))?;
    ambient.write_record(["day", "hour", "temp_c"])?;
    let mut observed = csv::Writer::from_path(dir.join("observed.csv"))?;
    observed.write_record(["day", "hour", "power_kw"])?;
    let mut theta0 = csv::Writer::from_path(dir.join("theta0.csv"))?;
    theta0.write_record(["day", "theta0_c"])?;
    for day in &dataset.days {
        for h in 0..day.n_h() {
            let (d, hh) = (day.index.to_string(), h.to_string());
            prices.write_record([&d, &hh, &fmt(day.prices[h])])?;
            ambient.write_record([&d, &hh, &fmt(day.ambient[h])])?;
            observed.write_record([&d, &hh, &fmt(day.observed[h])])?;
        }
        theta0.write_record([day.index.to_string(), fmt(day.theta0)])?;
    }
    prices.flush()?;
    ambient.flush()?;
    observed.flush()?;
    theta0.flush()?;

    let mut pool = csv::Writer::from_path(dir.join("pool_params.csv"))?;
    pool.write_record(["building", "R", "C", "eta", "P", "theta_ref", "delta", "theta0"])?;
    for (i, b) in dataset.pool.iter().enumerate() {
        pool.write_record([
            i.to_string(),
            fmt(b.r),
            fmt(b.c),
            fmt(b.eta),
            fmt(b.p_rated),
            fmt(b.theta_ref),
            fmt(b.delta_band),
            fmt(b.theta0),
        ])?;
    }
    pool.flush()?;
    Ok(())
}

/// Split sizes stored alongside a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub config_sha256: String,
    pub n_buildings: usize,
    pub het: f64,
    pub usable_days: usize,
    pub splits: (usize, usize, usize),
    pub stats: PowerStats,
}

pub fn write_manifest(dir: &Path, manifest: &DatasetManifest) -> Result<()> {
    let mut f = fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, manifest)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let data = fs::read_to_string(dir.join("manifest.json"))?;
    Ok(serde_json::from_str(&data)?)
}

/// Reads a dataset directory back into day records and splits.
pub fn read_dataset(dir: &Path, splits: (usize, usize, usize)) -> Result<Dataset> {
    let prices = read_day_hour(dir.join("prices.csv").as_path(), "price")?;
    let ambient = read_day_hour(dir.join("ambient.csv").as_path(), "temp_c")?;
    let observed = read_day_hour(dir.join("observed.csv").as_path(), "power_kw")?;
    let theta0 = read_theta0(dir.join("theta0.csv").as_path())?;
    if prices.len() != ambient.len() || prices.len() != observed.len() || prices.len() != theta0.len()
    {
        return Err(Error::Data(format!(
            "dataset files disagree on day count: {} prices, {} ambient, {} observed, {} theta0",
            prices.len(),
            ambient.len(),
            observed.len(),
            theta0.len()
        )));
    }
    let mut days = Vec::with_capacity(prices.len());
    for (i, ((p, a), (o, t))) in prices
        .into_iter()
        .zip(ambient)
        .zip(observed.into_iter().zip(&theta0))
        .enumerate()
    {
        days.push(DayRecord::new(i, p, a, o, *t)?);
    }
    let pool = read_pool(dir.join("pool_params.csv").as_path()).unwrap_or_default();
    let stats = crate::datagen::power_stats(&days);
    let splits = Splits::chronological(splits.0, splits.1, splits.2, days.len())?;
    Ok(Dataset {
        days,
        splits,
        pool,
        stats,
    })
}

fn read_day_hour(path: &Path, field: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == field)
        .ok_or_else(|| Error::Data(format!("{}: missing column `{field}`", path.display())))?;
    let mut days: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let day: usize = parse_field(&record, 0, path)?;
        let hour: usize = parse_field(&record, 1, path)?;
        let value: f64 = parse_field(&record, col, path)?;
        if days.len() <= day {
            days.resize(day + 1, Vec::new());
        }
        if days[day].len() != hour {
            return Err(Error::Data(format!(
                "{}: day {day} hour {hour} out of order",
                path.display()
            )));
        }
        days[day].push(value);
    }
    Ok(days)
}

fn read_theta0(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let day: usize = parse_field(&record, 0, path)?;
        if day != out.len() {
            return Err(Error::Data(format!(
                "{}: day {day} out of order",
                path.display()
            )));
        }
        out.push(parse_field(&record, 1, path)?);
    }
    Ok(out)
}

fn read_pool(path: &Path) -> Result<Vec<BuildingParams>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        out.push(BuildingParams {
            r: parse_field(&record, 1, path)?,
            c: parse_field(&record, 2, path)?,
            eta: parse_field(&record, 3, path)?,
            p_rated: parse_field(&record, 4, path)?,
            theta_ref: parse_field(&record, 5, path)?,
            delta_band: parse_field(&record, 6, path)?,
            theta0: parse_field(&record, 7, path)?,
            dt: 1.0,
        });
    }
    Ok(out)
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, path: &Path) -> Result<T> {
    record
        .get(idx)
        .ok_or_else(|| Error::Data(format!("{}: short record", path.display())))?
        .parse::<T>()
        .map_err(|_| {
            Error::Data(format!(
                "{}: field {idx} `{}` is not numeric",
                path.display(),
                record.get(idx).unwrap_or("")
            ))
        })
}

/// Versioned model document.
#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    model: EstimatedModel,
}

pub fn write_model(path: &Path, model: &EstimatedModel) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let doc = ModelDocument {
        version: 1,
        model: model.clone(),
    };
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, &doc)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<EstimatedModel> {
    let data = fs::read_to_string(path)?;
    let doc: ModelDocument = serde_json::from_str(&data)?;
    if doc.version != 1 {
        return Err(Error::Data(format!(
            "unsupported model document version {}",
            doc.version
        )));
    }
    Ok(doc.model)
}

/// Forecast table: day, hour, forecast, observation (when available), slack.
pub fn write_forecasts(
    path: &Path,
    solutions: &[ForecastSolution],
    observed: Option<&[DayRecord]>,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["day", "hour", "forecast_kw", "observed_kw", "slack_c"])?;
    for (i, sol) in solutions.iter().enumerate() {
        for h in 0..sol.total_power.len() {
            let obs = observed
                .and_then(|days| days.get(i))
                .map(|d| fmt(d.observed[h]))
                .unwrap_or_default();
            w.write_record([
                sol.day_index.to_string(),
                h.to_string(),
                fmt(sol.total_power[h]),
                obs,
                fmt(sol.slack[h]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One benchmark row: Table-3-style metrics plus the grid coordinates and
/// the estimation wall time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub split: String,
    pub n_b: usize,
    pub het: f64,
    pub mae_kw: f64,
    pub rmse_kw: f64,
    pub estimate_seconds: f64,
}

impl ResultRow {
    pub fn from_report(report: &MetricReport, het: f64, estimate_seconds: f64) -> Self {
        Self {
            model: report.model.clone(),
            split: report.split.clone(),
            n_b: report.n_b,
            het,
            mae_kw: report.mae_kw,
            rmse_kw: report.rmse_kw,
            estimate_seconds,
        }
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "model",
        "split",
        "n_b",
        "het",
        "mae_kw",
        "rmse_kw",
        "estimate_seconds",
    ])?;
    for row in rows {
        w.write_record([
            row.model.clone(),
            row.split.clone(),
            row.n_b.to_string(),
            format!("{:.2}", row.het),
            fmt(row.mae_kw),
            fmt(row.rmse_kw),
            format!("{:.3}", row.estimate_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{build_dataset, synthesize_series, PoolConfig};
    use crate::thermal::PrototypeParams;

    #[test]
    fn dataset_roundtrip_preserves_series() {
        let proto = PrototypeParams::default();
        let cfg = PoolConfig {
            n_buildings: 3,
            days: 4,
            seed: 9,
            ..PoolConfig::default()
        };
        let series = synthesize_series(9, 4).unwrap();
        let ds = build_dataset(&proto, &cfg, &series, (2, 0, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &ds).unwrap();
        let back = read_dataset(dir.path(), (2, 0, 1)).unwrap();
        assert_eq!(back.days.len(), ds.days.len());
        for (a, b) in ds.days.iter().zip(&back.days) {
            for h in 0..a.n_h() {
                assert!((a.prices[h] - b.prices[h]).abs() < 1e-9);
                assert!((a.observed[h] - b.observed[h]).abs() < 1e-9);
                assert!((a.ambient[h] - b.ambient[h]).abs() < 1e-9);
            }
            assert!((a.theta0 - b.theta0).abs() < 1e-9);
        }
        assert_eq!(back.pool.len(), 3);
    }

    #[test]
    fn model_roundtrip() {
        use crate::forecast::{RegionMode, UtilityModel};
        use crate::homothety::{block_limits_uniform, Homothety};
        let model = EstimatedModel {
            method: crate::estimation::Method::Heuristic,
            n_h: 2,
            n_b: 1,
            hom: Homothety::new(1.5, vec![0.3, 0.4]).unwrap(),
            util: UtilityModel::new(vec![0.5], vec![0.0; 5]).unwrap(),
            blocks: block_limits_uniform(&[8.4, 8.5], 1).unwrap(),
            c_s: vec![1.0, 1.0],
            mode: RegionMode::Thermal,
            diagnostics: crate::estimation::Diagnostics {
                feasibility_objective: 1.0,
                feasibility_max_violation: 0.0,
                optimality_gap: 0.5,
                optimality_iterations: 3,
                train_mae: 2.0,
                refinement: None,
            },
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        write_model(&path, &model).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(back.hom, model.hom);
        assert_eq!(back.util, model.util);
        assert_eq!(back.n_b, 1);
    }

    #[test]
    fn malformed_dataset_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("prices.csv"), "day,hour,price\n0,0,abc\n").unwrap();
        std::fs::write(dir.path().join("ambient.csv"), "day,hour,temp_c\n0,0,25\n").unwrap();
        std::fs::write(dir.path().join("observed.csv"), "day,hour,power_kw\n0,0,1\n").unwrap();
        std::fs::write(dir.path().join("theta0.csv"), "day,theta0_c\n0,20\n").unwrap();
        match read_dataset(dir.path(), (1, 0, 0)) {
            Err(Error::Data(msg)) => assert!(msg.contains("not numeric")),
            other => panic!("expected data error, got {other:?}"),
        }
    }
}
