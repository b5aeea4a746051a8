//! Discrete thermal dynamics of the prototype building.
//!
//! A single thermostatically-controlled cooling load keeps the indoor
//! temperature inside the comfort band `[theta_ref - delta, theta_ref + delta]`.
//! The hourly recursion
//!
//! ```text
//! theta[h] = a1 * theta[h-1] + (1 - a1) * (ambient[h] - a2 * p[h])
//! ```
//!
//! with `a1 = 1 - dt / (R C)` and `a2 = eta R` is recast in matricial form
//! `theta = Lambda (B p + c + t)` where `A theta = B p + c + t`, `A` is lower
//! bidiagonal with `-a1` under the diagonal, `B = -a2 (1 - a1) I` and
//! `Lambda = A^-1` has the closed form `Lambda[i][j] = a1^(i-j)` for `i >= j`.
//! Both forms coexist so each can check the other.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Default horizon: one day of hourly periods.
pub const DEFAULT_HORIZON: usize = 24;

/// Physical and technical parameters of a single building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeParams {
    /// Thermal resistance (deg C / kW).
    pub r: f64,
    /// Thermal capacitance (kWh / deg C).
    pub c: f64,
    /// Coefficient of performance of the cooling device.
    pub eta: f64,
    /// Rated power of the cooling device (kW).
    pub p_rated: f64,
    /// Temperature set-point (deg C).
    pub theta_ref: f64,
    /// Half of the comfort deadband (deg C).
    pub delta_band: f64,
    /// Initial indoor temperature (deg C).
    pub theta0: f64,
    /// Discretization period (h).
    pub dt: f64,
}

impl Default for PrototypeParams {
    fn default() -> Self {
        Self {
            r: 2.0,
            c: 10.0,
            eta: 2.5,
            p_rated: 5.4,
            theta_ref: 20.0,
            delta_band: 1.0,
            theta0: 22.5,
            dt: 1.0,
        }
    }
}

impl PrototypeParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.r, "r"),
            (self.c, "c"),
            (self.eta, "eta"),
            (self.p_rated, "p_rated"),
            (self.dt, "dt"),
        ];
        for (v, name) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.delta_band >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_band must be non-negative, got {}",
                self.delta_band
            )));
        }
        if !self.theta_ref.is_finite() || !self.theta0.is_finite() {
            return Err(Error::InvalidParameter(
                "theta_ref and theta0 must be finite".into(),
            ));
        }
        // a1 must land strictly inside (0, 1).
        derive_coefficients(self).map(|_| ())
    }

    /// Lower comfort bound.
    pub fn theta_lo(&self) -> f64 {
        self.theta_ref - self.delta_band
    }

    /// Upper comfort bound.
    pub fn theta_hi(&self) -> f64 {
        self.theta_ref + self.delta_band
    }
}

/// Dynamics coefficients `(a1, a2)` with `a1 = 1 - dt/(R C)`, `a2 = eta R`.
///
/// `a1` is rejected outside the open interval `(0, 1)`: at `a1 <= 0` the
/// monotone-decay model breaks down.
pub fn derive_coefficients(params: &PrototypeParams) -> Result<(f64, f64)> {
    let a1 = 1.0 - params.dt / (params.r * params.c);
    let a2 = params.eta * params.r;
    if !(a1 > 0.0 && a1 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "a1 = 1 - dt/(R C) = {a1} must lie strictly in (0, 1); \
             dt = {} is too large for R C = {}",
            params.dt,
            params.r * params.c
        )));
    }
    Ok((a1, a2))
}

/// Matricial form of the building dynamics over a fixed horizon.
#[derive(Debug, Clone)]
pub struct ThermalSystem {
    pub n_h: usize,
    pub a1: f64,
    pub a2: f64,
    /// Lower-bidiagonal dynamics matrix (ones on the diagonal, `-a1` below).
    pub a: Array2<f64>,
    /// Diagonal scale of the power term: `B = b_diag * I`.
    pub b_diag: f64,
    /// `Lambda = A^-1`, lower triangular with `Lambda[i][j] = a1^(i-j)`.
    pub lambda: Array2<f64>,
    /// `Lambda B = b_diag * Lambda`, the map from power to temperature.
    pub lambda_b: Array2<f64>,
}

impl ThermalSystem {
    pub fn new(params: &PrototypeParams, n_h: usize) -> Result<Self> {
        if n_h == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        params.validate()?;
        let (a1, a2) = derive_coefficients(params)?;

        let mut a = Array2::<f64>::eye(n_h);
        for i in 1..n_h {
            a[[i, i - 1]] = -a1;
        }
        let mut lambda = Array2::<f64>::zeros((n_h, n_h));
        for i in 0..n_h {
            for j in 0..=i {
                lambda[[i, j]] = a1.powi((i - j) as i32);
            }
        }
        let b_diag = -a2 * (1.0 - a1);
        let lambda_b = &lambda * b_diag;
        Ok(Self {
            n_h,
            a1,
            a2,
            a,
            b_diag,
            lambda,
            lambda_b,
        })
    }

    /// `Lambda v` for a length-`n_h` vector.
    pub fn lambda_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_h];
        for i in 0..self.n_h {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.lambda[[i, j]] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `Lambda B v`.
    pub fn lambda_b_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.lambda_apply(v);
        for x in &mut out {
            *x *= self.b_diag;
        }
        out
    }

    /// `(Lambda B)^T v`, used by the stationarity rows of the dual system.
    pub fn lambda_b_transpose_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_h];
        for h in 0..self.n_h {
            let mut acc = 0.0;
            for k in h..self.n_h {
                acc += self.lambda_b[[k, h]] * v[k];
            }
            out[h] = acc;
        }
        out
    }
}

/// Per-day constant vectors and bounds of the prototype feasible region.
#[derive(Debug, Clone)]
pub struct DayConditions {
    /// Initial-condition vector `[a1 * theta0, 0, ..., 0]`.
    pub c: Vec<f64>,
    /// Ambient contribution `(1 - a1) * ambient`.
    pub t: Vec<f64>,
    /// Comfort bounds per hour.
    pub theta_lo: Vec<f64>,
    pub theta_hi: Vec<f64>,
    /// Prototype power bounds per hour (`0` and `P`).
    pub p_lo: Vec<f64>,
    pub p_hi: Vec<f64>,
}

impl DayConditions {
    pub fn new(params: &PrototypeParams, system: &ThermalSystem, theta0: f64, ambient: &[f64]) -> Result<Self> {
        if ambient.len() != system.n_h {
            return Err(Error::DimensionMismatch(format!(
                "ambient has {} entries, horizon is {}",
                ambient.len(),
                system.n_h
            )));
        }
        let n_h = system.n_h;
        let mut c = vec![0.0; n_h];
        c[0] = system.a1 * theta0;
        let t = ambient.iter().map(|&x| (1.0 - system.a1) * x).collect();
        Ok(Self {
            c,
            t,
            theta_lo: vec![params.theta_lo(); n_h],
            theta_hi: vec![params.theta_hi(); n_h],
            p_lo: vec![0.0; n_h],
            p_hi: vec![params.p_rated; n_h],
        })
    }

    /// `c + t`, the exogenous part of the dynamics.
    pub fn c_plus_t(&self) -> Vec<f64> {
        self.c.iter().zip(&self.t).map(|(a, b)| a + b).collect()
    }
}

/// Hour-by-hour temperature recursion. The reference implementation that the
/// matricial form is checked against.
pub fn simulate_recursive(
    params: &PrototypeParams,
    theta0: f64,
    ambient: &[f64],
    power: &[f64],
) -> Result<Vec<f64>> {
    if ambient.len() != power.len() {
        return Err(Error::DimensionMismatch(format!(
            "ambient has {} entries, power has {}",
            ambient.len(),
            power.len()
        )));
    }
    let (a1, a2) = derive_coefficients(params)?;
    let mut theta = Vec::with_capacity(ambient.len());
    let mut prev = theta0;
    for (amb, p) in ambient.iter().zip(power) {
        let next = a1 * prev + (1.0 - a1) * (amb - a2 * p);
        theta.push(next);
        prev = next;
    }
    Ok(theta)
}

/// Matricial trajectory `theta = Lambda (B p + c + t)`.
pub fn simulate_matricial(system: &ThermalSystem, cond: &DayConditions, power: &[f64]) -> Result<Vec<f64>> {
    if power.len() != system.n_h {
        return Err(Error::DimensionMismatch(format!(
            "power has {} entries, horizon is {}",
            power.len(),
            system.n_h
        )));
    }
    let mut rhs = vec![0.0; system.n_h];
    for h in 0..system.n_h {
        rhs[h] = system.b_diag * power[h] + cond.c[h] + cond.t[h];
    }
    Ok(system.lambda_apply(&rhs))
}
