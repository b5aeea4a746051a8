//! Price-response modeling of a pool of thermostatically-controlled buildings.
//!
//! The crate estimates, from observed hourly aggregate power, a price-response
//! model made of step-wise marginal-utility curves plus a homothetic transform
//! (scaling `beta`, translation `tau`) of a prototype building's feasible
//! region, and uses the estimated model to produce day-ahead hourly power
//! forecasts. Everything is built on a dense bounded-variable simplex solver
//! with dual extraction ([`solver`]).
//!
//! Module map:
//! - [`thermal`]: prototype building dynamics, recursive and matricial form
//! - [`homothety`]: homothetic transform of the prototype region, block limits
//! - [`solver`]: LP engine and the bilinear penalty-alternation driver
//! - [`forecast`]: the per-day welfare-maximization forecasting LP and duals
//! - [`estimation`]: feasibility LP, optimality LP, regularized refinement
//! - [`datagen`]: synthetic pool generation and cost-minimizing simulation
//! - [`eval`]: error metrics and the naive / power-bounds-only baselines
//! - [`io`]: dataset CSV schemas, model serialization, result tables
//! - [`oracle`]: brute-force reference implementations used by the test suites

pub mod datagen;
pub mod error;
pub mod estimation;
pub mod eval;
pub mod forecast;
pub mod homothety;
pub mod io;
pub mod oracle;
pub(crate) mod par;
pub mod solver;
pub mod thermal;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
