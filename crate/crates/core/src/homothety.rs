//! Homothetic transform of the prototype feasible region.
//!
//! The aggregate power trajectory is modeled as `p_agg = beta * p_proto + tau`.
//! Substituting into the prototype region gives the aggregate power bounds
//! `beta * p_lo + tau <= p_agg <= beta * p_hi + tau` and the transformed
//! temperature constraint
//!
//! ```text
//! beta*theta_lo + Lambda B tau - Lambda beta (c + t)
//!     <= Lambda B p_agg <=
//! beta*theta_hi + Lambda B tau - Lambda beta (c + t)
//! ```
//!
//! Block upper limits split the aggregate upper bound across utility blocks,
//! either by the sign-cased table rule used by the heuristic pipeline or by
//! the identical-length rule used by the regularized refinement.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::thermal::{DayConditions, ThermalSystem};
use crate::Result;

/// Scaling and translation of the prototype region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Homothety {
    pub beta: f64,
    /// Per-hour translation (kW), length `n_h`.
    pub tau: Vec<f64>,
}

impl Homothety {
    pub fn identity(n_h: usize) -> Self {
        Self {
            beta: 1.0,
            tau: vec![0.0; n_h],
        }
    }

    pub fn new(beta: f64, tau: Vec<f64>) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "homothety scaling must be non-negative, got {beta}"
            )));
        }
        Ok(Self { beta, tau })
    }

    /// The `beta = 0` attractor collapses the region to the singleton `tau`.
    pub fn is_degenerate(&self) -> bool {
        self.beta < 1e-9
    }

    /// Composition: applying `self` after `first` equals a single homothety.
    pub fn compose_after(&self, first: &Homothety) -> Homothety {
        let tau = first
            .tau
            .iter()
            .zip(&self.tau)
            .map(|(t1, t2)| self.beta * t1 + t2)
            .collect();
        Homothety {
            beta: self.beta * first.beta,
            tau,
        }
    }
}

/// `beta * p + tau` elementwise.
pub fn map_power(h: &Homothety, p_proto: &[f64]) -> Vec<f64> {
    debug_assert_eq!(h.tau.len(), p_proto.len());
    p_proto
        .iter()
        .zip(&h.tau)
        .map(|(p, t)| h.beta * p + t)
        .collect()
}

/// Aggregate-region data produced by the transform.
///
/// `temp_lo`/`temp_hi` bound the transformed quantity `Lambda B p_agg`.
#[derive(Debug, Clone)]
pub struct AggregateBounds {
    pub p_lo: Vec<f64>,
    pub p_hi: Vec<f64>,
    pub temp_lo: Vec<f64>,
    pub temp_hi: Vec<f64>,
}

/// Applies the homothety to a day's prototype bounds.
pub fn aggregate_bounds(h: &Homothety, cond: &DayConditions, system: &ThermalSystem) -> AggregateBounds {
    let n_h = system.n_h;
    debug_assert_eq!(h.tau.len(), n_h);
    let p_lo = map_power(h, &cond.p_lo);
    let p_hi = map_power(h, &cond.p_hi);
    let lb_tau = system.lambda_b_apply(&h.tau);
    let lam_ct = system.lambda_apply(&cond.c_plus_t());
    let mut temp_lo = vec![0.0; n_h];
    let mut temp_hi = vec![0.0; n_h];
    for k in 0..n_h {
        temp_lo[k] = h.beta * cond.theta_lo[k] + lb_tau[k] - h.beta * lam_ct[k];
        temp_hi[k] = h.beta * cond.theta_hi[k] + lb_tau[k] - h.beta * lam_ct[k];
    }
    AggregateBounds {
        p_lo,
        p_hi,
        temp_lo,
        temp_hi,
    }
}

/// Upper block lengths per hour, `n_b x n_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockLimits {
    pub e_hi: Array2<f64>,
    /// True when some negative computed length was clamped to zero.
    pub clamped: bool,
}

impl BlockLimits {
    pub fn n_b(&self) -> usize {
        self.e_hi.nrows()
    }

    pub fn n_h(&self) -> usize {
        self.e_hi.ncols()
    }

    /// Total capacity per hour.
    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n_h())
            .map(|h| (0..self.n_b()).map(|b| self.e_hi[[b, h]]).sum())
            .collect()
    }
}

/// Sign-cased block split used by the heuristic pipeline.
///
/// Per hour, keyed on the signs of the aggregate bounds:
/// - `p_hi <= 0`: every block gets 0;
/// - `p_lo >= 0` (and `p_hi > 0`): block 1 gets `p_lo`, the remaining
///   `n_b - 1` blocks split `p_hi - p_lo` evenly (a single block gets `p_hi`);
/// - otherwise (`p_lo < 0 < p_hi`): every block gets `p_hi / n_b`.
pub fn block_limits_heuristic(p_lo_a: &[f64], p_hi_a: &[f64], n_b: usize) -> Result<BlockLimits> {
    if n_b == 0 {
        return Err(Error::InvalidParameter("block count must be >= 1".into()));
    }
    if p_lo_a.len() != p_hi_a.len() {
        return Err(Error::DimensionMismatch(
            "power bound vectors differ in length".into(),
        ));
    }
    let n_h = p_lo_a.len();
    let mut e_hi = Array2::<f64>::zeros((n_b, n_h));
    let mut clamped = false;
    for h in 0..n_h {
        let (lo, hi) = (p_lo_a[h], p_hi_a[h]);
        debug_assert!(lo <= hi + 1e-9, "bounds must be ordered");
        if hi <= 0.0 {
            continue; // all zero
        }
        if lo >= 0.0 {
            if n_b == 1 {
                e_hi[[0, h]] = hi;
            } else {
                e_hi[[0, h]] = lo;
                let rest = (hi - lo) / (n_b as f64 - 1.0);
                for b in 1..n_b {
                    e_hi[[b, h]] = rest;
                }
            }
        } else {
            let each = hi / n_b as f64;
            for b in 0..n_b {
                e_hi[[b, h]] = each;
            }
        }
    }
    // The table never produces negatives for ordered bounds, but guard anyway.
    for v in e_hi.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
            clamped = true;
        }
    }
    if clamped {
        log::warn!("negative block lengths clamped to zero");
    }
    Ok(BlockLimits { e_hi, clamped })
}

/// Identical-length block split used by the regularized refinement:
/// every block gets `p_hi / n_b` per hour, clamped at zero.
pub fn block_limits_uniform(p_hi_a: &[f64], n_b: usize) -> Result<BlockLimits> {
    if n_b == 0 {
        return Err(Error::InvalidParameter("block count must be >= 1".into()));
    }
    let n_h = p_hi_a.len();
    let mut e_hi = Array2::<f64>::zeros((n_b, n_h));
    let mut clamped = false;
    for h in 0..n_h {
        let each = p_hi_a[h] / n_b as f64;
        if each < 0.0 {
            clamped = true;
            continue;
        }
        for b in 0..n_b {
            e_hi[[b, h]] = each;
        }
    }
    if clamped {
        log::warn!("negative aggregate upper bound; uniform block lengths clamped to zero");
    }
    Ok(BlockLimits { e_hi, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::PrototypeParams;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_homothety_maps_power_unchanged() {
        let h = Homothety::identity(2);
        assert_eq!(map_power(&h, &[3.0, 7.0]), vec![3.0, 7.0]);
    }

    #[test]
    fn map_power_hand_example() {
        let h = Homothety::new(2.0, vec![1.0, 1.0]).unwrap();
        assert_eq!(map_power(&h, &[1.0, 2.0]), vec![3.0, 5.0]);
    }

    #[test]
    fn degenerate_homothety_is_a_singleton() {
        let h = Homothety::new(0.0, vec![4.0, 4.0]).unwrap();
        assert!(h.is_degenerate());
        assert_eq!(map_power(&h, &[123.0, -7.0]), vec![4.0, 4.0]);
    }

    #[test]
    fn identity_bounds_collapse_to_prototype() {
        let p = PrototypeParams::default();
        let sys = ThermalSystem::new(&p, 4).unwrap();
        let cond = DayConditions::new(&p, &sys, 22.5, &[28.0; 4]).unwrap();
        let agg = aggregate_bounds(&Homothety::identity(4), &cond, &sys);
        assert_eq!(agg.p_lo, cond.p_lo);
        assert_eq!(agg.p_hi, cond.p_hi);
        // With beta=1, tau=0 the temperature window is the prototype's:
        // theta_lo - Lambda(c+t) <= Lambda B p <= theta_hi - Lambda(c+t).
        let lam_ct = sys.lambda_apply(&cond.c_plus_t());
        for k in 0..4 {
            assert_abs_diff_eq!(agg.temp_lo[k], cond.theta_lo[k] - lam_ct[k], epsilon = 1e-12);
            assert_abs_diff_eq!(agg.temp_hi[k], cond.theta_hi[k] - lam_ct[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn scaled_upper_power_bound() {
        let p = PrototypeParams::default();
        let sys = ThermalSystem::new(&p, 3).unwrap();
        let cond = DayConditions::new(&p, &sys, 22.5, &[28.0; 3]).unwrap();
        let h = Homothety::new(2.0, vec![1.0; 3]).unwrap();
        let agg = aggregate_bounds(&h, &cond, &sys);
        for v in agg.p_hi {
            assert_abs_diff_eq!(v, 11.8, epsilon = 1e-12);
        }
    }

    #[test]
    fn feasible_prototype_point_maps_into_aggregate_region() {
        // Membership: if p is prototype-feasible then beta p + tau satisfies
        // the transformed constraints exactly.
        let p = PrototypeParams::default();
        let sys = ThermalSystem::new(&p, 24).unwrap();
        let ambient: Vec<f64> = (0..24).map(|h| 25.0 + 4.0 * (h as f64 / 24.0 * std::f64::consts::TAU).sin()).collect();
        let cond = DayConditions::new(&p, &sys, 20.5, &ambient).unwrap();
        // A mildly cooling trajectory kept inside the band by construction:
        // solve for the power that tracks theta_ref exactly whenever cooling helps.
        let mut power = vec![0.0; 24];
        let mut prev = 20.5;
        for h in 0..24 {
            let free = sys.a1 * prev + (1.0 - sys.a1) * ambient[h];
            let need = (free - p.theta_ref) / ((1.0 - sys.a1) * sys.a2);
            power[h] = need.clamp(0.0, p.p_rated);
            prev = sys.a1 * prev + (1.0 - sys.a1) * (ambient[h] - sys.a2 * power[h]);
        }
        let theta = crate::thermal::simulate_recursive(&p, 20.5, &ambient, &power).unwrap();
        for &x in &theta {
            assert!(x >= p.theta_lo() - 1e-9 && x <= p.theta_hi() + 1e-9);
        }

        let h = Homothety::new(3.0, vec![0.5; 24]).unwrap();
        let agg = aggregate_bounds(&h, &cond, &sys);
        let p_agg = map_power(&h, &power);
        let lb_p = sys.lambda_b_apply(&p_agg);
        for k in 0..24 {
            assert!(p_agg[k] >= agg.p_lo[k] - 1e-9 && p_agg[k] <= agg.p_hi[k] + 1e-9);
            assert!(lb_p[k] >= agg.temp_lo[k] - 1e-9 && lb_p[k] <= agg.temp_hi[k] + 1e-9);
        }
    }

    #[test]
    fn heuristic_blocks_worked_example() {
        // n_b = 3, bounds [10, 40] per hour: first block 10, the rest 15 each.
        let lim = block_limits_heuristic(&[10.0], &[40.0], 3).unwrap();
        assert_eq!(lim.e_hi[[0, 0]], 10.0);
        assert_eq!(lim.e_hi[[1, 0]], 15.0);
        assert_eq!(lim.e_hi[[2, 0]], 15.0);
    }

    #[test]
    fn heuristic_blocks_single_block_spanning_zero() {
        let lim = block_limits_heuristic(&[-2.0], &[5.0], 1).unwrap();
        assert_eq!(lim.e_hi[[0, 0]], 5.0);
    }

    #[test]
    fn heuristic_blocks_nonpositive_upper_bound() {
        let lim = block_limits_heuristic(&[-3.0, -1.0], &[-1.0, 0.0], 4).unwrap();
        assert!(lim.e_hi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_blocks_split_evenly() {
        let lim = block_limits_uniform(&[12.0], 6).unwrap();
        for b in 0..6 {
            assert_abs_diff_eq!(lim.e_hi[[b, 0]], 2.0);
        }
        let lim = block_limits_uniform(&[12.0], 1).unwrap();
        assert_eq!(lim.e_hi[[0, 0]], 12.0);
    }

    #[test]
    fn uniform_blocks_clamp_negative_bound() {
        let lim = block_limits_uniform(&[-1.0], 2).unwrap();
        assert!(lim.clamped);
        assert!(lim.e_hi.iter().all(|&v| v == 0.0));
    }

    proptest! {
        #[test]
        fn composition_matches_two_step_mapping(
            b1 in 0.0f64..3.0, b2 in 0.0f64..3.0,
            t1 in -5.0f64..5.0, t2 in -5.0f64..5.0,
            p in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            let h1 = Homothety::new(b1, vec![t1; 4]).unwrap();
            let h2 = Homothety::new(b2, vec![t2; 4]).unwrap();
            let two_step = map_power(&h2, &map_power(&h1, &p));
            let composed = h2.compose_after(&h1);
            let one_step = map_power(&composed, &p);
            for (a, b) in two_step.iter().zip(&one_step) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn heuristic_blocks_cover_every_sign_case_once(
            lo in -10.0f64..10.0,
            width in 0.0f64..20.0,
            n_b in 1usize..7,
        ) {
            let hi = lo + width;
            let lim = block_limits_heuristic(&[lo], &[hi], n_b).unwrap();
            let total: f64 = (0..n_b).map(|b| lim.e_hi[[b, 0]]).sum();
            prop_assert!(lim.e_hi.iter().all(|&v| v >= 0.0));
            if hi >= 0.0 {
                // Sum of block lengths reconstructs the aggregate upper bound.
                prop_assert!((total - hi).abs() < 1e-9);
            } else {
                prop_assert!(total == 0.0);
            }
        }

        #[test]
        fn single_block_schemes_agree_for_zero_lower_bound(hi in 0.0f64..20.0) {
            let a = block_limits_heuristic(&[0.0], &[hi], 1).unwrap();
            let b = block_limits_uniform(&[hi], 1).unwrap();
            prop_assert!((a.e_hi[[0, 0]] - b.e_hi[[0, 0]]).abs() < 1e-12);
        }
    }
}
