//! Monte Carlo harnesses comparing replicated simulations with the closed-form
//! limits in [`crate::hydro`].
//!
//! Every harness is a pure function of its [`ExperimentPlan`]: replica `r` draws
//! its initial state and clocks from keys derived from `(master_seed, r)`, and
//! replica results are merged in index order.

mod exclusion;
mod mapping;
pub mod properties;
mod stats;
mod zero_range;

use rayon::prelude::*;
use serde::Serialize;

pub use exclusion::{exp_tasep_fk, TasepFkReport};
pub use mapping::{encode_gaps, exp_mapping, zero_range_from_positions, MappingReport, MappingSeed};
pub use stats::{dkw_radius, dkw_sample_size, mean_stderr, EmpiricalCDF, Estimate};
pub use zero_range::{
    exp_corollary3, exp_crossing, exp_local_equilibrium, exp_stationarity_ring, exp_theorem1,
    exp_theorem2, exp_theorem4, reservoir_samples, summarize_corollary3, summarize_theorem2,
    Corollary3Report, CrossingReport, LocalEqPoint, LocalEqReport, ReservoirSample,
    StationarityReport, Theorem1Point, Theorem1Report, Theorem2Report, Theorem4Report,
};

use crate::error::{Error, Result};
use crate::hydro::Density;
use crate::lattice::{ClassId, Configuration, Count};

/// Full parameter record of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub t: f64,
    pub n: usize,
    pub master_seed: u64,
    pub rho: Density,
    pub lambda: f64,
    pub u_grid: Vec<f64>,
    pub jmax: usize,
    pub ring_size: i64,
    pub m: usize,
    pub epsilon: f64,
    pub delta: f64,
}

impl ExperimentPlan {
    pub fn new(t: f64, n: usize, master_seed: u64) -> Self {
        ExperimentPlan {
            t,
            n,
            master_seed,
            rho: Density::Infinite,
            lambda: 0.0,
            u_grid: Vec::new(),
            jmax: 25,
            ring_size: 64,
            m: 50,
            epsilon: 0.02,
            delta: 1e-3,
        }
    }

    pub fn with_densities(mut self, rho: Density, lambda: f64) -> Self {
        self.rho = rho;
        self.lambda = lambda;
        self
    }

    pub fn with_u_grid(mut self, grid: Vec<f64>) -> Self {
        self.u_grid = grid;
        self
    }

    pub fn with_jmax(mut self, jmax: usize) -> Self {
        self.jmax = jmax;
        self
    }

    /// Whether `n` meets the DKW size for the declared `(epsilon, delta)`.
    pub fn dkw_sample_size_met(&self) -> bool {
        self.n >= dkw_sample_size(self.epsilon, self.delta)
    }

    /// Sup-distance radius actually achieved by `n` replicas at level `delta`.
    pub fn dkw_radius(&self) -> f64 {
        dkw_radius(self.n, self.delta)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::param("t", "must be positive"));
        }
        if self.n == 0 {
            return Err(Error::param("N", "need at least one replica"));
        }
        Ok(())
    }

    fn finite_rho(&self) -> Result<f64> {
        self.rho
            .finite()
            .ok_or_else(|| Error::param("rho", "must be finite for this experiment"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    /// Left side of an infinite-density step: one reservoir site is exact.
    ReservoirLeft,
}

/// Sites needed on one side of the origin for a run of length `t`.
pub fn window_for(t: f64, side: Side) -> i64 {
    match side {
        Side::ReservoirLeft => 1,
        Side::Left | Side::Right => (t + 6.0 * t.max(0.0).sqrt()).ceil() as i64 + 40,
    }
}

/// Width of the flagged right guard on an empty right half-line.
pub const RIGHT_GUARD: usize = 20;

/// Fraction of light-cone violations above which an experiment aborts.
pub const MAX_VIOLATION_RATE: f64 = 1e-3;

/// Runs `n` replicas in parallel and returns them in index order.
pub(crate) fn replicate<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n as u64).into_par_iter().map(f).collect()
}

pub(crate) fn check_violations(violations: usize, replicas: usize) -> Result<()> {
    if replicas > 0 && violations as f64 / replicas as f64 >= MAX_VIOLATION_RATE {
        return Err(Error::LightConeAbort {
            violations,
            replicas,
        });
    }
    Ok(())
}

/// Position of the unique second-class particle.
pub fn measure_x2(config: &Configuration) -> Result<i64> {
    let tags = config.tags_of_class(ClassId::SECOND);
    if tags.len() != 1 {
        return Err(Error::Invariant(format!(
            "expected one second-class particle, found {}",
            tags.len()
        )));
    }
    config
        .position(tags[0])
        .ok_or(Error::Invariant("second-class particle left the window".into()))
}

/// First-class particles at sites `>= X2`, plus those that left through the
/// right end. With `cap`, only sites in `[X2, cap]` are counted.
pub fn measure_j2_zr(config: &Configuration, cap: Option<i64>) -> Result<u64> {
    let x2 = measure_x2(config)?;
    let (_, xmax) = config.window();
    let hi = cap.unwrap_or(xmax).min(xmax);
    let mut total = 0u64;
    for x in x2..=hi {
        match config.site(x)?.first_class() {
            Count::Finite(n) => total += n as u64,
            Count::Infinite => return Err(Error::Invariant(format!("reservoir at {x} right of X2"))),
        }
    }
    if cap.is_none() {
        total += config.exited_first_class();
    }
    Ok(total)
}

/// Summary fields common to distribution-valued experiments.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CdfSummary {
    pub n: usize,
    pub sup_distance: f64,
    pub dkw_radius: f64,
    pub dkw_sample_size_met: bool,
    pub violations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows() {
        assert_eq!(window_for(400.0, Side::Left), 560);
        assert_eq!(window_for(400.0, Side::Right), 560);
        assert_eq!(window_for(400.0, Side::ReservoirLeft), 1);
        assert_eq!(window_for(0.0, Side::Right), 40);
    }

    #[test]
    fn current_counting() {
        let mut c = Configuration::new(0, 12, 0).unwrap();
        c.set_first_class(6, Count::Finite(4)).unwrap();
        c.set_first_class(7, Count::Finite(2)).unwrap();
        c.set_first_class(9, Count::Finite(1)).unwrap();
        c.add_particle(7, ClassId::SECOND).unwrap();
        assert_eq!(measure_x2(&c).unwrap(), 7);
        assert_eq!(measure_j2_zr(&c, None).unwrap(), 3);
        assert_eq!(measure_j2_zr(&c, Some(8)).unwrap(), 2);
        // co-located plus strictly-right split
        let strictly_right: u64 = (8..=12)
            .map(|x| c.site(x).unwrap().first_class().finite().unwrap() as u64)
            .sum();
        assert_eq!(strictly_right + 2, 3);
        c.add_particle(3, ClassId::SECOND).unwrap();
        assert!(measure_x2(&c).is_err());
    }

    #[test]
    fn initial_current_vanishes() {
        let (c, _) = crate::measures::build_reservoir_second_class(-1, 50).unwrap();
        assert_eq!(measure_x2(&c).unwrap(), 0);
        assert_eq!(measure_j2_zr(&c, None).unwrap(), 0);
    }

    #[test]
    fn abort_threshold() {
        assert!(check_violations(0, 10).is_ok());
        assert!(check_violations(3, 4000).is_ok());
        assert!(check_violations(4, 4000).is_err());
    }

    #[test]
    fn plan_dkw_flag() {
        let p = ExperimentPlan::new(400.0, 2000, 42);
        assert!(!p.dkw_sample_size_met());
        assert!(p.dkw_radius() > 0.02);
        let p = ExperimentPlan::new(400.0, 9502, 42);
        assert!(p.dkw_sample_size_met());
    }
}
