//! Pathwise structural checks: attractiveness, discrepancy conservation,
//! class censoring and the label order of stacked second-class particles.
//! Each check counts violations; a correct engine reports zero.

use rand::Rng;
use serde::Serialize;

use super::zero_range::theorem1_replica;
use super::{replicate, ExperimentPlan};
use crate::coupling::{run_coupled, CoupledPair};
use crate::dynamics::{run_tazrp_unit, ClockSchedule, Snapshots};
use crate::error::Result;
use crate::hydro::Density;
use crate::lattice::{ClassId, Configuration, Count, Tag};
use crate::measures::{build_theorem1_config, sample_ring, MeasureKind};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    pub name: &'static str,
    pub trials: usize,
    pub violations: usize,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn times(t: f64) -> Vec<f64> {
    (1..=10).map(|k| t * k as f64 / 10.0).collect()
}

/// Geometric draw by inversion of a given uniform in `(0, 1]`; the same uniform
/// gives counts that are monotone in the density.
fn geometric_inverse(rho: Density, u: f64) -> Count {
    match rho {
        Density::Infinite => Count::Infinite,
        Density::Finite(r) if r == 0.0 => Count::Finite(0),
        Density::Finite(r) => Count::Finite((u.ln() / (r / (1.0 + r)).ln()).floor() as u32),
    }
}

/// Step states `(A, B)` with `B <= A` site-wise, drawn from shared uniforms.
pub fn monotone_step_pair<R: Rng + ?Sized>(
    upper: (Density, f64),
    lower: (Density, f64),
    xmin: i64,
    xmax: i64,
    rng: &mut R,
) -> Result<(Configuration, Configuration)> {
    let mut a = Configuration::new(xmin, xmax, 0)?;
    let mut b = Configuration::new(xmin, xmax, 0)?;
    for x in xmin..=xmax {
        let u = 1.0 - rng.random::<f64>();
        let (da, db) = if x <= 0 {
            (upper.0, lower.0)
        } else {
            (Density::Finite(upper.1), Density::Finite(lower.1))
        };
        a.set_first_class(x, geometric_inverse(da, u))?;
        b.set_first_class(x, geometric_inverse(db, u))?;
    }
    Ok((a, b))
}

/// Ordered pairs `((rho, lambda) upper, (rho, lambda) lower)` used by the
/// attractiveness check.
pub const ORDERED_PAIRS: [((Density, f64), (Density, f64)); 5] = [
    ((Density::Finite(1.0), 0.5), (Density::Finite(0.5), 0.0)),
    ((Density::Finite(2.0), 1.0), (Density::Finite(1.0), 1.0)),
    ((Density::Infinite, 0.0), (Density::Finite(1.0), 0.0)),
    ((Density::Finite(0.3), 0.3), (Density::Finite(0.1), 0.0)),
    ((Density::Finite(4.0), 0.2), (Density::Finite(0.5), 0.1)),
];

/// Order between coupled copies is kept at ten times up to `t`.
pub fn attractiveness(master_seed: u64, seeds: usize, t: f64) -> Result<PropertyReport> {
    let grid = times(t);
    let per_seed = replicate(seeds, |r| {
        let clocks = ClockSchedule::new(master_seed, r);
        let mut rng = clocks.initial_rng();
        let mut bad = 0;
        for &(upper, lower) in &ORDERED_PAIRS {
            let (a, b) = monotone_step_pair(upper, lower, -30, 60, &mut rng)?;
            if !b.leq(&a)? {
                bad += 1;
                continue;
            }
            let run = run_coupled(&CoupledPair::new(a, b, clocks)?, t, &grid)?;
            bad += run.ordered.iter().any(|o| !o) as usize;
        }
        Ok(bad)
    })?;
    Ok(PropertyReport {
        name: "attractiveness",
        trials: seeds * ORDERED_PAIRS.len(),
        violations: per_seed.iter().sum(),
    })
}

/// One extra particle on a ring stays exactly one discrepancy.
pub fn single_discrepancy(master_seed: u64, seeds: usize, t: f64) -> Result<PropertyReport> {
    let grid = times(t);
    let per_seed = replicate(seeds, |r| {
        let clocks = ClockSchedule::new(master_seed, r);
        let mut rng = clocks.initial_rng();
        let b = sample_ring(1.0, MeasureKind::ZeroRangeGeometric, 64, &mut rng)?;
        let mut a = b.clone();
        let x = rng.random_range(0..64);
        let n = a.site(x)?.first_class().finite().unwrap_or(0);
        a.set_first_class(x, Count::Finite(n + 1))?;
        let run = run_coupled(&CoupledPair::new(a, b, clocks)?, t, &grid)?;
        let ok = run.trace.len() == grid.len()
            && run
                .trace
                .iter()
                .all(|(_, d)| d.cardinality() == 1 && d.entries[0].1 == 1);
        Ok(!ok as usize)
    })?;
    Ok(PropertyReport {
        name: "single_discrepancy",
        trials: seeds,
        violations: per_seed.iter().sum(),
    })
}

fn tagged_positions(c: &Configuration, tags: &[Tag]) -> Vec<Option<i64>> {
    tags.iter().map(|&t| c.position(t)).collect()
}

/// Deleting every particle above class `m` before the run gives the same
/// trajectory as deleting it afterwards.
pub fn class_censoring(master_seed: u64, seeds: usize, t: f64) -> Result<PropertyReport> {
    let grid = times(t);
    let per_seed = replicate(seeds, |r| {
        let clocks = ClockSchedule::new(master_seed, r);
        let mut rng = clocks.initial_rng();
        let mut c = Configuration::new(-5, 60, 0)?;
        c.set_first_class(-5, Count::Infinite)?;
        for x in -4..=20 {
            for _ in 0..rng.random_range(0..3) {
                let class = ClassId::new(rng.random_range(1..=3))?;
                c.add_particle(x, class)?;
            }
        }
        let mut full = c.clone();
        let mut snaps = Snapshots::at(grid.clone());
        run_tazrp_unit(&mut full, t, &clocks, &mut snaps)?;
        let mut bad = 0;
        for m in 1..=2 {
            let class = ClassId::new(m)?;
            let kept: Vec<Tag> = c
                .tags()
                .filter(|(_, rec)| rec.class <= class)
                .map(|(t, _)| t)
                .collect();
            let mut censored = c.censor_above(class);
            let mut csnaps = Snapshots::at(grid.clone());
            run_tazrp_unit(&mut censored, t, &clocks, &mut csnaps)?;
            let same = snaps.states.len() == csnaps.states.len()
                && snaps.states.iter().zip(&csnaps.states).all(|(s, cs)| {
                    let projected = s.censor_above(class);
                    projected.totals() == cs.totals()
                        && projected.exited_first_class() == cs.exited_first_class()
                        && tagged_positions(&projected, &kept) == tagged_positions(cs, &kept)
                });
            bad += !same as usize;
        }
        Ok(bad)
    })?;
    Ok(PropertyReport {
        name: "class_censoring",
        trials: seeds * 2,
        violations: per_seed.iter().sum(),
    })
}

/// The first `k` stacked second-class particles move identically whether or
/// not `k_more` further ones sit above them.
pub fn label_truncation(master_seed: u64, seeds: usize, t: f64, k: usize, k_more: usize) -> Result<PropertyReport> {
    let per_seed = replicate(seeds, |r| {
        let clocks = ClockSchedule::new(master_seed, r);
        let (mut small, ts) = build_theorem1_config(1.0, 0.0, k, -80, 120, &mut clocks.initial_rng())?;
        let (mut large, tl) = build_theorem1_config(1.0, 0.0, k + k_more, -80, 120, &mut clocks.initial_rng())?;
        run_tazrp_unit(&mut small, t, &clocks, &mut ())?;
        run_tazrp_unit(&mut large, t, &clocks, &mut ())?;
        let same = tagged_positions(&small, &ts) == tagged_positions(&large, &tl[..k]);
        Ok(!same as usize)
    })?;
    Ok(PropertyReport {
        name: "label_truncation",
        trials: seeds,
        violations: per_seed.iter().sum(),
    })
}

/// `X2 >= X3 >= ...` at ten times in every replica of the stacked start.
pub fn label_order(plan: &ExperimentPlan) -> Result<PropertyReport> {
    plan.validate()?;
    let k = plan.jmax + 1;
    let runs = replicate(plan.n, |r| theorem1_replica(plan, k, r))?;
    Ok(PropertyReport {
        name: "label_order",
        trials: runs.len(),
        violations: runs.iter().filter(|r| !r.1).count(),
    })
}
