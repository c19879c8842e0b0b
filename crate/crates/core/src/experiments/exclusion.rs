//! Exclusion harness: the second-class particle in a Bernoulli step.

use serde::Serialize;

use super::{check_violations, replicate, window_for, CdfSummary, EmpiricalCDF, ExperimentPlan, Side};
use crate::dynamics::{run_tasep, ClockSchedule};
use crate::error::{Error, Result};
use crate::hydro::uniform_cdf;
use crate::lattice::{ClassId, Count};
use crate::measures::{sample_mu_rho_lambda, StepMeasureSpec};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TasepFkReport {
    pub t: f64,
    #[serde(flatten)]
    pub summary: CdfSummary,
    pub support: (f64, f64),
    pub cdf_at_zero: f64,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// Law of `Y2(t)/t` started from Bernoulli(`rho`) on the left, Bernoulli(`lambda`)
/// on the right and a second-class particle at the origin, against the uniform
/// law on `[1 - 2 rho, 1 - 2 lambda]`.
pub fn exp_tasep_fk(plan: &ExperimentPlan) -> Result<TasepFkReport> {
    plan.validate()?;
    let rho = plan.finite_rho()?;
    let lambda = plan.lambda;
    let spec = StepMeasureSpec::exclusion(rho, lambda)?;
    if rho < lambda {
        return Err(Error::param("rho", "rho must be at least lambda"));
    }
    let t = plan.t;
    // the particle and both fronts move at speed <= 1, so twice the light cone
    let half = window_for(2.0 * t, Side::Right);
    let runs = replicate(plan.n, |r| {
        let clocks = ClockSchedule::new(plan.master_seed, r);
        let mut rng = clocks.initial_rng();
        let mut c = sample_mu_rho_lambda(&spec, -half, half, &mut rng)?;
        c.set_first_class(0, Count::Finite(0))?;
        let y = c.add_particle(0, ClassId::SECOND)?;
        run_tasep(&mut c, t, &clocks, &mut ())?;
        let pos = c
            .position(y)
            .ok_or_else(|| Error::Invariant("second-class particle left the window".into()))?;
        let left = clocks.influence_front_left(-half, t);
        let right = clocks.influence_front_right(half, t);
        Ok((pos as f64 / t, left >= pos || right <= pos))
    })?;
    let violations = runs.iter().filter(|r| r.1).count();
    check_violations(violations, runs.len())?;
    let samples: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (lo, hi) = (1.0 - 2.0 * rho, 1.0 - 2.0 * lambda);
    let cdf = EmpiricalCDF::new(samples.clone());
    Ok(TasepFkReport {
        t,
        summary: CdfSummary {
            n: samples.len(),
            sup_distance: cdf.sup_distance(|u| uniform_cdf(u, lo, hi)),
            dkw_radius: plan.dkw_radius(),
            dkw_sample_size_met: plan.dkw_sample_size_met(),
            violations,
        },
        support: (lo, hi),
        cdf_at_zero: cdf.eval(0.0),
        samples,
    })
}
