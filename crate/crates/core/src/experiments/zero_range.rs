//! Zero-range harnesses.

use serde::Serialize;

use super::{
    check_violations, measure_j2_zr, measure_x2, replicate, window_for, CdfSummary, EmpiricalCDF,
    Estimate, ExperimentPlan, Side, RIGHT_GUARD,
};
use crate::dynamics::{run_tasep, run_tazrp_unit, ClockSchedule, Observer};
use crate::error::{Error, Result};
use crate::hydro::{
    entropy_solution, law_j2_cdf, law_x_cdf, law_z_cdf, phi, phi_prime, theorem1_rhs,
    theorem4_mean_current, theorem4_mean_current_quadrature, Density, Flux,
};
use crate::lattice::{Configuration, Count, Tag};
use crate::measures::{
    build_crossing_config, build_perturbed_mu_star, build_reservoir_second_class,
    build_theorem1_config, sample_mu_rho_lambda, sample_ring, MeasureKind, StepMeasureSpec,
};

/// Tolerance of the weighted-sum comparison; the truncation tail must stay ten
/// times below it.
pub const THEOREM1_TOLERANCE: f64 = 0.06;

fn snapshot_grid(t: f64) -> Vec<f64> {
    (1..=10).map(|k| t * k as f64 / 10.0).collect()
}

fn right_guard(lambda: f64) -> usize {
    // with a positive right density the open end is exact outflow
    if lambda == 0.0 {
        RIGHT_GUARD
    } else {
        0
    }
}

/// Outcome of one replica started from the reservoir with a second-class
/// particle at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReservoirSample {
    pub x2: i64,
    pub j2: u64,
    pub violated: bool,
}

pub fn reservoir_samples(plan: &ExperimentPlan) -> Result<Vec<ReservoirSample>> {
    plan.validate()?;
    let t = plan.t;
    let xmax = window_for(t, Side::Right);
    let xmin = -window_for(t, Side::ReservoirLeft);
    replicate(plan.n, |r| {
        let (c, _) = build_reservoir_second_class(xmin, xmax)?;
        let mut c = c.with_guards(0, RIGHT_GUARD);
        run_tazrp_unit(&mut c, t, &ClockSchedule::new(plan.master_seed, r), &mut ())?;
        Ok(ReservoirSample {
            x2: measure_x2(&c)?,
            j2: measure_j2_zr(&c, None)?,
            violated: c.light_cone_violated(),
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem2Report {
    pub t: f64,
    #[serde(flatten)]
    pub summary: CdfSummary,
    pub median: f64,
    pub mass_below_zero: f64,
    pub deviation: Vec<(f64, f64)>,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

pub fn summarize_theorem2(plan: &ExperimentPlan, samples: &[ReservoirSample]) -> Result<Theorem2Report> {
    let violations = samples.iter().filter(|s| s.violated).count();
    check_violations(violations, samples.len())?;
    let values: Vec<f64> = samples.iter().map(|s| s.x2 as f64 / plan.t).collect();
    let cdf = EmpiricalCDF::new(values.clone());
    let grid: Vec<f64> = if plan.u_grid.is_empty() {
        (1..20).map(|k| k as f64 / 20.0).collect()
    } else {
        plan.u_grid.clone()
    };
    Ok(Theorem2Report {
        t: plan.t,
        summary: CdfSummary {
            n: values.len(),
            sup_distance: cdf.sup_distance(law_x_cdf),
            dkw_radius: plan.dkw_radius(),
            dkw_sample_size_met: plan.dkw_sample_size_met(),
            violations,
        },
        median: cdf.quantile(0.5),
        mass_below_zero: values.iter().filter(|&&v| v < 0.0).count() as f64 / values.len() as f64,
        deviation: cdf.deviation_profile(&grid, law_x_cdf),
        samples: values,
    })
}

/// Law of the rescaled second-class particle from the infinite-to-empty step.
pub fn exp_theorem2(plan: &ExperimentPlan) -> Result<Theorem2Report> {
    summarize_theorem2(plan, &reservoir_samples(plan)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Corollary3Report {
    pub t: f64,
    pub mean: Estimate,
    pub reference_mean: f64,
    #[serde(flatten)]
    pub summary: CdfSummary,
    pub cdf_at_quarter: f64,
    pub max_value: f64,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

pub fn summarize_corollary3(plan: &ExperimentPlan, samples: &[ReservoirSample]) -> Result<Corollary3Report> {
    let violations = samples.iter().filter(|s| s.violated).count();
    check_violations(violations, samples.len())?;
    let values: Vec<f64> = samples.iter().map(|s| s.j2 as f64 / plan.t).collect();
    let cdf = EmpiricalCDF::new(values.clone());
    Ok(Corollary3Report {
        t: plan.t,
        mean: Estimate::from_values(&values, violations),
        reference_mean: crate::hydro::LAW_J2_MEAN,
        summary: CdfSummary {
            n: values.len(),
            sup_distance: cdf.sup_distance(law_j2_cdf),
            dkw_radius: plan.dkw_radius(),
            dkw_sample_size_met: plan.dkw_sample_size_met(),
            violations,
        },
        cdf_at_quarter: cdf.eval(0.25),
        max_value: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        samples: values,
    })
}

/// Current seen by the second-class particle from the infinite-to-empty step.
pub fn exp_corollary3(plan: &ExperimentPlan) -> Result<Corollary3Report> {
    summarize_corollary3(plan, &reservoir_samples(plan)?)
}

/// Checks `X2 >= X3 >= ...` whenever a snapshot is taken.
struct LabelOrder<'a> {
    times: Vec<f64>,
    tags: &'a [Tag],
    ok: bool,
}

fn label_positions(c: &Configuration, tags: &[Tag]) -> Vec<i64> {
    tags.iter()
        .map(|&t| c.position(t).unwrap_or(i64::MAX))
        .collect()
}

fn ordered_labels(c: &Configuration, tags: &[Tag]) -> bool {
    label_positions(c, tags).windows(2).all(|w| w[0] >= w[1])
}

impl Observer for LabelOrder<'_> {
    fn snapshot_times(&self) -> &[f64] {
        &self.times
    }

    fn on_snapshot(&mut self, _time: f64, config: &Configuration) {
        self.ok &= ordered_labels(config, self.tags);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Theorem1Point {
    pub u: f64,
    pub weighted_sum: f64,
    pub reference: f64,
    pub tail_bound: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem1Report {
    pub t: f64,
    pub n: usize,
    pub jmax: usize,
    pub tail_bound: f64,
    pub points: Vec<Theorem1Point>,
    pub label_order_violations: usize,
    pub violations: usize,
}

/// Weights `rho^{j+1}/(1+rho)^j - lambda^{j+1}/(1+lambda)^j`, `j = 0..=jmax`.
pub fn theorem1_weights(rho: f64, lambda: f64, jmax: usize) -> Vec<f64> {
    let q = rho / (1.0 + rho);
    let r = lambda / (1.0 + lambda);
    (0..=jmax)
        .map(|j| rho * q.powi(j as i32) - lambda * r.powi(j as i32))
        .collect()
}

/// `sum_{j > jmax}` of the weights.
pub fn theorem1_tail(rho: f64, lambda: f64, jmax: usize) -> f64 {
    let q = rho / (1.0 + rho);
    let r = lambda / (1.0 + lambda);
    let e = jmax as i32 + 1;
    rho * (1.0 + rho) * q.powi(e) - lambda * (1.0 + lambda) * r.powi(e)
}

/// Final positions of the stacked second-class particles, top label last.
pub(crate) fn theorem1_replica(
    plan: &ExperimentPlan,
    k: usize,
    replica: u64,
) -> Result<(Vec<i64>, bool, bool)> {
    let rho = plan.finite_rho()?;
    let t = plan.t;
    let xmin = -window_for(t, Side::Left);
    let xmax = window_for(t, Side::Right);
    let clocks = ClockSchedule::new(plan.master_seed, replica);
    let mut rng = clocks.initial_rng();
    let (c, tags) = build_theorem1_config(rho, plan.lambda, k, xmin, xmax, &mut rng)?;
    let mut c = c.with_guards(0, right_guard(plan.lambda));
    let mut obs = LabelOrder {
        times: snapshot_grid(t),
        tags: &tags,
        ok: true,
    };
    run_tazrp_unit(&mut c, t, &clocks, &mut obs)?;
    let positions = label_positions(&c, &tags);
    let ordered = obs.ok && ordered_labels(&c, &tags);
    let front = clocks.influence_front_left(xmin, t);
    let lowest = positions.iter().copied().min().unwrap_or(i64::MAX);
    let violated = c.light_cone_violated() || front >= lowest;
    Ok((positions, ordered, violated))
}

/// Weighted moving-bond sums over stacked second-class particles.
pub fn exp_theorem1(plan: &ExperimentPlan) -> Result<Theorem1Report> {
    plan.validate()?;
    let rho = plan.finite_rho()?;
    if !(rho > plan.lambda) {
        return Err(Error::param("rho", "rho must exceed lambda"));
    }
    let tail = theorem1_tail(rho, plan.lambda, plan.jmax);
    if tail > THEOREM1_TOLERANCE / 10.0 {
        return Err(Error::param(
            "Jmax",
            format!("truncation tail {tail:e} too large; increase Jmax"),
        ));
    }
    let weights = theorem1_weights(rho, plan.lambda, plan.jmax);
    let k = plan.jmax + 1;
    let runs = replicate(plan.n, |r| theorem1_replica(plan, k, r))?;
    let violations = runs.iter().filter(|r| r.2).count();
    check_violations(violations, runs.len())?;
    let label_order_violations = runs.iter().filter(|r| !r.1).count();
    let mut points = Vec::with_capacity(plan.u_grid.len());
    for &u in &plan.u_grid {
        let level = u * plan.t;
        let sums: Vec<f64> = runs
            .iter()
            .map(|(pos, _, _)| {
                pos.iter()
                    .zip(&weights)
                    .filter(|(&x, _)| x as f64 >= level)
                    .map(|(_, w)| w)
                    .sum()
            })
            .collect();
        let est = Estimate::from_values(&sums, violations);
        points.push(Theorem1Point {
            u,
            weighted_sum: est.point,
            reference: theorem1_rhs(u, rho, plan.lambda)?,
            tail_bound: tail,
            stderr: est.stderr,
        });
    }
    Ok(Theorem1Report {
        t: plan.t,
        n: plan.n,
        jmax: plan.jmax,
        tail_bound: tail,
        points,
        label_order_violations,
        violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem4Report {
    pub t: f64,
    #[serde(flatten)]
    pub summary: CdfSummary,
    pub support: (f64, f64),
    pub mass_outside_support: f64,
    pub mean_current: Estimate,
    pub reference_current: f64,
    pub quadrature_current: f64,
    pub x1_speed: Estimate,
    pub reference_speed: f64,
    pub mean_x1_gap: f64,
    #[serde(skip)]
    pub samples: Vec<(f64, f64, f64)>,
}

/// Second-class particle, its current and a tagged first-class particle in the
/// perturbed finite step.
pub fn exp_theorem4(plan: &ExperimentPlan) -> Result<Theorem4Report> {
    plan.validate()?;
    let rho = plan.finite_rho()?;
    let lambda = plan.lambda;
    let t = plan.t;
    let xmin = -window_for(t, Side::Left);
    let xmax = window_for(t, Side::Right);
    let runs = replicate(plan.n, |r| {
        let clocks = ClockSchedule::new(plan.master_seed, r);
        let mut rng = clocks.initial_rng();
        let (c, tags) = build_perturbed_mu_star(rho, lambda, xmin, xmax, &mut rng)?;
        let mut c = c.with_guards(0, right_guard(lambda));
        run_tazrp_unit(&mut c, t, &clocks, &mut ())?;
        let x2 = measure_x2(&c)?;
        let x1 = c.position(tags.x1).unwrap_or(i64::MAX);
        let j2 = measure_j2_zr(&c, Some(x1))?;
        let front = clocks.influence_front_left(xmin, t);
        let violated = c.light_cone_violated() || front >= x2.min(x1);
        Ok((x2 as f64 / t, j2 as f64 / t, x1 as f64 / t, tags.x1_gap, violated))
    })?;
    let violations = runs.iter().filter(|r| r.4).count();
    check_violations(violations, runs.len())?;
    let x2: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let j2: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let x1: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let lo = phi_prime(Density::Finite(rho));
    let hi = phi_prime(Density::Finite(lambda));
    let cdf = EmpiricalCDF::new(x2.clone());
    let sup = cdf.sup_distance(|u| law_z_cdf(u, rho, lambda).expect("validated densities"));
    Ok(Theorem4Report {
        t,
        summary: CdfSummary {
            n: plan.n,
            sup_distance: sup,
            dkw_radius: plan.dkw_radius(),
            dkw_sample_size_met: plan.dkw_sample_size_met(),
            violations,
        },
        support: (lo, hi),
        mass_outside_support: x2.iter().filter(|&&v| v < lo || v > hi).count() as f64 / x2.len() as f64,
        mean_current: Estimate::from_values(&j2, violations),
        reference_current: theorem4_mean_current(rho, lambda)?,
        quadrature_current: theorem4_mean_current_quadrature(rho, lambda)?,
        x1_speed: Estimate::from_values(&x1, violations),
        reference_speed: 1.0 / (1.0 + lambda),
        mean_x1_gap: runs.iter().map(|r| r.3 as f64).sum::<f64>() / runs.len() as f64,
        samples: runs.iter().map(|r| (r.0, r.1, r.2)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossingReport {
    pub t: f64,
    /// `X2(t) > X3(t)`.
    pub crossing: Estimate,
    /// `X2(t) == X3(t)`, whichever particle arrived last.
    pub tie_fraction: f64,
    /// The second-class particle has left a site it shared with the third-class
    /// one at some time up to `t`. The order cannot revert afterwards, so this
    /// differs from `crossing` only by ties formed after the overtaking.
    pub overtaken: Estimate,
    pub violations: usize,
    #[serde(skip)]
    pub samples: Vec<(i64, i64, bool)>,
}

/// Follows the two tagged particles through the jump stream.
struct Overtake {
    x2: Tag,
    x3: Tag,
    p2: i64,
    p3: i64,
    overtaken: bool,
}

impl Observer for Overtake {
    fn on_jump(&mut self, event: &crate::dynamics::JumpEvent) {
        if event.tag == Some(self.x2) {
            self.p2 = event.site + 1;
            self.overtaken |= self.p2 > self.p3;
        } else if event.tag == Some(self.x3) {
            self.p3 = event.site + 1;
        }
    }
}

/// Probability that the second-class particle ends strictly right of the
/// third-class particle started one site ahead of it, with ties and the
/// overtaking event reported separately.
pub fn exp_crossing(plan: &ExperimentPlan) -> Result<CrossingReport> {
    plan.validate()?;
    let t = plan.t;
    let xmin = -window_for(t, Side::ReservoirLeft);
    let xmax = window_for(t, Side::Right);
    let runs = replicate(plan.n, |r| {
        let (c, x2, x3) = build_crossing_config(xmin, xmax)?;
        let mut c = c.with_guards(0, RIGHT_GUARD);
        let mut obs = Overtake {
            x2,
            x3,
            p2: 0,
            p3: 1,
            overtaken: false,
        };
        run_tazrp_unit(&mut c, t, &ClockSchedule::new(plan.master_seed, r), &mut obs)?;
        let p2 = c.position(x2).unwrap_or(i64::MAX);
        let p3 = c.position(x3).unwrap_or(i64::MAX);
        Ok((p2, p3, obs.overtaken, c.light_cone_violated()))
    })?;
    let violations = runs.iter().filter(|r| r.3).count();
    check_violations(violations, runs.len())?;
    let crossed: Vec<f64> = runs.iter().map(|r| (r.0 > r.1) as u8 as f64).collect();
    let overtaken: Vec<f64> = runs.iter().map(|r| r.2 as u8 as f64).collect();
    let ties = runs.iter().filter(|r| r.0 == r.1).count();
    Ok(CrossingReport {
        t,
        crossing: Estimate::from_values(&crossed, violations),
        tie_fraction: ties as f64 / runs.len() as f64,
        overtaken: Estimate::from_values(&overtaken, violations),
        violations,
        samples: runs.iter().map(|r| (r.0, r.1, r.2)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalEqPoint {
    pub u: f64,
    pub site: i64,
    pub occupied: Estimate,
    pub occupied_reference: f64,
    pub density: Estimate,
    /// `None` where the limiting density is infinite.
    pub density_reference: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalEqReport {
    pub t: f64,
    pub points: Vec<LocalEqPoint>,
    pub violations: usize,
}

/// Occupation and density profiles at `floor(u t)` against the entropy solution.
pub fn exp_local_equilibrium(plan: &ExperimentPlan) -> Result<LocalEqReport> {
    plan.validate()?;
    let t = plan.t;
    let spec = StepMeasureSpec::zero_range(plan.rho, plan.lambda)?;
    if !plan.rho.gt(Density::Finite(plan.lambda)) {
        return Err(Error::param("rho", "rho must exceed lambda"));
    }
    let xmin = if plan.rho.is_infinite() {
        -window_for(t, Side::ReservoirLeft)
    } else {
        -window_for(t, Side::Left)
    };
    let xmax = window_for(t, Side::Right);
    let sites: Vec<i64> = plan.u_grid.iter().map(|u| (u * t).floor() as i64).collect();
    if let Some(&s) = sites.iter().find(|&&s| s < xmin || s > xmax) {
        return Err(Error::param("uGrid", format!("site {s} outside the simulated window")));
    }
    let runs = replicate(plan.n, |r| {
        let clocks = ClockSchedule::new(plan.master_seed, r);
        let mut rng = clocks.initial_rng();
        let c = sample_mu_rho_lambda(&spec, xmin, xmax, &mut rng)?;
        let mut c = c.with_guards(0, right_guard(plan.lambda));
        run_tazrp_unit(&mut c, t, &clocks, &mut ())?;
        let counts: Vec<Option<u32>> = sites
            .iter()
            .map(|&x| c.site(x).map(|s| s.first_class().finite()))
            .collect::<Result<_>>()?;
        let mut violated = c.light_cone_violated();
        if !plan.rho.is_infinite() {
            let front = clocks.influence_front_left(xmin, t);
            violated |= sites.iter().any(|&s| front >= s);
        }
        Ok((counts, violated))
    })?;
    let violations = runs.iter().filter(|r| r.1).count();
    check_violations(violations, runs.len())?;
    let mut points = Vec::new();
    for (i, &u) in plan.u_grid.iter().enumerate() {
        let rho_u = entropy_solution(1.0, u, plan.rho, plan.lambda, Flux::ZeroRange)?;
        let occ: Vec<f64> = runs
            .iter()
            .map(|(c, _)| match c[i] {
                Some(n) => (n >= 1) as u8 as f64,
                None => 1.0,
            })
            .collect();
        let dens: Vec<f64> = runs
            .iter()
            .map(|(c, _)| c[i].map_or(f64::INFINITY, |n| n as f64))
            .collect();
        points.push(LocalEqPoint {
            u,
            site: sites[i],
            occupied: Estimate::from_values(&occ, violations),
            occupied_reference: phi(rho_u),
            density: Estimate::from_values(&dens, violations),
            density_reference: rho_u.finite(),
        });
    }
    Ok(LocalEqReport {
        t,
        points,
        violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationarityReport {
    pub ring_size: i64,
    pub t: f64,
    pub mean: Estimate,
    pub mean_reference: f64,
    pub occupied: Estimate,
    pub occupied_reference: f64,
}

impl StationarityReport {
    /// Both moments within `k` standard errors (exact equality when the error is zero).
    pub fn within(&self, k: f64) -> bool {
        let ok = |e: &Estimate, r: f64| {
            let d = (e.point - r).abs();
            d <= k * e.stderr || d == 0.0
        };
        ok(&self.mean, self.mean_reference) && ok(&self.occupied, self.occupied_reference)
    }
}

struct RingMoments {
    times: Vec<f64>,
    sum: f64,
    occupied: f64,
    samples: f64,
}

impl Observer for RingMoments {
    fn snapshot_times(&self) -> &[f64] {
        &self.times
    }

    fn on_snapshot(&mut self, _time: f64, config: &Configuration) {
        for (_, s) in config.sites() {
            if let Count::Finite(n) = s.total() {
                self.sum += n as f64;
                self.occupied += (n >= 1) as u8 as f64;
            }
            self.samples += 1.0;
        }
    }
}

/// Time- and site-averaged moments on a ring started from its invariant product measure.
pub fn exp_stationarity_ring(plan: &ExperimentPlan, kind: MeasureKind) -> Result<StationarityReport> {
    plan.validate()?;
    let rho = plan.finite_rho()?;
    if plan.ring_size < 2 {
        return Err(Error::param("ringSize", "need at least two sites"));
    }
    let runs = replicate(plan.n, |r| {
        let clocks = ClockSchedule::new(plan.master_seed, r);
        let mut rng = clocks.initial_rng();
        let mut c = sample_ring(rho, kind, plan.ring_size, &mut rng)?;
        let mut obs = RingMoments {
            times: snapshot_grid(plan.t),
            sum: 0.0,
            occupied: 0.0,
            samples: 0.0,
        };
        match kind {
            MeasureKind::ZeroRangeGeometric => run_tazrp_unit(&mut c, plan.t, &clocks, &mut obs)?,
            MeasureKind::ExclusionBernoulli => run_tasep(&mut c, plan.t, &clocks, &mut obs)?,
        };
        Ok((obs.sum / obs.samples, obs.occupied / obs.samples))
    })?;
    let means: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let occ: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let (mean_ref, occ_ref) = match kind {
        MeasureKind::ZeroRangeGeometric => (rho, phi(Density::Finite(rho))),
        MeasureKind::ExclusionBernoulli => (rho, rho),
    };
    Ok(StationarityReport {
        ring_size: plan.ring_size,
        t: plan.t,
        mean: Estimate::from_values(&means, 0),
        mean_reference: mean_ref,
        occupied: Estimate::from_values(&occ, 0),
        occupied_reference: occ_ref,
    })
}
