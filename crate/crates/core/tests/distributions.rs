//! Goodness-of-fit checks of the samplers and engines against exact laws.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use rarefan::dynamics::{run_tazrp_general_g, run_tazrp_unit, ClockSchedule, RateFunction};
use rarefan::lattice::{Configuration, Count};
use rarefan::measures::{build_reservoir_second_class, sample_bernoulli, sample_geometric};

const N: usize = 20_000;
// a correct sampler fails one of these with probability about 1e-4
const P_FLOOR: f64 = 1e-4;

/// Pearson statistic over bins `0..k` plus a tail bin, cells merged until the
/// expected count reaches 5. Returns the upper-tail p-value.
fn chi_square_p(counts: &[u64], pmf: impl Fn(u64) -> f64) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp, mut mass) = (0.0, 0.0, 0.0);
    for (k, &c) in counts.iter().enumerate() {
        let p = pmf(k as u64);
        obs += c as f64;
        exp += p * n as f64;
        mass += p;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    // everything beyond the last bin goes into the tail
    exp += (1.0 - mass).max(0.0) * n as f64;
    if let Some(last) = cells.last_mut() {
        last.0 += obs;
        last.1 += exp;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

fn histogram(values: impl Iterator<Item = u64>, bins: usize) -> Vec<u64> {
    let mut h = vec![0u64; bins];
    for v in values {
        h[(v as usize).min(bins - 1)] += 1;
    }
    h
}

#[test]
fn geometric_sampler_matches_its_law() {
    let mut rng = ClockSchedule::new(11, 0).initial_rng();
    for rho in [0.25, 1.0, 3.0] {
        let h = histogram((0..N).map(|_| sample_geometric(rho, &mut rng).unwrap() as u64), 80);
        let q = rho / (1.0 + rho);
        let p = chi_square_p(&h, |k| (1.0 - q) * q.powi(k as i32));
        assert!(p > P_FLOOR, "rho={rho}: p={p}");
    }
}

#[test]
fn bernoulli_sampler_matches_its_law() {
    let mut rng = ClockSchedule::new(12, 0).initial_rng();
    let alpha = 0.3;
    let h = histogram((0..N).map(|_| sample_bernoulli(alpha, &mut rng).unwrap() as u64), 2);
    let p = chi_square_p(&h, |k| if k == 0 { 1.0 - alpha } else { alpha });
    assert!(p > P_FLOOR, "p={p}");
}

fn lone_walker_site(c: &Configuration) -> u64 {
    c.sites()
        .find(|(_, s)| !s.first_class().is_zero())
        .map(|(x, _)| x as u64)
        .expect("walker inside the window")
}

#[test]
fn lone_walker_displacement_is_poisson_in_both_engines() {
    let t = 3.0;
    let law = Poisson::new(t).unwrap();
    let start = || {
        let mut c = Configuration::new(0, 60, 0).unwrap();
        c.set_first_class(0, Count::Finite(1)).unwrap();
        c
    };
    let unit = histogram(
        (0..N as u64).map(|r| {
            let mut c = start();
            run_tazrp_unit(&mut c, t, &ClockSchedule::new(21, r), &mut ()).unwrap();
            lone_walker_site(&c)
        }),
        40,
    );
    let g = RateFunction::indicator();
    let mut rng = ClockSchedule::new(22, 0).gillespie_rng();
    let gillespie = histogram(
        (0..N).map(|_| {
            let mut c = start();
            run_tazrp_general_g(&mut c, t, &g, &mut rng, &mut ()).unwrap();
            lone_walker_site(&c)
        }),
        40,
    );
    for (name, h) in [("unit", unit), ("general", gillespie)] {
        let p = chi_square_p(&h, |k| law.pmf(k));
        assert!(p > P_FLOOR, "{name}: p={p}");
    }
}

#[test]
fn linear_rate_gives_independent_walkers() {
    // five walkers stacked at the origin; total displacement is Poisson(5 t)
    let (t, k) = (2.0, 5u32);
    let law = Poisson::new(k as f64 * t).unwrap();
    let g = RateFunction::linear();
    let mut rng = ClockSchedule::new(23, 0).gillespie_rng();
    let h = histogram(
        (0..N).map(|_| {
            let mut c = Configuration::new(0, 60, 0).unwrap();
            c.set_first_class(0, Count::Finite(k)).unwrap();
            run_tazrp_general_g(&mut c, t, &g, &mut rng, &mut ()).unwrap();
            c.sites()
                .map(|(x, s)| x as u64 * s.first_class().finite().unwrap() as u64)
                .sum::<u64>()
        }),
        60,
    );
    let p = chi_square_p(&h, |n| law.pmf(n));
    assert!(p > P_FLOOR, "p={p}");
}

#[test]
fn unit_rate_stack_empties_at_rate_one() {
    // with g = 1 a stack of k releases one particle per unit-rate ring
    let (t, k) = (2.0, 50u32);
    let law = Poisson::new(t).unwrap();
    let h = histogram(
        (0..N as u64).map(|r| {
            let mut c = Configuration::new(0, 100, 0).unwrap();
            c.set_first_class(0, Count::Finite(k)).unwrap();
            run_tazrp_unit(&mut c, t, &ClockSchedule::new(24, r), &mut ()).unwrap();
            (k - c.site(0).unwrap().first_class().finite().unwrap()) as u64
        }),
        30,
    );
    let p = chi_square_p(&h, |n| law.pmf(n));
    assert!(p > P_FLOOR, "p={p}");
}

/// `(X2, first-class particles to the right of X2)` after time `t`.
fn reservoir_observables(xmin: i64, t: f64, replica: u64) -> (i64, u64) {
    let (mut c, tag) = build_reservoir_second_class(xmin, 80).unwrap();
    run_tazrp_unit(&mut c, t, &ClockSchedule::new(31, replica), &mut ()).unwrap();
    let x2 = c.position(tag).expect("second-class particle inside");
    let right: u64 = c
        .sites()
        .filter(|&(x, _)| x > x2)
        .map(|(_, s)| s.first_class().finite().unwrap() as u64)
        .sum();
    (x2, right + c.exited_first_class())
}

#[test]
fn reservoir_depth_does_not_change_the_path() {
    // only the reservoir next to the bulk ever feeds it
    for r in 0..100 {
        assert_eq!(reservoir_observables(-1, 15.0, r), reservoir_observables(-50, 15.0, r));
    }
}

#[test]
fn replicas_are_reproducible_and_distinct() {
    let a = reservoir_observables(-1, 10.0, 7);
    assert_eq!(a, reservoir_observables(-1, 10.0, 7));
    let distinct = (0..20).filter(|&r| reservoir_observables(-1, 10.0, r) != a).count();
    assert!(distinct > 0);
}
