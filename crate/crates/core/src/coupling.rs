//! Basic coupling: two copies driven by the same clocks, and the equivalent
//! multi-class description in which discrepancies are second-class particles.

use crate::dynamics::{run_tazrp_unit, ClockSchedule, Snapshots};
use crate::error::{Error, Result};
use crate::lattice::{ClassId, Configuration, Count};

#[derive(Clone, Debug)]
pub struct CoupledPair {
    pub a: Configuration,
    pub b: Configuration,
    pub clocks: ClockSchedule,
}

impl CoupledPair {
    pub fn new(a: Configuration, b: Configuration, clocks: ClockSchedule) -> Result<Self> {
        a.check_same_window(&b)?;
        Ok(CoupledPair { a, b, clocks })
    }
}

/// Sites where the aggregated totals of the two copies differ, with `A - B`.
/// A reservoir facing a finite count is reported as `i64::MAX` (or `MIN`).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiscrepancySet {
    pub entries: Vec<(i64, i64)>,
}

impl DiscrepancySet {
    pub fn between(a: &Configuration, b: &Configuration) -> Result<Self> {
        a.check_same_window(b)?;
        let mut entries = Vec::new();
        for ((x, sa), (_, sb)) in a.sites().zip(b.sites()) {
            let d = match (sa.total(), sb.total()) {
                (Count::Finite(p), Count::Finite(q)) => p as i64 - q as i64,
                (Count::Infinite, Count::Infinite) => 0,
                (Count::Infinite, _) => i64::MAX,
                (_, Count::Infinite) => i64::MIN,
            };
            if d != 0 {
                entries.push((x, d));
            }
        }
        Ok(DiscrepancySet { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of discrepancies, counted with multiplicity.
    pub fn cardinality(&self) -> u64 {
        self.entries.iter().map(|&(_, d)| d.unsigned_abs()).sum()
    }
}

#[derive(Clone, Debug)]
pub struct CoupledRun {
    pub a: Configuration,
    pub b: Configuration,
    /// Discrepancies at each requested time that lies within the horizon.
    pub trace: Vec<(f64, DiscrepancySet)>,
    /// Whether the initial site-wise order still holds at each observed time.
    pub ordered: Vec<bool>,
    pub light_cone_violated: bool,
}

/// Advances both copies on the shared clocks and compares them at `times`.
pub fn run_coupled(pair: &CoupledPair, t: f64, times: &[f64]) -> Result<CoupledRun> {
    let mut a = pair.a.clone();
    let mut b = pair.b.clone();
    let mut sa = Snapshots::at(times.to_vec());
    let mut sb = Snapshots::at(times.to_vec());
    run_tazrp_unit(&mut a, t, &pair.clocks, &mut sa)?;
    run_tazrp_unit(&mut b, t, &pair.clocks, &mut sb)?;
    let b_below = pair.b.leq(&pair.a)?;
    let a_below = pair.a.leq(&pair.b)?;
    let mut trace = Vec::with_capacity(sa.states.len());
    let mut ordered = Vec::with_capacity(sa.states.len());
    for ((time, ca), cb) in times.iter().zip(&sa.states).zip(&sb.states) {
        trace.push((*time, DiscrepancySet::between(ca, cb)?));
        ordered.push(if b_below { cb.leq(ca)? } else if a_below { ca.leq(cb)? } else { false });
    }
    let light_cone_violated = a.light_cone_violated() || b.light_cone_violated();
    Ok(CoupledRun {
        a,
        b,
        trace,
        ordered,
        light_cone_violated,
    })
}

/// Multi-class form of an ordered pair `A >= B`: the particles of `B` become
/// first class and every unit of `A - B` becomes a second-class particle. Tags
/// are assigned from the rightmost site leftwards and bottom-to-top inside a
/// site, so the label order matches the spatial order.
pub fn discrepancy_as_second_class(pair: &CoupledPair) -> Result<Configuration> {
    let (a, b) = (&pair.a, &pair.b);
    a.check_same_window(b)?;
    if !b.leq(a)? {
        return Err(Error::NotComparable);
    }
    let (xmin, xmax) = a.window();
    let mut out = Configuration::new(xmin, xmax, 0)?.with_guards(a.guards().0, a.guards().1);
    let mut extra = Vec::new();
    for ((x, sa), (_, sb)) in a.sites().zip(b.sites()) {
        match (sa.total(), sb.total()) {
            (Count::Infinite, Count::Infinite) => out.set_first_class(x, Count::Infinite)?,
            (Count::Infinite, Count::Finite(_)) => return Err(Error::NotComparable),
            (Count::Finite(p), Count::Finite(q)) => {
                out.set_first_class(x, Count::Finite(q))?;
                extra.push((x, p - q));
            }
            (Count::Finite(_), Count::Infinite) => unreachable!("B <= A"),
        }
    }
    for &(x, k) in extra.iter().rev() {
        for _ in 0..k {
            out.add_particle(x, ClassId::SECOND)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Configuration {
        let mut c = Configuration::new(-1, 40, 0).unwrap();
        c.set_first_class(-1, Count::Infinite).unwrap();
        c.set_first_class(0, Count::Finite(2)).unwrap();
        c.set_first_class(3, Count::Finite(1)).unwrap();
        c
    }

    #[test]
    fn identical_copies_never_disagree() {
        let pair = CoupledPair::new(base(), base(), ClockSchedule::new(1, 1)).unwrap();
        let times: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let run = run_coupled(&pair, 9.0, &times).unwrap();
        assert_eq!(run.trace.len(), 10);
        assert!(run.trace.iter().all(|(_, d)| d.is_empty()));
    }

    #[test]
    fn single_discrepancy_persists() {
        let mut a = base();
        a.set_first_class(0, Count::Finite(3)).unwrap();
        let pair = CoupledPair::new(a, base(), ClockSchedule::new(2, 0)).unwrap();
        let times: Vec<f64> = (0..=20).map(|k| k as f64).collect();
        let run = run_coupled(&pair, 20.0, &times).unwrap();
        for (_, d) in &run.trace {
            assert_eq!(d.cardinality(), 1);
            assert_eq!(d.entries[0].1, 1);
        }
    }

    #[test]
    fn second_class_representation() {
        let mut a = base();
        a.set_first_class(0, Count::Finite(3)).unwrap();
        let pair = CoupledPair::new(a.clone(), base(), ClockSchedule::new(2, 0)).unwrap();
        let m = discrepancy_as_second_class(&pair).unwrap();
        assert_eq!(m.site(0).unwrap().first_class(), Count::Finite(2));
        assert_eq!(m.site(0).unwrap().higher().len(), 1);

        let mut k = base();
        k.set_first_class(0, Count::Finite(5)).unwrap();
        let pair = CoupledPair::new(k, base(), ClockSchedule::new(2, 0)).unwrap();
        let m = discrepancy_as_second_class(&pair).unwrap();
        assert_eq!(m.site(0).unwrap().higher().len(), 3);

        let pair = CoupledPair::new(base(), base(), ClockSchedule::new(2, 0)).unwrap();
        let m = discrepancy_as_second_class(&pair).unwrap();
        assert!(m.class_counts().keys().all(|c| c.is_first()));

        let pair = CoupledPair::new(base(), a, ClockSchedule::new(2, 0)).unwrap();
        assert_eq!(discrepancy_as_second_class(&pair).unwrap_err(), Error::NotComparable);
    }

    #[test]
    fn projections_reproduce_both_copies() {
        let mut a = base();
        a.set_first_class(0, Count::Finite(4)).unwrap();
        a.set_first_class(5, Count::Finite(2)).unwrap();
        let clocks = ClockSchedule::new(77, 3);
        let pair = CoupledPair::new(a, base(), clocks).unwrap();
        let times: Vec<f64> = (1..=15).map(|k| k as f64).collect();
        let run = run_coupled(&pair, 15.0, &[]).unwrap();
        let mut multi = discrepancy_as_second_class(&pair).unwrap();
        let mut snaps = Snapshots::at(times);
        run_tazrp_unit(&mut multi, 15.0, &clocks, &mut snaps).unwrap();
        assert_eq!(multi.ignore_classes().totals(), run.a.totals());
        assert_eq!(multi.censor_above(ClassId::FIRST).totals(), run.b.totals());
    }
}
