//! Pathwise check of the gap map between exclusion and zero-range.
//!
//! Exclusion particles (or objects, in the second-class variant) carry their own
//! clocks; the zero-range copy uses the same streams keyed by site. Both are
//! driven to the horizon and their jump sequences compared bit for bit.

use serde::Serialize;

use super::{measure_j2_zr, measure_x2, replicate, window_for, ExperimentPlan, Side};
use crate::dynamics::{run_tazrp_unit, ClockSchedule, EventLog, JumpEvent, Observer, RingStream};
use crate::error::{Error, Result};
use crate::lattice::{Configuration, Count};
use crate::measures::{build_reservoir_second_class, sample_geometric};

/// First-class cells to the left of the second-class particle in the
/// second-class variant; `T = 100` never gets close to exhausting them.
const RESERVOIR_CELLS: i64 = 400;

/// Zero-range occupations `x_i - x_{i+1} - 1` of consecutive particles, listed
/// right to left.
pub fn encode_gaps(positions: &[i64]) -> Result<Vec<u32>> {
    positions
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let gap = w[0] - w[1] - 1;
            u32::try_from(gap).map_err(|_| Error::NegativeGap {
                index: i + 1,
                next: i + 2,
                gap,
            })
        })
        .collect()
}

/// Zero-range state for exclusion particles at `positions` (rightmost first): a
/// reservoir at site 0 and the gap behind particle `i + 1` at site `i`.
pub fn zero_range_from_positions(positions: &[i64]) -> Result<Configuration> {
    let gaps = encode_gaps(positions)?;
    let m = positions.len() as i64;
    if m < 2 {
        return Err(Error::param("M", "need at least two particles"));
    }
    let mut c = Configuration::new(0, m - 1, 0)?;
    c.set_first_class(0, Count::Infinite)?;
    for (i, g) in gaps.into_iter().enumerate() {
        c.set_first_class(i as i64 + 1, Count::Finite(g))?;
    }
    Ok(c)
}

/// Minimal full-rejection driver over a fixed set of streams.
struct Rings {
    streams: Vec<RingStream>,
}

impl Rings {
    fn next(&mut self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, s) in self.streams.iter_mut().enumerate() {
            let time = s.peek();
            if time < best.0 {
                best = (time, i);
            }
        }
        best
    }

    fn consume(&mut self, i: usize) {
        self.streams[i].advance();
    }
}

/// Jump log `(time bits, clock key)` of the exclusion particles plus their
/// positions at each snapshot time.
fn run_tasep_particles(
    positions: &mut [i64],
    t: f64,
    clocks: &ClockSchedule,
    times: &[f64],
) -> (Vec<(u64, i64)>, Vec<Vec<i64>>) {
    let mut rings = Rings {
        streams: (0..positions.len()).map(|k| clocks.stream(k as i64)).collect(),
    };
    let mut log = Vec::new();
    let mut snaps = Vec::new();
    let mut next_snap = 0;
    loop {
        let (now, k) = rings.next();
        while next_snap < times.len() && times[next_snap] < now && times[next_snap] <= t {
            snaps.push(positions.to_vec());
            next_snap += 1;
        }
        if now > t {
            break;
        }
        rings.consume(k);
        if k == 0 || positions[k] + 1 < positions[k - 1] {
            positions[k] += 1;
            log.push((now.to_bits(), k as i64));
        }
    }
    (log, snaps)
}

fn zr_log(events: &[JumpEvent]) -> Vec<(u64, i64)> {
    events.iter().map(|e| (e.time.to_bits(), e.site)).collect()
}

fn first_mismatch<T: PartialEq>(a: &[T], b: &[T]) -> Option<usize> {
    a.iter()
        .zip(b)
        .position(|(x, y)| x != y)
        .or(if a.len() != b.len() { Some(a.len().min(b.len())) } else { None })
}

struct LogAndSnaps {
    log: EventLog,
    times: Vec<f64>,
    states: Vec<Configuration>,
}

impl Observer for LogAndSnaps {
    fn snapshot_times(&self) -> &[f64] {
        &self.times
    }

    fn on_snapshot(&mut self, _time: f64, config: &Configuration) {
        self.states.push(config.clone());
    }

    fn on_jump(&mut self, event: &JumpEvent) {
        self.log.on_jump(event);
    }
}

/// Per-replica outcome of both variants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MappingSeed {
    pub replica: u64,
    pub events: usize,
    /// Index of the first differing jump, if any.
    pub first_divergence: Option<usize>,
    pub snapshot_mismatches: usize,
    pub second_class_events: usize,
    pub second_class_divergence: Option<usize>,
    pub identity_mismatches: usize,
    pub reservoir_exhausted: bool,
}

impl MappingSeed {
    pub fn is_exact(&self) -> bool {
        self.first_divergence.is_none()
            && self.snapshot_mismatches == 0
            && self.second_class_divergence.is_none()
            && self.identity_mismatches == 0
            && !self.reservoir_exhausted
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MappingReport {
    pub m: usize,
    pub replicas: usize,
    pub divergent_replicas: usize,
    pub identity_failures: usize,
    pub seeds: Vec<MappingSeed>,
}

fn first_class_variant(m: usize, t: f64, clocks: &ClockSchedule, times: &[f64]) -> Result<(usize, Option<usize>, usize)> {
    let mut rng = clocks.initial_rng();
    let mut positions = vec![0i64; m];
    for i in 1..m {
        positions[i] = positions[i - 1] - 1 - sample_geometric(1.0, &mut rng)? as i64;
    }
    let mut zr = zero_range_from_positions(&positions)?;
    let mut obs = LogAndSnaps {
        log: EventLog::default(),
        times: times.to_vec(),
        states: Vec::new(),
    };
    run_tazrp_unit(&mut zr, t, clocks, &mut obs)?;
    let (se_log, se_snaps) = run_tasep_particles(&mut positions, t, clocks, times);
    let zr_events = zr_log(&obs.log.0);
    let divergence = first_mismatch(&se_log, &zr_events);
    let mut mismatches = se_snaps.len().abs_diff(obs.states.len());
    for (pos, state) in se_snaps.iter().zip(&obs.states) {
        let gaps = encode_gaps(pos)?;
        let same = gaps
            .iter()
            .enumerate()
            .all(|(i, &g)| state.site(i as i64 + 1).map(|s| s.first_class()) == Ok(Count::Finite(g)));
        mismatches += !same as usize;
    }
    Ok((se_log.len(), divergence, mismatches))
}

// Cell contents of the exclusion lattice in the second-class variant.
const FIRST: u8 = 1;
const SECOND: u8 = 2;
const HOLE: u8 = 3;

struct SecondClassOutcome {
    log: Vec<(u64, i64)>,
    /// `(holes left of the second-class particle, first-class particles right of it)`.
    observables: Vec<(i64, u64)>,
    exhausted: bool,
}

/// Exclusion with a second-class particle at 0, first-class particles on
/// `[-RESERVOIR_CELLS, -1]` and holes on `[1, b]`. The second-class particle and
/// the holes are ranked left to right; rank `r` carries the stream of
/// zero-range site `r - 2`, so rank 1 matches the reservoir at site -1.
fn run_tasep_second_class(b: i64, t: f64, clocks: &ClockSchedule, times: &[f64]) -> SecondClassOutcome {
    let offset = RESERVOIR_CELLS;
    let mut cells = vec![FIRST; (offset + b + 1) as usize];
    for x in 0..=b {
        cells[(x + offset) as usize] = HOLE;
    }
    cells[offset as usize] = SECOND;
    // pos[r - 1] is the cell index of rank r
    let mut pos: Vec<i64> = (0..=b).map(|x| x + offset).collect();
    let mut y_rank = 1usize;
    let mut rings = Rings {
        streams: (1..=b + 1).map(|r| clocks.stream(r - 2)).collect(),
    };
    let observe = |cells: &[u8], pos: &[i64], y_rank: usize| {
        let y = pos[y_rank - 1] as usize;
        let right = cells[y + 1..].iter().filter(|&&c| c == FIRST).count() as u64;
        (y_rank as i64 - 1, right)
    };
    let mut out = SecondClassOutcome {
        log: Vec::new(),
        observables: Vec::new(),
        exhausted: false,
    };
    let mut next_snap = 0;
    loop {
        let (now, i) = rings.next();
        while next_snap < times.len() && times[next_snap] < now && times[next_snap] <= t {
            out.observables.push(observe(&cells, &pos, y_rank));
            next_snap += 1;
        }
        if now > t {
            break;
        }
        rings.consume(i);
        let r = i + 1;
        let p = pos[i];
        if p == 0 {
            out.exhausted = true;
            continue;
        }
        let left = cells[(p - 1) as usize];
        let own = cells[p as usize];
        if left >= own {
            continue;
        }
        cells.swap((p - 1) as usize, p as usize);
        if left == SECOND {
            // the second-class particle steps right onto the hole of rank r
            y_rank = r;
        } else {
            pos[i] -= 1;
        }
        out.log.push((now.to_bits(), r as i64 - 2));
    }
    out
}

fn second_class_variant(t: f64, clocks: &ClockSchedule, times: &[f64]) -> Result<(usize, Option<usize>, usize, bool)> {
    let b = window_for(t, Side::Right);
    let (zr, _) = build_reservoir_second_class(-1, b - 1)?;
    let mut zr = zr;
    let mut obs = LogAndSnaps {
        log: EventLog::default(),
        times: times.to_vec(),
        states: Vec::new(),
    };
    run_tazrp_unit(&mut zr, t, clocks, &mut obs)?;
    let se = run_tasep_second_class(b, t, clocks, times);
    let divergence = first_mismatch(&se.log, &zr_log(&obs.log.0));
    let mut mismatches = se.observables.len().abs_diff(obs.states.len());
    for (&(h2, j2), state) in se.observables.iter().zip(&obs.states) {
        let x2 = measure_x2(state)?;
        let j2_zr = measure_j2_zr(state, None)?;
        mismatches += (h2 != x2 || j2 != j2_zr) as usize;
    }
    Ok((se.log.len(), divergence, mismatches, se.exhausted))
}

/// Runs both variants of the gap map for `plan.n` replicas with `plan.m`
/// particles up to `plan.t`, comparing jump logs and observables at ten
/// equally spaced times.
pub fn exp_mapping(plan: &ExperimentPlan) -> Result<MappingReport> {
    plan.validate()?;
    if plan.m < 2 {
        return Err(Error::param("M", "need at least two particles"));
    }
    let times: Vec<f64> = (1..=10).map(|k| plan.t * k as f64 / 10.0).collect();
    let seeds = replicate(plan.n, |r| {
        let clocks = ClockSchedule::new(plan.master_seed, r);
        let (events, first_divergence, snapshot_mismatches) = first_class_variant(plan.m, plan.t, &clocks, &times)?;
        let (second_class_events, second_class_divergence, identity_mismatches, reservoir_exhausted) =
            second_class_variant(plan.t, &clocks, &times)?;
        Ok(MappingSeed {
            replica: r,
            events,
            first_divergence,
            snapshot_mismatches,
            second_class_events,
            second_class_divergence,
            identity_mismatches,
            reservoir_exhausted,
        })
    })?;
    Ok(MappingReport {
        m: plan.m,
        replicas: seeds.len(),
        divergent_replicas: seeds
            .iter()
            .filter(|s| s.first_divergence.is_some() || s.second_class_divergence.is_some() || s.snapshot_mismatches > 0)
            .count(),
        identity_failures: seeds.iter().filter(|s| s.identity_mismatches > 0).count(),
        seeds,
    })
}
