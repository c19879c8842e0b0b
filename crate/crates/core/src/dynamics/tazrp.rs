use super::{finish_snapshots, flush_snapshots, ClockSchedule, JumpEvent, Observer, RunStats, Scheduler};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, Configuration};

/// Unit-rate totally asymmetric zero-range dynamics up to time `t`.
///
/// At each ring of site `x` the highest-priority occupant moves to `x + 1`.
/// Jumps off the right end of an open window are recorded as exits; on a ring
/// they wrap around. Arrivals inside the right guard raise the light-cone flag.
pub fn run_tazrp_unit<O: Observer>(
    config: &mut Configuration,
    t: f64,
    clocks: &ClockSchedule,
    obs: &mut O,
) -> Result<RunStats> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::param("T", "must be non-negative"));
    }
    let (xmin, _) = config.window();
    let len = config.len();
    let periodic = config.boundary() == Boundary::Periodic;
    let mut sched = Scheduler::new(*clocks, xmin, len);
    for i in 0..len {
        if !config.site_at(i).is_empty() {
            sched.activate(i, 0.0);
        }
    }
    let mut stats = RunStats::default();
    let mut snap = 0usize;
    while let Some(now) = sched.peek_time() {
        if now > t {
            break;
        }
        flush_snapshots(obs, &mut snap, now, t, config);
        let (now, i) = sched.pop().expect("peeked");
        stats.rings += 1;
        if let Some(j) = config.pop_at(i) {
            stats.jumps += 1;
            obs.on_jump(&JumpEvent {
                time: now,
                site: xmin + i as i64,
                class: j.class,
                tag: j.tag,
            });
            let dest = i + 1;
            if dest < len {
                config.push_at(dest, j.class, j.tag);
                sched.activate(dest, now);
            } else if periodic {
                config.push_at(0, j.class, j.tag);
                sched.activate(0, now);
            } else {
                config.record_exit(j.class, j.tag);
            }
        }
        let active = !config.site_at(i).is_empty();
        sched.reschedule(i, active);
    }
    finish_snapshots(obs, &mut snap, t, config);
    Ok(stats)
}
