use super::{finish_snapshots, flush_snapshots, ClockSchedule, JumpEvent, Observer, RunStats, Scheduler};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, ClassId, Configuration, Count};

/// Multi-class totally asymmetric exclusion up to time `t`.
///
/// When site `x` rings, its occupant swaps with the occupant of `x + 1` if it has
/// strictly smaller class (holes count as class infinity). A particle at the
/// right end of an open window jumps out and is recorded as an exit.
pub fn run_tasep<O: Observer>(
    config: &mut Configuration,
    t: f64,
    clocks: &ClockSchedule,
    obs: &mut O,
) -> Result<RunStats> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::param("T", "must be non-negative"));
    }
    for (x, s) in config.sites() {
        match s.total() {
            Count::Finite(n) if n <= 1 => {}
            other => {
                return Err(Error::MultiOccupancy {
                    site: x,
                    count: other.to_string(),
                })
            }
        }
    }
    let (xmin, _) = config.window();
    let len = config.len();
    let periodic = config.boundary() == Boundary::Periodic;

    let class_at = |c: &Configuration, i: usize| -> u32 { c.site_at(i).top_class().map_or(u32::MAX, ClassId::get) };
    let right_of = |i: usize| -> Option<usize> {
        if i + 1 < len {
            Some(i + 1)
        } else if periodic {
            Some(0)
        } else {
            None
        }
    };
    let active = |c: &Configuration, i: usize| -> bool {
        let me = class_at(c, i);
        let nb = right_of(i).map_or(u32::MAX, |j| class_at(c, j));
        me < nb
    };

    let mut sched = Scheduler::new(*clocks, xmin, len);
    for i in 0..len {
        if active(config, i) {
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
        if active(config, i) {
            let mover = config.pop_at(i).expect("active site is occupied");
            stats.jumps += 1;
            obs.on_jump(&JumpEvent {
                time: now,
                site: xmin + i as i64,
                class: mover.class,
                tag: mover.tag,
            });
            match right_of(i) {
                Some(j) => {
                    if let Some(back) = config.pop_at(j) {
                        config.push_at(i, back.class, back.tag);
                    }
                    config.push_at(j, mover.class, mover.tag);
                    sched.reschedule(i, active(config, i));
                    if active(config, j) {
                        sched.activate(j, now);
                    }
                    let left = if i > 0 {
                        Some(i - 1)
                    } else if periodic {
                        Some(len - 1)
                    } else {
                        None
                    };
                    if let Some(l) = left {
                        if active(config, l) {
                            sched.activate(l, now);
                        }
                    }
                }
                None => {
                    config.record_exit(mover.class, mover.tag);
                    sched.reschedule(i, false);
                    if i > 0 && active(config, i - 1) {
                        sched.activate(i - 1, now);
                    }
                }
            }
        } else {
            sched.reschedule(i, false);
        }
    }
    finish_snapshots(obs, &mut snap, t, config);
    Ok(stats)
}
