//! Counter-based Poisson clocks.
//!
//! Every site owns an independent ChaCha8 stream keyed by
//! `(master seed, replica, domain)` with the site as stream id, so the n-th ring
//! time at a site is a pure function of those keys. Two copies driven by the same
//! schedule see exactly the same ring realisations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

const TAG: &[u8; 8] = b"rarefan\0";

/// Key-space separation between independent uses of the same replica seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Clocks = 0,
    Initial = 1,
    Gillespie = 2,
}

fn key(master: u64, replica: u64, domain: Domain) -> [u8; 32] {
    let mut k = [0u8; 32];
    k[..8].copy_from_slice(&master.to_le_bytes());
    k[8..16].copy_from_slice(&replica.to_le_bytes());
    k[16..24].copy_from_slice(&(domain as u64).to_le_bytes());
    k[24..].copy_from_slice(TAG);
    k
}

/// Deterministic generator for one `(master, replica, domain, stream)` key.
pub fn keyed_rng(master: u64, replica: u64, domain: Domain, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key(master, replica, domain));
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClockSchedule {
    pub master_seed: u64,
    pub replica: u64,
}

impl ClockSchedule {
    pub fn new(master_seed: u64, replica: u64) -> Self {
        ClockSchedule {
            master_seed,
            replica,
        }
    }

    /// Ring-time stream of a site (or of any other clock-carrying object).
    pub fn stream(&self, site: i64) -> RingStream {
        RingStream {
            rng: keyed_rng(self.master_seed, self.replica, Domain::Clocks, site as u64),
            next: None,
        }
    }

    /// Generator for initial-state sampling, independent of every clock.
    pub fn initial_rng(&self) -> ChaCha8Rng {
        keyed_rng(self.master_seed, self.replica, Domain::Initial, 0)
    }

    pub fn gillespie_rng(&self) -> ChaCha8Rng {
        keyed_rng(self.master_seed, self.replica, Domain::Gillespie, 0)
    }

    /// Time of the first ring at `site` strictly after `after`.
    pub fn first_ring_after(&self, site: i64, after: f64) -> f64 {
        let mut s = self.stream(site);
        s.advance_past(after)
    }

    /// Left influence front of a window whose first site is `xmin`: the largest
    /// site at time `t` that may disagree with the untruncated system. The front
    /// starts at `xmin - 1` and steps right whenever the site it sits on rings.
    pub fn influence_front_left(&self, xmin: i64, t: f64) -> i64 {
        let mut front = xmin - 1;
        let mut now = 0.0;
        loop {
            let ring = self.first_ring_after(front, now);
            if ring > t {
                return front;
            }
            now = ring;
            front += 1;
        }
    }

    /// Right influence front for exclusion dynamics: the smallest site that may
    /// disagree, starting at `xmax + 1` and stepping left whenever the site to its
    /// left rings.
    pub fn influence_front_right(&self, xmax: i64, t: f64) -> i64 {
        let mut front = xmax + 1;
        let mut now = 0.0;
        loop {
            let ring = self.first_ring_after(front - 1, now);
            if ring > t {
                return front;
            }
            now = ring;
            front -= 1;
        }
    }
}

/// Successive ring times of one clock.
#[derive(Clone, Debug)]
pub struct RingStream {
    rng: ChaCha8Rng,
    next: Option<f64>,
}

impl RingStream {
    /// The next ring that has not been consumed yet.
    #[inline]
    pub fn peek(&mut self) -> f64 {
        match self.next {
            Some(t) => t,
            None => {
                let t = self.rng.sample::<f64, _>(Exp1);
                self.next = Some(t);
                t
            }
        }
    }

    /// Consume the pending ring and return the one after it.
    #[inline]
    pub fn advance(&mut self) -> f64 {
        let cur = self.peek();
        let t = cur + self.rng.sample::<f64, _>(Exp1);
        self.next = Some(t);
        t
    }

    /// Discard rings at or before `time`; returns the first ring after it.
    #[inline]
    pub fn advance_past(&mut self, time: f64) -> f64 {
        let mut t = self.peek();
        while t <= time {
            t = self.advance();
        }
        t
    }
}
