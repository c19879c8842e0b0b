//! Zero-range dynamics with a general occupation-dependent rate `g`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::Exp1;

use super::{JumpEvent, Observer, RunStats};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, ClassId, Configuration, Count};

/// Jump rate as a function of site occupancy: `g(0) = 0`, non-decreasing,
/// with increments bounded by a declared constant.
#[derive(Clone)]
pub struct RateFunction {
    g: Arc<dyn Fn(u64) -> f64 + Send + Sync>,
    increment_bound: f64,
}

impl fmt::Debug for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateFunction")
            .field("g(1)", &(self.g)(1))
            .field("increment_bound", &self.increment_bound)
            .finish()
    }
}

impl RateFunction {
    /// Validates `g` on `0..=prefix`.
    pub fn new(
        g: impl Fn(u64) -> f64 + Send + Sync + 'static,
        increment_bound: f64,
        prefix: u64,
    ) -> Result<Self> {
        if g(0) != 0.0 {
            return Err(Error::param("g", "g(0) must be 0"));
        }
        if !(increment_bound.is_finite() && increment_bound >= 0.0) {
            return Err(Error::param("g", "increment bound must be finite"));
        }
        let mut prev = 0.0;
        for k in 1..=prefix.max(1) {
            let v = g(k);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param("g", format!("g({k}) must be positive")));
            }
            if v < prev {
                return Err(Error::param("g", format!("g decreases at {k}")));
            }
            if v - prev > increment_bound && k > 1 {
                return Err(Error::param("g", format!("increment at {k} exceeds bound")));
            }
            prev = v;
        }
        Ok(RateFunction {
            g: Arc::new(g),
            increment_bound,
        })
    }

    /// `g(k) = 1{k >= 1}`: the unit-rate process.
    pub fn indicator() -> Self {
        Self::new(|k| if k > 0 { 1.0 } else { 0.0 }, 0.0, 64).expect("valid")
    }

    /// `g(k) = k`: independent walkers.
    pub fn linear() -> Self {
        Self::new(|k| k as f64, 1.0, 64).expect("valid")
    }

    #[inline]
    pub fn eval(&self, k: u64) -> f64 {
        (self.g)(k)
    }

    pub fn increment_bound(&self) -> f64 {
        self.increment_bound
    }
}

const SERIES_TOL: f64 = 1e-12;
const MAX_TERMS: u64 = 10_000_000;

/// `E[g(k)]` under the zero-range product measure with mean `rho`.
pub fn g_tilde(rho: f64, g: &RateFunction) -> Result<f64> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::param("rho", "must be finite and non-negative"));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let p = rho / (1.0 + rho);
    let d = g.increment_bound();
    let mut sum = 0.0;
    let mut pk = 1.0 - p; // p^k (1 - p)
    for k in 0..MAX_TERMS {
        let gk = g.eval(k);
        sum += gk * pk;
        // remaining mass bounded by p^{k+1}[g(k) + D/(1-p)]
        let tail = (pk / (1.0 - p)) * p * (gk + d / (1.0 - p));
        if k > 0 && tail < SERIES_TOL {
            return Ok(sum);
        }
        pk *= p;
    }
    Err(Error::Divergence("g_tilde"))
}

/// Derivative of [`g_tilde`] in `rho`.
pub fn g_tilde_prime(rho: f64, g: &RateFunction) -> Result<f64> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::param("rho", "must be finite and non-negative"));
    }
    // d/drho sum g(k) p^k (1-p) = sum g(k) [k p^{k-1} (1-p) - p^k] / (1+rho)^2
    let p = rho / (1.0 + rho);
    let d = g.increment_bound();
    let scale = 1.0 / ((1.0 + rho) * (1.0 + rho));
    let mut sum = 0.0;
    let mut pkm1 = 1.0; // p^{k-1}
    for k in 1..MAX_TERMS {
        let gk = g.eval(k);
        let term = gk * (k as f64 * pkm1 * (1.0 - p) - pkm1 * p);
        sum += term;
        let bound = pkm1 * (gk + d * k as f64) * (k as f64 + 2.0) / ((1.0 - p) * (1.0 - p));
        if bound * p < SERIES_TOL || p == 0.0 {
            return Ok(sum * scale);
        }
        pkm1 *= p;
    }
    Err(Error::Divergence("g_tilde_prime"))
}

/// Fenwick tree over non-negative site rates.
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick {
            tree: vec![0.0; n + 1],
        }
    }

    fn add(&mut self, i: usize, delta: f64) {
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    /// Smallest index whose prefix sum exceeds `target`.
    fn find(&self, mut target: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }
}

/// Rounding at a segment boundary can land on a zero-rate site.
fn nearest_positive(rates: &[f64], i: usize) -> usize {
    (0..=i)
        .rev()
        .chain(i + 1..rates.len())
        .find(|&k| rates[k] > 0.0)
        .expect("positive total rate")
}

/// Gillespie simulation of single-class zero-range dynamics with rate `g`.
pub fn run_tazrp_general_g<R: Rng, O: Observer>(
    config: &mut Configuration,
    t: f64,
    g: &RateFunction,
    rng: &mut R,
    obs: &mut O,
) -> Result<RunStats> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::param("T", "must be non-negative"));
    }
    let mut counts = Vec::with_capacity(config.len());
    for (x, s) in config.sites() {
        if !s.higher().is_empty() {
            return Err(Error::MultiClassUnsupported);
        }
        match s.first_class() {
            Count::Finite(n) => counts.push(n as u64),
            Count::Infinite => {
                return Err(Error::param("config", format!("reservoir at {x} has unbounded rate")))
            }
        }
    }
    let (xmin, _) = config.window();
    let len = counts.len();
    let periodic = config.boundary() == Boundary::Periodic;
    let total_particles: u64 = counts.iter().sum();
    let cap = (g.eval(1) + g.increment_bound()) * total_particles as f64 + 1.0;

    let mut rates: Vec<f64> = counts.iter().map(|&n| g.eval(n)).collect();
    let mut tree = Fenwick::new(len);
    let mut total = 0.0;
    for (i, &r) in rates.iter().enumerate() {
        tree.add(i, r);
        total += r;
    }
    let mut now = 0.0;
    let mut stats = RunStats::default();
    let mut snap = 0usize;
    let mut since_resum = 0u32;
    loop {
        if !total.is_finite() || total > cap {
            return Err(Error::RateOverflow);
        }
        if total <= 0.0 {
            break;
        }
        let dt = rng.sample::<f64, _>(Exp1) / total;
        if now + dt > t {
            break;
        }
        now += dt;
        super::flush_snapshots(obs, &mut snap, now, t, config);
        let i = tree.find(rng.random::<f64>() * total);
        let i = if rates[i] > 0.0 { i } else { nearest_positive(&rates, i) };
        stats.rings += 1;
        stats.jumps += 1;
        let j = config.pop_at(i).expect("occupied");
        obs.on_jump(&JumpEvent {
            time: now,
            site: xmin + i as i64,
            class: ClassId::FIRST,
            tag: j.tag,
        });
        let update = |k: usize, counts: &mut Vec<u64>, rates: &mut Vec<f64>, tree: &mut Fenwick, total: &mut f64| {
            let r = g.eval(counts[k]);
            tree.add(k, r - rates[k]);
            *total += r - rates[k];
            rates[k] = r;
        };
        counts[i] -= 1;
        update(i, &mut counts, &mut rates, &mut tree, &mut total);
        let dest = if i + 1 < len {
            Some(i + 1)
        } else if periodic {
            Some(0)
        } else {
            None
        };
        match dest {
            Some(d) => {
                config.push_at(d, ClassId::FIRST, j.tag);
                counts[d] += 1;
                update(d, &mut counts, &mut rates, &mut tree, &mut total);
            }
            None => config.record_exit(ClassId::FIRST, j.tag),
        }
        since_resum += 1;
        if since_resum == 4096 {
            // limit drift of the running total
            total = rates.iter().sum();
            tree = Fenwick::new(len);
            for (k, &r) in rates.iter().enumerate() {
                tree.add(k, r);
            }
            since_resum = 0;
        }
    }
    super::finish_snapshots(obs, &mut snap, t, config);
    Ok(stats)
}
