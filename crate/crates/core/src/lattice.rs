//! Multi-class particle configurations on a finite window of the integer lattice.
//!
//! A site holds a count of first-class particles (possibly the [`Count::Infinite`]
//! reservoir sentinel) and an ordered stack of higher-class particles. The stack is
//! sorted by class, and particles of the same class leave in arrival order. When a
//! site's clock rings the occupant with the smallest class jumps; among
//! first-class particles the oldest one leaves first as well.
//!
//! First-class particles are anonymous counts unless a tag was requested for them.
//! Tagged first-class particles are tracked by their rank inside the site's queue.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Degree of class; `1` is first class, larger values have lower priority.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(u32);

impl ClassId {
    pub const FIRST: ClassId = ClassId(1);
    pub const SECOND: ClassId = ClassId(2);
    pub const THIRD: ClassId = ClassId(3);

    pub fn new(value: u32) -> Result<Self> {
        if value == 0 {
            return Err(Error::InvalidClass);
        }
        Ok(ClassId(value))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn is_first(self) -> bool {
        self.0 == 1
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Opaque particle identifier, unique within one configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(pub u32);

/// Number of first-class particles at a site.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Count {
    Finite(u32),
    /// Permanent reservoir: arrivals and departures leave it unchanged.
    Infinite,
}

impl Count {
    pub fn is_zero(self) -> bool {
        matches!(self, Count::Finite(0))
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            Count::Finite(n) => Some(n),
            Count::Infinite => None,
        }
    }

    fn plus(self, extra: usize) -> Count {
        match self {
            Count::Finite(n) => Count::Finite(n + extra as u32),
            Count::Infinite => Count::Infinite,
        }
    }

    /// `self <= other` with the reservoir dominating every finite count.
    pub fn le(self, other: Count) -> bool {
        match (self, other) {
            (_, Count::Infinite) => true,
            (Count::Infinite, Count::Finite(_)) => false,
            (Count::Finite(a), Count::Finite(b)) => a <= b,
        }
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Count::Finite(n) => write!(f, "{n}"),
            Count::Infinite => write!(f, "INF"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteOccupancy {
    first: Count,
    higher: Vec<(Tag, ClassId)>,
}

impl Default for SiteOccupancy {
    fn default() -> Self {
        SiteOccupancy {
            first: Count::Finite(0),
            higher: Vec::new(),
        }
    }
}

impl SiteOccupancy {
    pub fn first_class(&self) -> Count {
        self.first
    }

    /// Higher-class occupants in jump order.
    pub fn higher(&self) -> &[(Tag, ClassId)] {
        &self.higher
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_zero() && self.higher.is_empty()
    }

    /// Total occupancy with all classes aggregated.
    pub fn total(&self) -> Count {
        self.first.plus(self.higher.len())
    }

    /// Smallest class present, if any.
    pub fn top_class(&self) -> Option<ClassId> {
        if !self.first.is_zero() {
            Some(ClassId::FIRST)
        } else {
            self.higher.first().map(|&(_, c)| c)
        }
    }

    fn insert_higher(&mut self, tag: Tag, class: ClassId) {
        let at = self
            .higher
            .iter()
            .position(|&(_, c)| c > class)
            .unwrap_or(self.higher.len());
        self.higher.insert(at, (tag, class));
    }
}

/// Registry entry for a tagged particle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagRecord {
    pub class: ClassId,
    /// `None` once the particle has left the window.
    pub position: Option<i64>,
    /// Site and intra-site rank at the moment the tag was assigned.
    pub birth: (i64, u32),
    rank: u32,
}

/// The particle removed by [`Configuration::pop_next_jumper`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Jumper {
    pub class: ClassId,
    pub tag: Option<Tag>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Jumps out of the right end leave the window.
    Open,
    /// The right end feeds the left end.
    Periodic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    xmin: i64,
    xmax: i64,
    sites: Vec<SiteOccupancy>,
    registry: Vec<TagRecord>,
    tracked_first: Vec<Tag>,
    left_guard: usize,
    right_guard: usize,
    boundary: Boundary,
    light_cone_violated: bool,
    guard_arrivals: u64,
    exited_first: u64,
    exited_tags: Vec<Tag>,
    tag_reservoir_departures: bool,
}

impl Configuration {
    /// Empty configuration on `[xmin, xmax]` with `guard` sites of guard zone on each side.
    pub fn new(xmin: i64, xmax: i64, guard: usize) -> Result<Self> {
        if xmin >= xmax {
            return Err(Error::InvalidWindow { xmin, xmax });
        }
        let len = (xmax - xmin + 1) as usize;
        Ok(Configuration {
            xmin,
            xmax,
            sites: vec![SiteOccupancy::default(); len],
            registry: Vec::new(),
            tracked_first: Vec::new(),
            left_guard: guard.min(len),
            right_guard: guard.min(len),
            boundary: Boundary::Open,
            light_cone_violated: false,
            guard_arrivals: 0,
            exited_first: 0,
            exited_tags: Vec::new(),
            tag_reservoir_departures: false,
        })
    }

    /// Empty ring of sites `[xmin, xmax]`; no guard zones.
    pub fn periodic(xmin: i64, xmax: i64) -> Result<Self> {
        let mut c = Self::new(xmin, xmax, 0)?;
        c.boundary = Boundary::Periodic;
        Ok(c)
    }

    pub fn with_guards(mut self, left: usize, right: usize) -> Self {
        let len = self.sites.len();
        self.left_guard = left.min(len);
        self.right_guard = right.min(len);
        self
    }

    /// Mint a tag for every first-class particle leaving a reservoir site.
    pub fn with_reservoir_tags(mut self, on: bool) -> Self {
        self.tag_reservoir_departures = on;
        self
    }

    pub fn window(&self) -> (i64, i64) {
        (self.xmin, self.xmax)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.iter().all(SiteOccupancy::is_empty)
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn guards(&self) -> (usize, usize) {
        (self.left_guard, self.right_guard)
    }

    /// First site of the right guard zone (one past `xmax` when there is none).
    pub fn right_guard_start(&self) -> i64 {
        self.xmax - self.right_guard as i64 + 1
    }

    /// First site to the right of the left guard zone.
    pub fn protected_start(&self) -> i64 {
        self.xmin + self.left_guard as i64
    }

    pub fn light_cone_violated(&self) -> bool {
        self.light_cone_violated
    }

    pub fn guard_arrivals(&self) -> u64 {
        self.guard_arrivals
    }

    /// Raise the light-cone flag from an external certificate.
    pub fn flag_light_cone(&mut self) {
        self.light_cone_violated = true;
    }

    /// Anonymous first-class particles that left through the right end.
    pub fn exited_first_class(&self) -> u64 {
        self.exited_first
    }

    pub fn exited_tags(&self) -> &[Tag] {
        &self.exited_tags
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.xmin && x <= self.xmax
    }

    #[inline]
    pub(crate) fn index(&self, x: i64) -> Result<usize> {
        if !self.contains(x) {
            return Err(Error::SiteOutsideWindow {
                site: x,
                xmin: self.xmin,
                xmax: self.xmax,
            });
        }
        Ok((x - self.xmin) as usize)
    }

    pub fn site(&self, x: i64) -> Result<&SiteOccupancy> {
        let i = self.index(x)?;
        Ok(&self.sites[i])
    }

    pub(crate) fn site_at(&self, i: usize) -> &SiteOccupancy {
        &self.sites[i]
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, &SiteOccupancy)> {
        self.sites
            .iter()
            .enumerate()
            .map(move |(i, s)| (self.xmin + i as i64, s))
    }

    pub fn set_first_class(&mut self, x: i64, count: Count) -> Result<()> {
        let i = self.index(x)?;
        if self.tracked_first.iter().any(|t| self.registry[t.0 as usize].position == Some(x)) {
            return Err(Error::Invariant(format!(
                "site {x} holds a tagged first-class particle"
            )));
        }
        self.sites[i].first = count;
        Ok(())
    }

    /// Place a new higher-class particle at the back of its class segment.
    pub fn add_particle(&mut self, x: i64, class: ClassId) -> Result<Tag> {
        let i = self.index(x)?;
        if class.is_first() {
            let site = &mut self.sites[i];
            site.first = site.first.plus(1);
            let rank = site.first.finite().map_or(0, |n| n - 1);
            return self.tag_first_class(x, rank);
        }
        let tag = self.mint(class, x);
        self.sites[i].insert_higher(tag, class);
        let rank = self.sites[i]
            .higher
            .iter()
            .position(|&(t, _)| t == tag)
            .expect("just inserted") as u32;
        let rank = rank + self.sites[i].first.finite().unwrap_or(0);
        self.registry[tag.0 as usize].birth = (x, rank);
        Ok(tag)
    }

    /// Tag the first-class particle of queue rank `rank` (0 jumps next) at `x`.
    pub fn tag_first_class(&mut self, x: i64, rank: u32) -> Result<Tag> {
        let i = self.index(x)?;
        let n = match self.sites[i].first {
            Count::Finite(n) => n,
            Count::Infinite => {
                return Err(Error::Invariant(format!(
                    "cannot tag inside the reservoir at {x}"
                )))
            }
        };
        if rank >= n {
            return Err(Error::Invariant(format!(
                "rank {rank} but only {n} first-class particles at {x}"
            )));
        }
        if self.tracked_first.iter().any(|t| {
            let r = &self.registry[t.0 as usize];
            r.position == Some(x) && r.rank == rank
        }) {
            return Err(Error::Invariant(format!("rank {rank} at {x} already tagged")));
        }
        let tag = self.mint(ClassId::FIRST, x);
        let rec = &mut self.registry[tag.0 as usize];
        rec.rank = rank;
        rec.birth = (x, rank);
        self.tracked_first.push(tag);
        Ok(tag)
    }

    fn mint(&mut self, class: ClassId, x: i64) -> Tag {
        let tag = Tag(self.registry.len() as u32);
        self.registry.push(TagRecord {
            class,
            position: Some(x),
            birth: (x, 0),
            rank: 0,
        });
        tag
    }

    pub fn record(&self, tag: Tag) -> Result<&TagRecord> {
        self.registry
            .get(tag.0 as usize)
            .ok_or(Error::UnknownTag(tag.0))
    }

    pub fn position(&self, tag: Tag) -> Option<i64> {
        self.registry.get(tag.0 as usize).and_then(|r| r.position)
    }

    /// Every tag ever assigned, in assignment order.
    pub fn tags(&self) -> impl Iterator<Item = (Tag, &TagRecord)> {
        self.registry
            .iter()
            .enumerate()
            .map(|(i, r)| (Tag(i as u32), r))
    }

    pub fn tags_of_class(&self, class: ClassId) -> Vec<Tag> {
        self.tags()
            .filter(|(_, r)| r.class == class)
            .map(|(t, _)| t)
            .collect()
    }

    /// Removes and returns the occupant that jumps when the clock at `x` rings.
    pub fn pop_next_jumper(&mut self, x: i64) -> Result<Option<Jumper>> {
        let i = self.index(x)?;
        Ok(self.pop_at(i))
    }

    #[inline]
    pub(crate) fn pop_at(&mut self, i: usize) -> Option<Jumper> {
        let x = self.xmin + i as i64;
        match self.sites[i].first {
            Count::Infinite => {
                let tag = if self.tag_reservoir_departures {
                    let t = self.mint(ClassId::FIRST, x);
                    self.registry[t.0 as usize].birth = (x, 0);
                    Some(t)
                } else {
                    None
                };
                Some(Jumper {
                    class: ClassId::FIRST,
                    tag,
                })
            }
            Count::Finite(n) if n > 0 => {
                self.sites[i].first = Count::Finite(n - 1);
                let mut departing = None;
                if !self.tracked_first.is_empty() {
                    for t in &self.tracked_first {
                        let rec = &mut self.registry[t.0 as usize];
                        if rec.position == Some(x) {
                            if rec.rank == 0 {
                                departing = Some(*t);
                            } else {
                                rec.rank -= 1;
                            }
                        }
                    }
                }
                Some(Jumper {
                    class: ClassId::FIRST,
                    tag: departing,
                })
            }
            Count::Finite(_) => {
                if self.sites[i].higher.is_empty() {
                    None
                } else {
                    let (tag, class) = self.sites[i].higher.remove(0);
                    Some(Jumper {
                        class,
                        tag: Some(tag),
                    })
                }
            }
        }
    }

    /// Deposits a particle at `x`. Sites right of the window count as exits
    /// (or wrap around on a ring); arrivals inside the right guard raise the
    /// light-cone flag.
    pub fn push_arrival(&mut self, x: i64, class: ClassId, tag: Option<Tag>) -> Result<()> {
        if x < self.xmin {
            return Err(Error::SiteOutsideWindow {
                site: x,
                xmin: self.xmin,
                xmax: self.xmax,
            });
        }
        if x > self.xmax {
            if self.boundary == Boundary::Periodic {
                let len = self.sites.len() as i64;
                let wrapped = self.xmin + (x - self.xmin).rem_euclid(len);
                return self.push_arrival(wrapped, class, tag);
            }
            self.record_exit(class, tag);
            return Ok(());
        }
        let i = (x - self.xmin) as usize;
        self.push_at(i, class, tag);
        Ok(())
    }

    #[inline]
    pub(crate) fn push_at(&mut self, i: usize, class: ClassId, tag: Option<Tag>) {
        let x = self.xmin + i as i64;
        if self.right_guard > 0 && i >= self.sites.len() - self.right_guard {
            self.light_cone_violated = true;
            self.guard_arrivals += 1;
        }
        if class.is_first() {
            let site = &mut self.sites[i];
            match site.first {
                Count::Infinite => {
                    if let Some(t) = tag {
                        // absorbed by the reservoir, no longer individually tracked
                        let rec = &mut self.registry[t.0 as usize];
                        rec.position = Some(x);
                        rec.rank = u32::MAX;
                        self.tracked_first.retain(|&u| u != t);
                    }
                }
                Count::Finite(n) => {
                    site.first = Count::Finite(n + 1);
                    if let Some(t) = tag {
                        let rec = &mut self.registry[t.0 as usize];
                        rec.position = Some(x);
                        rec.rank = n;
                        if !self.tracked_first.contains(&t) {
                            self.tracked_first.push(t);
                        }
                    }
                }
            }
        } else {
            let t = match tag {
                Some(t) => t,
                None => self.mint(class, x),
            };
            self.registry[t.0 as usize].position = Some(x);
            self.sites[i].insert_higher(t, class);
        }
    }

    pub(crate) fn record_exit(&mut self, class: ClassId, tag: Option<Tag>) {
        match tag {
            Some(t) => {
                self.registry[t.0 as usize].position = None;
                self.tracked_first.retain(|&u| u != t);
                self.exited_tags.push(t);
            }
            None => {
                debug_assert!(class.is_first());
                self.exited_first += 1;
            }
        }
    }

    /// Finite particle count per class inside the window (reservoirs excluded).
    pub fn class_counts(&self) -> BTreeMap<ClassId, u64> {
        let mut out = BTreeMap::new();
        for s in &self.sites {
            if let Count::Finite(n) = s.first {
                if n > 0 {
                    *out.entry(ClassId::FIRST).or_insert(0) += n as u64;
                }
            }
            for &(_, c) in &s.higher {
                *out.entry(c).or_insert(0) += 1;
            }
        }
        out
    }

    pub fn has_reservoir(&self) -> bool {
        self.sites.iter().any(|s| s.first == Count::Infinite)
    }

    /// Site-wise partial order on aggregated totals.
    pub fn leq(&self, other: &Configuration) -> Result<bool> {
        self.check_same_window(other)?;
        Ok(self
            .sites
            .iter()
            .zip(&other.sites)
            .all(|(a, b)| a.total().le(b.total())))
    }

    pub(crate) fn check_same_window(&self, other: &Configuration) -> Result<()> {
        if self.window() != other.window() {
            return Err(Error::WindowMismatch(
                self.xmin, self.xmax, other.xmin, other.xmax,
            ));
        }
        Ok(())
    }

    /// Copy with every particle of class greater than `max_class` deleted.
    /// Tags of the remaining particles are preserved.
    pub fn censor_above(&self, max_class: ClassId) -> Configuration {
        let mut c = self.clone();
        for s in &mut c.sites {
            s.higher.retain(|&(_, cl)| cl <= max_class);
        }
        for rec in &mut c.registry {
            if rec.class > max_class {
                rec.position = None;
            }
        }
        c
    }

    /// Copy in which every particle is an anonymous first-class particle.
    pub fn ignore_classes(&self) -> Configuration {
        let mut c = self.clone();
        for s in &mut c.sites {
            let extra = s.higher.len();
            s.higher.clear();
            s.first = s.first.plus(extra);
        }
        c.registry.clear();
        c.tracked_first.clear();
        c.exited_tags.clear();
        c
    }

    /// Per-site aggregated totals, used for compact comparisons and printing.
    pub fn totals(&self) -> Vec<Count> {
        self.sites.iter().map(SiteOccupancy::total).collect()
    }
}
