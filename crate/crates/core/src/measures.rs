//! Initial distributions: Geometric / Bernoulli product measures, step
//! measures and the special starting states of the experiments, plus the
//! closed-form discrepancy masses.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hydro::Density;
use crate::lattice::{ClassId, Configuration, Count, Tag};

/// Draw from `P(k) = (rho/(1+rho))^k / (1+rho)` by exact inversion.
pub fn sample_geometric<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> Result<u32> {
    if !(rho >= 0.0) {
        return Err(Error::param("rho", "must be non-negative"));
    }
    if rho.is_infinite() {
        return Err(Error::param("rho", "infinite density uses the reservoir sentinel"));
    }
    if rho == 0.0 {
        return Ok(0);
    }
    let p = rho / (1.0 + rho);
    // U in (0, 1]; P(floor(ln U / ln p) >= k) = P(U <= p^k) = p^k
    let u = 1.0 - rng.random::<f64>();
    let k = (u.ln() / p.ln()).floor();
    if k >= u32::MAX as f64 {
        return Err(Error::Invariant("geometric draw overflows u32".into()));
    }
    Ok(k as u32)
}

pub fn sample_bernoulli<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<bool> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", "must lie in [0, 1]"));
    }
    Ok(rng.random::<f64>() < alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureKind {
    ZeroRangeGeometric,
    ExclusionBernoulli,
}

/// Product measure with density `rho` on sites `<= 0` and `lambda` on sites `> 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMeasureSpec {
    pub rho: Density,
    pub lambda: f64,
    pub kind: MeasureKind,
}

impl StepMeasureSpec {
    pub fn zero_range(rho: Density, lambda: f64) -> Result<Self> {
        Self::validated(rho, lambda, MeasureKind::ZeroRangeGeometric)
    }

    pub fn exclusion(rho: f64, lambda: f64) -> Result<Self> {
        Self::validated(Density::Finite(rho), lambda, MeasureKind::ExclusionBernoulli)
    }

    fn validated(rho: Density, lambda: f64, kind: MeasureKind) -> Result<Self> {
        if let Density::Finite(r) = rho {
            if !(r >= 0.0) {
                return Err(Error::param("rho", "must be non-negative"));
            }
        }
        if !(lambda >= 0.0) || lambda.is_infinite() {
            return Err(Error::param("lambda", "must be finite and non-negative"));
        }
        if kind == MeasureKind::ExclusionBernoulli {
            let ok = matches!(rho, Density::Finite(r) if r <= 1.0) && lambda <= 1.0;
            if !ok {
                return Err(Error::param("rho", "exclusion densities lie in [0, 1]"));
            }
        }
        Ok(StepMeasureSpec { rho, lambda, kind })
    }
}

fn draw<R: Rng + ?Sized>(density: Density, kind: MeasureKind, rng: &mut R) -> Result<Count> {
    match (kind, density) {
        (MeasureKind::ZeroRangeGeometric, Density::Infinite) => Ok(Count::Infinite),
        (MeasureKind::ZeroRangeGeometric, Density::Finite(r)) => {
            Ok(Count::Finite(sample_geometric(r, rng)?))
        }
        (MeasureKind::ExclusionBernoulli, Density::Finite(a)) => {
            Ok(Count::Finite(sample_bernoulli(a, rng)? as u32))
        }
        (MeasureKind::ExclusionBernoulli, Density::Infinite) => {
            Err(Error::param("rho", "exclusion densities lie in [0, 1]"))
        }
    }
}

/// Fills `[xmin, xmax]` from left to right with first-class particles.
pub fn sample_mu_rho_lambda<R: Rng + ?Sized>(
    spec: &StepMeasureSpec,
    xmin: i64,
    xmax: i64,
    rng: &mut R,
) -> Result<Configuration> {
    if xmin > 0 || xmax < 0 {
        return Err(Error::param("window", "must contain the origin"));
    }
    let mut c = Configuration::new(xmin, xmax, 0)?;
    for x in xmin..=xmax {
        let d = if x <= 0 {
            spec.rho
        } else {
            Density::Finite(spec.lambda)
        };
        c.set_first_class(x, draw(d, spec.kind, rng)?)?;
    }
    Ok(c)
}

/// Product measure with the same density everywhere on a ring.
pub fn sample_ring<R: Rng + ?Sized>(
    density: f64,
    kind: MeasureKind,
    len: i64,
    rng: &mut R,
) -> Result<Configuration> {
    let mut c = Configuration::periodic(0, len - 1)?;
    for x in 0..len {
        c.set_first_class(x, draw(Density::Finite(density), kind, rng)?)?;
    }
    Ok(c)
}

/// Step measure with `k` second-class particles and no first-class particle at
/// the origin. Tags are returned bottom-to-top, i.e. in jump order.
pub fn build_theorem1_config<R: Rng + ?Sized>(
    rho: f64,
    lambda: f64,
    k: usize,
    xmin: i64,
    xmax: i64,
    rng: &mut R,
) -> Result<(Configuration, Vec<Tag>)> {
    if k == 0 {
        return Err(Error::param("K", "need at least one second-class particle"));
    }
    if !(rho > lambda) {
        return Err(Error::param("rho", "rho must exceed lambda"));
    }
    let spec = StepMeasureSpec::zero_range(Density::Finite(rho), lambda)?;
    let mut c = sample_mu_rho_lambda(&spec, xmin, xmax, rng)?;
    c.set_first_class(0, Count::Finite(0))?;
    let tags = (0..k)
        .map(|_| c.add_particle(0, ClassId::SECOND))
        .collect::<Result<Vec<_>>>()?;
    Ok((c, tags))
}

/// Tags of the perturbed step state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MuStarTags {
    pub x1: Tag,
    pub x2: Tag,
    /// Distance from site -1 to the site where the tagged first-class particle starts.
    pub x1_gap: i64,
}

/// Background `lambda` everywhere, an extra Bernoulli(`rho - lambda`) particle on
/// each negative site, and one second-class particle at the origin. The front
/// first-class particle of the rightmost occupied negative site is tagged.
pub fn build_perturbed_mu_star<R: Rng + ?Sized>(
    rho: f64,
    lambda: f64,
    xmin: i64,
    xmax: i64,
    rng: &mut R,
) -> Result<(Configuration, MuStarTags)> {
    if !(rho > lambda) || lambda < 0.0 || !rho.is_finite() {
        return Err(Error::param("rho", "rho must exceed lambda"));
    }
    if rho - lambda > 1.0 {
        return Err(Error::param("rho", "rho−lambda ≤ 1 required"));
    }
    if xmin > -1 || xmax < 0 {
        return Err(Error::param("window", "must contain [-1, 0]"));
    }
    let mut c = Configuration::new(xmin, xmax, 0)?;
    for x in xmin..=xmax {
        let mut n = sample_geometric(lambda, rng)?;
        if x <= -1 && sample_bernoulli(rho - lambda, rng)? {
            n += 1;
        }
        c.set_first_class(x, Count::Finite(n))?;
    }
    let x2 = c.add_particle(0, ClassId::SECOND)?;
    let start = (xmin..=-1)
        .rev()
        .find(|&x| !c.site(x).map(|s| s.first_class().is_zero()).unwrap_or(true))
        .ok_or_else(|| Error::Invariant("no first-class particle left of the origin".into()))?;
    let x1 = c.tag_first_class(start, 0)?;
    Ok((
        c,
        MuStarTags {
            x1,
            x2,
            x1_gap: -1 - start,
        },
    ))
}

/// Reservoir on every negative site, a second-class particle at 0 and a
/// third-class particle at 1.
pub fn build_crossing_config(xmin: i64, xmax: i64) -> Result<(Configuration, Tag, Tag)> {
    if xmin > -1 || xmax < 1 {
        return Err(Error::param("window", "must contain [-1, 1]"));
    }
    let mut c = Configuration::new(xmin, xmax, 0)?;
    for x in xmin..=-1 {
        c.set_first_class(x, Count::Infinite)?;
    }
    let x2 = c.add_particle(0, ClassId::SECOND)?;
    let x3 = c.add_particle(1, ClassId::THIRD)?;
    Ok((c, x2, x3))
}

/// Reservoir on every negative site and a single second-class particle at the
/// origin (the infinite-to-empty step with the origin's first-class mass removed).
pub fn build_reservoir_second_class(xmin: i64, xmax: i64) -> Result<(Configuration, Tag)> {
    if xmin > -1 || xmax < 1 {
        return Err(Error::param("window", "must contain [-1, 1]"));
    }
    let mut c = Configuration::new(xmin, xmax, 0)?;
    for x in xmin..=-1 {
        c.set_first_class(x, Count::Infinite)?;
    }
    let x2 = c.add_particle(0, ClassId::SECOND)?;
    Ok((c, x2))
}

/// Mass of `k` stacked discrepancies under the coupled step measures:
/// `(1/(1+rho+lambda)) [(rho/(1+rho))^k - (lambda/(1+lambda))^k]`.
pub fn m_k(rho: f64, lambda: f64, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    let q = rho / (1.0 + rho);
    let r = lambda / (1.0 + lambda);
    Ok((q.powi(k as i32) - r.powi(k as i32)) / (1.0 + rho + lambda))
}

/// `sum_{k >= j} m_k = (1/(1+rho+lambda)) [rho^j/(1+rho)^{j-1} - lambda^j/(1+lambda)^{j-1}]`.
pub fn tail_mass(rho: f64, lambda: f64, j: u32) -> Result<f64> {
    if j == 0 {
        return Err(Error::param("j", "must be at least 1"));
    }
    let q = rho / (1.0 + rho);
    let r = lambda / (1.0 + lambda);
    let e = (j - 1) as i32;
    Ok((rho * q.powi(e) - lambda * r.powi(e)) / (1.0 + rho + lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ClockSchedule;

    fn rng() -> rand_chacha::ChaCha8Rng {
        ClockSchedule::new(123, 0).initial_rng()
    }

    #[test]
    fn geometric_edge_cases() {
        let mut r = rng();
        for _ in 0..100 {
            assert_eq!(sample_geometric(0.0, &mut r).unwrap(), 0);
        }
        assert!(sample_geometric(f64::INFINITY, &mut r).is_err());
        assert!(sample_geometric(-1.0, &mut r).is_err());
    }

    #[test]
    fn geometric_mean_and_atom() {
        let mut r = rng();
        let n = 1_000_000;
        let mut sum = 0u64;
        let mut zeros = 0u64;
        for _ in 0..n {
            let k = sample_geometric(1.0, &mut r).unwrap();
            sum += k as u64;
            zeros += (k == 0) as u64;
        }
        let mean = sum as f64 / n as f64;
        assert!((mean - 1.0).abs() < 0.005, "{mean}");
        let p0 = zeros as f64 / n as f64;
        assert!((p0 - 0.5).abs() < 0.002, "{p0}");
    }

    #[test]
    fn step_measures() {
        let mut r = rng();
        let s = StepMeasureSpec::zero_range(Density::Infinite, 0.0).unwrap();
        let c = sample_mu_rho_lambda(&s, -5, 5, &mut r).unwrap();
        for (x, site) in c.sites() {
            if x <= 0 {
                assert_eq!(site.first_class(), Count::Infinite);
            } else {
                assert!(site.is_empty());
            }
        }
        let s = StepMeasureSpec::exclusion(1.0, 0.0).unwrap();
        let c = sample_mu_rho_lambda(&s, -5, 5, &mut r).unwrap();
        for (x, site) in c.sites() {
            let expect = if x <= 0 { 1 } else { 0 };
            assert_eq!(site.first_class(), Count::Finite(expect));
        }
        assert!(StepMeasureSpec::exclusion(1.5, 0.0).is_err());
        assert!(sample_mu_rho_lambda(&s, 1, 5, &mut r).is_err());
    }

    #[test]
    fn flat_step_mean() {
        let mut r = rng();
        let s = StepMeasureSpec::zero_range(Density::Finite(2.0), 2.0).unwrap();
        let c = sample_mu_rho_lambda(&s, -50_000, 50_000, &mut r).unwrap();
        let total: u64 = c.class_counts().values().sum();
        let mean = total as f64 / c.len() as f64;
        // sd of the mean: sqrt(rho(1+rho)/n) ~ 0.0077
        assert!((mean - 2.0).abs() < 0.04, "{mean}");
    }

    #[test]
    fn theorem1_stack() {
        let (c, tags) = build_theorem1_config(1.0, 0.0, 3, -10, 10, &mut rng()).unwrap();
        let order: Vec<Tag> = c.site(0).unwrap().higher().iter().map(|p| p.0).collect();
        assert_eq!(order, tags);
        assert_eq!(c.site(0).unwrap().first_class(), Count::Finite(0));
        let (c1, t1) = build_theorem1_config(1.0, 0.0, 1, -10, 10, &mut rng()).unwrap();
        assert_eq!(t1.len(), 1);
        // background away from the origin is untouched by the edit
        let s = StepMeasureSpec::zero_range(Density::Finite(1.0), 0.0).unwrap();
        let plain = sample_mu_rho_lambda(&s, -10, 10, &mut rng()).unwrap();
        for x in (-10..=10).filter(|&x| x != 0) {
            assert_eq!(c1.site(x).unwrap(), plain.site(x).unwrap());
            assert_eq!(c.site(x).unwrap(), plain.site(x).unwrap());
        }
        assert!(build_theorem1_config(0.5, 1.0, 2, -3, 3, &mut rng()).is_err());
    }

    #[test]
    fn perturbed_step() {
        let mut r = rng();
        let (c, tags) = build_perturbed_mu_star(1.0, 0.0, -20, 20, &mut r).unwrap();
        for x in -20..=-1 {
            assert_eq!(c.site(x).unwrap().first_class(), Count::Finite(1));
        }
        assert_eq!(c.site(0).unwrap().first_class(), Count::Finite(0));
        assert_eq!(c.position(tags.x2), Some(0));
        assert_eq!(c.position(tags.x1), Some(-1));
        assert_eq!(tags.x1_gap, 0);
        assert!(build_perturbed_mu_star(2.0, 0.5, -5, 5, &mut r)
            .unwrap_err()
            .to_string()
            .contains("rho−lambda ≤ 1 required"));
    }

    #[test]
    fn perturbed_step_negative_mean() {
        let mut r = rng();
        let (c, _) = build_perturbed_mu_star(1.0, 0.5, -100_000, 1, &mut r).unwrap();
        let total: u64 = (-100_000..=-1)
            .map(|x| c.site(x).unwrap().first_class().finite().unwrap() as u64)
            .sum();
        let mean = total as f64 / 100_000.0;
        // variance per site 0.75 + 0.25 = 1, sd of mean ~ 0.0032
        assert!((mean - 1.0).abs() < 0.015, "{mean}");
        let mut origin_ok = true;
        for s in 0..200 {
            let mut r = ClockSchedule::new(s, 0).initial_rng();
            let (c, t) = build_perturbed_mu_star(1.0, 0.5, -30, 30, &mut r).unwrap();
            let h = c.site(0).unwrap().higher();
            origin_ok &= h.len() == 1 && h[0] == (t.x2, ClassId::SECOND);
        }
        assert!(origin_ok);
    }

    #[test]
    fn crossing_start() {
        let (mut c, x2, x3) = build_crossing_config(-3, 5).unwrap();
        let v: Vec<String> = (-2..=2).map(|x| c.site(x).unwrap().total().to_string()).collect();
        assert_eq!(v, vec!["INF", "INF", "1", "1", "0"]);
        assert_eq!(c.position(x3), Some(1));
        c.push_arrival(1, ClassId::SECOND, Some(x2)).unwrap();
        assert_eq!(c.pop_next_jumper(1).unwrap().unwrap().tag, Some(x2));
        let (mut c, x2, _) = build_crossing_config(-3, 5).unwrap();
        assert_eq!(c.pop_next_jumper(0).unwrap().unwrap().tag, Some(x2));
    }

    #[test]
    fn discrepancy_masses() {
        assert!((m_k(1.0, 0.0, 2).unwrap() - 0.125).abs() < 1e-15);
        for k in 1..10 {
            assert_eq!(m_k(1.0, 1.0, k).unwrap(), 0.0);
        }
        for &(rho, lam) in &[(1.0, 0.0), (2.0, 0.5), (0.3, 0.1)] {
            let total: f64 = (1..2000).map(|k| m_k(rho, lam, k).unwrap()).sum();
            assert!((total - (rho - lam) / (1.0 + rho + lam)).abs() < 1e-12);
            assert!((tail_mass(rho, lam, 1).unwrap() - total).abs() < 1e-12);
            for j in 1..20 {
                let direct: f64 = (j..3000).map(|k| m_k(rho, lam, k).unwrap()).sum();
                assert!((tail_mass(rho, lam, j).unwrap() - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn discrepancy_mass_monte_carlo() {
        // Independent A ~ Geom(rho), B ~ Geom(lambda): summing the product law
        // over B gives P(A - B = k) = q^k / (1 + rho + lambda), q = rho/(1+rho).
        let (rho, lam) = (1.0, 0.5);
        let mut r = rng();
        let n = 1_000_000;
        for k in 1..=3u32 {
            let mut hits = 0u64;
            for _ in 0..n {
                let a = sample_geometric(rho, &mut r).unwrap() as i64;
                let b = sample_geometric(lam, &mut r).unwrap() as i64;
                hits += (a - b == k as i64) as u64;
            }
            let p = hits as f64 / n as f64;
            let exact = (rho / (1.0 + rho)).powi(k as i32) / (1.0 + rho + lam);
            let se = (exact * (1.0 - exact) / n as f64).sqrt();
            assert!((p - exact).abs() < 4.0 * se + 1e-12, "k={k}: {p} vs {exact}");
        }
    }
}
