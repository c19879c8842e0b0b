//! Closed-form hydrodynamics for decreasing step data: flux, characteristics,
//! rarefaction-fan entropy solutions and the limit laws derived from them.

use crate::error::{Error, Result};

/// A macroscopic density; the zero-range flux admits an infinite one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Density {
    Finite(f64),
    Infinite,
}

impl Density {
    pub fn finite(self) -> Option<f64> {
        match self {
            Density::Finite(r) => Some(r),
            Density::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Density::Infinite)
    }

    /// Strict order with `Infinite` above every finite density.
    pub fn gt(self, other: Density) -> bool {
        match (self, other) {
            (Density::Infinite, Density::Finite(_)) => true,
            (Density::Finite(a), Density::Finite(b)) => a > b,
            _ => false,
        }
    }
}

impl From<f64> for Density {
    fn from(r: f64) -> Self {
        if r.is_infinite() {
            Density::Infinite
        } else {
            Density::Finite(r)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flux {
    /// `phi(r) = r / (1 + r)`, the unit-rate zero-range flux.
    ZeroRange,
    /// `phi(r) = r (1 - r)`, the exclusion flux.
    Exclusion,
}

impl Flux {
    pub fn phi(self, rho: Density) -> f64 {
        match (self, rho) {
            (Flux::ZeroRange, Density::Infinite) => 1.0,
            (Flux::ZeroRange, Density::Finite(r)) => r / (1.0 + r),
            (Flux::Exclusion, Density::Finite(r)) => r * (1.0 - r),
            (Flux::Exclusion, Density::Infinite) => f64::NAN,
        }
    }

    pub fn phi_prime(self, rho: Density) -> f64 {
        match (self, rho) {
            (Flux::ZeroRange, Density::Infinite) => 0.0,
            (Flux::ZeroRange, Density::Finite(r)) => 1.0 / ((1.0 + r) * (1.0 + r)),
            (Flux::Exclusion, Density::Finite(r)) => 1.0 - 2.0 * r,
            (Flux::Exclusion, Density::Infinite) => f64::NAN,
        }
    }

    /// Inverse of `phi_prime`.
    pub fn psi(self, v: f64) -> Result<Density> {
        match self {
            Flux::ZeroRange => {
                if v <= 0.0 {
                    if v == 0.0 {
                        return Ok(Density::Infinite);
                    }
                    return Err(Error::param("v", "must lie in (0, 1]"));
                }
                if v > 1.0 {
                    return Err(Error::param("v", "must lie in (0, 1]"));
                }
                let s = v.sqrt();
                Ok(Density::Finite((1.0 - s) / s))
            }
            Flux::Exclusion => {
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::param("v", "must lie in [-1, 1]"));
                }
                Ok(Density::Finite((1.0 - v) / 2.0))
            }
        }
    }
}

pub fn phi(rho: Density) -> f64 {
    Flux::ZeroRange.phi(rho)
}

pub fn phi_prime(rho: Density) -> f64 {
    Flux::ZeroRange.phi_prime(rho)
}

/// `(1 - sqrt v) / sqrt v`; zero is rejected because the density there is infinite.
pub fn psi(v: f64) -> Result<f64> {
    if v == 0.0 {
        return Err(Error::param("v", "psi(0) is the infinite density"));
    }
    match Flux::ZeroRange.psi(v)? {
        Density::Finite(r) => Ok(r),
        Density::Infinite => unreachable!(),
    }
}

/// Entropy solution at `(t, u)` for step data `rho` on the left, `lambda` on the right.
pub fn entropy_solution(t: f64, u: f64, rho: Density, lambda: f64, flux: Flux) -> Result<Density> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::param("t", "must be positive"));
    }
    let lam = Density::Finite(lambda);
    if !rho.gt(lam) {
        return Err(Error::param("rho", "rho must exceed lambda"));
    }
    if flux == Flux::Exclusion && (rho.is_infinite() || rho.finite().unwrap() > 1.0 || lambda < 0.0) {
        return Err(Error::param("rho", "exclusion densities lie in [0, 1]"));
    }
    let left = flux.phi_prime(rho) * t;
    let right = flux.phi_prime(lam) * t;
    if u <= left {
        return Ok(rho);
    }
    if u >= right {
        return Ok(lam);
    }
    flux.psi(u / t)
}

/// Position at time `t` of the characteristic leaving `u0` with density `rho0`.
pub fn characteristic(u0: f64, rho0: Density, t: f64) -> f64 {
    u0 + phi_prime(rho0) * t
}

/// Limiting CDF of the rescaled second-class particle started from the
/// infinite-reservoir step: `sqrt(u)` on `[0, 1]`.
pub fn law_x_cdf(u: f64) -> f64 {
    u.clamp(0.0, 1.0).sqrt()
}

/// The same law written as `1 - phi(rho(1, u))` for the infinite-to-empty step.
pub fn law_x_cdf_identity(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let rho = entropy_solution(1.0, u, Density::Infinite, 0.0, Flux::ZeroRange)
        .expect("valid fan arguments");
    1.0 - phi(rho)
}

/// Limiting CDF of the rescaled second-class particle for a finite step:
/// `(rho - rho(1, u)) / (rho - lambda)` on `[phi'(rho), phi'(lambda)]`.
pub fn law_z_cdf(u: f64, rho: f64, lambda: f64) -> Result<f64> {
    law_z_cdf_with(u, rho, lambda, Flux::ZeroRange)
}

pub fn law_z_cdf_with(u: f64, rho: f64, lambda: f64, flux: Flux) -> Result<f64> {
    if rho.is_nan() || lambda.is_nan() || rho <= lambda || rho.is_infinite() {
        return Err(Error::param("rho", "rho must exceed lambda and be finite"));
    }
    let lo = flux.phi_prime(Density::Finite(rho));
    let hi = flux.phi_prime(Density::Finite(lambda));
    if u <= lo {
        return Ok(0.0);
    }
    if u >= hi {
        return Ok(1.0);
    }
    let r = entropy_solution(1.0, u, Density::Finite(rho), lambda, flux)?
        .finite()
        .expect("finite inside the fan");
    Ok(((rho - r) / (rho - lambda)).clamp(0.0, 1.0))
}

/// Right-hand side of the weighted moving-bond identity: `(1 + rho + lambda)(rho(1, u) - lambda)`.
pub fn theorem1_rhs(u: f64, rho: f64, lambda: f64) -> Result<f64> {
    let r = entropy_solution(1.0, u, Density::Finite(rho), lambda, Flux::ZeroRange)?
        .finite()
        .expect("finite step");
    Ok((1.0 + rho + lambda) * (r - lambda))
}

/// Asymptotic mean current seen by the second-class particle in the perturbed
/// step: `1 + 2/(rho-lambda) ln((1+lambda)/(1+rho)) + 1/((1+lambda)(1+rho))`.
pub fn theorem4_mean_current(rho: f64, lambda: f64) -> Result<f64> {
    if !(rho > lambda) || !rho.is_finite() || lambda < 0.0 {
        return Err(Error::param("rho", "rho must exceed lambda"));
    }
    let d = rho - lambda;
    let tail = 1.0 / ((1.0 + lambda) * (1.0 + rho));
    // ln((1+l)/(1+r)) = -ln_1p(d/(1+l)), accurate for close densities.
    let log_term = -2.0 * (d / (1.0 + lambda)).ln_1p() / d;
    Ok(1.0 + log_term + tail)
}

/// The same mean current by adaptive quadrature of
/// `(1 - sqrt u)^2 / (2 (rho - lambda) u^{3/2})` over the fan.
pub fn theorem4_mean_current_quadrature(rho: f64, lambda: f64) -> Result<f64> {
    if !(rho > lambda) || !rho.is_finite() || lambda < 0.0 {
        return Err(Error::param("rho", "rho must exceed lambda"));
    }
    let a = phi_prime(Density::Finite(rho));
    let b = phi_prime(Density::Finite(lambda));
    let d = rho - lambda;
    let f = |u: f64| {
        let s = u.sqrt();
        (1.0 - s) * (1.0 - s) / (2.0 * d * u * s)
    };
    Ok(adaptive_simpson(&f, a, b, 1e-12, 50))
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

/// Law of the limiting rescaled current `(1 - sqrt X)^2` with `X ~ sqrt(u)`:
/// `P(. <= a) = sqrt(a)`.
pub fn law_j2_cdf(a: f64) -> f64 {
    a.clamp(0.0, 1.0).sqrt()
}

/// Mean of the law in [`law_j2_cdf`].
pub const LAW_J2_MEAN: f64 = 1.0 / 3.0;

/// Uniform CDF on `[lo, hi]`; a point mass when the interval is degenerate.
pub fn uniform_cdf(u: f64, lo: f64, hi: f64) -> f64 {
    if u < lo {
        0.0
    } else if u >= hi {
        1.0
    } else {
        (u - lo) / (hi - lo)
    }
}
