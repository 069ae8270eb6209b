//! Business-as-usual prices: with no abatement the emissions are a geometric
//! Brownian motion and the allowance price is a digital option on them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math::{erfc, exp, ln, sqrt, SQRT_2PI};
use crate::model::{MarketParams, OptionSpec};
use crate::par::map_indices;
use crate::rng::PathRng;
use crate::stats::McEstimate;
use crate::{Error, Result};

/// `Φ(x)`, accurate to the last few ulps through `erfc`.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / core::f64::consts::SQRT_2)
}

#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    exp(-0.5 * x * x) / SQRT_2PI
}

/// Standardised log-moneyness `d` with `u⁰ = λΦ(d)`.
#[inline]
fn moneyness(t: f64, e: f64, p: &MarketParams) -> (f64, f64) {
    let tau = p.horizon - t;
    let s = p.sigma * sqrt(tau);
    ((ln(e / p.cap) + p.drift * tau) / s - 0.5 * s, s)
}

fn check_time(t: f64, p: &MarketParams) -> Result<()> {
    if !(t < p.horizon) || !t.is_finite() {
        return Err(Error::Domain(format!(
            "closed form needs t < T = {} (got {t}); use the terminal indicator at maturity",
            p.horizon
        )));
    }
    Ok(())
}

/// `u⁰(t, e) = λ·Φ(ln(e·e^{b(T−t)}/Λ)/(σ√(T−t)) − σ√(T−t)/2)`, zero for `e ≤ 0`.
pub fn allowance_price_bau(t: f64, e: f64, p: &MarketParams) -> Result<f64> {
    check_time(t, p)?;
    Ok(price_unchecked(t, e, p))
}

#[inline]
pub(crate) fn price_unchecked(t: f64, e: f64, p: &MarketParams) -> f64 {
    if !(e > 0.0) {
        return 0.0;
    }
    p.penalty * std_normal_cdf(moneyness(t, e, p).0)
}

/// `∂ₑu⁰(t, e) = λ·φ(d)/(e·σ√(T−t))`, zero for `e ≤ 0`.
pub fn allowance_delta_bau(t: f64, e: f64, p: &MarketParams) -> Result<f64> {
    check_time(t, p)?;
    Ok(delta_unchecked(t, e, p))
}

#[inline]
pub(crate) fn delta_unchecked(t: f64, e: f64, p: &MarketParams) -> f64 {
    if !(e > 0.0) {
        return 0.0;
    }
    let (d, s) = moneyness(t, e, p);
    p.penalty * std_normal_pdf(d) / (e * s)
}

/// Bound on `√(T−t)·∂ₑu⁰(t, e)` at a fixed emission level: `λ/(e·σ·√(2π))`.
pub fn delta_bound_constant(e: f64, p: &MarketParams) -> f64 {
    p.penalty / (e * p.sigma * SQRT_2PI)
}

/// `U⁰(t, e) = E[(u⁰(τ, E⁰_τ) − K)⁺]` by exact lognormal sampling of `E⁰_τ`.
pub fn option_price_bau(
    t: f64,
    e: f64,
    p: &MarketParams,
    opt: &OptionSpec,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_paths == 0 {
        return Err(Error::Domain(String::from("option price needs at least one path")));
    }
    if !(t < opt.maturity) {
        return Err(Error::Domain(format!("option price needs t < maturity = {} (got {t})", opt.maturity)));
    }
    if !(e > 0.0) {
        return Err(Error::Domain(format!("emission level must be positive (got {e})")));
    }
    let dt = opt.maturity - t;
    let mu = (p.drift - 0.5 * p.sigma * p.sigma) * dt;
    let s = p.sigma * sqrt(dt);
    let payoffs: Vec<f64> = map_indices(n_paths, |i| {
        let z = PathRng::new(seed, i as u64).normal();
        let e_tau = e * exp(mu + s * z);
        (price_unchecked(opt.maturity, e_tau, p) - opt.strike).max(0.0)
    });
    Ok(McEstimate::from_samples(&payoffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Composite Simpson on [-12, x] of the density, an oracle independent of erfc.
    fn cdf_by_quadrature(x: f64) -> f64 {
        let (a, n) = (-12.0, 20_000);
        let h = (x - a) / n as f64;
        let mut s = std_normal_pdf(a) + std_normal_pdf(x);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * std_normal_pdf(a + k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn cdf_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.0) - cdf_by_quadrature(1.0)).abs() < 1e-12);
        assert!((std_normal_cdf(1.0) - 0.841_344_746_068_543).abs() < 1e-12);
        let tail = exp(-32.0) / (8.0 * SQRT_2PI);
        assert!(std_normal_cdf(-8.0) < tail && std_normal_cdf(-8.0) < 1e-14);
    }

    #[test]
    fn price_special_points() {
        let p = MarketParams::reference();
        assert_eq!(allowance_price_bau(0.0, 0.0, &p).unwrap(), 0.0);
        assert!(allowance_price_bau(0.0, 1e-300, &p).unwrap() < 1e-300);
        let t = 0.3;
        let tau = p.horizon - t;
        let e_half = p.cap * exp(-p.drift * tau + 0.5 * p.sigma * p.sigma * tau);
        assert!((allowance_price_bau(t, e_half, &p).unwrap() - 0.5).abs() < 1e-14);
        let direct = std_normal_cdf(2.5 / 0.3 - 0.15);
        assert!((allowance_price_bau(0.0, 1.25, &p).unwrap() - direct).abs() < 1e-15);
        assert!(allowance_price_bau(1.0, 1.0, &p).is_err());
    }

    #[test]
    fn delta_matches_finite_difference() {
        let p = MarketParams::reference();
        let (t, e, h) = (0.5, 1.0, 1e-5);
        let fd = (allowance_price_bau(t, e + h, &p).unwrap() - allowance_price_bau(t, e - h, &p).unwrap()) / (2.0 * h);
        let d = allowance_delta_bau(t, e, &p).unwrap();
        assert!(((fd - d) / d).abs() < 1e-6, "fd {fd} vs {d}");
        assert!(allowance_delta_bau(0.0, 40.0, &p).unwrap() < 1e-80);
        assert_eq!(allowance_delta_bau(0.0, -1.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn scaled_delta_stays_bounded_near_maturity() {
        let p = MarketParams::reference();
        let mut sup: f64 = 0.0;
        for k in 1..=400 {
            let t = 1.0 - 10f64.powf(-(k as f64) / 50.0);
            for j in 0..200 {
                let e = 0.5 + j as f64 * 0.01;
                let v = allowance_delta_bau(t, e, &p).unwrap() * sqrt(1.0 - t);
                assert!(v <= delta_bound_constant(e, &p) + 1e-12);
                sup = sup.max(v);
            }
        }
        assert!(sup.is_finite() && sup <= delta_bound_constant(0.5, &p));
    }

    #[test]
    fn option_limits() {
        let p = MarketParams::reference();
        let deep = OptionSpec { maturity: 0.25, strike: 1.0 };
        let est = option_price_bau(0.0, 1.25, &p, &deep, 1000, 1).unwrap();
        assert_eq!(est.mean, 0.0);
        let zero = OptionSpec { maturity: 0.25, strike: 0.0 };
        let e = 0.6;
        let est = option_price_bau(0.0, e, &p, &zero, 50_000, 2).unwrap();
        let u = allowance_price_bau(0.0, e, &p).unwrap();
        assert!(est.agrees_with(u, 3.0, 0.0), "{est:?} vs {u}");
        assert!(option_price_bau(0.0, 1.0, &p, &zero, 0, 1).is_err());
    }

    proptest! {
        #[test]
        fn cdf_symmetry(x in -30.0f64..30.0) {
            prop_assert!((std_normal_cdf(-x) - (1.0 - std_normal_cdf(x))).abs() < 1e-12);
        }

        #[test]
        fn price_scale_invariance(e in 0.01f64..5.0, c in 0.1f64..10.0, t in 0.0f64..0.99) {
            let p = MarketParams::reference();
            let q = MarketParams { cap: p.cap * c, ..p };
            let a = allowance_price_bau(t, e, &p).unwrap();
            let b = allowance_price_bau(t, e * c, &q).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn price_is_monotone_and_bounded(e in 0.0f64..5.0, de in 0.0f64..1.0, t in 0.0f64..0.999) {
            let p = MarketParams::reference();
            let a = allowance_price_bau(t, e, &p).unwrap();
            let b = allowance_price_bau(t, e + de, &p).unwrap();
            prop_assert!((0.0..=p.penalty).contains(&a));
            prop_assert!(b >= a);
            prop_assert!(allowance_delta_bau(t, e, &p).unwrap() >= 0.0);
        }
    }
}
