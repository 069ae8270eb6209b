//! First-order expansion of prices in the abatement scale `ε` for `f = ε·f₀`.
//!
//! Option prices satisfy `U^ε = U⁰ − ε·c + o(ε)` with
//!
//! ```text
//! c = E[ 1{u⁰(τ, E_τ) ≥ K} ∫ₜᵀ f₀(u⁰(s, E_s))·∂ₑu⁰(s∨τ, E_{s∨τ})·E_{s∨τ}/E_s ds ],
//! ```
//!
//! `E` the business-as-usual geometric Brownian motion. For `s < τ` the
//! integrand factors into `f₀(u⁰(s, E_s))/E_s` times `∂ₑu⁰(τ, E_τ)·E_τ`, so one
//! pass along each path suffices.
//!
//! The integrand blows up like `(T − s)^{−1/2}` at maturity. The trapezoidal
//! sum stops at the last lattice node before `T`; the missing piece is bounded
//! by `f₀(λ)·λ·2√h/(σ√(2π)·E_{T−h})` and reported separately.

use alloc::format;
use alloc::vec::Vec;

use crate::closed_form::{delta_unchecked, price_unchecked};
use crate::math::{ceil, exp, sqrt, SQRT_2PI};
use crate::model::{AbatementBase, MarketParams, OptionSpec};
use crate::par::map_indices;
use crate::rng::PathRng;
use crate::stats::McEstimate;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionReport {
    /// Zeroth-order price.
    pub u0_price: f64,
    /// Monte Carlo standard error of `u0_price`, 0 when it is exact.
    pub u0_standard_error: f64,
    /// Coefficient of `−ε`.
    pub correction: f64,
    pub mc_standard_error: f64,
    /// Bound on the part of the time integral beyond the last lattice node.
    pub tail_bound: f64,
    pub n_paths: usize,
}

impl ExpansionReport {
    fn default_with(n_paths: usize) -> Self {
        Self {
            u0_price: 0.0,
            u0_standard_error: 0.0,
            correction: 0.0,
            mc_standard_error: 0.0,
            tail_bound: 0.0,
            n_paths,
        }
    }

    /// `u0_price − ε·correction`.
    pub fn corrected_price(&self, epsilon: f64) -> f64 {
        self.u0_price - epsilon * self.correction
    }

    /// `|exact − (reference − ε·correction)|/ε`, the normalised remainder of the
    /// expansion around `reference`.
    pub fn remainder(&self, epsilon: f64, reference: f64, exact: f64) -> f64 {
        (exact - (reference - epsilon * self.correction)).abs() / epsilon
    }
}

/// Nodes `t = s₀ < … < s_m = τ` then `τ < … < T`, each part split evenly in
/// steps of at most `dt`.
fn lattice(t: f64, tau: f64, horizon: f64, dt: f64) -> Vec<f64> {
    let mut nodes = Vec::new();
    let mut push_part = |a: f64, b: f64| {
        if b > a {
            let m = (ceil((b - a) / dt - 1e-9) as usize).max(1);
            for k in 0..m {
                nodes.push(a + (b - a) * k as f64 / m as f64);
            }
        }
    };
    push_part(t, tau);
    push_part(tau, horizon);
    nodes.push(horizon);
    nodes
}

fn check_inputs(t: f64, e: f64, p: &MarketParams, n: usize, dt: f64) -> Result<()> {
    if !(e > 0.0) || !(t < p.horizon) || n == 0 || !(dt > 0.0) {
        return Err(Error::Domain(format!(
            "expansion needs e > 0, t < T, n > 0 and dt > 0 (got e = {e}, t = {t}, n = {n}, dt = {dt})"
        )));
    }
    Ok(())
}

struct PathTally {
    payoff: f64,
    integral: f64,
    tail: f64,
}

/// Walks one exact GBM path over `nodes`, returning the trapezoidal integral
/// split at node `split` into the part before (to be multiplied by the
/// factor at `split`) and after, the value at `split`, and the tail bound.
fn walk(
    p: &MarketParams,
    f0: &AbatementBase,
    nodes: &[f64],
    split: usize,
    e: f64,
    rng: &mut PathRng,
) -> (f64, f64, f64, f64) {
    let drift = p.drift - 0.5 * p.sigma * p.sigma;
    let last = nodes.len() - 2;
    let (mut before, mut after) = (0.0, 0.0);
    let (mut x, mut x_split) = (e, e);
    let mut prev_before = f0.eval(price_unchecked(nodes[0], e, p)) / e;
    let mut prev_after = 0.0;
    if split == 0 {
        prev_after = f0.eval(price_unchecked(nodes[0], e, p)) * delta_unchecked(nodes[0], e, p);
    }
    for k in 0..last {
        let h = nodes[k + 1] - nodes[k];
        x *= exp(drift * h + p.sigma * sqrt(h) * rng.normal());
        let s = nodes[k + 1];
        let fu = f0.eval(price_unchecked(s, x, p));
        if k < split {
            let cur = fu / x;
            before += 0.5 * h * (prev_before + cur);
            prev_before = cur;
        }
        if k + 1 == split {
            x_split = x;
        }
        if k + 1 >= split {
            let cur = fu * delta_unchecked(s, x, p);
            if k + 1 > split {
                after += 0.5 * h * (prev_after + cur);
            }
            prev_after = cur;
        }
    }
    let h_tail = nodes[last + 1] - nodes[last];
    let tail = f0.eval(p.penalty) * p.penalty * 2.0 * sqrt(h_tail) / (p.sigma * SQRT_2PI * x);
    (before, after, x_split, tail)
}

/// Monte Carlo estimate of the first-order coefficient of the option price.
#[allow(clippy::too_many_arguments)]
pub fn first_order_correction(
    t: f64,
    e: f64,
    p: &MarketParams,
    f0: &AbatementBase,
    opt: &OptionSpec,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<ExpansionReport> {
    check_inputs(t, e, p, n, dt)?;
    if !(t < opt.maturity && opt.maturity < p.horizon) {
        return Err(Error::Domain(format!("expansion needs t < τ < T (got t = {t}, τ = {})", opt.maturity)));
    }
    if opt.strike >= p.penalty {
        // u⁰ < λ, so the indicator never fires; rounding could make u⁰ = λ.
        return Ok(ExpansionReport::default_with(n));
    }
    let nodes = lattice(t, opt.maturity, p.horizon, dt);
    let split = nodes.iter().position(|&s| s == opt.maturity).expect("τ is a lattice node");
    let tallies: Vec<PathTally> = map_indices(n, |i| {
        let mut rng = PathRng::new(seed, i as u64);
        let (before, after, x_tau, tail) = walk(p, f0, &nodes, split, e, &mut rng);
        let u_tau = price_unchecked(opt.maturity, x_tau, p);
        if u_tau >= opt.strike {
            let factor = delta_unchecked(opt.maturity, x_tau, p) * x_tau;
            PathTally { payoff: u_tau - opt.strike, integral: before * factor + after, tail }
        } else {
            PathTally { payoff: 0.0, integral: 0.0, tail: 0.0 }
        }
    });
    let payoff: Vec<f64> = tallies.iter().map(|r| r.payoff).collect();
    let integral: Vec<f64> = tallies.iter().map(|r| r.integral).collect();
    let u0 = McEstimate::from_samples(&payoff);
    let c = McEstimate::from_samples(&integral);
    let tail = tallies.iter().map(|r| r.tail).sum::<f64>() / n as f64;
    Ok(ExpansionReport {
        u0_price: u0.mean,
        u0_standard_error: u0.standard_error,
        correction: c.mean,
        mc_standard_error: c.standard_error,
        tail_bound: tail,
        n_paths: n,
    })
}

/// Monte Carlo estimate of `E ∫ₜᵀ f₀(u⁰(s, E_s))·∂ₑu⁰(s, E_s) ds`, the leading
/// coefficient of `(u⁰ − u^ε)/ε`.
pub fn allowance_first_order_gap(
    t: f64,
    e: f64,
    p: &MarketParams,
    f0: &AbatementBase,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<ExpansionReport> {
    check_inputs(t, e, p, n, dt)?;
    let nodes = lattice(t, t, p.horizon, dt);
    let tallies: Vec<(f64, f64)> = map_indices(n, |i| {
        let mut rng = PathRng::new(seed, i as u64);
        let (_, after, _, tail) = walk(p, f0, &nodes, 0, e, &mut rng);
        (after, tail)
    });
    let integral: Vec<f64> = tallies.iter().map(|r| r.0).collect();
    let c = McEstimate::from_samples(&integral);
    Ok(ExpansionReport {
        u0_price: price_unchecked(t, e, p),
        u0_standard_error: 0.0,
        correction: c.mean,
        mc_standard_error: c.standard_error,
        tail_bound: tallies.iter().map(|r| r.1).sum::<f64>() / n as f64,
        n_paths: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::option_price_bau;

    #[test]
    fn lattice_contains_maturity_and_horizon() {
        let nodes = lattice(0.0, 0.25, 1.0, 0.1);
        assert!(nodes.contains(&0.25));
        assert_eq!(*nodes.last().unwrap(), 1.0);
        assert!(nodes.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.1 + 1e-12));
    }

    #[test]
    fn zero_feedback_gives_zero_correction() {
        let p = MarketParams::reference();
        let opt = OptionSpec::reference();
        let r = first_order_correction(0.0, 1.25, &p, &AbatementBase::Zero, &opt, 200, 0.01, 1).unwrap();
        assert_eq!(r.correction, 0.0);
        let g = allowance_first_order_gap(0.0, 1.25, &p, &AbatementBase::Zero, 200, 0.01, 1).unwrap();
        assert_eq!(g.correction, 0.0);
    }

    #[test]
    fn strike_above_penalty_never_fires() {
        let p = MarketParams::reference();
        let opt = OptionSpec { maturity: 0.25, strike: 1.0 };
        let f0 = AbatementBase::Linear { slope: 1.0 };
        let r = first_order_correction(0.0, 1.25, &p, &f0, &opt, 500, 0.01, 1).unwrap();
        assert_eq!(r.correction, 0.0);
        assert_eq!(r.u0_price, 0.0);
    }

    #[test]
    fn correction_is_positive_and_u0_matches_the_exact_sampler() {
        let p = MarketParams::reference();
        let opt = OptionSpec::reference();
        let f0 = AbatementBase::Linear { slope: 1.0 };
        let r = first_order_correction(0.0, 0.6, &p, &f0, &opt, 4_000, 0.01, 3).unwrap();
        assert!(r.correction > 0.0 && r.tail_bound >= 0.0);
        let direct = option_price_bau(0.0, 0.6, &p, &opt, 20_000, 4).unwrap();
        let se = (r.u0_standard_error.powi(2) + direct.standard_error.powi(2)).sqrt();
        assert!((r.u0_price - direct.mean).abs() <= 4.0 * se, "{r:?} vs {direct:?}");
        let g = allowance_first_order_gap(0.0, 0.6, &p, &f0, 2_000, 0.01, 3).unwrap();
        assert!(g.correction > 0.0);
    }

    #[test]
    fn correction_is_stable_under_dt_halving() {
        let p = MarketParams::reference();
        let opt = OptionSpec::reference();
        let f0 = AbatementBase::Linear { slope: 1.0 };
        let a = first_order_correction(0.0, 0.6, &p, &f0, &opt, 2_000, 0.004, 9).unwrap();
        let b = first_order_correction(0.0, 0.6, &p, &f0, &opt, 2_000, 0.002, 9).unwrap();
        let rel = (a.correction - b.correction).abs() / b.correction;
        assert!(rel < 0.01 + 3.0 * (a.mc_standard_error + b.mc_standard_error) / b.correction, "{rel}");
    }
}
