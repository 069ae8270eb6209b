//! Path simulation of the emission processes.
//!
//! Every path draws from its own counter-based stream keyed by
//! `(seed, path index)`, so a batch is bit-identical for any worker count.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math::{ceil, exp, ln, sqrt};
use crate::model::{AbatementMap, MarketParams, SpaceCoordinate, ValueSurface};
use crate::par::map_indices;
use crate::pde::Gradient;
use crate::rng::PathRng;
use crate::stats::{McEstimate, Proportion};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathScheme {
    ExactLognormal,
    Euler,
}

/// Terminal values of an ensemble of simulated paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub n_paths: usize,
    pub dt: f64,
    pub t0: f64,
    pub t_end: f64,
    pub terminal_values: Vec<f64>,
    pub seed: u64,
    pub scheme: PathScheme,
    /// Paths that left the space range of the driving surface at least once.
    pub clamped_paths: usize,
}

/// Step lengths covering `[t0, t_end]` in steps of `dt`, the last one shorter
/// if needed.
fn step_count(t0: f64, t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end > t0) {
        return Err(Error::Domain(format!("need dt > 0 and t0 < t_end (got {dt}, {t0}, {t_end})")));
    }
    let k = (t_end - t0) / dt;
    Ok((ceil(k - 1e-9) as usize).max(1))
}

#[inline]
fn step_bounds(t0: f64, t_end: f64, dt: f64, k: usize, n_steps: usize) -> (f64, f64) {
    let a = t0 + k as f64 * dt;
    let b = if k + 1 == n_steps { t_end } else { t0 + (k + 1) as f64 * dt };
    (a, b)
}

/// Exact sampling `E = e·exp((b − σ²/2)Δ + σ√Δ·Z)` of the geometric Brownian
/// motion at `t_end`.
pub fn simulate_gbm(p: &MarketParams, t: f64, e: f64, t_end: f64, n: usize, seed: u64) -> Result<PathBatch> {
    if !(e > 0.0) || !(t < t_end) {
        return Err(Error::Domain(format!("GBM needs e > 0 and t < t_end (got {e}, {t}, {t_end})")));
    }
    let d = t_end - t;
    let mu = (p.drift - 0.5 * p.sigma * p.sigma) * d;
    let s = p.sigma * sqrt(d);
    let terminal_values = map_indices(n, |i| e * exp(mu + s * PathRng::new(seed, i as u64).normal()));
    Ok(PathBatch {
        n_paths: n,
        dt: d,
        t0: t,
        t_end,
        terminal_values,
        seed,
        scheme: PathScheme::ExactLognormal,
        clamped_paths: 0,
    })
}

/// Euler–Maruyama for the geometric Brownian motion.
pub fn simulate_gbm_euler(
    p: &MarketParams,
    t: f64,
    e: f64,
    t_end: f64,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<PathBatch> {
    let n_steps = step_count(t, t_end, dt)?;
    let terminal_values = map_indices(n, |i| {
        let mut rng = PathRng::new(seed, i as u64);
        let mut x = e;
        for k in 0..n_steps {
            let (a, b) = step_bounds(t, t_end, dt, k, n_steps);
            let h = b - a;
            x += p.drift * x * h + p.sigma * x * sqrt(h) * rng.normal();
        }
        x
    });
    Ok(PathBatch { n_paths: n, dt, t0: t, t_end, terminal_values, seed, scheme: PathScheme::Euler, clamped_paths: 0 })
}

/// Forward dynamics driven by a solved surface.
#[derive(Debug, Clone)]
pub enum ForwardDynamics {
    /// `dĒ = −v(t, Ē)dt + (T − t)dW`, `T` the last time of the surface.
    Toy,
    /// `dĒ = −v(t, Ē)dt + σ₀dW`.
    ToyConstantNoise { sigma0: f64 },
    /// `dE = (bE − f(u(t, E)))dt + σE·dW` with `u` an allowance surface.
    Allowance { params: MarketParams, abatement: AbatementMap },
}

/// Draws `(ΔW, ∫(T − s)dW)` over `[a, b]` exactly: the pair is Gaussian and
/// `∫(T − s)dW = (T − m)ΔW + √(h³/12)·Z` with `m` the midpoint.
#[inline]
fn weighted_increment(rng: &mut PathRng, horizon: f64, a: f64, b: f64) -> (f64, f64) {
    let h = b - a;
    let dw = sqrt(h) * rng.normal();
    let z = rng.normal();
    (dw, (horizon - 0.5 * (a + b)) * dw + sqrt(h * h * h / 12.0) * z)
}

fn check_window(v: &ValueSurface, t0: f64) -> Result<()> {
    let g = v.grid();
    if t0 < g.t0() - 1e-12 || !(t0 < g.t_end()) {
        return Err(Error::Domain(format!("start time {t0} outside the surface window [{}, {})", g.t0(), g.t_end())));
    }
    Ok(())
}

/// Euler–Maruyama paths from `(t0, e)` to the last time of the surface `v`,
/// with the drift read from `v` by bilinear interpolation.
pub fn simulate_feedback_forward(
    v: &ValueSurface,
    t0: f64,
    e: f64,
    n: usize,
    dt: f64,
    seed: u64,
    dynamics: &ForwardDynamics,
) -> Result<PathBatch> {
    check_window(v, t0)?;
    let g = *v.grid();
    let horizon = g.t_end();
    let n_steps = step_count(t0, horizon, dt)?;
    let (lo, hi) = (g.x_min(), g.x_max());
    match dynamics {
        ForwardDynamics::Toy | ForwardDynamics::ToyConstantNoise { .. } => {
            if g.coordinate() != SpaceCoordinate::Emission {
                return Err(Error::Invalid(String::from("toy dynamics need a raw-emission surface")));
            }
        }
        ForwardDynamics::Allowance { params, .. } => {
            if g.coordinate() != SpaceCoordinate::LogEmission {
                return Err(Error::Invalid(String::from("allowance dynamics need a log-emission surface")));
            }
            if !(e > 0.0) || (params.horizon - horizon).abs() > 1e-12 {
                return Err(Error::Domain(String::from(
                    "allowance paths need e > 0 and a surface ending at the horizon",
                )));
            }
        }
    }
    let results: Vec<(f64, bool)> = map_indices(n, |i| {
        let mut rng = PathRng::new(seed, i as u64);
        let mut x = e;
        let mut clamped = false;
        for k in 0..n_steps {
            let (a, b) = step_bounds(t0, horizon, dt, k, n_steps);
            let h = b - a;
            match dynamics {
                ForwardDynamics::Toy => {
                    clamped |= x < lo || x > hi;
                    let (_, wi) = weighted_increment(&mut rng, horizon, a, b);
                    x += -v.interpolate(a, x) * h + wi;
                }
                ForwardDynamics::ToyConstantNoise { sigma0 } => {
                    clamped |= x < lo || x > hi;
                    x += -v.interpolate(a, x) * h + sigma0 * sqrt(h) * rng.normal();
                }
                ForwardDynamics::Allowance { params, abatement } => {
                    let u = if x > 0.0 {
                        let c = ln(x);
                        clamped |= c < lo || c > hi;
                        v.interpolate(a, c)
                    } else {
                        0.0
                    };
                    let dw = sqrt(h) * rng.normal();
                    x += (params.drift * x - abatement.eval(u)) * h + params.sigma * x * dw;
                }
            }
        }
        (x, clamped)
    });
    let clamped_paths = results.iter().filter(|r| r.1).count();
    Ok(PathBatch {
        n_paths: n,
        dt,
        t0,
        t_end: horizon,
        terminal_values: results.into_iter().map(|r| r.0).collect(),
        seed,
        scheme: PathScheme::Euler,
        clamped_paths,
    })
}

/// Fraction of terminal values in `[cap − window, cap + window]` with its 95%
/// Wilson interval.
pub fn terminal_mass_estimate(batch: &PathBatch, cap: f64, window: f64) -> Result<Proportion> {
    if !(window > 0.0) {
        return Err(Error::Domain(format!("window must be positive (got {window})")));
    }
    let hits = batch.terminal_values.iter().filter(|&&x| (x - cap).abs() <= window).count();
    Ok(Proportion::wilson(hits, batch.n_paths))
}

/// Counts of `values` in `bins` equal cells over `[lo, hi)`; values outside are
/// dropped.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut out = alloc::vec![0usize; bins];
    let w = (hi - lo) / bins as f64;
    for &x in values {
        if x >= lo && x < hi {
            let k = ((x - lo) / w) as usize;
            out[k.min(bins - 1)] += 1;
        }
    }
    out
}

/// Malliavin–Bismut estimate of `∂ₑv(t0, e)` for the toy model,
///
/// ```text
/// ∂ₑv(t0, e) = 2(T − t0)⁻²·E[(v(T − dt, Ē_{T−dt}) − v(t0, e))·Σ Jₙ ΔWₙ],
/// ```
///
/// where `J = ∂ₑĒ` solves `dJ = −∂ₑv(t, Ē)·J dt` and the sum runs over the
/// steps before `T − dt`. Subtracting the deterministic `v(t0, e)` leaves the
/// mean unchanged because the Wiener integral is centred.
pub fn malliavin_gradient_estimate(
    v: &ValueSurface,
    gradient: &Gradient,
    t0: f64,
    e: f64,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<McEstimate> {
    check_window(v, t0)?;
    let g = *v.grid();
    if g.coordinate() != SpaceCoordinate::Emission || !gradient.grid().same_as(&g) {
        return Err(Error::Invalid(String::from(
            "the gradient estimator needs a raw-emission surface and its own gradient",
        )));
    }
    let horizon = g.t_end();
    let stop = horizon - dt;
    if !(stop > t0) {
        return Err(Error::Domain(format!("need t0 < T - dt (got {t0}, {stop})")));
    }
    let n_steps = step_count(t0, stop, dt)?;
    let baseline = v.interpolate(t0, e);
    let scale = 2.0 / ((horizon - t0) * (horizon - t0));
    let samples = map_indices(n, |i| {
        let mut rng = PathRng::new(seed, i as u64);
        let (mut x, mut jac, mut weight) = (e, 1.0, 0.0);
        for k in 0..n_steps {
            let (a, b) = step_bounds(t0, stop, dt, k, n_steps);
            let h = b - a;
            let (dw, wi) = weighted_increment(&mut rng, horizon, a, b);
            weight += jac * dw;
            let slope = gradient.interpolate(a, x);
            x += -v.interpolate(a, x) * h + wi;
            jac *= exp(-slope * h);
        }
        scale * (v.interpolate(stop, x) - baseline) * weight
    });
    Ok(McEstimate::from_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::std_normal_cdf;
    use crate::model::{SpaceTimeGrid, TerminalCondition};
    use crate::stats::VarianceEstimate;

    fn flat(value: f64) -> ValueSurface {
        let g = SpaceTimeGrid::new(SpaceCoordinate::Emission, 0.0, 1.0, 10, -5.0, 5.0, 11).unwrap();
        ValueSurface::constant(g, value, 1.0).unwrap()
    }

    #[test]
    fn gbm_moments() {
        let p = MarketParams::reference();
        let (e, d) = (1.0, 0.5);
        let b = simulate_gbm(&p, 0.5, e, 1.0, 100_000, 11).unwrap();
        let m = McEstimate::from_samples(&b.terminal_values);
        assert!(m.agrees_with(e * exp(p.drift * d), 3.0, 0.0), "{m:?}");
        let var = VarianceEstimate::from_samples(&b.terminal_values);
        let exact = e * e * exp(2.0 * p.drift * d) * (exp(p.sigma * p.sigma * d) - 1.0);
        assert!((var.variance - exact).abs() <= 3.0 * var.standard_error, "{var:?} vs {exact}");
    }

    #[test]
    fn gbm_crossing_probability_matches_closed_form() {
        let p = MarketParams::reference();
        let b = simulate_gbm(&p, 0.0, 1.0, 1.0, 100_000, 5).unwrap();
        let hits = b.terminal_values.iter().filter(|&&x| x >= p.cap).count();
        let prop = Proportion::wilson(hits, b.n_paths);
        let d = (ln(1.0 / p.cap) + p.drift) / p.sigma - 0.5 * p.sigma;
        let exact = std_normal_cdf(d);
        let se = sqrt(exact * (1.0 - exact) / b.n_paths as f64);
        assert!((prop.estimate - exact).abs() <= 3.0 * se + 1e-12);
    }

    #[test]
    fn degenerate_volatility_is_deterministic() {
        let p = MarketParams { sigma: 1e-12, ..MarketParams::reference() };
        let b = simulate_gbm(&p, 0.0, 2.0, 0.4, 10, 3).unwrap();
        let target = 2.0 * exp(p.drift * 0.4);
        assert!(b.terminal_values.iter().all(|x| ((x - target) / target).abs() < 1e-10));
    }

    #[test]
    fn wiener_integral_variance() {
        let b = simulate_feedback_forward(&flat(0.0), 0.25, 0.0, 100_000, 0.01, 9, &ForwardDynamics::Toy).unwrap();
        let v = VarianceEstimate::from_samples(&b.terminal_values);
        let exact = 0.75f64.powi(3) / 3.0;
        assert!((v.variance - exact).abs() <= 3.0 * v.standard_error, "{v:?} vs {exact}");
        let shifted =
            simulate_feedback_forward(&flat(1.0), 0.25, 0.0, 100_000, 0.01, 9, &ForwardDynamics::Toy).unwrap();
        let m = McEstimate::from_samples(&shifted.terminal_values);
        assert!(m.agrees_with(-0.75, 3.0, 1e-12));
    }

    #[test]
    fn partial_last_step_reaches_the_horizon() {
        let b = simulate_feedback_forward(&flat(0.0), 0.0, 0.0, 20_000, 0.3, 4, &ForwardDynamics::Toy).unwrap();
        let v = VarianceEstimate::from_samples(&b.terminal_values);
        assert!((v.variance - 1.0 / 3.0).abs() <= 3.0 * v.standard_error);
    }

    #[test]
    fn batches_are_reproducible() {
        let s = flat(0.5);
        let a = simulate_feedback_forward(&s, 0.0, 0.1, 500, 0.01, 42, &ForwardDynamics::Toy).unwrap();
        let b = simulate_feedback_forward(&s, 0.0, 0.1, 500, 0.01, 42, &ForwardDynamics::Toy).unwrap();
        assert_eq!(a, b);
        let c = simulate_feedback_forward(&s, 0.0, 0.1, 500, 0.01, 43, &ForwardDynamics::Toy).unwrap();
        assert_ne!(a.terminal_values, c.terminal_values);
    }

    #[test]
    fn euler_mean_has_first_order_bias() {
        // The Euler mean of a GBM is exactly e·(1 + b·dt)^n.
        let p = MarketParams::reference();
        let exact = exp(p.drift * 0.5);
        let euler_mean = |dt: f64| (1.0 + p.drift * dt).powi((0.5 / dt).round() as i32);
        let b = simulate_gbm_euler(&p, 0.5, 1.0, 1.0, 50_000, 0.05, 1).unwrap();
        let m = McEstimate::from_samples(&b.terminal_values);
        assert!(m.agrees_with(euler_mean(0.05), 3.0, 0.0), "{m:?}");
        let ratio = (euler_mean(0.05) - exact) / (euler_mean(0.025) - exact);
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn window_covering_everything_catches_all_paths() {
        let b = simulate_feedback_forward(&flat(0.0), 0.0, 0.0, 1_000, 0.05, 2, &ForwardDynamics::Toy).unwrap();
        let m = terminal_mass_estimate(&b, 0.0, 1e6).unwrap();
        assert_eq!(m.estimate, 1.0);
        assert!(terminal_mass_estimate(&b, 0.0, 0.0).is_err());
    }

    #[test]
    fn constant_surface_has_zero_gradient_estimate() {
        let s = flat(0.3);
        let g = crate::pde::surface_gradient(&s);
        let est = malliavin_gradient_estimate(&s, &g, 0.0, 0.0, 2_000, 0.01, 6).unwrap();
        assert!(est.mean.abs() < 1e-12);
    }

    #[test]
    fn exits_are_counted() {
        let term = TerminalCondition::indicator(0.0, 1.0);
        let g = SpaceTimeGrid::new(SpaceCoordinate::Emission, 0.0, 1.0, 10, -0.2, 0.2, 5).unwrap();
        let v = ValueSurface::new(g, (0..55).map(|k| term.eval(-0.2 + 0.1 * (k % 5) as f64)).collect(), 1.0).unwrap();
        let b = simulate_feedback_forward(&v, 0.0, 0.0, 200, 0.05, 8, &ForwardDynamics::Toy).unwrap();
        assert!(b.clamped_paths > 0);
        assert!(b.clamped_paths <= b.n_paths);
    }
}
