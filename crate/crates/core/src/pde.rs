//! Explicit monotone finite-difference solvers for the allowance price and for
//! European calls written on it.
//!
//! Both equations are solved in `x = ln e`:
//!
//! ```text
//! ∂ₜu + μ(t, x)·∂ₓu + ½σ²·∂ₓₓu = 0,   μ = b − σ²/2 − f(u)·e^{−x}.
//! ```
//!
//! The drift is differenced centrally, with the artificial diffusion raised to
//! `max(½σ² + ½μ²h, ½|μ|·dx)`. The first term is the Lax–Wendroff correction
//! that makes the scheme second order where the solution is smooth; the second
//! keeps both neighbour weights nonnegative, turning the stencil into a
//! one-sided upwind difference wherever the cell Péclet number demands it.
//! Every update is then a convex combination of three old values as soon as
//!
//! ```text
//! h ≤ dx² / (σ² + dx·max|μ|),
//! ```
//!
//! which is the rule certified before each step.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{ceil, exp, floor, ln};
use crate::model::{
    bilinear, AbatementMap, MarketParams, OptionSpec, SpaceCoordinate, SpaceTimeGrid, TerminalCondition, ValueSurface,
};
use crate::{Error, Result};

/// Values imposed on the first and last space node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// 0 at `x_min`, the ceiling at `x_max`: the limits of the price far below
    /// and far above the cap.
    #[default]
    DirichletLimits,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    /// Fraction in `(0, 1]` of the largest monotone step that may be used.
    pub stability_safety: f64,
    /// Largest number of equal substeps a solver may split one grid step into
    /// when the grid step is not monotone; 1 turns any violation into an error.
    pub max_substeps: usize,
    pub boundary_policy: BoundaryPolicy,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self { stability_safety: 1.0, max_substeps: 1, boundary_policy: BoundaryPolicy::DirichletLimits }
    }
}

impl SchemeConfig {
    pub fn with_substeps(max_substeps: usize) -> Self {
        Self { max_substeps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stability_safety > 0.0 && self.stability_safety <= 1.0) {
            return Err(Error::Invalid(format!("stability_safety must lie in (0, 1] (got {})", self.stability_safety)));
        }
        if self.max_substeps == 0 {
            return Err(Error::Invalid(String::from("max_substeps must be at least 1")));
        }
        Ok(())
    }
}

/// Largest monotone time step `safety·dx²/(diffusion + dx·drift)` for a
/// three-point stencil with second-order coefficient `diffusion/2` and first
/// order coefficient bounded by `drift`.
#[inline]
pub fn stable_dt(dx: f64, diffusion: f64, drift: f64, safety: f64) -> f64 {
    safety * dx * dx / (diffusion + dx * drift.abs())
}

/// A log-emission grid of `n_space` nodes and width `2·half_width`, centred on
/// 0 up to a shift of at most `dx/2` that puts `ln Λ` on a cell midpoint.
/// The terminal indicator then never sits on a node.
pub fn cap_centred_log_grid(
    p: &MarketParams,
    t0: f64,
    n_steps: usize,
    half_width: f64,
    n_space: usize,
) -> Result<SpaceTimeGrid> {
    if n_space < 3 || !(half_width > 0.0) {
        return Err(Error::Invalid(format!(
            "log grid needs half_width > 0 and at least three nodes (got {half_width}, {n_space})"
        )));
    }
    let dx = 2.0 * half_width / (n_space - 1) as f64;
    let k = floor((ln(p.cap) + half_width) / dx);
    let x_min = ln(p.cap) - (k + 0.5) * dx;
    let x_max = x_min + (n_space - 1) as f64 * dx;
    SpaceTimeGrid::new(SpaceCoordinate::LogEmission, t0, p.horizon, n_steps, x_min, x_max, n_space)
}

/// One monotone substep on the interior nodes. `drift(j, row)` returns `μ` at
/// node `j` given the old value there.
#[inline]
fn monotone_step(from: &[f64], to: &mut [f64], half_var: f64, dx: f64, h: f64, drift: impl Fn(usize, f64) -> f64) {
    let n = from.len();
    let inv_dx2 = 1.0 / (dx * dx);
    let inv_2dx = 0.5 / dx;
    for j in 1..n - 1 {
        let mu = drift(j, from[j]);
        let a = (half_var + 0.5 * mu * mu * h).max(0.5 * mu.abs() * dx);
        let lo = a * inv_dx2 - mu * inv_2dx;
        let hi = a * inv_dx2 + mu * inv_2dx;
        to[j] = from[j] + h * (lo * (from[j - 1] - from[j]) + hi * (from[j + 1] - from[j]));
    }
}

/// Split of one grid step into monotone substeps, or the stability error.
fn substeps(
    time_index: usize,
    dt: f64,
    dx: f64,
    diffusion: f64,
    max_drift: f64,
    cfg: &SchemeConfig,
) -> Result<(usize, f64)> {
    let bound = stable_dt(dx, diffusion, max_drift, cfg.stability_safety);
    if dt <= bound {
        return Ok((1, dt));
    }
    let m = ceil(dt / bound) as usize;
    if m > cfg.max_substeps {
        return Err(Error::Stability { time_index, dt, required_dt: bound });
    }
    Ok((m, dt / m as f64))
}

fn require_log_grid(grid: &SpaceTimeGrid) -> Result<()> {
    if grid.coordinate() != SpaceCoordinate::LogEmission {
        return Err(Error::Invalid(String::from("allowance equations are solved on a log-emission grid")));
    }
    Ok(())
}

/// Allowance price `u` on `grid`, marched backwards from `u(T) = term(e)`.
pub fn solve_allowance_pde(
    p: &MarketParams,
    f: &AbatementMap,
    grid: &SpaceTimeGrid,
    term: &TerminalCondition,
    cfg: &SchemeConfig,
) -> Result<ValueSurface> {
    cfg.validate()?;
    require_log_grid(grid)?;
    if let Some(v) = crate::model::invariant_violations(p, grid, f).first() {
        return Err(Error::Invalid(format!("{v}")));
    }
    let n = grid.n_space();
    let nt = grid.n_time();
    let ceiling = term.ceiling;
    let half_var = 0.5 * p.sigma * p.sigma;
    let base_drift = p.drift - half_var;
    let inv_e: Vec<f64> = (0..n).map(|j| exp(-grid.space(j))).collect();
    let mut values = vec![0.0; nt * n];
    {
        let last = &mut values[(nt - 1) * n..];
        for (j, v) in last.iter_mut().enumerate() {
            *v = term.eval(grid.emission(j));
        }
        last[0] = 0.0;
        last[n - 1] = ceiling;
    }
    let mut cur = values[(nt - 1) * n..].to_vec();
    let mut next = cur.clone();
    let dx = grid.dx();
    for i in (0..nt - 1).rev() {
        let h_grid = grid.time(i + 1) - grid.time(i);
        let mut remaining = 1usize;
        let mut h = h_grid;
        let mut done = 0usize;
        while done < remaining {
            let drift = |j: usize, u: f64| base_drift - f.eval(u) * inv_e[j];
            let max_mu = (1..n - 1).map(|j| drift(j, cur[j]).abs()).fold(0.0, f64::max);
            if done == 0 {
                let (m, hs) = substeps(i, h_grid, dx, p.sigma * p.sigma, max_mu, cfg)?;
                remaining = m;
                h = hs;
            } else if h > stable_dt(dx, p.sigma * p.sigma, max_mu, cfg.stability_safety) {
                return Err(Error::Stability {
                    time_index: i,
                    dt: h,
                    required_dt: stable_dt(dx, p.sigma * p.sigma, max_mu, cfg.stability_safety),
                });
            }
            monotone_step(&cur, &mut next, half_var, dx, h, drift);
            next[0] = 0.0;
            next[n - 1] = ceiling;
            core::mem::swap(&mut cur, &mut next);
            done += 1;
        }
        values[i * n..(i + 1) * n].copy_from_slice(&cur);
    }
    ValueSurface::new(*grid, values, ceiling)
}

/// Price surface of the call `(u(τ) − K)⁺` on `[t0, τ]`. The abatement drift is
/// frozen from the allowance surface `u`, whose grid must have `τ` as a node.
pub fn solve_option_pde(
    u: &ValueSurface,
    p: &MarketParams,
    f: &AbatementMap,
    opt: &OptionSpec,
    cfg: &SchemeConfig,
) -> Result<ValueSurface> {
    cfg.validate()?;
    let grid = u.grid();
    require_log_grid(grid)?;
    if let Some(v) = opt.violations(p).first() {
        return Err(Error::Invalid(format!("{v}")));
    }
    let tau_index =
        grid.time_index(opt.maturity).ok_or(Error::OffGrid { time: opt.maturity, t0: grid.t0(), dt: grid.dt() })?;
    if tau_index == 0 {
        return Err(Error::Invalid(String::from("option maturity coincides with the first grid time")));
    }
    let out_grid = grid.with_time(grid.t0(), opt.maturity, tau_index)?;
    let n = grid.n_space();
    let nt = tau_index + 1;
    let payoff_max = (p.penalty - opt.strike).max(0.0);
    let ceiling = if payoff_max > 0.0 { payoff_max } else { p.penalty };
    let mut values = vec![0.0; nt * n];
    if payoff_max == 0.0 {
        return ValueSurface::new(out_grid, values, ceiling);
    }
    let half_var = 0.5 * p.sigma * p.sigma;
    let base_drift = p.drift - half_var;
    let inv_e: Vec<f64> = (0..n).map(|j| exp(-grid.space(j))).collect();
    {
        let last = &mut values[tau_index * n..(tau_index + 1) * n];
        for (j, v) in last.iter_mut().enumerate() {
            *v = (u.at(tau_index, j) - opt.strike).max(0.0);
        }
        last[0] = 0.0;
        last[n - 1] = payoff_max;
    }
    let mut cur = values[tau_index * n..].to_vec();
    let mut next = cur.clone();
    let mut mu = vec![0.0; n];
    let dx = grid.dx();
    for i in (0..tau_index).rev() {
        let urow = u.row(i + 1);
        for j in 1..n - 1 {
            mu[j] = base_drift - f.eval(urow[j]) * inv_e[j];
        }
        let max_mu = mu[1..n - 1].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (m, h) = substeps(i, grid.time(i + 1) - grid.time(i), dx, p.sigma * p.sigma, max_mu, cfg)?;
        for _ in 0..m {
            monotone_step(&cur, &mut next, half_var, dx, h, |j, _| mu[j]);
            next[0] = 0.0;
            next[n - 1] = payoff_max;
            core::mem::swap(&mut cur, &mut next);
        }
        values[i * n..(i + 1) * n].copy_from_slice(&cur);
    }
    ValueSurface::new(out_grid, values, ceiling)
}

/// Space derivative of a surface in its own grid coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
}

impl Gradient {
    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_space() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n_space();
        &self.values[i * n..(i + 1) * n]
    }

    /// Derivative with respect to the emission level, undoing `x = ln e`.
    pub fn emission_derivative(&self, i: usize, j: usize) -> f64 {
        match self.grid.coordinate() {
            SpaceCoordinate::LogEmission => self.at(i, j) / self.grid.emission(j),
            SpaceCoordinate::Emission => self.at(i, j),
        }
    }

    /// Bilinear interpolation, clamped to the grid.
    #[inline]
    pub fn interpolate(&self, t: f64, x: f64) -> f64 {
        bilinear(&self.grid, &self.values, t, x)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Central differences inside, one-sided differences on the boundary columns.
pub fn surface_gradient(u: &ValueSurface) -> Gradient {
    let grid = *u.grid();
    let n = grid.n_space();
    let dx = grid.dx();
    let mut values = vec![0.0; grid.n_time() * n];
    for i in 0..grid.n_time() {
        let row = u.row(i);
        let out = &mut values[i * n..(i + 1) * n];
        out[0] = (row[1] - row[0]) / dx;
        out[n - 1] = (row[n - 1] - row[n - 2]) / dx;
        for j in 1..n - 1 {
            out[j] = (row[j + 1] - row[j - 1]) / (2.0 * dx);
        }
    }
    Gradient { grid, values }
}
