//! Domain types shared by every solver: market parameters, abatement maps,
//! grids, terminal data and solved value surfaces.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::equilibrium::CostFunction;
use crate::math::{exp, floor, ln, round};
use crate::{Error, Result};

/// Parameters of the allowance market: BAU emission drift and volatility of
/// the geometric Brownian motion, the penalty per uncovered unit and the cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Drift rate `b` (1/year).
    pub drift: f64,
    /// Volatility `σ` (year^-1/2).
    pub sigma: f64,
    /// Penalty `λ` per excess emission unit.
    pub penalty: f64,
    /// Emission cap `Λ`.
    pub cap: f64,
    /// Length `T` of the compliance period (years).
    pub horizon: f64,
}

impl MarketParams {
    /// λ = 1, Λ = 1.25, σ = 0.3, T = 1 and b = 2Λ/T.
    pub fn reference() -> Self {
        let cap = 1.25;
        let horizon = 1.0;
        Self { drift: 2.0 * cap / horizon, sigma: 0.3, penalty: 1.0, cap, horizon }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_positive(&mut out, "sigma", self.sigma);
        check_positive(&mut out, "penalty", self.penalty);
        check_positive(&mut out, "cap", self.cap);
        check_positive(&mut out, "horizon", self.horizon);
        if !self.drift.is_finite() {
            out.push(Violation::new("drift", "drift must be finite"));
        }
        out
    }
}

fn check_positive(out: &mut Vec<Violation>, field: &'static str, value: f64) {
    if !(value.is_finite() && value > 0.0) {
        out.push(Violation::new(field, format!("{field} must be positive (got {value})")));
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl Violation {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self { field, message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }
}

/// Shape `f₀` of the abatement feedback, before scaling by `ε`.
#[derive(Clone)]
pub enum AbatementBase {
    /// `f₀ ≡ 0` (infinite abatement cost).
    Zero,
    /// `f₀(y) = slope·y` (quadratic abatement costs).
    Linear { slope: f64 },
    /// `f₀(y) = Σ (cᵢ')⁻¹(y)` over firms.
    InverseMarginals(Vec<CostFunction>),
    /// Any other non-decreasing map.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl AbatementBase {
    pub fn eval(&self, price: f64) -> f64 {
        match self {
            AbatementBase::Zero => 0.0,
            AbatementBase::Linear { slope } => slope * price,
            AbatementBase::InverseMarginals(costs) => {
                costs.iter().map(|c| c.inverse_marginal(price).unwrap_or(f64::NAN)).sum()
            }
            AbatementBase::Custom(f) => f(price),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, AbatementBase::Zero) || matches!(self, AbatementBase::Linear { slope } if *slope == 0.0)
    }
}

impl fmt::Debug for AbatementBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbatementBase::Zero => write!(f, "Zero"),
            AbatementBase::Linear { slope } => write!(f, "Linear {{ slope: {slope} }}"),
            AbatementBase::InverseMarginals(c) => f.debug_tuple("InverseMarginals").field(c).finish(),
            AbatementBase::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// The abatement rate `f = ε·f₀` entering the forward drift.
#[derive(Debug, Clone)]
pub struct AbatementMap {
    pub base: AbatementBase,
    pub epsilon: f64,
    pub lipschitz_bound: f64,
}

/// Sample count used when invariants of a map are checked by evaluation.
const MAP_SAMPLES: usize = 257;

impl AbatementMap {
    pub fn new(base: AbatementBase, epsilon: f64, lipschitz_bound: f64) -> Self {
        Self { base, epsilon, lipschitz_bound }
    }

    /// `f ≡ 0`, business as usual.
    pub fn none() -> Self {
        Self::new(AbatementBase::Zero, 0.0, 1.0)
    }

    /// `f(y) = ε·y`.
    pub fn linear(epsilon: f64) -> Self {
        Self::new(AbatementBase::Linear { slope: 1.0 }, epsilon, epsilon.max(f64::MIN_POSITIVE))
    }

    /// `ε·f₀` with the Lipschitz bound estimated from difference quotients on
    /// `[0, price_max]`.
    pub fn scaled(base: AbatementBase, epsilon: f64, price_max: f64) -> Self {
        let mut map = Self::new(base, epsilon, 1.0);
        let l = map.sampled_lipschitz(price_max);
        map.lipschitz_bound = if l > 0.0 { l } else { f64::MIN_POSITIVE };
        map
    }

    #[inline]
    pub fn eval(&self, price: f64) -> f64 {
        if self.epsilon == 0.0 {
            0.0
        } else {
            self.epsilon * self.base.eval(price)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.epsilon == 0.0 || self.base.is_zero()
    }

    fn sampled_lipschitz(&self, price_max: f64) -> f64 {
        let h = price_max / (MAP_SAMPLES - 1) as f64;
        let mut best: f64 = 0.0;
        let mut prev = self.eval(0.0);
        for k in 1..MAP_SAMPLES {
            let cur = self.eval(k as f64 * h);
            best = best.max((cur - prev).abs() / h);
            prev = cur;
        }
        best
    }

    /// Invariant checks on `[0, price_max]`: `f(0) = 0`, strict increase (unless
    /// the map is identically zero) and the declared Lipschitz bound.
    pub fn violations(&self, price_max: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            out.push(Violation::new("epsilon", "epsilon must be nonnegative"));
            return out;
        }
        if !(self.lipschitz_bound > 0.0) {
            out.push(Violation::new("lipschitz_bound", "lipschitz_bound must be positive"));
        }
        let f0 = self.eval(0.0);
        if f0.abs() > 1e-12 {
            out.push(Violation::new("abatement", format!("f(0) must vanish (got {f0})")));
        }
        if self.is_zero() {
            return out;
        }
        let h = price_max / (MAP_SAMPLES - 1) as f64;
        let mut prev = f0;
        for k in 1..MAP_SAMPLES {
            let y = k as f64 * h;
            let cur = self.eval(y);
            if !cur.is_finite() || cur <= prev {
                out.push(Violation::new(
                    "abatement",
                    format!("f must be strictly increasing on [0, {price_max}] (fails near {y})"),
                ));
                break;
            }
            let q = (cur - prev) / h;
            if q > self.lipschitz_bound * (1.0 + 1e-9) {
                out.push(Violation::new(
                    "abatement",
                    format!("difference quotient {q} exceeds lipschitz_bound {}", self.lipschitz_bound),
                ));
                break;
            }
            prev = cur;
        }
        out
    }
}

/// Which variable the space axis of a grid carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceCoordinate {
    /// `x = ln e`, used for the geometric Brownian emission model.
    LogEmission,
    /// `x = e`, used for the degenerate toy model.
    Emission,
}

/// A uniform time × space lattice. Time nodes are `t0 + i·dt`, `i < n_time`;
/// space nodes are `x_min + j·dx`, `j < n_space`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeGrid {
    t0: f64,
    t_end: f64,
    dt: f64,
    x_min: f64,
    x_max: f64,
    dx: f64,
    n_time: usize,
    n_space: usize,
    coordinate: SpaceCoordinate,
}

/// Relative tolerance for "is an integer number of steps".
const LATTICE_TOL: f64 = 1e-9;

impl SpaceTimeGrid {
    /// Grid with `n_steps` time steps and `n_space` space nodes.
    pub fn new(
        coordinate: SpaceCoordinate,
        t0: f64,
        t_end: f64,
        n_steps: usize,
        x_min: f64,
        x_max: f64,
        n_space: usize,
    ) -> Result<Self> {
        if n_steps == 0 || n_space < 3 {
            return Err(Error::Invalid(format!(
                "grid needs at least one time step and three space nodes (got {n_steps}, {n_space})"
            )));
        }
        if !(t_end > t0) || !(x_max > x_min) {
            return Err(Error::Invalid(String::from("grid bounds must be increasing")));
        }
        Ok(Self {
            t0,
            t_end,
            dt: (t_end - t0) / n_steps as f64,
            x_min,
            x_max,
            dx: (x_max - x_min) / (n_space - 1) as f64,
            n_time: n_steps + 1,
            n_space,
            coordinate,
        })
    }

    /// Grid from explicit spacings; both ranges must hold a whole number of
    /// cells.
    pub fn from_spacing(
        coordinate: SpaceCoordinate,
        t0: f64,
        t_end: f64,
        dt: f64,
        x_min: f64,
        x_max: f64,
        dx: f64,
    ) -> Result<Self> {
        if !(dt > 0.0) || !(dx > 0.0) {
            return Err(Error::Invalid(String::from("dt and dx must be positive")));
        }
        let steps = (t_end - t0) / dt;
        let cells = (x_max - x_min) / dx;
        if (steps - round(steps)).abs() > LATTICE_TOL * steps.max(1.0) {
            return Err(Error::Invalid(format!("(t_end - t0)/dt = {steps} is not an integer")));
        }
        if (cells - round(cells)).abs() > LATTICE_TOL * cells.max(1.0) {
            return Err(Error::Invalid(format!("(x_max - x_min)/dx = {cells} is not an integer")));
        }
        Self::new(coordinate, t0, t_end, round(steps) as usize, x_min, x_max, round(cells) as usize + 1)
    }

    /// Same space axis, different time window and step count.
    pub fn with_time(&self, t0: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        Self::new(self.coordinate, t0, t_end, n_steps, self.x_min, self.x_max, self.n_space)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn t_end(&self) -> f64 {
        self.t_end
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn n_time(&self) -> usize {
        self.n_time
    }
    pub fn n_space(&self) -> usize {
        self.n_space
    }
    pub fn n_steps(&self) -> usize {
        self.n_time - 1
    }
    pub fn coordinate(&self) -> SpaceCoordinate {
        self.coordinate
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.n_time {
            self.t_end
        } else {
            self.t0 + i as f64 * self.dt
        }
    }

    #[inline]
    pub fn space(&self, j: usize) -> f64 {
        if j + 1 == self.n_space {
            self.x_max
        } else {
            self.x_min + j as f64 * self.dx
        }
    }

    /// Emission level at space node `j` (undoes the log transform if any).
    #[inline]
    pub fn emission(&self, j: usize) -> f64 {
        self.to_emission(self.space(j))
    }

    #[inline]
    pub fn to_emission(&self, x: f64) -> f64 {
        match self.coordinate {
            SpaceCoordinate::LogEmission => exp(x),
            SpaceCoordinate::Emission => x,
        }
    }

    /// Grid coordinate of an emission level; `None` for `e <= 0` on a log grid.
    #[inline]
    pub fn to_coordinate(&self, e: f64) -> Option<f64> {
        match self.coordinate {
            SpaceCoordinate::LogEmission => (e > 0.0).then(|| ln(e)),
            SpaceCoordinate::Emission => Some(e),
        }
    }

    /// Index of the time node at `t`, if there is one.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let k = (t - self.t0) / self.dt;
        let r = round(k);
        if (k - r).abs() <= 1e-7 && r >= 0.0 && (r as usize) < self.n_time {
            Some(r as usize)
        } else {
            None
        }
    }

    /// Nearest space node.
    pub fn nearest_space_index(&self, x: f64) -> usize {
        let k = round((x - self.x_min) / self.dx);
        (k.max(0.0) as usize).min(self.n_space - 1)
    }

    pub(crate) fn same_as(&self, other: &SpaceTimeGrid) -> bool {
        self.coordinate == other.coordinate
            && self.n_time == other.n_time
            && self.n_space == other.n_space
            && (self.t0 - other.t0).abs() <= 1e-12
            && (self.t_end - other.t_end).abs() <= 1e-12
            && (self.x_min - other.x_min).abs() <= 1e-12
            && (self.x_max - other.x_max).abs() <= 1e-12
    }

    /// Bracketing cell `(j0, w)` for linear interpolation in space: value is
    /// `(1−w)·row[j0] + w·row[j0+1]`. Points beyond the ends clamp.
    #[inline]
    pub(crate) fn space_cell(&self, x: f64) -> (usize, f64) {
        let s = (x - self.x_min) / self.dx;
        if !(s > 0.0) {
            return (0, 0.0);
        }
        let last = (self.n_space - 2) as f64;
        if s >= last + 1.0 {
            return (self.n_space - 2, 1.0);
        }
        let j0 = floor(s).min(last);
        (j0 as usize, s - j0)
    }

    /// Same for time.
    #[inline]
    pub(crate) fn time_cell(&self, t: f64) -> (usize, f64) {
        let s = (t - self.t0) / self.dt;
        if !(s > 0.0) {
            return (0, 0.0);
        }
        let last = (self.n_time - 2) as f64;
        if s >= last + 1.0 {
            return (self.n_time - 2, 1.0);
        }
        let i0 = floor(s).min(last);
        (i0 as usize, s - i0)
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let steps = (self.t_end - self.t0) / self.dt;
        if (steps - (self.n_time - 1) as f64).abs() > LATTICE_TOL * steps.max(1.0) {
            out.push(Violation::new("dt", format!("(t_end - t0)/dt = {steps} is not an integer")));
        }
        let cells = (self.x_max - self.x_min) / self.dx;
        if (cells - (self.n_space - 1) as f64).abs() > LATTICE_TOL * cells.max(1.0) {
            out.push(Violation::new("dx", format!("(x_max - x_min)/dx = {cells} is not an integer")));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalKind {
    /// `ceiling·1[e ≥ threshold]`, equal to the ceiling at the threshold itself.
    Indicator,
    /// Linear rise from 0 at `threshold − half_width` to the ceiling at
    /// `threshold + half_width`.
    Ramp { half_width: f64 },
}

/// Terminal data of the backward equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalCondition {
    pub kind: TerminalKind,
    pub threshold: f64,
    pub ceiling: f64,
}

impl TerminalCondition {
    pub fn indicator(threshold: f64, ceiling: f64) -> Self {
        Self { kind: TerminalKind::Indicator, threshold, ceiling }
    }

    pub fn ramp(threshold: f64, half_width: f64, ceiling: f64) -> Result<Self> {
        if !(half_width >= 0.0) {
            return Err(Error::Invalid(format!("ramp half width must be nonnegative (got {half_width})")));
        }
        if half_width == 0.0 {
            return Ok(Self::indicator(threshold, ceiling));
        }
        Ok(Self { kind: TerminalKind::Ramp { half_width }, threshold, ceiling })
    }

    pub fn half_width(&self) -> f64 {
        match self.kind {
            TerminalKind::Indicator => 0.0,
            TerminalKind::Ramp { half_width } => half_width,
        }
    }

    /// Left edge `Λ⁻`: the data vanish at and below it.
    pub fn lower_edge(&self) -> f64 {
        self.threshold - self.half_width()
    }

    /// Right edge `Λ⁺`: the data equal the ceiling at and above it.
    pub fn upper_edge(&self) -> f64 {
        self.threshold + self.half_width()
    }

    #[inline]
    pub fn eval(&self, e: f64) -> f64 {
        match self.kind {
            TerminalKind::Indicator => {
                if e >= self.threshold {
                    self.ceiling
                } else {
                    0.0
                }
            }
            TerminalKind::Ramp { half_width } => {
                let s = (e - self.threshold + half_width) / (2.0 * half_width);
                self.ceiling * s.clamp(0.0, 1.0)
            }
        }
    }

    /// Exact `∫ (self − other) de` over the real line. Both data are symmetric
    /// steps about their thresholds, so the widths drop out.
    pub fn integral_difference(&self, other: &TerminalCondition) -> Result<f64> {
        if (self.ceiling - other.ceiling).abs() > 1e-15 * self.ceiling.abs().max(1.0) {
            return Err(Error::Invalid(String::from(
                "difference of terminal data with distinct ceilings is not integrable",
            )));
        }
        Ok(self.ceiling * (other.threshold - self.threshold))
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_positive(&mut out, "ceiling", self.ceiling);
        if !self.threshold.is_finite() {
            out.push(Violation::new("threshold", "threshold must be finite"));
        }
        if let TerminalKind::Ramp { half_width } = self.kind {
            if !(half_width >= 0.0 && half_width.is_finite()) {
                out.push(Violation::new("ramp_half_width", "ramp half width must be nonnegative"));
            }
        }
        out
    }
}

/// European call on the allowance forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    /// Maturity `τ`, strictly inside `(0, T)`.
    pub maturity: f64,
    /// Strike `K ≥ 0`.
    pub strike: f64,
}

impl OptionSpec {
    /// τ = 0.25, K = 0.86.
    pub fn reference() -> Self {
        Self { maturity: 0.25, strike: 0.86 }
    }

    pub fn violations(&self, params: &MarketParams) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.maturity > 0.0 && self.maturity < params.horizon) {
            out.push(Violation::new(
                "maturity",
                format!("maturity must lie in (0, {}) (got {})", params.horizon, self.maturity),
            ));
        }
        if !(self.strike >= 0.0 && self.strike.is_finite()) {
            out.push(Violation::new("strike", format!("strike must be nonnegative (got {})", self.strike)));
        }
        out
    }
}

/// Solution values on a grid, row-major in (time, space).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
    ceiling: f64,
}

impl ValueSurface {
    pub fn new(grid: SpaceTimeGrid, values: Vec<f64>, ceiling: f64) -> Result<Self> {
        if values.len() != grid.n_time() * grid.n_space() {
            return Err(Error::Invalid(format!(
                "surface needs {} values, got {}",
                grid.n_time() * grid.n_space(),
                values.len()
            )));
        }
        if !(ceiling > 0.0) {
            return Err(Error::Invalid(String::from("value ceiling must be positive")));
        }
        Ok(Self { grid, values, ceiling })
    }

    /// Constant surface, handy for tests and degenerate inputs.
    pub fn constant(grid: SpaceTimeGrid, value: f64, ceiling: f64) -> Result<Self> {
        Self::new(grid, alloc::vec![value; grid.n_time() * grid.n_space()], ceiling)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn ceiling(&self) -> f64 {
        self.ceiling
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n_space();
        &self.values[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_space() + j]
    }

    /// Bilinear interpolation at `(t, x)` in grid coordinates, clamped to the
    /// grid (the boundary columns hold the exact limits).
    pub fn interpolate(&self, t: f64, x: f64) -> f64 {
        bilinear(&self.grid, &self.values, t, x)
    }

    /// Linear interpolation in space on row `i`.
    pub fn interpolate_row(&self, i: usize, x: f64) -> f64 {
        let (j0, w) = self.grid.space_cell(x);
        let row = self.row(i);
        (1.0 - w) * row[j0] + w * row[j0 + 1]
    }

    /// Range `[0, ceiling]` and monotonicity in space, up to `tol`.
    pub fn violations(&self, tol: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        for i in 0..self.grid.n_time() {
            let row = self.row(i);
            if let Some((j, v)) = row.iter().enumerate().find(|(_, v)| !(**v >= -tol && **v <= self.ceiling + tol)) {
                out.push(Violation::new("values", format!("value {v} at ({i}, {j}) outside [0, {}]", self.ceiling)));
                break;
            }
            if let Some(j) = row.windows(2).position(|w| w[1] < w[0] - tol) {
                out.push(Violation::new("values", format!("row {i} decreases between space nodes {j} and {}", j + 1)));
                break;
            }
        }
        out
    }
}

#[inline]
pub(crate) fn bilinear(grid: &SpaceTimeGrid, values: &[f64], t: f64, x: f64) -> f64 {
    let n = grid.n_space();
    let (i0, wt) = grid.time_cell(t);
    let (j0, wx) = grid.space_cell(x);
    let r0 = &values[i0 * n..];
    let r1 = &values[(i0 + 1) * n..];
    let a = (1.0 - wx) * r0[j0] + wx * r0[j0 + 1];
    let b = (1.0 - wx) * r1[j0] + wx * r1[j0 + 1];
    (1.0 - wt) * a + wt * b
}

/// Checks every type invariant plus the monotonicity bound of the scheme that
/// will run on `grid`. On a log-emission grid the bound uses the BAU drift
/// `b − σ²/2`; the abatement part of the drift depends on the solution and is
/// certified step by step by the solver. On an emission grid the toy-model
/// bound with diffusion `(T − t0)²` and wave speed 1 applies.
pub fn validate(params: &MarketParams, grid: &SpaceTimeGrid, f: &AbatementMap) -> ValidationReport {
    let mut violations = invariant_violations(params, grid, f);
    if violations.iter().all(|v| v.field != "sigma" && v.field != "dt" && v.field != "dx") {
        let (diffusion, drift) = match grid.coordinate() {
            SpaceCoordinate::LogEmission => {
                (params.sigma * params.sigma, (params.drift - 0.5 * params.sigma * params.sigma).abs())
            }
            SpaceCoordinate::Emission => {
                let s = grid.t_end() - grid.t0();
                (s * s, 1.0)
            }
        };
        let bound = crate::pde::stable_dt(grid.dx(), diffusion, drift, 1.0);
        if grid.dt() > bound {
            violations.push(Violation::new(
                "dt",
                format!(
                    "dt = {:e} violates the monotonicity bound {:e} (ratio {:.4})",
                    grid.dt(),
                    bound,
                    grid.dt() / bound
                ),
            ));
        }
    }
    ValidationReport { violations }
}

/// Everything [`validate`] checks except the scheme bound.
pub(crate) fn invariant_violations(params: &MarketParams, grid: &SpaceTimeGrid, f: &AbatementMap) -> Vec<Violation> {
    let mut violations = params.violations();
    violations.extend(f.violations(params.penalty.max(0.0)));
    violations.extend(grid.violations());
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_grid(n_steps: usize) -> SpaceTimeGrid {
        SpaceTimeGrid::new(SpaceCoordinate::LogEmission, 0.0, 1.0, n_steps, -5.0, 5.0, 1001).unwrap()
    }

    #[test]
    fn reference_setup_is_valid() {
        let p = MarketParams::reference();
        assert_eq!(p.drift, 2.5);
        let report = validate(&p, &reference_grid(2000), &AbatementMap::linear(1.0));
        assert!(report.is_valid(), "{:?}", report);
    }

    #[test]
    fn zero_sigma_is_rejected() {
        let p = MarketParams { sigma: 0.0, ..MarketParams::reference() };
        let report = validate(&p, &reference_grid(2000), &AbatementMap::none());
        assert!(report.mentions("sigma must be positive"));
    }

    #[test]
    fn oversized_time_step_reports_ratio() {
        let p = MarketParams::reference();
        let grid = reference_grid(250);
        // dx = 0.01, bound = dx² / (σ² + dx·|b − σ²/2|)
        let bound = 1e-4 / (0.09 + 0.01 * 2.455);
        let report = validate(&p, &grid, &AbatementMap::none());
        assert!(!report.is_valid());
        let ratio = (1.0 / 250.0) / bound;
        assert!(report.mentions(&format!("ratio {ratio:.4}")), "{:?}", report);
    }

    #[test]
    fn non_integral_spacing_is_rejected() {
        let err = SpaceTimeGrid::from_spacing(SpaceCoordinate::Emission, 0.0, 1.0, 0.3, 0.0, 1.0, 0.1);
        assert!(err.is_err());
        let ok = SpaceTimeGrid::from_spacing(SpaceCoordinate::Emission, 0.0, 1.0, 0.25, 0.0, 1.0, 0.1).unwrap();
        assert_eq!(ok.n_time(), 5);
        assert_eq!(ok.n_space(), 11);
    }

    #[test]
    fn indicator_is_closed_on_the_right() {
        let g = TerminalCondition::indicator(1.25, 1.0);
        assert_eq!(g.eval(1.25), 1.0);
        assert_eq!(g.eval(1.25 - 1e-12), 0.0);
    }

    #[test]
    fn ramp_integral_difference_is_exact() {
        let a = TerminalCondition::ramp(0.0, 0.02, 1.0).unwrap();
        let b = TerminalCondition::ramp(0.1, 0.01, 1.0).unwrap();
        assert!((a.integral_difference(&b).unwrap() - 0.1).abs() < 1e-15);
        let c = TerminalCondition::ramp(0.0, 0.01, 2.0).unwrap();
        assert!(a.integral_difference(&c).is_err());
    }

    #[test]
    fn abatement_checks() {
        assert!(AbatementMap::linear(0.5).violations(1.0).is_empty());
        assert!(AbatementMap::none().violations(1.0).is_empty());
        let shifted = AbatementMap::new(AbatementBase::Custom(Arc::new(|y| y + 1.0)), 1.0, 1.0);
        assert!(!shifted.violations(1.0).is_empty());
        let flat = AbatementMap::new(AbatementBase::Custom(Arc::new(|y: f64| y.min(0.5))), 1.0, 1.0);
        assert!(!flat.violations(1.0).is_empty());
        let steep = AbatementMap::new(AbatementBase::Linear { slope: 3.0 }, 1.0, 1.0);
        assert!(!steep.violations(1.0).is_empty());
        let est = AbatementMap::scaled(AbatementBase::Linear { slope: 3.0 }, 0.5, 1.0);
        assert!((est.lipschitz_bound - 1.5).abs() < 1e-12);
    }

    #[test]
    fn surface_checks_catch_range_and_order() {
        let grid = SpaceTimeGrid::new(SpaceCoordinate::Emission, 0.0, 1.0, 1, 0.0, 1.0, 3).unwrap();
        let ok = ValueSurface::new(grid, alloc::vec![0.0, 0.5, 1.0, 0.0, 0.2, 1.0], 1.0).unwrap();
        assert!(ok.violations(0.0).is_empty());
        let bad = ValueSurface::new(grid, alloc::vec![0.0, 0.5, 0.4, 0.0, 0.2, 1.0], 1.0).unwrap();
        assert!(!bad.violations(0.0).is_empty());
        let high = ValueSurface::new(grid, alloc::vec![0.0, 0.5, 1.1, 0.0, 0.2, 1.0], 1.0).unwrap();
        assert!(!high.violations(0.0).is_empty());
        assert!((ok.interpolate(0.5, 0.75) - 0.5 * (0.75 + 0.6)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn narrower_ramp_dominates_right_of_threshold(
            eta in 1e-3f64..1.0, shrink in 0.01f64..0.99, d in -2.0f64..2.0
        ) {
            let wide = TerminalCondition::ramp(0.7, eta, 1.0).unwrap();
            let narrow = TerminalCondition::ramp(0.7, eta * shrink, 1.0).unwrap();
            let e = 0.7 + d;
            let (w, n) = (wide.eval(e), narrow.eval(e));
            prop_assert!((0.0..=1.0).contains(&w) && (0.0..=1.0).contains(&n));
            if e >= 0.7 { prop_assert!(n >= w - 1e-15); } else { prop_assert!(n <= w + 1e-15); }
        }

        #[test]
        fn terminal_data_are_non_decreasing(eta in 0.0f64..0.5, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let g = TerminalCondition::ramp(0.0, eta, 2.0).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(g.eval(lo) <= g.eval(hi));
        }
    }
}
