//! The degenerate toy model
//!
//! ```text
//! ∂ₜv + ½(T−t)²·∂ₑₑv − v·∂ₑv = 0,   v(T, ·) = φ,
//! ```
//!
//! a viscous Burgers equation whose viscosity vanishes at maturity, and
//! numerical checks of its gradient bound, boundary envelopes and
//! conservation law.
//!
//! In reversed time `s = T − t` the equation reads `∂ₛv + ∂ₑ(v²/2) = a·∂ₑₑv`
//! with `a = s²/2`. Since `0 ≤ v ≤ 1` the characteristic speed is
//! nonnegative, so the upwind flux through the face `j − ½` is `v_{j−1}²/2`.
//! The update is then conservative and monotone under
//!
//! ```text
//! h ≤ dx² / (2a + dx·max v).
//! ```

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{ceil, exp, ln, powf, round};
use crate::model::{SpaceCoordinate, SpaceTimeGrid, TerminalCondition, ValueSurface};
use crate::pde::SchemeConfig;
use crate::{Error, Result};

/// Second-order coefficient of the toy equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToyDiffusion {
    /// `½(T − t)²`, degenerate at maturity.
    Degenerate,
    /// `½σ₀²`, uniformly elliptic.
    Constant { sigma0: f64 },
}

impl ToyDiffusion {
    /// Coefficient `a` of `∂ₑₑv` at time-to-maturity `s`.
    #[inline]
    fn coefficient(&self, s: f64) -> f64 {
        match *self {
            ToyDiffusion::Degenerate => 0.5 * s * s,
            ToyDiffusion::Constant { sigma0 } => 0.5 * sigma0 * sigma0,
        }
    }
}

/// Raw-emission grid on `[t0, horizon]` with `cap` on a node and
/// `half_cells` cells on either side.
pub fn cap_centred_grid(
    t0: f64,
    horizon: f64,
    n_steps: usize,
    cap: f64,
    dx: f64,
    half_cells: usize,
) -> Result<SpaceTimeGrid> {
    if half_cells == 0 || !(dx > 0.0) {
        return Err(Error::Invalid(String::from("toy grid needs dx > 0 and at least one cell per side")));
    }
    let w = half_cells as f64 * dx;
    SpaceTimeGrid::new(SpaceCoordinate::Emission, t0, horizon, n_steps, cap - w, cap + w, 2 * half_cells + 1)
}

/// Largest monotone step of the toy scheme.
#[inline]
pub fn toy_stable_dt(dx: f64, a: f64, v_max: f64, safety: f64) -> f64 {
    safety * dx * dx / (2.0 * a + dx * v_max)
}

/// Solves the degenerate toy equation with ceiling-1 terminal data.
pub fn solve_toy_pde(grid: &SpaceTimeGrid, term: &TerminalCondition, cfg: &SchemeConfig) -> Result<ValueSurface> {
    solve_toy_pde_with(grid, term, cfg, ToyDiffusion::Degenerate)
}

/// Solves the toy equation with the given diffusion. Each grid step is split
/// into the fewest equal substeps that keep the scheme monotone, up to
/// `cfg.max_substeps`.
pub fn solve_toy_pde_with(
    grid: &SpaceTimeGrid,
    term: &TerminalCondition,
    cfg: &SchemeConfig,
    diffusion: ToyDiffusion,
) -> Result<ValueSurface> {
    cfg.validate()?;
    if grid.coordinate() != SpaceCoordinate::Emission {
        return Err(Error::Invalid(String::from("the toy model is solved in raw emission")));
    }
    if term.ceiling != 1.0 {
        return Err(Error::Invalid(format!("toy terminal data must have ceiling 1 (got {})", term.ceiling)));
    }
    if let Some(v) = grid.violations().first() {
        return Err(Error::Invalid(format!("{v}")));
    }
    let n = grid.n_space();
    let nt = grid.n_time();
    let horizon = grid.t_end();
    let dx = grid.dx();
    let mut values = vec![0.0; nt * n];
    {
        let last = &mut values[(nt - 1) * n..];
        for (j, v) in last.iter_mut().enumerate() {
            *v = term.eval(grid.space(j));
        }
    }
    let (left, right) = (values[(nt - 1) * n], values[nt * n - 1]);
    let mut cur = values[(nt - 1) * n..].to_vec();
    let mut next = cur.clone();
    for i in (0..nt - 1).rev() {
        let (t_lo, t_hi) = (grid.time(i), grid.time(i + 1));
        let h_grid = t_hi - t_lo;
        let v_max = cur.iter().copied().fold(0.0, f64::max);
        let a_max = diffusion.coefficient(horizon - t_lo);
        let bound = toy_stable_dt(dx, a_max, v_max, cfg.stability_safety);
        let m = if h_grid <= bound { 1 } else { ceil(h_grid / bound) as usize };
        if m > cfg.max_substeps {
            return Err(Error::Stability { time_index: i, dt: h_grid, required_dt: bound });
        }
        let h = h_grid / m as f64;
        let lam = h / dx;
        for k in 0..m {
            let s_mid = horizon - (t_hi - (k as f64 + 0.5) * h);
            let mu = diffusion.coefficient(s_mid) * h / (dx * dx);
            for j in 1..n - 1 {
                let flux = 0.5 * lam * (cur[j] * cur[j] - cur[j - 1] * cur[j - 1]);
                next[j] = cur[j] - flux + mu * (cur[j + 1] - 2.0 * cur[j] + cur[j - 1]);
            }
            next[0] = left;
            next[n - 1] = right;
            core::mem::swap(&mut cur, &mut next);
        }
        values[i * n..(i + 1) * n].copy_from_slice(&cur);
    }
    ValueSurface::new(*grid, values, 1.0)
}

/// `ψ((e − Λ)/(T − t))` with `ψ(x) = 1 ∧ x⁺`.
pub fn inviscid_profile(t: f64, e: f64, cap: f64, horizon: f64) -> Result<f64> {
    if !(t < horizon) {
        return Err(Error::Domain(format!("inviscid profile needs t < T = {horizon} (got {t})")));
    }
    Ok(((e - cap) / (horizon - t)).clamp(0.0, 1.0))
}

/// Times to maturity of the envelope lattice.
pub const ENVELOPE_TIMES: [f64; 3] = [0.5, 0.25, 0.1];
/// Offsets `δ` of the envelope lattice.
pub const ENVELOPE_DELTAS: [f64; 3] = [0.05, 0.1, 0.2];

/// Largest envelope constant for the Gaussian bound on a Brownian integral
/// with variance `(T−t)³/3`: `c = 3/2`.
pub const GAUSSIAN_ENVELOPE_CONSTANT: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    /// Time to maturity `T − t`.
    pub time_to_maturity: f64,
    pub delta: f64,
    /// `v(t, Λ⁺ + T − t + δ)`.
    pub upper_value: f64,
    /// `v(t, Λ⁻ − δ)`.
    pub lower_value: f64,
    /// Largest `c` for which the lower bound on `upper_value` holds.
    pub upper_constant: f64,
    /// Largest `c` for which the upper bound on `lower_value` holds.
    pub lower_constant: f64,
    /// Both inequalities hold with the probe constant.
    pub holds_at_probe: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub points: Vec<EnvelopePoint>,
    pub c_probe: f64,
    /// Largest constant satisfying every sampled inequality.
    pub fitted_c: f64,
    /// `max |v − ψ|/(T − t)^{1/4}` over all nodes of the lattice rows.
    pub fitted_squeeze_c: f64,
}

impl EnvelopeReport {
    pub fn all_hold_at_probe(&self) -> bool {
        self.points.iter().all(|p| p.holds_at_probe)
    }
}

/// `c` such that `bound = exp(−c·δ²/s³)`, i.e. `−ln(bound)·s³/δ²`.
fn constant_for(bound: f64, delta: f64, s: f64) -> f64 {
    if bound <= 0.0 {
        f64::INFINITY
    } else {
        -ln(bound) * s * s * s / (delta * delta)
    }
}

/// Evaluates both boundary envelopes and the inviscid squeeze on the lattice
/// `ENVELOPE_TIMES × ENVELOPE_DELTAS`. Lattice times must be grid nodes.
pub fn check_boundary_envelopes(v: &ValueSurface, term: &TerminalCondition, c_probe: f64) -> Result<EnvelopeReport> {
    envelopes_on(v, term, c_probe, &ENVELOPE_TIMES, &ENVELOPE_DELTAS)
}

/// Same as [`check_boundary_envelopes`] on a custom lattice.
pub fn envelopes_on(
    v: &ValueSurface,
    term: &TerminalCondition,
    c_probe: f64,
    times_to_maturity: &[f64],
    deltas: &[f64],
) -> Result<EnvelopeReport> {
    let grid = v.grid();
    let horizon = grid.t_end();
    let mut points = Vec::new();
    let mut fitted_c = f64::INFINITY;
    let mut fitted_squeeze_c: f64 = 0.0;
    for &s in times_to_maturity {
        let t = horizon - s;
        let i = grid.time_index(t).ok_or(Error::OffGrid { time: t, t0: grid.t0(), dt: grid.dt() })?;
        for &delta in deltas {
            let upper_value = v.interpolate_row(i, term.upper_edge() + s + delta);
            let lower_value = v.interpolate_row(i, term.lower_edge() - delta);
            let upper_constant = constant_for(1.0 - upper_value, delta, s);
            let lower_constant = constant_for(lower_value, delta, s);
            let env = exp(-c_probe * delta * delta / (s * s * s));
            let holds_at_probe = upper_value >= 1.0 - env && lower_value <= env;
            fitted_c = fitted_c.min(upper_constant).min(lower_constant);
            points.push(EnvelopePoint {
                time_to_maturity: s,
                delta,
                upper_value,
                lower_value,
                upper_constant,
                lower_constant,
                holds_at_probe,
            });
        }
        let scale = powf(s, 0.25);
        for j in 0..grid.n_space() {
            let psi = ((grid.space(j) - term.threshold) / s).clamp(0.0, 1.0);
            fitted_squeeze_c = fitted_squeeze_c.max((v.at(i, j) - psi).abs() / scale);
        }
    }
    Ok(EnvelopeReport { points, c_probe, fitted_c, fitted_squeeze_c })
}

/// Trapezoidal `∫ row de`.
fn trapezoid(row: &[f64], dx: f64) -> f64 {
    let n = row.len();
    dx * (row[1..n - 1].iter().sum::<f64>() + 0.5 * (row[0] + row[n - 1]))
}

/// Space integrals `∫(vA − vB)(tᵢ, e)de`, one per time row.
pub fn integral_differences(va: &ValueSurface, vb: &ValueSurface) -> Result<Vec<f64>> {
    if !va.grid().same_as(vb.grid()) {
        return Err(Error::GridMismatch(String::from("conservation check needs surfaces on one grid")));
    }
    let grid = va.grid();
    let n = grid.n_space();
    let mut diff = vec![0.0; n];
    Ok((0..grid.n_time())
        .map(|i| {
            for (d, (a, b)) in diff.iter_mut().zip(va.row(i).iter().zip(vb.row(i))) {
                *d = a - b;
            }
            trapezoid(&diff, grid.dx())
        })
        .collect())
}

/// `maxᵢ |∫(vA − vB)(tᵢ)de − ∫(vA − vB)(T)de|`.
pub fn conservation_defect(va: &ValueSurface, vb: &ValueSurface) -> Result<f64> {
    let ints = integral_differences(va, vb)?;
    let terminal = *ints.last().expect("grids have at least two rows");
    Ok(ints.iter().map(|x| (x - terminal).abs()).fold(0.0, f64::max))
}

/// `maxᵢ |∫(vA − vB)(tᵢ)de − exact|`, with `exact` the terminal integral.
pub fn conservation_defect_against(va: &ValueSurface, vb: &ValueSurface, exact: f64) -> Result<f64> {
    let ints = integral_differences(va, vb)?;
    Ok(ints.iter().map(|x| (x - exact).abs()).fold(0.0, f64::max))
}

/// Range of `(T − t)·∂ₑv` over interior nodes, central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledSlope {
    pub min: f64,
    pub max: f64,
}

/// Range of the scaled slope over interior nodes of the rows with
/// `t ≤ t_max`.
pub fn scaled_slope_range(v: &ValueSurface, t_max: f64) -> ScaledSlope {
    let grid = v.grid();
    let n = grid.n_space();
    let horizon = grid.t_end();
    let mut out = ScaledSlope { min: f64::INFINITY, max: f64::NEG_INFINITY };
    for i in 0..grid.n_time() {
        let t = grid.time(i);
        if t > t_max + 1e-12 {
            continue;
        }
        let row = v.row(i);
        let s = (horizon - t) / (2.0 * grid.dx());
        for j in 1..n - 1 {
            let g = s * (row[j + 1] - row[j - 1]);
            out.min = out.min.min(g);
            out.max = out.max.max(g);
        }
    }
    out
}

/// `min (1 − (T − t)·∂ₑv)` over interior nodes of rows with `t ≤ t_max`.
pub fn strict_gradient_margin(v: &ValueSurface, t_max: f64) -> f64 {
    1.0 - scaled_slope_range(v, t_max).max
}

/// Number of grid steps of length `dt` in `[t0, horizon]`, if whole.
pub fn whole_steps(t0: f64, horizon: f64, dt: f64) -> Result<usize> {
    let k = (horizon - t0) / dt;
    if (k - round(k)).abs() > 1e-9 * k.max(1.0) {
        return Err(Error::Invalid(format!("(T - t0)/dt = {k} is not an integer")));
    }
    Ok(round(k) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(dx: f64, n_steps: usize) -> SpaceTimeGrid {
        cap_centred_grid(0.0, 1.0, n_steps, 0.0, dx, round(5.0 / dx) as usize).unwrap()
    }

    fn cfg() -> SchemeConfig {
        SchemeConfig::with_substeps(10_000)
    }

    #[test]
    fn constants_are_preserved() {
        let g = grid(0.05, 50);
        let ones = TerminalCondition::indicator(-1e9, 1.0);
        let v1 = solve_toy_pde(&g, &ones, &cfg()).unwrap();
        assert!(v1.row(0)[1..g.n_space() - 1].iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let zeros = TerminalCondition::indicator(1e9, 1.0);
        let v0 = solve_toy_pde(&g, &zeros, &cfg()).unwrap();
        assert!(v0.row(0)[..g.n_space() - 1].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_step_violation_is_reported() {
        let g = grid(0.01, 20);
        let term = TerminalCondition::ramp(0.0, 0.01, 1.0).unwrap();
        assert!(matches!(solve_toy_pde(&g, &term, &SchemeConfig::default()), Err(Error::Stability { .. })));
    }

    #[test]
    fn inviscid_profile_values() {
        assert_eq!(inviscid_profile(0.5, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(inviscid_profile(0.5, 1.25, 1.0, 1.0).unwrap(), 0.5);
        assert_eq!(inviscid_profile(0.5, 1.6, 1.0, 1.0).unwrap(), 1.0);
        assert!(inviscid_profile(1.0, 1.6, 1.0, 1.0).is_err());
    }

    #[test]
    fn gradient_bound_and_margin() {
        let g = grid(0.01, 100);
        let term = TerminalCondition::ramp(0.0, 0.01, 1.0).unwrap();
        let v = solve_toy_pde(&g, &term, &cfg()).unwrap();
        assert!(v.violations(1e-14).is_empty());
        let r = scaled_slope_range(&v, 1.0);
        assert!(r.min >= 0.0 && r.max <= 1.0 + 5.0 * g.dx(), "{r:?}");
        assert!(strict_gradient_margin(&v, 0.9) > 0.0);
    }

    #[test]
    fn conservation_holds_for_shifted_ramps() {
        let g = grid(0.01, 100);
        let a = TerminalCondition::ramp(0.0, 0.04, 1.0).unwrap();
        let b = TerminalCondition::ramp(0.1, 0.02, 1.0).unwrap();
        let va = solve_toy_pde(&g, &a, &cfg()).unwrap();
        let vb = solve_toy_pde(&g, &b, &cfg()).unwrap();
        let exact = a.integral_difference(&b).unwrap();
        let defect = conservation_defect_against(&va, &vb, exact).unwrap();
        assert!(defect < 1e-10, "defect {defect}");
        assert_eq!(conservation_defect(&va, &va).unwrap(), 0.0);
    }

    #[test]
    fn envelopes_fit_a_positive_constant() {
        let g = grid(0.01, 100);
        let term = TerminalCondition::ramp(0.0, 0.01, 1.0).unwrap();
        let v = solve_toy_pde(&g, &term, &cfg()).unwrap();
        let rep = check_boundary_envelopes(&v, &term, 1e-3).unwrap();
        assert!(rep.fitted_c > 0.0 && rep.fitted_c.is_finite());
        assert!(rep.all_hold_at_probe());
        let far = envelopes_on(&v, &term, rep.fitted_c, &[0.1], &[2.0]).unwrap();
        assert!(far.points[0].upper_value > 1.0 - 1e-12);
        assert!(rep.fitted_squeeze_c.is_finite() && rep.fitted_squeeze_c > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn ramps_sharing_an_upper_edge_stay_ordered(eta in 0.02f64..0.3, shrink in 0.1f64..0.9) {
            let g = grid(0.02, 25);
            let narrow_eta = eta * shrink;
            let wide = TerminalCondition::ramp(-eta, eta, 1.0).unwrap();
            let narrow = TerminalCondition::ramp(-narrow_eta, narrow_eta, 1.0).unwrap();
            let vw = solve_toy_pde(&g, &wide, &cfg()).unwrap();
            let vn = solve_toy_pde(&g, &narrow, &cfg()).unwrap();
            for (k, (n, w)) in vn.values().iter().zip(vw.values()).enumerate() {
                prop_assert!(*n <= *w + 1e-14, "node {}", k);
            }
            prop_assert!(vw.violations(1e-14).is_empty());
        }
    }
}
