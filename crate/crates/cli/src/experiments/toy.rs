//! Experiments on the degenerate toy model `dĒ = −v dt + (T − t)dW`, `T = 1`,
//! cap at 0.

use carbon_fbsde_core::burgers::{
    cap_centred_grid, check_boundary_envelopes, integral_differences, scaled_slope_range, solve_toy_pde,
    strict_gradient_margin, EnvelopeReport, ScaledSlope, GAUSSIAN_ENVELOPE_CONSTANT,
};
use carbon_fbsde_core::pde::surface_gradient;
use carbon_fbsde_core::sde::{
    histogram, malliavin_gradient_estimate, simulate_feedback_forward, simulate_gbm_euler, terminal_mass_estimate,
    ForwardDynamics,
};
use carbon_fbsde_core::stats::{McEstimate, Proportion, VarianceEstimate};
use carbon_fbsde_core::{SchemeConfig, SpaceTimeGrid, TerminalCondition, ValueSurface};

use crate::config::ExperimentConfig;
use crate::output::Table;
use crate::tolerances::STRICT_MARGIN_TIME_TO_MATURITY;
use crate::RunError;

pub const TOY_HORIZON: f64 = 1.0;
pub const TOY_CAP: f64 = 0.0;

pub fn toy_grid(cfg: &ExperimentConfig) -> Result<SpaceTimeGrid, RunError> {
    let cells = (cfg.toy_half_width / cfg.toy_dx).round() as usize;
    Ok(cap_centred_grid(0.0, TOY_HORIZON, cfg.toy_steps, TOY_CAP, cfg.toy_dx, cells)?)
}

pub fn toy_surface(
    cfg: &ExperimentConfig,
    grid: &SpaceTimeGrid,
    term: &TerminalCondition,
) -> Result<ValueSurface, RunError> {
    Ok(solve_toy_pde(grid, term, &SchemeConfig::with_substeps(cfg.toy_max_substeps))?)
}

/// Scaled slope ranges on the one-cell indicator and the one-cell ramp.
#[derive(Debug, Clone, Copy)]
pub struct GradientBounds {
    pub indicator: ScaledSlope,
    pub ramp: ScaledSlope,
    /// Smallest `1 − (T − t)·∂ₑv` on rows with `T − t ≥ 0.1`, over both data.
    pub strict_margin: f64,
    pub dx: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Conservation {
    pub exact: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct MalliavinProbe {
    pub emission: f64,
    pub estimate: McEstimate,
    pub finite_difference: f64,
}

#[derive(Debug, Clone)]
pub struct ToyReport {
    pub gradient: GradientBounds,
    pub conservation: Conservation,
    pub envelopes: EnvelopeReport,
    pub variance: VarianceEstimate,
    pub variance_exact: f64,
    pub malliavin: Vec<MalliavinProbe>,
    pub malliavin_dx: f64,
    pub tables: Vec<Table>,
}

pub fn toy_invariants(cfg: &ExperimentConfig) -> Result<ToyReport, RunError> {
    let grid = toy_grid(cfg)?;
    let dx = grid.dx();
    let indicator = TerminalCondition::indicator(TOY_CAP, 1.0);
    let ramp = TerminalCondition::ramp(TOY_CAP, dx, 1.0)?;
    let v_ind = toy_surface(cfg, &grid, &indicator)?;
    let v_ramp = toy_surface(cfg, &grid, &ramp)?;
    let t_margin = TOY_HORIZON - STRICT_MARGIN_TIME_TO_MATURITY;
    let gradient = GradientBounds {
        indicator: scaled_slope_range(&v_ind, TOY_HORIZON),
        ramp: scaled_slope_range(&v_ramp, TOY_HORIZON),
        strict_margin: strict_gradient_margin(&v_ind, t_margin).min(strict_gradient_margin(&v_ramp, t_margin)),
        dx,
    };
    let mut tables = vec![slope_table(&v_ind, &v_ramp)];

    // Two ramps whose kinks sit on nodes, so the trapezoid integrals are exact.
    let a = TerminalCondition::ramp(TOY_CAP, 2.0 * dx, 1.0)?;
    let b = TerminalCondition::ramp(TOY_CAP + (0.1 / dx).round() * dx, 4.0 * dx, 1.0)?;
    let (va, vb) = (toy_surface(cfg, &grid, &a)?, toy_surface(cfg, &grid, &b)?);
    let exact = a.integral_difference(&b)?;
    let ints = integral_differences(&va, &vb)?;
    let defect = ints.iter().map(|x| (x - exact).abs()).fold(0.0, f64::max);
    let mut ct = Table::new("toy_conservation", &["t", "integral_difference", "defect"]);
    for (i, x) in ints.iter().enumerate() {
        ct.push(vec![grid.time(i), *x, (x - exact).abs()]);
    }
    tables.push(ct);

    let envelopes = check_boundary_envelopes(&v_ind, &indicator, GAUSSIAN_ENVELOPE_CONSTANT)?;
    tables.push(envelope_table(&envelopes));
    tables.push(profile_table(&v_ind)?);

    let zero = ValueSurface::constant(grid, 0.0, 1.0)?;
    let batch = simulate_feedback_forward(
        &zero,
        cfg.variance_t0,
        0.0,
        cfg.variance_paths,
        cfg.malliavin_dt,
        cfg.seed,
        &ForwardDynamics::Toy,
    )?;
    let variance = VarianceEstimate::from_samples(&batch.terminal_values);
    let variance_exact = (TOY_HORIZON - cfg.variance_t0).powi(3) / 3.0;
    let mut vt = Table::new("toy_variance", &["t0", "variance", "standard_error", "exact"]);
    vt.push(vec![cfg.variance_t0, variance.variance, variance.standard_error, variance_exact]);
    tables.push(vt);

    let grad = surface_gradient(&v_ramp);
    let i0 = grid
        .time_index(cfg.malliavin_t0)
        .ok_or_else(|| RunError::Setup(format!("malliavin_t0 = {} is not a toy grid node", cfg.malliavin_t0)))?;
    let malliavin = cfg
        .malliavin_levels
        .iter()
        .map(|&e| {
            let estimate = malliavin_gradient_estimate(
                &v_ramp,
                &grad,
                cfg.malliavin_t0,
                e,
                cfg.malliavin_paths,
                cfg.malliavin_dt,
                cfg.seed,
            )?;
            let j = grid.nearest_space_index(e);
            Ok(MalliavinProbe { emission: grid.space(j), estimate, finite_difference: grad.at(i0, j) })
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let mut mt = Table::new("toy_malliavin", &["e", "estimate", "standard_error", "finite_difference"]);
    for m in &malliavin {
        mt.push(vec![m.emission, m.estimate.mean, m.estimate.standard_error, m.finite_difference]);
    }
    tables.push(mt);

    Ok(ToyReport {
        gradient,
        conservation: Conservation { exact, defect },
        envelopes,
        variance,
        variance_exact,
        malliavin,
        malliavin_dx: dx,
        tables,
    })
}

fn slope_table(v_ind: &ValueSurface, v_ramp: &ValueSurface) -> Table {
    let grid = v_ind.grid();
    let mut t = Table::new("toy_slopes", &["t", "indicator_min", "indicator_max", "ramp_min", "ramp_max"]);
    let stride = (grid.n_steps() / 100).max(1);
    for i in (0..grid.n_time() - 1).step_by(stride) {
        let row = |v: &ValueSurface| {
            let s = (TOY_HORIZON - grid.time(i)) / (2.0 * grid.dx());
            let r = v.row(i);
            (1..r.len() - 1)
                .map(|j| s * (r[j + 1] - r[j - 1]))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g), hi.max(g)))
        };
        let (a, b) = (row(v_ind), row(v_ramp));
        t.push(vec![grid.time(i), a.0, a.1, b.0, b.1]);
    }
    t
}

fn envelope_table(rep: &EnvelopeReport) -> Table {
    let mut t = Table::new(
        "toy_envelopes",
        &[
            "time_to_maturity",
            "delta",
            "upper_value",
            "lower_value",
            "upper_constant",
            "lower_constant",
            "holds_at_probe",
        ],
    );
    for p in &rep.points {
        t.push(vec![
            p.time_to_maturity,
            p.delta,
            p.upper_value,
            p.lower_value,
            p.upper_constant,
            p.lower_constant,
            if p.holds_at_probe { 1.0 } else { 0.0 },
        ]);
    }
    t
}

/// Indicator surface against the inviscid profile on a few rows.
fn profile_table(v: &ValueSurface) -> Result<Table, RunError> {
    let grid = v.grid();
    let times = [0.5, 0.75, 0.9];
    let mut cols = vec![String::from("e")];
    for t in times {
        cols.push(format!("v_t{t}"));
        cols.push(format!("psi_t{t}"));
    }
    let rows: Vec<usize> = times
        .iter()
        .map(|&t| grid.time_index(t).ok_or(RunError::Setup(format!("toy grid has no row at t = {t}"))))
        .collect::<Result<_, _>>()?;
    let mut table = Table::with_columns("toy_profiles", cols);
    for j in 0..grid.n_space() {
        let e = grid.space(j);
        if !(-1.0..=2.0).contains(&e) {
            continue;
        }
        let mut row = vec![e];
        for (&t, &i) in times.iter().zip(&rows) {
            row.push(v.at(i, j));
            row.push(((e - TOY_CAP) / (TOY_HORIZON - t)).clamp(0.0, 1.0));
        }
        table.push(row);
    }
    Ok(table)
}

/// Window masses at one `dt` for the toy model and the GBM control.
#[derive(Debug, Clone, Copy)]
pub struct MassRow {
    pub dt: f64,
    pub window: f64,
    pub toy: Proportion,
    pub gbm: Proportion,
    pub toy_clamped: usize,
}

#[derive(Debug, Clone)]
pub struct DiracReport {
    pub rows: Vec<MassRow>,
    pub tables: Vec<Table>,
}

impl DiracReport {
    /// Smallest toy window mass over the `dt` ladder.
    pub fn toy_floor(&self) -> f64 {
        self.rows.iter().map(|r| r.toy.estimate).fold(f64::INFINITY, f64::min)
    }

    /// Indices `k` where the interval at `dt_{k+1}` lies entirely below the one at `dt_k`.
    pub fn significant_decreases(&self) -> Vec<usize> {
        (0..self.rows.len().saturating_sub(1))
            .filter(|&k| self.rows[k + 1].toy.upper < self.rows[k].toy.lower)
            .collect()
    }

    /// `mass(dt_k)/mass(dt_{k+1})` for the GBM control.
    pub fn gbm_ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].gbm.estimate / w[1].gbm.estimate).collect()
    }
}

const HISTOGRAM_BINS: usize = 200;

/// Terminal mass in `[Λ − w, Λ + w]`, `w = scale·√dt`, from `(t0, e)` with
/// `(e − Λ)/(T − t0)` the configured cone position, and the same protocol for
/// Euler GBM paths under the configured market from the level whose median
/// lands on its cap.
pub fn dirac_mass(cfg: &ExperimentConfig) -> Result<DiracReport, RunError> {
    let s = cfg.dirac_time_to_maturity;
    let t0 = TOY_HORIZON - s;
    let steps = (s / cfg.dirac_grid_dt).round() as usize;
    let cells = (cfg.dirac_half_width / cfg.dirac_dx).round() as usize;
    let grid = cap_centred_grid(t0, TOY_HORIZON, steps, TOY_CAP, cfg.dirac_dx, cells)?;
    let v = toy_surface(cfg, &grid, &TerminalCondition::ramp(TOY_CAP, grid.dx(), 1.0)?)?;
    let e_toy = TOY_CAP + cfg.dirac_cone_position * s;

    let p = &cfg.params;
    let g0 = p.horizon - s;
    let e_gbm = p.cap * (-(p.drift - 0.5 * p.sigma * p.sigma) * s).exp();

    let mut rows = Vec::new();
    let mut hist_cols = vec![String::from("toy_bin_centre")];
    hist_cols.extend(cfg.dirac_dts.iter().map(|dt| format!("toy_dt{dt}")));
    hist_cols.push(String::from("gbm_bin_centre"));
    hist_cols.extend(cfg.dirac_dts.iter().map(|dt| format!("gbm_dt{dt}")));
    let (toy_lo, toy_hi) = (TOY_CAP - 0.5, TOY_CAP + 0.5);
    let (gbm_lo, gbm_hi) = (p.cap - 1.0, p.cap + 1.0);
    let mut toy_hist = Vec::new();
    let mut gbm_hist = Vec::new();
    for &dt in &cfg.dirac_dts {
        let window = cfg.dirac_window_scale * dt.sqrt();
        let toy = simulate_feedback_forward(&v, t0, e_toy, cfg.dirac_paths, dt, cfg.seed, &ForwardDynamics::Toy)?;
        let gbm = simulate_gbm_euler(p, g0, e_gbm, p.horizon, cfg.dirac_paths, dt, cfg.seed)?;
        rows.push(MassRow {
            dt,
            window,
            toy: terminal_mass_estimate(&toy, TOY_CAP, window)?,
            gbm: terminal_mass_estimate(&gbm, p.cap, window)?,
            toy_clamped: toy.clamped_paths,
        });
        toy_hist.push(histogram(&toy.terminal_values, toy_lo, toy_hi, HISTOGRAM_BINS));
        gbm_hist.push(histogram(&gbm.terminal_values, gbm_lo, gbm_hi, HISTOGRAM_BINS));
    }

    let mut table = Table::new(
        "dirac_table",
        &[
            "dt",
            "window",
            "toy_mass",
            "toy_lower",
            "toy_upper",
            "gbm_mass",
            "gbm_lower",
            "gbm_upper",
            "toy_clamped_paths",
        ],
    );
    for r in &rows {
        table.push(vec![
            r.dt,
            r.window,
            r.toy.estimate,
            r.toy.lower,
            r.toy.upper,
            r.gbm.estimate,
            r.gbm.lower,
            r.gbm.upper,
            r.toy_clamped as f64,
        ]);
    }
    let mut hist = Table::with_columns("dirac_histograms", hist_cols);
    let (wt, wg) = ((toy_hi - toy_lo) / HISTOGRAM_BINS as f64, (gbm_hi - gbm_lo) / HISTOGRAM_BINS as f64);
    for k in 0..HISTOGRAM_BINS {
        let mut row = vec![toy_lo + (k as f64 + 0.5) * wt];
        row.extend(toy_hist.iter().map(|h| h[k] as f64));
        row.push(gbm_lo + (k as f64 + 0.5) * wg);
        row.extend(gbm_hist.iter().map(|h| h[k] as f64));
        hist.push(row);
    }
    Ok(DiracReport { rows, tables: vec![table, hist] })
}
