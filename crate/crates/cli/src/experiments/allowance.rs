//! Experiments on the allowance and option pricing equations.

use rayon::prelude::*;

use carbon_fbsde_core::asymptotics::{first_order_correction, ExpansionReport};
use carbon_fbsde_core::closed_form::{allowance_price_bau, option_price_bau};
use carbon_fbsde_core::pde::{cap_centred_log_grid, solve_allowance_pde, solve_option_pde};
use carbon_fbsde_core::stats::McEstimate;
use carbon_fbsde_core::{
    AbatementBase, AbatementMap, MarketParams, SchemeConfig, SpaceTimeGrid, TerminalCondition, ValueSurface,
};

use crate::config::ExperimentConfig;
use crate::output::Table;
use crate::tolerances::PROBE_PRICE_MARGIN;
use crate::RunError;

/// The log-emission grid of `cfg`, aligned with the configured cap.
pub fn allowance_grid(cfg: &ExperimentConfig) -> Result<SpaceTimeGrid, RunError> {
    Ok(cap_centred_log_grid(&cfg.params, 0.0, cfg.n_steps, cfg.half_width, cfg.n_space)?)
}

fn scheme(cfg: &ExperimentConfig) -> SchemeConfig {
    SchemeConfig::with_substeps(cfg.max_substeps)
}

/// `u^ε` for `f(y) = ε·y` and market `p` on `grid`.
pub fn allowance_surface(
    cfg: &ExperimentConfig,
    p: &MarketParams,
    grid: &SpaceTimeGrid,
    epsilon: f64,
) -> Result<ValueSurface, RunError> {
    let f = abatement(epsilon);
    let term = TerminalCondition::indicator(p.cap, p.penalty);
    Ok(solve_allowance_pde(p, &f, grid, &term, &scheme(cfg))?)
}

fn abatement(epsilon: f64) -> AbatementMap {
    if epsilon == 0.0 {
        AbatementMap::none()
    } else {
        AbatementMap::linear(epsilon)
    }
}

/// `(u^ε, U^ε)` on the configured grid and market.
pub fn price_pair(cfg: &ExperimentConfig, epsilon: f64) -> Result<(ValueSurface, ValueSurface), RunError> {
    let grid = allowance_grid(cfg)?;
    let u = allowance_surface(cfg, &cfg.params, &grid, epsilon)?;
    let call = solve_option_pde(&u, &cfg.params, &abatement(epsilon), &cfg.option, &scheme(cfg))?;
    Ok((u, call))
}

#[derive(Debug, Clone)]
pub struct BauOracle {
    pub max_error: f64,
    pub worst_time: f64,
    pub worst_emission: f64,
    pub rows_checked: usize,
    pub table: Table,
}

/// Largest interior error of the `f ≡ 0` solve against the closed form over the
/// rows at least `oracle_min_time_to_maturity` from maturity.
pub fn bau_oracle(cfg: &ExperimentConfig) -> Result<BauOracle, RunError> {
    let grid = allowance_grid(cfg)?;
    let u = allowance_surface(cfg, &cfg.params, &grid, 0.0)?;
    let p = &cfg.params;
    let stride = (grid.n_steps() / 20).max(1);
    let mut table = Table::new("bau_oracle", &["t", "e", "pde", "closed_form", "error"]);
    let (mut max_error, mut worst_time, mut worst_emission, mut rows_checked) = (0.0f64, 0.0, 0.0, 0);
    for i in 0..grid.n_time() {
        let t = grid.time(i);
        if p.horizon - t < cfg.oracle_min_time_to_maturity - 1e-12 {
            continue;
        }
        rows_checked += 1;
        for j in 1..grid.n_space() - 1 {
            let e = grid.emission(j);
            let exact = allowance_price_bau(t, e, p)?;
            let err = (u.at(i, j) - exact).abs();
            if err > max_error {
                (max_error, worst_time, worst_emission) = (err, t, e);
            }
            if i % stride == 0 {
                table.push(vec![t, e, u.at(i, j), exact, err]);
            }
        }
    }
    Ok(BauOracle { max_error, worst_time, worst_emission, rows_checked, table })
}

/// Up to `count` nodes, evenly spread over those with
/// `margin ≤ row[j] ≤ ceiling − margin`.
pub fn probe_indices(row: &[f64], ceiling: f64, count: usize) -> Vec<usize> {
    let candidates: Vec<usize> = (1..row.len() - 1)
        .filter(|&j| row[j] >= PROBE_PRICE_MARGIN && row[j] <= ceiling - PROBE_PRICE_MARGIN)
        .collect();
    let m = candidates.len();
    if m <= count {
        return candidates;
    }
    let mut out: Vec<usize> = (0..count).map(|k| candidates[k * (m - 1) / (count - 1).max(1)]).collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy)]
pub struct OptionProbe {
    pub emission: f64,
    pub pde: f64,
    pub mc: McEstimate,
}

/// The `f ≡ 0` option surface at `t = 0` against exact-sampling Monte Carlo.
pub fn option_oracle(cfg: &ExperimentConfig) -> Result<Vec<OptionProbe>, RunError> {
    let (_, call) = price_pair(cfg, 0.0)?;
    let grid = *call.grid();
    let js = probe_indices(call.row(0), call.ceiling(), cfg.probes);
    js.into_iter()
        .map(|j| {
            let e = grid.emission(j);
            let mc = option_price_bau(0.0, e, &cfg.params, &cfg.option, cfg.n_paths, cfg.seed)?;
            Ok(OptionProbe { emission: e, pde: call.at(0, j), mc })
        })
        .collect()
}

pub fn option_oracle_table(probes: &[OptionProbe]) -> Table {
    let mut t = Table::new("option_oracle", &["e", "pde", "monte_carlo", "standard_error"]);
    for p in probes {
        t.push(vec![p.emission, p.pde, p.mc.mean, p.mc.standard_error]);
    }
    t
}

/// Allowance and option prices at `t = 0` for each `ε` of the ladder.
#[derive(Debug, Clone)]
pub struct Curves {
    pub epsilons: Vec<f64>,
    pub emissions: Vec<f64>,
    pub allowance: Vec<Vec<f64>>,
    pub option: Vec<Vec<f64>>,
}

pub fn figure1_curves(cfg: &ExperimentConfig) -> Result<Curves, RunError> {
    let grid = allowance_grid(cfg)?;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = cfg
        .epsilons
        .par_iter()
        .map(|&eps| price_pair(cfg, eps).map(|(u, call)| (u.row(0).to_vec(), call.row(0).to_vec())))
        .collect::<Result<_, _>>()?;
    let (allowance, option) = pairs.into_iter().unzip();
    Ok(Curves {
        epsilons: cfg.epsilons.clone(),
        emissions: (0..grid.n_space()).map(|j| grid.emission(j)).collect(),
        allowance,
        option,
    })
}

impl Curves {
    /// `max (U^{ε′} − U^{ε})` over consecutive ladder entries and all nodes;
    /// positive values break the ordering.
    pub fn ordering_violation(&self) -> f64 {
        self.option
            .windows(2)
            .flat_map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn table(&self) -> Table {
        let mut cols = vec![String::from("e")];
        for eps in &self.epsilons {
            cols.push(format!("u_eps{eps}"));
            cols.push(format!("U_eps{eps}"));
        }
        let mut t = Table::with_columns("figure1_left", cols);
        for j in 0..self.emissions.len() {
            let mut row = vec![self.emissions[j]];
            for k in 0..self.epsilons.len() {
                row.push(self.allowance[k][j]);
                row.push(self.option[k][j]);
            }
            t.push(row);
        }
        t
    }
}

/// Allowance surfaces over `{λ, sλ} × {Λ, sΛ}` on the grid of the base market.
#[derive(Debug, Clone)]
pub struct Regulation {
    /// `max (u(λ) − u(sλ))`; positive values break monotonicity in `λ`.
    pub penalty_violation: f64,
    /// `max (u(sΛ) − u(Λ))`; positive values break monotonicity in `Λ`.
    pub cap_violation: f64,
    pub table: Table,
}

pub fn regulation(cfg: &ExperimentConfig) -> Result<Regulation, RunError> {
    let grid = allowance_grid(cfg)?;
    let s = cfg.regulation_scale;
    let base = cfg.params;
    let markets = [
        base,
        MarketParams { penalty: s * base.penalty, ..base },
        MarketParams { cap: s * base.cap, ..base },
        MarketParams { penalty: s * base.penalty, cap: s * base.cap, ..base },
    ];
    let surfaces: Vec<ValueSurface> = markets
        .par_iter()
        .map(|p| allowance_surface(cfg, p, &grid, cfg.regulation_epsilon))
        .collect::<Result<_, _>>()?;
    let worst = |a: &ValueSurface, b: &ValueSurface| {
        a.values().iter().zip(b.values()).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max)
    };
    let penalty_violation = worst(&surfaces[0], &surfaces[1]).max(worst(&surfaces[2], &surfaces[3]));
    let cap_violation = worst(&surfaces[2], &surfaces[0]).max(worst(&surfaces[3], &surfaces[1]));
    let mut table = Table::new("regulation", &["e", "u_base", "u_penalty_up", "u_cap_up", "u_both_up"]);
    for j in 0..grid.n_space() {
        table.push(vec![
            grid.emission(j),
            surfaces[0].at(0, j),
            surfaces[1].at(0, j),
            surfaces[2].at(0, j),
            surfaces[3].at(0, j),
        ]);
    }
    Ok(Regulation { penalty_violation, cap_violation, table })
}

/// One probe of the first-order expansion.
#[derive(Debug, Clone, Copy)]
pub struct ExpansionProbe {
    pub emission: f64,
    /// PDE value of `U⁰(0, e)`.
    pub u0: f64,
    pub correction: ExpansionReport,
}

/// PDE option prices `U^ε(0, ·)` for each `ε` together with the Monte Carlo
/// first-order coefficient at the probe nodes, all paths sharing one seed.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub epsilons: Vec<f64>,
    pub probes: Vec<ExpansionProbe>,
    /// `option[k][p]` is `U^{ε_k}` at probe `p`.
    pub option: Vec<Vec<f64>>,
}

pub fn expansion(cfg: &ExperimentConfig, epsilons: &[f64]) -> Result<Expansion, RunError> {
    let (_, call0) = price_pair(cfg, 0.0)?;
    let grid = *call0.grid();
    let js = probe_indices(call0.row(0), call0.ceiling(), cfg.probes);
    let f0 = AbatementBase::Linear { slope: 1.0 };
    let probes = js
        .iter()
        .map(|&j| {
            let e = grid.emission(j);
            let correction =
                first_order_correction(0.0, e, &cfg.params, &f0, &cfg.option, cfg.n_paths, cfg.mc_dt, cfg.seed)?;
            Ok(ExpansionProbe { emission: e, u0: call0.at(0, j), correction })
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let option = epsilons
        .par_iter()
        .map(|&eps| price_pair(cfg, eps).map(|(_, call)| js.iter().map(|&j| call.at(0, j)).collect()))
        .collect::<Result<_, _>>()?;
    Ok(Expansion { epsilons: epsilons.to_vec(), probes, option })
}

impl Expansion {
    /// `|U^ε − U⁰ + ε·c|/ε` at each probe for ladder entry `k`.
    pub fn remainders(&self, k: usize) -> Vec<f64> {
        let eps = self.epsilons[k];
        self.probes.iter().zip(&self.option[k]).map(|(p, &ue)| p.correction.remainder(eps, p.u0, ue)).collect()
    }

    /// `R(ε_k)`: the largest remainder over the probes.
    pub fn remainder(&self, k: usize) -> f64 {
        self.remainders(k).into_iter().fold(0.0, f64::max)
    }

    pub fn max_standard_error(&self) -> f64 {
        self.probes.iter().map(|p| p.correction.mc_standard_error).fold(0.0, f64::max)
    }

    /// Columns `e, U0, correction, se, tail`, then per `ε` the PDE gap
    /// `U^ε − U⁰`, the first-order gap `−ε·c` and the remainder.
    pub fn table(&self, name: &str) -> Table {
        let mut cols: Vec<String> = ["e", "U0", "correction", "correction_se", "tail_bound"].map(String::from).to_vec();
        for eps in &self.epsilons {
            cols.push(format!("gap_eps{eps}"));
            cols.push(format!("first_order_eps{eps}"));
            cols.push(format!("remainder_eps{eps}"));
        }
        let mut t = Table::with_columns(name, cols);
        let rem: Vec<Vec<f64>> = (0..self.epsilons.len()).map(|k| self.remainders(k)).collect();
        for (p, probe) in self.probes.iter().enumerate() {
            let c = &probe.correction;
            let mut row = vec![probe.emission, probe.u0, c.correction, c.mc_standard_error, c.tail_bound];
            for (k, eps) in self.epsilons.iter().enumerate() {
                row.push(self.option[k][p] - probe.u0);
                row.push(-eps * c.correction);
                row.push(rem[k][p]);
            }
            t.push(row);
        }
        t
    }
}
