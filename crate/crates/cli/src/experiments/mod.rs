//! The experiments, each producing CSV tables and named pass/fail checks.

pub mod allowance;
pub mod toy;

use crate::config::{Experiment, ExperimentConfig};
use crate::output::Table;
use crate::tolerances::*;
use crate::RunError;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub experiment: Experiment,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Validates `cfg` and runs its experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    cfg.check()?;
    let (tables, checks) = match cfg.experiment {
        Experiment::BauOracle => bau_oracle(cfg)?,
        Experiment::Figure1Left => figure1_left(cfg)?,
        Experiment::Figure1Right => figure1_right(cfg)?,
        Experiment::ExpansionLadder => expansion_ladder(cfg)?,
        Experiment::ToyInvariants => toy_invariants(cfg)?,
        Experiment::DiracMass => dirac_mass(cfg)?,
    };
    Ok(Outcome { experiment: cfg.experiment, tables, checks })
}

type Parts = (Vec<Table>, Vec<Check>);

fn bau_oracle(cfg: &ExperimentConfig) -> Result<Parts, RunError> {
    let o = allowance::bau_oracle(cfg)?;
    let bound = SCHEME_TOLERANCE * cfg.params.penalty;
    let mut checks = vec![Check::new(
        "bau_oracle_max_error",
        o.max_error <= bound,
        format!(
            "max |PDE - closed form| = {:.3e} at (t, e) = ({:.4}, {:.4}) over {} rows, bound {bound:.1e}",
            o.max_error, o.worst_time, o.worst_emission, o.rows_checked
        ),
    )];
    let probes = allowance::option_oracle(cfg)?;
    let worst = probes
        .iter()
        .map(|p| (p.pde - p.mc.mean).abs() - (MC_SIGMAS * p.mc.standard_error + SCHEME_TOLERANCE))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::new(
        "option_oracle",
        probes.len() == cfg.probes && worst <= 0.0,
        format!("{} probes, worst excess over 3 SE + {SCHEME_TOLERANCE:.0e} is {worst:.3e}", probes.len()),
    ));
    Ok((vec![o.table, allowance::option_oracle_table(&probes)], checks))
}

fn figure1_left(cfg: &ExperimentConfig) -> Result<Parts, RunError> {
    let curves = allowance::figure1_curves(cfg)?;
    let v = curves.ordering_violation();
    let reg = allowance::regulation(cfg)?;
    let checks = vec![
        Check::new(
            "figure1_left_ordering",
            v <= SCHEME_TOLERANCE,
            format!(
                "{} curves, max increase of U in epsilon {v:.3e}, tolerance {SCHEME_TOLERANCE:.0e}",
                curves.epsilons.len()
            ),
        ),
        Check::new(
            "regulation_monotone_in_penalty",
            reg.penalty_violation <= ORDERING_ROUNDING,
            format!("max u(penalty) - u(scaled penalty) = {:.3e}", reg.penalty_violation),
        ),
        Check::new(
            "regulation_monotone_in_cap",
            reg.cap_violation <= ORDERING_ROUNDING,
            format!("max u(scaled cap) - u(cap) = {:.3e}", reg.cap_violation),
        ),
    ];
    Ok((vec![curves.table(), reg.table], checks))
}

fn figure1_right(cfg: &ExperimentConfig) -> Result<Parts, RunError> {
    let x = allowance::expansion(cfg, &[cfg.right_epsilon])?;
    let negative =
        x.probes.iter().filter(|p| p.correction.correction < -MC_SIGMAS * p.correction.mc_standard_error).count();
    let rising = x.probes.iter().zip(&x.option[0]).filter(|(p, &ue)| ue - p.u0 > SCHEME_TOLERANCE).count();
    let checks = vec![
        Check::new(
            "correction_nonnegative",
            negative == 0,
            format!("{negative} of {} probes below -3 SE", x.probes.len()),
        ),
        Check::new(
            "abatement_lowers_option",
            rising == 0,
            format!("{rising} of {} probes with U^eps - U^0 above {SCHEME_TOLERANCE:.0e}", x.probes.len()),
        ),
    ];
    Ok((vec![x.table("figure1_right")], checks))
}

fn expansion_ladder(cfg: &ExperimentConfig) -> Result<Parts, RunError> {
    let x = allowance::expansion(cfg, &cfg.ladder)?;
    let r: Vec<f64> = (0..cfg.ladder.len()).map(|k| x.remainder(k)).collect();
    let threshold = EXPANSION_FACTOR * (x.max_standard_error() / cfg.ladder[0] + SCHEME_TOLERANCE);
    let listing = cfg.ladder.iter().zip(&r).map(|(e, r)| format!("R({e}) = {r:.4e}")).collect::<Vec<_>>().join(", ");
    let checks = vec![
        Check::new("expansion_remainder_ordering", r.windows(2).all(|w| w[0] < w[1]), listing),
        Check::new(
            "expansion_remainder_bound",
            r[0] <= threshold,
            format!("R({}) = {:.4e}, bound {threshold:.4e}", cfg.ladder[0], r[0]),
        ),
    ];
    let mut summary = Table::new("expansion_summary", &["epsilon", "remainder", "threshold"]);
    for (e, rr) in cfg.ladder.iter().zip(&r) {
        summary.push(vec![*e, *rr, threshold]);
    }
    Ok((vec![x.table("expansion_ladder"), summary], checks))
}

fn toy_invariants(cfg: &ExperimentConfig) -> Result<Parts, RunError> {
    let rep = toy::toy_invariants(cfg)?;
    let g = rep.gradient;
    let upper = 1.0 + GRADIENT_SLACK_CELLS * g.dx;
    let in_range = |s: carbon_fbsde_core::burgers::ScaledSlope| s.min >= 0.0 && s.max <= upper;
    let mall_excess = rep
        .malliavin
        .iter()
        .map(|m| (m.estimate.mean - m.finite_difference).abs() - MC_SIGMAS * m.estimate.standard_error)
        .fold(f64::NEG_INFINITY, f64::max);
    let mall_bound = MALLIAVIN_DX_CONSTANT * rep.malliavin_dx;
    let env = &rep.envelopes;
    let checks = vec![
        Check::new(
            "toy_gradient_bound_indicator",
            in_range(g.indicator),
            format!("(T-t) slope in [{:.4}, {:.4}], allowed [0, {upper:.4}]", g.indicator.min, g.indicator.max),
        ),
        Check::new(
            "toy_gradient_bound_ramp",
            in_range(g.ramp),
            format!("(T-t) slope in [{:.4}, {:.4}], allowed [0, {upper:.4}]", g.ramp.min, g.ramp.max),
        ),
        Check::new("toy_strict_margin", g.strict_margin > 0.0, format!("min 1 - (T-t) slope = {:.4}", g.strict_margin)),
        Check::new(
            "toy_conservation",
            rep.conservation.defect <= CONSERVATION_TOLERANCE,
            format!("max defect {:.3e} against exact {}", rep.conservation.defect, rep.conservation.exact),
        ),
        Check::new(
            "toy_envelopes",
            env.fitted_c > 0.0 && env.fitted_c.is_finite(),
            format!(
                "fitted c = {:.4} over {} lattice points; c = {} holds at {} of them",
                env.fitted_c,
                env.points.len(),
                env.c_probe,
                env.points.iter().filter(|p| p.holds_at_probe).count()
            ),
        ),
        Check::new(
            "toy_squeeze",
            env.fitted_squeeze_c.is_finite(),
            format!("fitted C = {:.4} in |v - psi| <= C (T-t)^(1/4)", env.fitted_squeeze_c),
        ),
        Check::new(
            "toy_variance_identity",
            (rep.variance.variance - rep.variance_exact).abs() <= MC_SIGMAS * rep.variance.standard_error,
            format!(
                "variance {:.6e} +- {:.2e} against {:.6e}",
                rep.variance.variance, rep.variance.standard_error, rep.variance_exact
            ),
        ),
        Check::new(
            "toy_malliavin_gradient",
            mall_excess <= mall_bound,
            format!(
                "{} probes, worst |estimate - fd| - 3 SE = {mall_excess:.3e}, allowed {MALLIAVIN_DX_CONSTANT} dx = {mall_bound:.3e}",
                rep.malliavin.len()
            ),
        ),
    ];
    Ok((rep.tables, checks))
}

fn dirac_mass(cfg: &ExperimentConfig) -> Result<Parts, RunError> {
    let rep = toy::dirac_mass(cfg)?;
    let floor = rep.toy_floor();
    let drops = rep.significant_decreases();
    let ratios = rep.gbm_ratios();
    let listing = |f: &dyn Fn(&toy::MassRow) -> String| rep.rows.iter().map(f).collect::<Vec<_>>().join(", ");
    let checks = vec![
        Check::new(
            "dirac_toy_mass_floor",
            floor >= DIRAC_MASS_FLOOR,
            format!(
                "toy masses {}",
                listing(&|r| format!("{:.4} [{:.4}, {:.4}]", r.toy.estimate, r.toy.lower, r.toy.upper))
            ),
        ),
        Check::new(
            "dirac_toy_mass_stable",
            drops.is_empty(),
            format!("{} of {} halvings with disjoint decreasing 95% intervals", drops.len(), ratios.len()),
        ),
        Check::new(
            "dirac_gbm_halving_decay",
            ratios.iter().all(|&r| r >= GBM_DECAY_FACTOR),
            format!(
                "GBM masses {}; ratios {}",
                listing(&|r| format!("{:.4}", r.gbm.estimate)),
                ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
            ),
        ),
    ];
    Ok((rep.tables, checks))
}
