//! Plain-text `key = value` experiment configuration.
//!
//! Every key has a default; `experiment` is the only required one. Lines
//! starting with `#` and blank lines are ignored, so the header of an output
//! file parses back into the configuration that produced it.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use carbon_fbsde_core::burgers::cap_centred_grid;
use carbon_fbsde_core::pde::cap_centred_log_grid;
use carbon_fbsde_core::{validate, AbatementMap, MarketParams, OptionSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("bad value for `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("missing required key `experiment`")]
    MissingExperiment,
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("reading {path}: {message}")]
    Read { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Figure1Left,
    Figure1Right,
    BauOracle,
    ToyInvariants,
    DiracMass,
    ExpansionLadder,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Figure1Left,
        Experiment::Figure1Right,
        Experiment::BauOracle,
        Experiment::ToyInvariants,
        Experiment::DiracMass,
        Experiment::ExpansionLadder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Figure1Left => "figure1_left",
            Experiment::Figure1Right => "figure1_right",
            Experiment::BauOracle => "bau_oracle",
            Experiment::ToyInvariants => "toy_invariants",
            Experiment::DiracMass => "dirac_mass",
            Experiment::ExpansionLadder => "expansion_ladder",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::Figure1Left => {
                "option vs allowance price curves for the epsilon ladder, plus regulation monotonicity"
            }
            Experiment::Figure1Right => "PDE option price gap against the Monte Carlo first-order correction",
            Experiment::BauOracle => "allowance and option solvers against the closed form and Monte Carlo",
            Experiment::ToyInvariants => {
                "toy model gradient bound, conservation, envelopes, variance identity, Malliavin gradient"
            }
            Experiment::DiracMass => "terminal point mass at the cap for the toy model against a GBM control",
            Experiment::ExpansionLadder => "remainder of the first-order expansion over an epsilon ladder",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            format!("unknown experiment `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// Rendering and parsing of a single value.
trait Value: Sized {
    fn render(&self) -> String;
    fn parse(s: &str) -> Result<Self, String>;
}

impl Value for f64 {
    fn render(&self) -> String {
        format!("{self}")
    }
    fn parse(s: &str) -> Result<Self, String> {
        let x: f64 = s.parse().map_err(|e| format!("`{s}`: {e}"))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("`{s}` is not finite"))
        }
    }
}

impl Value for usize {
    fn render(&self) -> String {
        self.to_string()
    }
    fn parse(s: &str) -> Result<Self, String> {
        s.parse().map_err(|e| format!("`{s}`: {e}"))
    }
}

impl Value for u64 {
    fn render(&self) -> String {
        self.to_string()
    }
    fn parse(s: &str) -> Result<Self, String> {
        s.parse().map_err(|e| format!("`{s}`: {e}"))
    }
}

impl Value for Vec<f64> {
    fn render(&self) -> String {
        self.iter().map(|x| x.render()).collect::<Vec<_>>().join(", ")
    }
    fn parse(s: &str) -> Result<Self, String> {
        s.split(',').map(|p| <f64 as Value>::parse(p.trim())).collect()
    }
}

impl Value for PathBuf {
    fn render(&self) -> String {
        self.display().to_string()
    }
    fn parse(s: &str) -> Result<Self, String> {
        Ok(PathBuf::from(s))
    }
}

impl Value for Experiment {
    fn render(&self) -> String {
        self.name().to_owned()
    }
    fn parse(s: &str) -> Result<Self, String> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub params: MarketParams,
    pub option: OptionSpec,
    /// Time steps of the allowance grid on `[0, T]`.
    pub n_steps: usize,
    /// Log-emission nodes.
    pub n_space: usize,
    /// Half width of the log-emission window.
    pub half_width: f64,
    pub max_substeps: usize,
    /// Rows closer to maturity than this are left out of the oracle error.
    pub oracle_min_time_to_maturity: f64,
    pub epsilons: Vec<f64>,
    pub regulation_epsilon: f64,
    pub regulation_scale: f64,
    pub right_epsilon: f64,
    pub ladder: Vec<f64>,
    pub n_paths: usize,
    pub mc_dt: f64,
    pub probes: usize,
    pub toy_dx: f64,
    pub toy_half_width: f64,
    pub toy_steps: usize,
    pub toy_max_substeps: usize,
    pub variance_t0: f64,
    pub variance_paths: usize,
    pub malliavin_t0: f64,
    pub malliavin_levels: Vec<f64>,
    pub malliavin_paths: usize,
    pub malliavin_dt: f64,
    pub dirac_dx: f64,
    pub dirac_half_width: f64,
    pub dirac_grid_dt: f64,
    pub dirac_time_to_maturity: f64,
    pub dirac_cone_position: f64,
    pub dirac_dts: Vec<f64>,
    pub dirac_paths: usize,
    pub dirac_window_scale: f64,
}

macro_rules! keys {
    ($($key:literal => $($field:ident).+ : $ty:ty),* $(,)?) => {
        /// Every configuration key, in the order of the header echo.
        pub const KEYS: &[&str] = &[$($key),*];

        impl ExperimentConfig {
            /// `(key, value)` pairs for every key.
            pub fn pairs(&self) -> Vec<(&'static str, String)> {
                vec![$(($key, <$ty as Value>::render(&self.$($field).+))),*]
            }

            fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
                let bad = |message: String| ConfigError::Value { key: key.to_owned(), message };
                match key {
                    $($key => self.$($field).+ = <$ty as Value>::parse(value).map_err(bad)?,)*
                    _ => return Err(ConfigError::UnknownKey(key.to_owned())),
                }
                Ok(())
            }
        }
    };
}

keys! {
    "experiment" => experiment: Experiment,
    "output_dir" => output_dir: PathBuf,
    "seed" => seed: u64,
    "drift" => params.drift: f64,
    "sigma" => params.sigma: f64,
    "penalty" => params.penalty: f64,
    "cap" => params.cap: f64,
    "horizon" => params.horizon: f64,
    "maturity" => option.maturity: f64,
    "strike" => option.strike: f64,
    "n_steps" => n_steps: usize,
    "n_space" => n_space: usize,
    "half_width" => half_width: f64,
    "max_substeps" => max_substeps: usize,
    "oracle_min_time_to_maturity" => oracle_min_time_to_maturity: f64,
    "epsilons" => epsilons: Vec<f64>,
    "regulation_epsilon" => regulation_epsilon: f64,
    "regulation_scale" => regulation_scale: f64,
    "right_epsilon" => right_epsilon: f64,
    "ladder" => ladder: Vec<f64>,
    "n_paths" => n_paths: usize,
    "mc_dt" => mc_dt: f64,
    "probes" => probes: usize,
    "toy_dx" => toy_dx: f64,
    "toy_half_width" => toy_half_width: f64,
    "toy_steps" => toy_steps: usize,
    "toy_max_substeps" => toy_max_substeps: usize,
    "variance_t0" => variance_t0: f64,
    "variance_paths" => variance_paths: usize,
    "malliavin_t0" => malliavin_t0: f64,
    "malliavin_levels" => malliavin_levels: Vec<f64>,
    "malliavin_paths" => malliavin_paths: usize,
    "malliavin_dt" => malliavin_dt: f64,
    "dirac_dx" => dirac_dx: f64,
    "dirac_half_width" => dirac_half_width: f64,
    "dirac_grid_dt" => dirac_grid_dt: f64,
    "dirac_time_to_maturity" => dirac_time_to_maturity: f64,
    "dirac_cone_position" => dirac_cone_position: f64,
    "dirac_dts" => dirac_dts: Vec<f64>,
    "dirac_paths" => dirac_paths: usize,
    "dirac_window_scale" => dirac_window_scale: f64,
}

impl ExperimentConfig {
    /// Reference settings for `experiment`.
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            output_dir: PathBuf::from("output"),
            seed: 1,
            params: MarketParams::reference(),
            option: OptionSpec::reference(),
            n_steps: 2000,
            n_space: 1001,
            half_width: 6.0,
            max_substeps: 1,
            oracle_min_time_to_maturity: 0.02,
            epsilons: (0..=10).map(|k| k as f64 / 10.0).collect(),
            regulation_epsilon: 0.5,
            regulation_scale: 1.2,
            right_epsilon: 0.1,
            ladder: vec![0.05, 0.1, 0.2],
            n_paths: 10_000,
            mc_dt: 0.0005,
            probes: 20,
            toy_dx: 0.005,
            toy_half_width: 5.0,
            toy_steps: 1000,
            toy_max_substeps: 100_000,
            variance_t0: 0.0,
            variance_paths: 100_000,
            malliavin_t0: 0.25,
            malliavin_levels: vec![-0.5, -0.25, 0.9, 1.1, 1.3],
            malliavin_paths: 100_000,
            malliavin_dt: 0.01,
            dirac_dx: 0.001,
            dirac_half_width: 1.5,
            dirac_grid_dt: 0.00025,
            dirac_time_to_maturity: 0.25,
            dirac_cone_position: 0.5,
            dirac_dts: vec![0.001, 0.0005, 0.00025],
            dirac_paths: 10_000,
            dirac_window_scale: 1.0,
        }
    }

    /// Coarse grids and small path counts for smoke runs.
    pub fn quick(experiment: Experiment) -> Self {
        Self {
            n_steps: 500,
            n_space: 251,
            probes: 4,
            n_paths: 400,
            mc_dt: 0.01,
            epsilons: vec![0.0, 0.5, 1.0],
            toy_dx: 0.02,
            toy_half_width: 3.0,
            toy_steps: 200,
            variance_paths: 2000,
            malliavin_paths: 2000,
            malliavin_dt: 0.02,
            dirac_dx: 0.005,
            dirac_half_width: 1.0,
            dirac_grid_dt: 0.001,
            dirac_paths: 1000,
            ..Self::new(experiment)
        }
    }

    /// Parses a configuration file body. Unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: k + 1, text: line.to_owned() })?;
            entries.push((k + 1, key.trim().to_owned(), value.trim().to_owned()));
        }
        Self::from_entries(entries)
    }

    /// Rebuilds the configuration echoed in the `#` header of an output file.
    pub fn from_header(text: &str) -> Result<Self, ConfigError> {
        let entries = text
            .lines()
            .map_while(|l| l.strip_prefix('#'))
            .enumerate()
            .filter_map(|(k, l)| l.split_once(" = ").map(|(a, b)| (k + 1, a.trim().to_owned(), b.trim().to_owned())))
            .collect();
        Self::from_entries(entries)
    }

    fn from_entries(entries: Vec<(usize, String, String)>) -> Result<Self, ConfigError> {
        let experiment = entries.iter().find(|e| e.1 == "experiment").ok_or(ConfigError::MissingExperiment)?;
        let experiment = <Experiment as Value>::parse(&experiment.2)
            .map_err(|message| ConfigError::Value { key: "experiment".to_owned(), message })?;
        let mut cfg = Self::new(experiment);
        let mut seen: Vec<&str> = Vec::new();
        for (_, key, value) in &entries {
            if seen.contains(&key.as_str()) {
                return Err(ConfigError::Duplicate(key.clone()));
            }
            seen.push(key);
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn read(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    /// The configuration as a `key = value` file.
    pub fn render(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Model validation of every grid and map the experiment will build.
    pub fn check(&self) -> Result<(), ConfigError> {
        let mut problems: Vec<String> = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                problems.push(msg.to_owned());
            }
        };
        need(self.n_paths > 1, "n_paths must be at least 2");
        need(self.probes > 0, "probes must be positive");
        need(self.mc_dt > 0.0, "mc_dt must be positive");
        need(self.max_substeps > 0 && self.toy_max_substeps > 0, "substep caps must be positive");
        need(self.oracle_min_time_to_maturity >= 0.0, "oracle_min_time_to_maturity must be nonnegative");
        need(!self.epsilons.is_empty() && self.epsilons.iter().all(|&e| e >= 0.0), "epsilons must be nonnegative");
        need(self.epsilons.windows(2).all(|w| w[0] < w[1]), "epsilons must increase");
        need(!self.ladder.is_empty() && self.ladder.iter().all(|&e| e > 0.0), "ladder entries must be positive");
        need(self.ladder.windows(2).all(|w| w[0] < w[1]), "ladder must increase");
        need(self.regulation_epsilon >= 0.0, "regulation_epsilon must be nonnegative");
        need(self.regulation_scale > 1.0, "regulation_scale must exceed 1");
        need(self.right_epsilon > 0.0, "right_epsilon must be positive");
        need(
            self.variance_paths > 1 && self.malliavin_paths > 1 && self.dirac_paths > 0,
            "path counts must be positive",
        );
        need((0.0..1.0).contains(&self.variance_t0), "variance_t0 must lie in [0, 1)");
        need(
            self.malliavin_t0 >= 0.0 && self.malliavin_t0 + self.malliavin_dt < 1.0,
            "malliavin_t0 + malliavin_dt must be below 1",
        );
        need(
            self.malliavin_dt > 0.0 && !self.malliavin_levels.is_empty(),
            "malliavin needs dt > 0 and at least one level",
        );
        need(self.dirac_dts.iter().all(|&d| d > 0.0) && !self.dirac_dts.is_empty(), "dirac_dts must be positive");
        need(self.dirac_window_scale > 0.0, "dirac_window_scale must be positive");
        need(
            self.dirac_time_to_maturity > 0.0 && self.dirac_time_to_maturity < 1.0,
            "dirac_time_to_maturity must lie in (0, 1)",
        );
        need((0.0..=1.0).contains(&self.dirac_cone_position), "dirac_cone_position must lie in [0, 1]");
        need(
            self.half_width > 0.0 && self.toy_half_width > 0.0 && self.dirac_half_width > 0.0,
            "half widths must be positive",
        );
        need(self.toy_dx > 0.0 && self.dirac_dx > 0.0 && self.dirac_grid_dt > 0.0, "toy spacings must be positive");

        problems.extend(self.params.violations().iter().map(|v| v.to_string()));
        problems.extend(self.option.violations(&self.params).iter().map(|v| v.to_string()));
        if problems.is_empty() {
            self.check_grids(&mut problems);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    fn check_grids(&self, problems: &mut Vec<String>) {
        match cap_centred_log_grid(&self.params, 0.0, self.n_steps, self.half_width, self.n_space) {
            Ok(grid) => {
                if grid.time_index(self.option.maturity).is_none() {
                    problems.push(format!("maturity {} is not a node of the time grid", self.option.maturity));
                }
                let eps_max = self.epsilons.iter().chain(&self.ladder).fold(self.regulation_epsilon, |a, &b| a.max(b));
                let f = AbatementMap::linear(eps_max.max(self.right_epsilon));
                let report = validate(&self.params, &grid, &f);
                // The scheme bound is certified step by step with substeps allowed.
                problems.extend(
                    report
                        .violations
                        .iter()
                        .filter(|v| self.max_substeps == 1 || v.field != "dt")
                        .map(|v| v.to_string()),
                );
            }
            Err(e) => problems.push(e.to_string()),
        }
        let toy_cells = (self.toy_half_width / self.toy_dx).round() as usize;
        if let Err(e) = cap_centred_grid(0.0, 1.0, self.toy_steps, 0.0, self.toy_dx, toy_cells) {
            problems.push(e.to_string());
        }
        let t0 = 1.0 - self.dirac_time_to_maturity;
        let steps = (self.dirac_time_to_maturity / self.dirac_grid_dt).round() as usize;
        let cells = (self.dirac_half_width / self.dirac_dx).round() as usize;
        if let Err(e) = cap_centred_grid(t0, 1.0, steps.max(1), 0.0, self.dirac_dx, cells) {
            problems.push(e.to_string());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        for exp in Experiment::ALL {
            let mut cfg = ExperimentConfig::new(exp);
            cfg.seed = 77;
            cfg.params.sigma = 0.1 + 0.2;
            cfg.ladder = vec![0.01, 1.0 / 3.0];
            assert_eq!(ExperimentConfig::parse(&cfg.render()).unwrap(), cfg);
        }
        assert_eq!(KEYS.len(), ExperimentConfig::new(Experiment::BauOracle).pairs().len());
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(ExperimentConfig::parse("seed = 3"), Err(ConfigError::MissingExperiment)));
        assert!(matches!(ExperimentConfig::parse("experiment = nope"), Err(ConfigError::Value { .. })));
        assert!(matches!(
            ExperimentConfig::parse("experiment = bau_oracle\ncolour = red"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("experiment = bau_oracle\nseed = 1\nseed = 2"),
            Err(ConfigError::Duplicate(_))
        ));
        assert!(matches!(ExperimentConfig::parse("experiment bau_oracle"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(
            ExperimentConfig::parse("experiment = bau_oracle\nsigma = inf"),
            Err(ConfigError::Value { .. })
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let cfg = ExperimentConfig::parse("# a comment\n\nexperiment = dirac_mass # trailing\n");
        assert!(cfg.is_err());
        let cfg = ExperimentConfig::parse("# a comment\n\n  experiment =  dirac_mass  \n").unwrap();
        assert_eq!(cfg.experiment, Experiment::DiracMass);
    }

    #[test]
    fn reference_configs_are_valid() {
        for exp in Experiment::ALL {
            ExperimentConfig::new(exp).check().unwrap();
            ExperimentConfig::quick(exp).check().unwrap();
        }
    }

    #[test]
    fn invalid_overrides_are_reported() {
        let mut cfg = ExperimentConfig::new(Experiment::BauOracle);
        cfg.params.sigma = -1.0;
        cfg.n_steps = 10;
        let err = cfg.check().unwrap_err().to_string();
        assert!(err.contains("sigma"), "{err}");
        let mut cfg = ExperimentConfig::new(Experiment::BauOracle);
        cfg.n_steps = 100;
        let err = cfg.check().unwrap_err().to_string();
        assert!(err.contains("ratio"), "{err}");
        let mut cfg = ExperimentConfig::new(Experiment::BauOracle);
        cfg.option.maturity = 0.2503;
        assert!(cfg.check().is_err());
    }
}
