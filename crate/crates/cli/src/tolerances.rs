//! Every acceptance threshold, in one place.

/// Scheme error unit for allowance and option prices, relative to `λ`.
pub const SCHEME_TOLERANCE: f64 = 2e-3;
/// Standard errors allowed between a Monte Carlo estimate and its target.
pub const MC_SIGMAS: f64 = 3.0;
/// Probe nodes keep option prices at least this far from 0 and `λ − K`.
pub const PROBE_PRICE_MARGIN: f64 = 1e-3;
/// Multiple of the noise floor allowed for the smallest-ε remainder.
pub const EXPANSION_FACTOR: f64 = 5.0;
/// Slack of `(T − t)·∂ₑv ≤ 1` in grid cells.
pub const GRADIENT_SLACK_CELLS: f64 = 5.0;
/// The strict gradient margin is checked on rows with `T − t` at least this.
pub const STRICT_MARGIN_TIME_TO_MATURITY: f64 = 0.1;
pub const CONSERVATION_TOLERANCE: f64 = 5e-3;
/// Floor on the toy terminal mass in the window around the cap.
pub const DIRAC_MASS_FLOOR: f64 = 0.05;
/// Required drop of the GBM window mass per halving of `dt`.
pub const GBM_DECAY_FACTOR: f64 = 2.0;
/// Constant `C` of the `C·Δx` discretisation allowance of the gradient check.
pub const MALLIAVIN_DX_CONSTANT: f64 = 5.0;
/// Rounding allowance for pointwise orderings between surfaces solved on one grid.
pub const ORDERING_ROUNDING: f64 = 1e-12;
pub const BAU_RUNTIME_SECONDS: f64 = 60.0;
pub const EXPANSION_RUNTIME_SECONDS: f64 = 300.0;
