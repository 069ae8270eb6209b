//! Optimal firm strategies and the aggregate abatement map.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::math::powf;
use crate::model::{AbatementBase, AbatementMap};
use crate::{Error, Result};

/// Absolute tolerance of the bisection used for implicit inverses.
pub const BISECTION_TOL: f64 = 1e-12;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Abatement (or production) cost `c` of one firm, described by its marginal
/// cost `c′`.
#[derive(Clone)]
pub enum CostFunction {
    /// `c(x) = α·x²`.
    Quadratic { alpha: f64 },
    /// `c(x) = α·|x|^(1+β)`.
    Power { alpha: f64, beta: f64 },
    /// Any strictly increasing marginal cost. Without an explicit inverse the
    /// inverse is found by bisection on `bracket`.
    Custom { marginal: ScalarFn, inverse: Option<ScalarFn>, bracket: (f64, f64) },
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostFunction::Quadratic { alpha } => write!(f, "Quadratic {{ alpha: {alpha} }}"),
            CostFunction::Power { alpha, beta } => {
                write!(f, "Power {{ alpha: {alpha}, beta: {beta} }}")
            }
            CostFunction::Custom { bracket, inverse, .. } => {
                write!(f, "Custom {{ bracket: {bracket:?}, explicit_inverse: {} }}", inverse.is_some())
            }
        }
    }
}

impl CostFunction {
    pub fn quadratic(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Invalid(format!("quadratic cost needs alpha > 0 (got {alpha})")));
        }
        Ok(CostFunction::Quadratic { alpha })
    }

    pub fn power(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::Invalid(format!("power cost needs alpha > 0 and beta > 0 (got {alpha}, {beta})")));
        }
        Ok(CostFunction::Power { alpha, beta })
    }

    /// Custom marginal cost inverted numerically on `bracket`.
    pub fn from_marginal(marginal: impl Fn(f64) -> f64 + Send + Sync + 'static, bracket: (f64, f64)) -> Result<Self> {
        if !(bracket.0 < bracket.1) {
            return Err(Error::Invalid(format!("bisection bracket {bracket:?} is empty")));
        }
        Ok(CostFunction::Custom { marginal: Arc::new(marginal), inverse: None, bracket })
    }

    /// `c′(x)`.
    pub fn marginal(&self, x: f64) -> f64 {
        match self {
            CostFunction::Quadratic { alpha } => 2.0 * alpha * x,
            CostFunction::Power { alpha, beta } => {
                let m = alpha * (1.0 + beta) * powf(x.abs(), *beta);
                if x < 0.0 {
                    -m
                } else {
                    m
                }
            }
            CostFunction::Custom { marginal, .. } => marginal(x),
        }
    }

    /// `(c′)⁻¹(y)`.
    pub fn inverse_marginal(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::Domain(format!("price {y} is not finite")));
        }
        match self {
            CostFunction::Quadratic { alpha } => Ok(y / (2.0 * alpha)),
            CostFunction::Power { alpha, beta } => {
                let x = powf(y.abs() / (alpha * (1.0 + beta)), 1.0 / beta);
                Ok(if y < 0.0 { -x } else { x })
            }
            CostFunction::Custom { inverse: Some(inv), .. } => Ok(inv(y)),
            CostFunction::Custom { marginal, inverse: None, bracket } => {
                bisect(|x| marginal(x) - y, bracket.0, bracket.1)
            }
        }
    }

    /// Round trip `(c′)⁻¹(c′(x)) = x` and strict increase of `c′` on `samples`.
    pub fn check(&self, samples: &[f64], tol: f64) -> Result<()> {
        let mut prev: Option<(f64, f64)> = None;
        for &x in samples {
            let m = self.marginal(x);
            let back = self.inverse_marginal(m)?;
            if (back - x).abs() > tol {
                return Err(Error::Invalid(format!("inverse marginal round trip at {x} returned {back}")));
            }
            if let Some((px, pm)) = prev {
                if x > px && !(m > pm) {
                    return Err(Error::Invalid(format!(
                        "marginal cost is not strictly increasing between {px} and {x}"
                    )));
                }
            }
            prev = Some((x, m));
        }
        Ok(())
    }
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if !(glo < 0.0 && ghi > 0.0) {
        return Err(Error::Domain(format!("price outside the invertibility range on [{lo}, {hi}]")));
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `ξ* = (c′)⁻¹(Y)`.
pub fn optimal_abatement(cost: &CostFunction, allowance_price: f64) -> Result<f64> {
    cost.inverse_marginal(allowance_price)
}

/// `q* = (c′)⁻¹(P − εY)` for a firm emitting `emission_rate` per unit produced.
pub fn optimal_production(
    cost: &CostFunction,
    good_price: f64,
    emission_rate: f64,
    allowance_price: f64,
) -> Result<f64> {
    if !(emission_rate > 0.0) {
        return Err(Error::Domain(format!("emission rate must be positive (got {emission_rate})")));
    }
    cost.inverse_marginal(good_price - emission_rate * allowance_price)
}

/// `f(x) = Σᵢ (cᵢ′)⁻¹(x)` with its Lipschitz bound sampled on `[0, price_max]`.
pub fn aggregate_abatement(costs: Vec<CostFunction>, price_max: f64) -> Result<AbatementMap> {
    if costs.is_empty() {
        return Err(Error::Invalid(alloc::string::String::from("aggregate abatement needs at least one firm")));
    }
    for c in &costs {
        c.inverse_marginal(0.0)?;
        c.inverse_marginal(price_max)?;
    }
    Ok(AbatementMap::scaled(AbatementBase::InverseMarginals(costs), 1.0, price_max))
}
