//! Numerical core for pricing CO₂ emission allowances and options on them.
//!
//! The allowance price solves a forward-backward SDE whose terminal condition
//! is the penalty indicator `λ·1[E_T ≥ Λ]`. This crate contains
//!
//! * [`closed_form`]: the business-as-usual (no abatement) price in closed form,
//! * [`pde`]: explicit monotone finite-difference solvers for the allowance and
//!   option pricing equations,
//! * [`burgers`]: the degenerate Burgers-type toy model and checks of its
//!   gradient bounds, boundary envelopes and conservation law,
//! * [`sde`]: path simulation, terminal point-mass statistics and a
//!   Malliavin-Bismut gradient estimator,
//! * [`asymptotics`]: the first-order small-abatement expansion by Monte Carlo,
//! * [`equilibrium`]: optimal firm strategies and the aggregate abatement map.
//!
//! The crate is `no_std` when the default `std` feature is disabled; it only
//! needs `alloc`. The `parallel` feature spreads Monte Carlo paths over a rayon
//! pool without changing any result bit.
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod asymptotics;
pub mod burgers;
pub mod closed_form;
pub mod equilibrium;
pub mod model;
pub mod pde;
pub mod sde;
pub mod stats;

mod error;
mod math;
mod par;
mod rng;

pub use error::{Error, Result};
pub use model::{
    validate, AbatementBase, AbatementMap, MarketParams, OptionSpec, SpaceCoordinate, SpaceTimeGrid, TerminalCondition,
    TerminalKind, ValidationReport, ValueSurface, Violation,
};
pub use pde::SchemeConfig;
