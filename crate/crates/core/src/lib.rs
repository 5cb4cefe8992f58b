//! Pricing and hedging toolkit for markets where heterogeneous trader views
//! are reconciled by transaction costs on the velocity of trades.
//!
//! The crate covers:
//! - binomial / quadrinomial trees with heterogeneous beliefs and their
//!   geometric-Brownian-motion limits ([`trees`]);
//! - implied riskless rates, transaction yields, and wealth-allocation
//!   quadratics ([`rates`]);
//! - a bivariate lattice pricer with velocity transaction costs
//!   ([`lattice`]);
//! - closed-form Black-Scholes-type pricers, including the drift-shifted
//!   and heterogeneous-drift variants ([`closed_form`]);
//! - an implicit finite-difference solver for the generalized cost-adjusted
//!   backward PDE ([`pde`]);
//! - a Feynman-Kac Monte Carlo estimator for the same equation ([`fk`]);
//! - desk-scale hedging and arbitrage simulations ([`hedge`]).
//!
//! All stochastic routines are deterministic given a 64-bit seed and produce
//! identical output regardless of worker-thread count.

pub mod closed_form;
pub mod error;
pub mod fk;
pub mod hedge;
pub mod lattice;
pub mod math;
pub mod pde;
pub mod rates;
pub mod rng;
pub mod trees;

pub use error::PricingError;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, PricingError>;
