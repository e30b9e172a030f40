//! Explicit splitting integrators for stochastic Lie-Poisson systems.
//!
//! The library provides:
//!
//! - [`geometry`]: structure-matrix algebra, the Poisson bracket and the
//!   testable geometric predicates (skew-symmetry, Jacobi identity,
//!   Casimir residual, Poisson-map residual);
//! - [`models`]: the stochastic Maxwell-Bloch, rigid body and sine-Euler
//!   systems with closed-form sub-flows;
//! - [`integrators`]: splitting schemes (plain, reversed, weak order 2)
//!   and the Euler-Maruyama and implicit midpoint baselines, plus a
//!   trajectory driver;
//! - [`multiscale`]: the fast Ornstein-Uhlenbeck driving regime and the
//!   asymptotic-preserving splitting schemes;
//! - [`noise`]: seeded Brownian paths with exact block-sum coarsening for
//!   coupled multi-resolution experiments;
//! - [`harness`]: Monte Carlo drivers measuring strong/weak convergence
//!   orders, invariant drift and the asymptotic-preserving limit.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod integrators;
pub mod linalg;
pub mod models;
pub mod multiscale;
pub mod noise;

pub use error::{Error, Result};
