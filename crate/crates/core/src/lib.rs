//! Solver and diagnostics for a class of singular parabolic problems driven by
//! the variable-exponent p(x)-Laplacian on axis-aligned boxes.
//!
//! The continuous problem couples three nonlinearities: a degenerate/singular
//! diffusion term `-div(|grad u|^{p(x)-2} grad u)`, a superlinear power source
//! `lambda u^{q(x)-1}`, and a singular absorption-free term `g(x) u^{-delta(x)}`.
//! Everything here works on the regularized family indexed by `n`: powers are
//! truncated at level `n`, the singular factor becomes `(u + 1/n)^{-delta}`,
//! and data are truncated nodewise.
//!
//! The pipeline mirrors how existence is actually established:
//!
//! 1. semi-discretize in time by implicit Euler ([`march::run_rothe`]), each
//!    step being a strictly convex minimization solved by damped Newton
//!    ([`step::solve_step`]);
//! 2. bracket solutions between the zero subsolution and an explicit constant
//!    barrier ([`march::barrier_check`]) or an auxiliary supersolution
//!    ([`monotone::solve_auxiliary`]);
//! 3. climb the monotone iteration ladder ([`monotone::run_monotone`]) whose
//!    limit solves the regularized problem;
//! 4. audit the a priori estimates that make the limit passage work
//!    ([`estimates`]): uniform L^1/L^r slice bounds, truncation energies,
//!    interpolation exponents, and a discrete weak-form residual.
//!
//! Scale target is "desk checks": grids of a few thousand nodes, exact direct
//! linear algebra, everything deterministic.

pub mod band;
pub mod config;
pub mod error;
pub mod estimates;
pub mod fields;
pub mod grid;
pub mod harness;
pub mod march;
pub mod monotone;
pub mod operator;
pub mod problem;
pub mod spaces;
pub mod step;
#[cfg(test)]
pub(crate) mod testutil;
pub mod truncation;

pub use error::Error;

/// Shorthand used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
