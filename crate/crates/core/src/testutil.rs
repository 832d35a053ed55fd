//! Shared builders for in-crate tests.

use std::sync::Arc;

use crate::fields::SpaceTimeField;
use crate::grid::{Grid, GridFunction};
use crate::problem::{ExponentField, ProblemSpec, Regime};

/// Heat-like baseline: quadratic exponents, no singular weight, no sources.
pub(crate) fn plain_spec(grid: &Arc<Grid>) -> ProblemSpec {
    ProblemSpec {
        grid: grid.clone(),
        p: ExponentField::Const(2.0),
        q: ExponentField::Const(2.0),
        delta: ExponentField::Const(0.5),
        g: GridFunction::zeros(grid),
        f: SpaceTimeField::Const(0.0),
        u0: GridFunction::zeros(grid),
        lambda: 0.0,
        beta: 0.0,
        horizon: 0.1,
        r: 2.0,
        regime: Regime::B,
    }
}

/// Small problem exercising every term: singular weight, power source, and
/// constant forcing, with slow diffusion exponents.
pub(crate) fn singular_spec(grid: &Arc<Grid>) -> ProblemSpec {
    ProblemSpec {
        grid: grid.clone(),
        p: ExponentField::Const(1.9),
        q: ExponentField::Const(2.0),
        delta: ExponentField::Const(0.5),
        g: GridFunction::interior_constant(grid, 0.2),
        f: SpaceTimeField::Const(0.5),
        u0: GridFunction::interior_constant(grid, 0.1),
        lambda: 0.5,
        beta: 1.0,
        horizon: 0.05,
        r: 3.0,
        regime: Regime::A,
    }
}
