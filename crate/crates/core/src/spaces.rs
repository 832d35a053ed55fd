//! Modulars and norms for variable-exponent and classical Lebesgue spaces on
//! grid data.
//!
//! Spatial integrals use the midpoint rule on grid cells: nodal functions are
//! interpolated to the cell midpoint as the mean of the corner values, and
//! variable exponents are evaluated at the midpoint too. This makes constants
//! integrate exactly and matches the two-point-flux energy, where gradient
//! quantities live on edges with the cell measure as weight.
//!
//! The Luxemburg norm is computed by bisection on the scaling parameter; the
//! modular is continuous and strictly decreasing in the scale, so bracketing
//! plus bisection is exact to round-off at desk scale.

use crate::error::Error;
use crate::grid::{EdgeField, GridFunction};
use crate::problem::ExponentField;
use crate::Result;

/// Modular `integral of |u|^{p(x)}` for a nodal function.
pub fn modular(u: &GridFunction, p: &ExponentField) -> f64 {
    let grid = u.grid();
    let meas = grid.cell_measure();
    let mut acc = 0.0;
    grid.for_each_cell(|corners, mid| {
        let avg = corners.iter().map(|&c| u.values()[c]).sum::<f64>() / corners.len() as f64;
        let pe = p.at_cell_midpoint(corners, mid);
        acc += meas * avg.abs().powf(pe);
    });
    acc
}

/// Modular for an edge field (typically a discrete gradient), with the
/// exponent evaluated at edge midpoints.
pub fn edge_modular(e: &EdgeField, p: &ExponentField) -> f64 {
    let grid = e.grid();
    let meas = grid.cell_measure();
    grid.edges()
        .iter()
        .zip(e.values())
        .map(|(edge, &v)| meas * v.abs().powf(p.at_edge_midpoint(grid, edge)))
        .sum()
}

fn scaled_modular(u: &GridFunction, p: &ExponentField, mu: f64) -> f64 {
    let grid = u.grid();
    let meas = grid.cell_measure();
    let mut acc = 0.0;
    grid.for_each_cell(|corners, mid| {
        let avg = corners.iter().map(|&c| u.values()[c]).sum::<f64>() / corners.len() as f64;
        let pe = p.at_cell_midpoint(corners, mid);
        acc += meas * (avg.abs() / mu).powf(pe);
    });
    acc
}

/// Luxemburg norm: the unique `mu > 0` with `modular(u / mu) = 1`, or `0` for
/// the zero function.
pub fn luxemburg_norm(u: &GridFunction, p: &ExponentField) -> f64 {
    if modular(u, p) == 0.0 {
        return 0.0;
    }
    // Bracket: grow the upper end until the scaled modular drops below 1,
    // shrink the lower end until it exceeds 1.
    let mut hi = u.linf().max(1e-12) * (1.0 + u.grid().domain_measure());
    while scaled_modular(u, p, hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = hi;
    while scaled_modular(u, p, lo) <= 1.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return 0.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = scaled_modular(u, p, mid);
        if (v - 1.0).abs() < 1e-14 {
            return mid;
        }
        if v > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Classical `L^r` norm by the same midpoint quadrature.
pub fn lebesgue_norm(u: &GridFunction, r: f64) -> f64 {
    debug_assert!(r >= 1.0);
    let grid = u.grid();
    let meas = grid.cell_measure();
    let mut acc = 0.0;
    grid.for_each_cell(|corners, _| {
        let avg = corners.iter().map(|&c| u.values()[c]).sum::<f64>() / corners.len() as f64;
        acc += meas * avg.abs().powf(r);
    });
    acc.powf(1.0 / r)
}

/// A function of time with values on a fixed grid: uniformly spaced slices.
#[derive(Debug, Clone)]
pub struct SpaceTimeSamples {
    times: Vec<f64>,
    slices: Vec<GridFunction>,
}

impl SpaceTimeSamples {
    pub fn new(times: Vec<f64>, slices: Vec<GridFunction>) -> Result<SpaceTimeSamples> {
        if times.len() != slices.len() || times.is_empty() {
            return Err(Error::Config("time samples and slices must align".into()));
        }
        if times.len() > 1 {
            let dt = times[1] - times[0];
            if dt <= 0.0 {
                return Err(Error::Config("time samples must increase".into()));
            }
            for w in times.windows(2) {
                if ((w[1] - w[0]) - dt).abs() > 1e-12 * dt.max(1.0) {
                    return Err(Error::Config("time samples must be uniformly spaced".into()));
                }
            }
        }
        let grid = slices[0].grid().clone();
        if !slices.iter().all(|s| grid.same_layout(s.grid())) {
            return Err(Error::Config("slices must share one grid".into()));
        }
        Ok(SpaceTimeSamples { times, slices })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slices(&self) -> &[GridFunction] {
        &self.slices
    }
}

/// `sup over sampled times of the L^r slice norm`.
pub fn sup_time_norm(samples: &SpaceTimeSamples, r: f64) -> f64 {
    samples
        .slices
        .iter()
        .map(|s| lebesgue_norm(s, r))
        .fold(0.0, f64::max)
}
