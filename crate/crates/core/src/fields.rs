//! Data field descriptors: closed-form or tabulated functions of space (and
//! time) that get sampled onto grid nodes.
//!
//! Spatial fields describe coefficients and initial data; space-time fields
//! describe forcing terms. Time stays continuous because the time march
//! averages the forcing over each step rather than sampling it.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grid::{Grid, GridFunction};
use crate::Result;

/// Function of space only, in a form that can live in a config file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum SpatialField {
    /// Constant value everywhere.
    Const(f64),
    /// One value per grid node, row-major.
    Table(Vec<f64>),
    /// `amplitude * prod_d sin(pi * (x_d - lo_d) / extent_d)`; vanishes on the
    /// boundary of the box.
    ProdSin { amplitude: f64 },
    /// `min(amplitude, slope * dist(x, boundary))`: a flat-topped pyramid.
    /// Its gradient has constant magnitude on the ramp, which makes truncation
    /// energies scale linearly in the truncation level.
    Pyramid { amplitude: f64, slope: f64 },
}

impl SpatialField {
    pub fn sample(&self, grid: &Arc<Grid>) -> Result<GridFunction> {
        match self {
            SpatialField::Const(c) => Ok(GridFunction::from_fn(grid, |_| *c)),
            SpatialField::Table(values) => GridFunction::from_values(grid, values.clone()),
            SpatialField::ProdSin { amplitude } => {
                // The closed form vanishes on the boundary; write exact zeros
                // there instead of sin(pi) round-off.
                let values = (0..grid.node_count())
                    .map(|node| {
                        if grid.is_boundary(node) {
                            return 0.0;
                        }
                        let x = grid.node_coord(node);
                        let mut v = *amplitude;
                        for d in 0..grid.dim() {
                            let extent = grid.spacing()[d] * (grid.dims()[d] - 1) as f64;
                            v *= (std::f64::consts::PI * (x[d] - grid.origin()[d]) / extent).sin();
                        }
                        v
                    })
                    .collect();
                GridFunction::from_values(grid, values)
            }
            SpatialField::Pyramid { amplitude, slope } => Ok(GridFunction::from_fn(grid, |x| {
                amplitude.min(slope * grid.boundary_distance(x))
            })),
        }
    }
}

/// Function of space and time, evaluated at a node index and a continuous
/// time. Node-indexed evaluation keeps tabulated data exact and lets derived
/// fields (like the enlargement used by the monotone scheme) reuse trajectory
/// slices without interpolation in space.
#[derive(Clone)]
pub enum SpaceTimeField {
    Const(f64),
    /// `space(x) * poly(t)` with `poly(t) = c_0 + c_1 t + ...`.
    Separable {
        space: GridFunction,
        time_poly: Vec<f64>,
    },
    /// Arbitrary in-process field; not representable in config files.
    Custom(Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for SpaceTimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceTimeField::Const(c) => write!(f, "Const({c})"),
            SpaceTimeField::Separable { time_poly, .. } => {
                write!(f, "Separable {{ time_poly: {time_poly:?} }}")
            }
            SpaceTimeField::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl SpaceTimeField {
    pub fn eval(&self, node: usize, t: f64) -> f64 {
        match self {
            SpaceTimeField::Const(c) => *c,
            SpaceTimeField::Separable { space, time_poly } => {
                let mut poly = 0.0;
                for &c in time_poly.iter().rev() {
                    poly = poly * t + c;
                }
                space.values()[node] * poly
            }
            SpaceTimeField::Custom(f) => f(node, t),
        }
    }

    /// Nodewise maximum with a floor that is constant on each time slab
    /// `((m-1) eta, m eta]`. Used to enlarge a forcing term above a power of a
    /// computed supersolution.
    pub fn with_slabwise_floor(self, floor: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>) -> SpaceTimeField {
        let base = self;
        SpaceTimeField::Custom(Arc::new(move |node, t| base.eval(node, t).max(floor(node, t))))
    }
}

/// Config-file form of a space-time field.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum SpaceTimeFieldSpec {
    Const(f64),
    Separable {
        space: SpatialField,
        time_poly: Vec<f64>,
    },
}

impl SpaceTimeFieldSpec {
    pub fn build(&self, grid: &Arc<Grid>) -> Result<SpaceTimeField> {
        match self {
            SpaceTimeFieldSpec::Const(c) => Ok(SpaceTimeField::Const(*c)),
            SpaceTimeFieldSpec::Separable { space, time_poly } => {
                if time_poly.is_empty() {
                    return Err(Error::Config("separable field needs time coefficients".into()));
                }
                Ok(SpaceTimeField::Separable {
                    space: space.sample(grid)?,
                    time_poly: time_poly.clone(),
                })
            }
        }
    }

    /// True if the field cannot depend on time (used to gate coefficients that
    /// must be spatial).
    pub fn is_time_independent(&self) -> bool {
        match self {
            SpaceTimeFieldSpec::Const(_) => true,
            SpaceTimeFieldSpec::Separable { time_poly, .. } => time_poly.len() <= 1,
        }
    }
}
