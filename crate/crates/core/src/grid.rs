//! Uniform tensor grids on axis-aligned boxes, with the nodal and edge data
//! containers every other module works on.
//!
//! Conventions fixed here and relied on everywhere else:
//!
//! * nodes are the tensor product of per-axis uniform point sets, ordered
//!   row-major with the last axis fastest;
//! * a node is a boundary node iff any of its axis indices is extremal;
//!   homogeneous Dirichlet data live on exactly those nodes;
//! * edges connect axis-neighboring nodes; each edge carries the cell measure
//!   `prod(h_d)` as its quadrature weight and divides differences by the
//!   spacing of its own axis;
//! * interior nodes get a dense renumbering (same row-major order) used to
//!   index linear systems.

use std::sync::Arc;

use crate::error::Error;
use crate::Result;

pub const MAX_DIM: usize = 3;

/// One axis-aligned edge between nodes `a` and `b = a + stride(axis)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub axis: usize,
}

#[derive(Debug)]
pub struct Grid {
    dim: usize,
    /// Nodes per axis, each >= 2.
    dims: [usize; MAX_DIM],
    origin: [f64; MAX_DIM],
    spacing: [f64; MAX_DIM],
    strides: [usize; MAX_DIM],
    node_count: usize,
    edges: Vec<Edge>,
    boundary: Vec<bool>,
    /// Dense interior index per node; `usize::MAX` at boundary nodes.
    interior_index: Vec<usize>,
    interior_nodes: Vec<usize>,
    cell_measure: f64,
}

impl Grid {
    /// Uniform grid with `cells[d]` cells (so `cells[d] + 1` nodes) on each
    /// axis of the box `[lo[d], hi[d]]`.
    pub fn new(lo: &[f64], hi: &[f64], cells: &[usize]) -> Result<Arc<Grid>> {
        let dim = cells.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Config(format!(
                "grid dimension must be 1..={MAX_DIM}, got {dim}"
            )));
        }
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::Config(
                "box bounds and resolution must have the same dimension".into(),
            ));
        }
        let mut dims = [1usize; MAX_DIM];
        let mut origin = [0.0; MAX_DIM];
        let mut spacing = [1.0; MAX_DIM];
        for d in 0..dim {
            if cells[d] < 1 {
                return Err(Error::Config(format!("axis {d} needs at least one cell")));
            }
            if !(hi[d] - lo[d]).is_finite() || hi[d] <= lo[d] {
                return Err(Error::Config(format!(
                    "axis {d} has empty or invalid extent [{}, {}]",
                    lo[d], hi[d]
                )));
            }
            dims[d] = cells[d] + 1;
            origin[d] = lo[d];
            spacing[d] = (hi[d] - lo[d]) / cells[d] as f64;
        }
        let mut strides = [0usize; MAX_DIM];
        let mut acc = 1;
        for d in (0..dim).rev() {
            strides[d] = acc;
            acc *= dims[d];
        }
        let node_count = acc;

        let mut boundary = vec![false; node_count];
        let mut interior_index = vec![usize::MAX; node_count];
        let mut interior_nodes = Vec::new();
        for node in 0..node_count {
            let mut on_boundary = false;
            let mut rem = node;
            for d in 0..dim {
                let i = rem / strides[d];
                rem %= strides[d];
                if i == 0 || i == dims[d] - 1 {
                    on_boundary = true;
                }
            }
            boundary[node] = on_boundary;
            if !on_boundary {
                interior_index[node] = interior_nodes.len();
                interior_nodes.push(node);
            }
        }

        let mut edges = Vec::new();
        for node in 0..node_count {
            let mut rem = node;
            for d in 0..dim {
                let i = rem / strides[d];
                rem %= strides[d];
                if i + 1 < dims[d] {
                    edges.push(Edge {
                        a: node,
                        b: node + strides[d],
                        axis: d,
                    });
                }
            }
        }

        let cell_measure = spacing[..dim].iter().product();

        Ok(Arc::new(Grid {
            dim,
            dims,
            origin,
            spacing,
            strides,
            node_count,
            edges,
            boundary,
            interior_index,
            interior_nodes,
            cell_measure,
        }))
    }

    /// Unit box `[0,1]^dim` helper used all over the tests.
    pub fn unit(cells: &[usize]) -> Result<Arc<Grid>> {
        let dim = cells.len();
        Grid::new(&vec![0.0; dim], &vec![1.0; dim], cells)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    /// Measure of one grid cell, `prod(h_d)`.
    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    /// Measure of the whole box.
    pub fn domain_measure(&self) -> f64 {
        (0..self.dim)
            .map(|d| self.spacing[d] * (self.dims[d] - 1) as f64)
            .product()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn interior_count(&self) -> usize {
        self.interior_nodes.len()
    }

    /// Dense interior index of `node`, or `None` on the boundary.
    pub fn interior_index(&self, node: usize) -> Option<usize> {
        let idx = self.interior_index[node];
        (idx != usize::MAX).then_some(idx)
    }

    pub fn multi_index(&self, node: usize, out: &mut [usize]) {
        let mut rem = node;
        for d in 0..self.dim {
            out[d] = rem / self.strides[d];
            rem %= self.strides[d];
        }
    }

    pub fn node_coord(&self, node: usize) -> Vec<f64> {
        let mut idx = [0usize; MAX_DIM];
        self.multi_index(node, &mut idx[..self.dim]);
        (0..self.dim)
            .map(|d| self.origin[d] + idx[d] as f64 * self.spacing[d])
            .collect()
    }

    pub fn edge_midpoint(&self, edge: &Edge) -> Vec<f64> {
        let mut mid = self.node_coord(edge.a);
        mid[edge.axis] += 0.5 * self.spacing[edge.axis];
        mid
    }

    /// Visits every cell with its corner nodes and its geometric midpoint.
    /// Corners are listed in row-major order of the local binary offsets.
    pub fn for_each_cell(&self, mut visit: impl FnMut(&[usize], &[f64])) {
        let dim = self.dim;
        let mut cell = [0usize; MAX_DIM];
        let mut corners = [0usize; 1 << MAX_DIM];
        let n_corners = 1usize << dim;
        let mut mid = [0.0; MAX_DIM];
        loop {
            let base: usize = (0..dim).map(|d| cell[d] * self.strides[d]).sum();
            for (c, corner) in corners[..n_corners].iter_mut().enumerate() {
                let mut node = base;
                for d in 0..dim {
                    if c & (1 << (dim - 1 - d)) != 0 {
                        node += self.strides[d];
                    }
                }
                *corner = node;
            }
            for d in 0..dim {
                mid[d] = self.origin[d] + (cell[d] as f64 + 0.5) * self.spacing[d];
            }
            visit(&corners[..n_corners], &mid[..dim]);

            let mut d = dim;
            loop {
                if d == 0 {
                    return;
                }
                d -= 1;
                cell[d] += 1;
                if cell[d] < self.dims[d] - 1 {
                    break;
                }
                cell[d] = 0;
            }
        }
    }

    /// Distance from `x` to the boundary of the box.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        (0..self.dim)
            .map(|d| {
                let lo = x[d] - self.origin[d];
                let hi = self.origin[d] + self.spacing[d] * (self.dims[d] - 1) as f64 - x[d];
                lo.min(hi)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// True if both grids have identical geometry.
    pub fn same_layout(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.dims[..self.dim] == other.dims[..other.dim]
            && self.origin[..self.dim] == other.origin[..other.dim]
            && self
                .spacing()
                .iter()
                .zip(other.spacing())
                .all(|(a, b)| (a - b).abs() < 1e-14 * a.abs().max(1.0))
    }
}

/// Nodal scalar field on a [`Grid`].
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &Arc<Grid>) -> GridFunction {
        GridFunction {
            grid: grid.clone(),
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != grid.node_count() {
            return Err(Error::Config(format!(
                "grid function length {} does not match node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(GridFunction {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &Arc<Grid>, mut f: impl FnMut(&[f64]) -> f64) -> GridFunction {
        let values = (0..grid.node_count())
            .map(|node| f(&grid.node_coord(node)))
            .collect();
        GridFunction {
            grid: grid.clone(),
            values,
        }
    }

    /// Constant at interior nodes, zero on the boundary.
    pub fn interior_constant(grid: &Arc<Grid>, value: f64) -> GridFunction {
        let mut u = GridFunction::zeros(grid);
        for &node in grid.interior_nodes() {
            u.values[node] = value;
        }
        u
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Nodewise map that also sees the node index.
    pub fn map_indexed(&self, f: impl Fn(usize, f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| f(i, v))
                .collect(),
        }
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// Largest violation of `self <= other`, as `max(self - other)` and its node.
    pub fn worst_excess_over(&self, other: &GridFunction) -> (f64, usize) {
        let mut worst = f64::NEG_INFINITY;
        let mut at = 0;
        for (i, (&a, &b)) in self.values.iter().zip(&other.values).enumerate() {
            let excess = a - b;
            if excess > worst {
                worst = excess;
                at = i;
            }
        }
        (worst, at)
    }

    /// True if all boundary nodes hold exactly zero.
    pub fn respects_boundary(&self) -> bool {
        (0..self.grid.node_count())
            .all(|node| !self.grid.is_boundary(node) || self.values[node] == 0.0)
    }
}

/// Scalar field with one value per grid edge, aligned with [`Grid::edges`].
#[derive(Debug, Clone)]
pub struct EdgeField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl EdgeField {
    pub fn zeros(grid: &Arc<Grid>) -> EdgeField {
        EdgeField {
            grid: grid.clone(),
            values: vec![0.0; grid.edges().len()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_1d_counts_and_coords() {
        let g = Grid::unit(&[4]).unwrap();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.edges().len(), 4);
        assert_eq!(g.interior_count(), 3);
        assert!(g.is_boundary(0) && g.is_boundary(4));
        assert_eq!(g.node_coord(2), vec![0.5]);
        assert!((g.cell_measure() - 0.25).abs() < 1e-15);
        assert!((g.domain_measure() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grid_2d_edges_and_interior() {
        let g = Grid::unit(&[2, 3]).unwrap();
        assert_eq!(g.node_count(), 12);
        // x-edges: 2*4, y-edges: 3*3
        assert_eq!(g.edges().len(), 8 + 9);
        assert_eq!(g.interior_count(), 2);
        let interior: Vec<_> = g.interior_nodes().to_vec();
        for &n in &interior {
            assert!(!g.is_boundary(n));
        }
        assert_eq!(g.interior_index(interior[0]), Some(0));
        assert_eq!(g.interior_index(0), None);
    }

    #[test]
    fn cells_cover_domain() {
        let g = Grid::new(&[0.0, -1.0], &[2.0, 1.0], &[4, 5]).unwrap();
        let mut count = 0;
        let mut measure = 0.0;
        g.for_each_cell(|corners, mid| {
            count += 1;
            assert_eq!(corners.len(), 4);
            assert!(mid[0] > 0.0 && mid[0] < 2.0);
            assert!(mid[1] > -1.0 && mid[1] < 1.0);
            measure += g.cell_measure();
        });
        assert_eq!(count, 20);
        assert!((measure - g.domain_measure()).abs() < 1e-12);
    }

    #[test]
    fn edge_midpoints_sit_between_nodes() {
        let g = Grid::unit(&[2, 2]).unwrap();
        for e in g.edges() {
            let ma = g.node_coord(e.a);
            let mb = g.node_coord(e.b);
            let mid = g.edge_midpoint(e);
            for d in 0..2 {
                assert!((mid[d] - 0.5 * (ma[d] + mb[d])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn boundary_distance_matches_hand_values() {
        let g = Grid::unit(&[4, 4]).unwrap();
        assert!((g.boundary_distance(&[0.5, 0.5]) - 0.5).abs() < 1e-15);
        assert!((g.boundary_distance(&[0.25, 0.5]) - 0.25).abs() < 1e-15);
        assert!((g.boundary_distance(&[0.1, 0.9]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(Grid::new(&[0.0], &[0.0], &[4]).is_err());
        assert!(Grid::new(&[0.0], &[1.0], &[0]).is_err());
        assert!(Grid::new(&[0.0; 4], &[1.0; 4], &[2; 4]).is_err());
    }
}
