//! Two-point-flux discretization of the variable-exponent p-Laplacian and the
//! per-step convex energy of the implicit Euler scheme.
//!
//! One implicit Euler step with frozen nonsingular sources solves
//!
//! ```text
//! (w - w_prev)/eta - div(|grad w|^{p(x)-2} grad w) = S + g (w + 1/n)^{-delta(x)}
//! ```
//!
//! which is the Euler-Lagrange equation of
//!
//! ```text
//! J(w) = sum_nodes cm [ (w - w_prev)^2 / (2 eta) - S w - g Phi_n(w) ]
//!      + sum_edges cm |grad w|^{p(e)} / p(e)
//! ```
//!
//! with `cm` the cell measure, mass lumping on nodes, gradients on edges, and
//! `Phi_n` the primitive of the singular factor. `J` is strictly convex: the
//! time term contributes `cm / eta` to every diagonal and the singular term's
//! second derivative `g delta (w + 1/n)^{-delta - 1}` is nonnegative, so the
//! Hessian's smallest eigenvalue is at least `cm / eta` whatever the gradient
//! term does.

use std::sync::Arc;

use crate::band::SymBand;
use crate::error::Error;
use crate::grid::{EdgeField, Grid, GridFunction};
use crate::problem::ExponentField;
use crate::Result;

/// Margin keeping iterates strictly inside the singular term's domain.
pub const DOMAIN_MARGIN: f64 = 1e-12;

/// Curvature regularization for the p-term Hessian only; gradients and
/// energies stay exact.
const HESSIAN_EPS: f64 = 1e-8;

/// Per-edge difference quotients `(u_b - u_a) / h_axis`.
pub fn discrete_gradient(u: &GridFunction) -> EdgeField {
    let grid = u.grid();
    let mut out = EdgeField::zeros(grid);
    let h = grid.spacing().to_vec();
    for (e, slot) in grid.edges().iter().zip(out.values_mut()) {
        *slot = (u.values()[e.b] - u.values()[e.a]) / h[e.axis];
    }
    out
}

pub(crate) fn flux(d: f64, p: f64) -> f64 {
    // |d|^{p-2} d, with the p < 2 singularity at d = 0 removed by its limit 0.
    if d == 0.0 {
        0.0
    } else {
        d.abs().powf(p - 2.0) * d
    }
}

/// Negative discrete p(x)-Laplacian: flux divergence at interior nodes, zero
/// on the boundary.
pub fn apply_p_laplacian(u: &GridFunction, p: &ExponentField) -> GridFunction {
    let grid = u.grid();
    let h = grid.spacing().to_vec();
    let mut out = GridFunction::zeros(grid);
    for e in grid.edges() {
        let d = (u.values()[e.b] - u.values()[e.a]) / h[e.axis];
        let f = flux(d, p.at_edge_midpoint(grid, e)) / h[e.axis];
        if !grid.is_boundary(e.a) {
            out.values_mut()[e.a] -= f;
        }
        if !grid.is_boundary(e.b) {
            out.values_mut()[e.b] += f;
        }
    }
    out
}

/// Everything one implicit Euler step needs, with exponents pre-evaluated.
///
/// `source` is the frozen explicit part (power term of the lagged state plus
/// averaged forcing); the singular term stays implicit through `g`, `n`,
/// `delta`.
#[derive(Debug, Clone)]
pub struct StepSystem {
    grid: Arc<Grid>,
    pub w_prev: GridFunction,
    pub eta: f64,
    pub source: GridFunction,
    pub g: GridFunction,
    pub n: u32,
    p_edge: Vec<f64>,
    delta_node: Vec<f64>,
}

impl StepSystem {
    pub fn new(
        w_prev: GridFunction,
        eta: f64,
        source: GridFunction,
        g: GridFunction,
        n: u32,
        p: &ExponentField,
        delta: &ExponentField,
    ) -> Result<StepSystem> {
        let grid = w_prev.grid().clone();
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::Config(format!("step size must be positive, got {eta}")));
        }
        if n == 0 {
            return Err(Error::Config("regularization level n must be at least 1".into()));
        }
        if !grid.same_layout(source.grid()) || !grid.same_layout(g.grid()) {
            return Err(Error::Config("step data live on different grids".into()));
        }
        if g.min_value() < 0.0 {
            return Err(Error::Config("singular weight g must be nonnegative".into()));
        }
        p.check_shape(&grid)?;
        delta.check_shape(&grid)?;
        let p_edge = grid
            .edges()
            .iter()
            .map(|e| p.at_edge_midpoint(&grid, e))
            .collect();
        let delta_node = (0..grid.node_count())
            .map(|node| delta.at_node(&grid, node))
            .collect();
        Ok(StepSystem {
            grid,
            w_prev,
            eta,
            source,
            g,
            n,
            p_edge,
            delta_node,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn p_edge(&self) -> &[f64] {
        &self.p_edge
    }

    pub fn delta_node(&self) -> &[f64] {
        &self.delta_node
    }

    fn inv_n(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Lowest admissible nodal value at nodes carrying the singular term.
    pub fn domain_floor(&self) -> f64 {
        -self.inv_n() + DOMAIN_MARGIN
    }

    /// Errors where the singular term is evaluated outside its domain. Nodes
    /// with `g = 0` carry no singular term and are unconstrained.
    pub fn check_domain(&self, w: &GridFunction) -> Result<()> {
        let floor = -self.inv_n();
        for &node in self.grid.interior_nodes() {
            if self.g.values()[node] != 0.0 && w.values()[node] <= floor {
                return Err(Error::SingularDomain {
                    node,
                    value: w.values()[node],
                });
            }
        }
        Ok(())
    }

    /// Primitive of `(s + 1/n)^{-delta}` on `[0, w]`.
    fn singular_primitive(&self, w: f64, delta: f64) -> f64 {
        let shift = self.inv_n();
        if (delta - 1.0).abs() < 1e-9 {
            ((w + shift) / shift).ln()
        } else {
            ((w + shift).powf(1.0 - delta) - shift.powf(1.0 - delta)) / (1.0 - delta)
        }
    }
}

/// Value of the step energy `J(w)`.
pub fn step_energy(sys: &StepSystem, w: &GridFunction) -> Result<f64> {
    sys.check_domain(w)?;
    let grid = sys.grid();
    let cm = grid.cell_measure();
    let mut acc = 0.0;
    for &node in grid.interior_nodes() {
        let wi = w.values()[node];
        let dw = wi - sys.w_prev.values()[node];
        acc += cm * (dw * dw / (2.0 * sys.eta) - sys.source.values()[node] * wi);
        let gi = sys.g.values()[node];
        if gi != 0.0 {
            acc -= cm * gi * sys.singular_primitive(wi, sys.delta_node()[node]);
        }
    }
    let h = grid.spacing().to_vec();
    for (e, &pe) in grid.edges().iter().zip(sys.p_edge()) {
        let d = (w.values()[e.b] - w.values()[e.a]) / h[e.axis];
        acc += cm * d.abs().powf(pe) / pe;
    }
    Ok(acc)
}

/// Gradient of the step energy: the cell-measure-weighted nodal residual of
/// the step equation. Zero at boundary nodes.
pub fn step_gradient(sys: &StepSystem, w: &GridFunction) -> Result<GridFunction> {
    sys.check_domain(w)?;
    let grid = sys.grid();
    let cm = grid.cell_measure();
    let shift = sys.inv_n();
    let mut out = GridFunction::zeros(grid);
    for &node in grid.interior_nodes() {
        let wi = w.values()[node];
        let mut v = (wi - sys.w_prev.values()[node]) / sys.eta - sys.source.values()[node];
        let gi = sys.g.values()[node];
        if gi != 0.0 {
            v -= gi * (wi + shift).powf(-sys.delta_node()[node]);
        }
        out.values_mut()[node] = cm * v;
    }
    let h = grid.spacing().to_vec();
    for (e, &pe) in grid.edges().iter().zip(sys.p_edge()) {
        let d = (w.values()[e.b] - w.values()[e.a]) / h[e.axis];
        let f = cm * flux(d, pe) / h[e.axis];
        if !grid.is_boundary(e.a) {
            out.values_mut()[e.a] -= f;
        }
        if !grid.is_boundary(e.b) {
            out.values_mut()[e.b] += f;
        }
    }
    Ok(out)
}

/// Hessian of the step energy over interior nodes, as a symmetric band.
///
/// The p-term curvature uses `(d^2 + eps^2)^{(p-2)/2}` instead of
/// `|d|^{p-2}` so flat edges with `p < 2` cannot blow up; eigenvalues stay at
/// or above `cm / eta` because mass and singular contributions are diagonal
/// and the edge part is a weighted graph Laplacian.
pub fn step_hessian(sys: &StepSystem, w: &GridFunction) -> Result<SymBand> {
    sys.check_domain(w)?;
    let grid = sys.grid();
    let cm = grid.cell_measure();
    let shift = sys.inv_n();

    let mut bandwidth = 0;
    for e in grid.edges() {
        if let (Some(ia), Some(ib)) = (grid.interior_index(e.a), grid.interior_index(e.b)) {
            bandwidth = bandwidth.max(ib.max(ia) - ib.min(ia));
        }
    }
    let mut hess = SymBand::zeros(grid.interior_count(), bandwidth);

    for &node in grid.interior_nodes() {
        let i = grid.interior_index(node).unwrap();
        let mut diag = cm / sys.eta;
        let gi = sys.g.values()[node];
        if gi != 0.0 {
            let delta = sys.delta_node()[node];
            diag += cm * gi * delta * (w.values()[node] + shift).powf(-delta - 1.0);
        }
        hess.add(i, i, diag);
    }

    let h = grid.spacing().to_vec();
    for (e, &pe) in grid.edges().iter().zip(sys.p_edge()) {
        let d = (w.values()[e.b] - w.values()[e.a]) / h[e.axis];
        let weight =
            cm * (pe - 1.0) * (d * d + HESSIAN_EPS * HESSIAN_EPS).powf(0.5 * (pe - 2.0))
                / (h[e.axis] * h[e.axis]);
        let ia = grid.interior_index(e.a);
        let ib = grid.interior_index(e.b);
        if let Some(i) = ia {
            hess.add(i, i, weight);
        }
        if let Some(i) = ib {
            hess.add(i, i, weight);
        }
        if let (Some(i), Some(j)) = (ia, ib) {
            hess.add(i, j, -weight);
        }
    }
    Ok(hess)
}
