//! Runtime verification of the a priori bounds a trajectory is supposed to
//! obey: truncation energies, sup-in-time norms, weighted dissipation sums,
//! interpolation exponents, and the discrete weak-form residual.

use std::sync::Arc;

use crate::error::Error;
use crate::grid::GridFunction;
use crate::march::{steklov_average, truncated_forcing, Trajectory, TrajectoryKind};
use crate::operator::flux;
use crate::problem::ExponentField;
use crate::spaces::lebesgue_norm;
use crate::truncation::{power_source, truncate};
use crate::Result;

/// Space-time gradient modular of the nodewise truncation at level `k`:
///
/// ```text
/// sum_m eta sum_edges cm |grad T_k(w^m)|^{p(e)}
/// ```
///
/// `k = infinity` gives the plain gradient modular of the trajectory.
pub fn trunc_energy(traj: &Trajectory, k: f64) -> f64 {
    let grid = traj.grid();
    let spec = traj.spec();
    let h = grid.spacing().to_vec();
    let cm = grid.cell_measure();
    let p_edge: Vec<f64> = grid
        .edges()
        .iter()
        .map(|e| spec.p.at_edge_midpoint(grid, e))
        .collect();
    let mut acc = 0.0;
    for m in 1..=traj.num_steps() {
        let clamped = traj.state(m).map(|v| truncate(v, k));
        for (e, &pe) in grid.edges().iter().zip(&p_edge) {
            let d = (clamped.values()[e.b] - clamped.values()[e.a]) / h[e.axis];
            acc += cm * d.abs().powf(pe);
        }
    }
    acc * traj.eta()
}

/// Aggregate Newton behavior over a march.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct NewtonStats {
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
    pub total_backtracks: usize,
}

/// Scalar summary of the bounds a trajectory realizes.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EstimateLedger {
    pub n: u32,
    pub num_steps: usize,
    pub eta: f64,
    /// Largest nodal value over all steps.
    pub sup_linf: f64,
    /// Largest L1 norm over steps.
    pub sup_l1: f64,
    /// Largest Lr norm over steps, with `r` from the problem.
    pub sup_lr: f64,
    pub r: f64,
    /// Gradient modular over space-time (truncation energy at infinite
    /// level).
    pub grad_modular: f64,
    /// `sum_m eta t_m || (w^m - w^{m-1}) / eta ||_{L2}^2`, the dissipation
    /// sum weighted away from the initial time.
    pub weighted_increments: f64,
    /// `sum_m eta || w^m ||_{L1}`.
    pub space_time_l1: f64,
    pub newton: NewtonStats,
}

/// Computes the ledger for a trajectory.
pub fn ledger(traj: &Trajectory) -> EstimateLedger {
    let eta = traj.eta();
    let r = traj.spec().r;
    let mut sup_linf = 0.0f64;
    let mut sup_l1 = 0.0f64;
    let mut sup_lr = 0.0f64;
    let mut space_time_l1 = 0.0;
    for (m, state) in traj.states().iter().enumerate() {
        sup_linf = sup_linf.max(state.linf());
        let l1 = lebesgue_norm(state, 1.0);
        sup_l1 = sup_l1.max(l1);
        sup_lr = sup_lr.max(lebesgue_norm(state, r));
        if m >= 1 {
            space_time_l1 += eta * l1;
        }
    }

    let mut weighted_increments = 0.0;
    for m in 1..=traj.num_steps() {
        let prev = traj.state(m - 1);
        let rate = traj
            .state(m)
            .map_indexed(|i, v| (v - prev.values()[i]) / eta);
        let l2 = lebesgue_norm(&rate, 2.0);
        weighted_increments += eta * (m as f64 * eta) * l2 * l2;
    }

    let mut newton = NewtonStats::default();
    for report in traj.reports() {
        newton.total_iterations += report.iterations;
        newton.max_iterations = newton.max_iterations.max(report.iterations);
        newton.max_residual = newton.max_residual.max(report.final_residual);
        newton.total_backtracks += report.line_search_backtracks;
    }

    EstimateLedger {
        n: traj.n(),
        num_steps: traj.num_steps(),
        eta,
        sup_linf,
        sup_l1,
        sup_lr,
        r,
        grad_modular: trunc_energy(traj, f64::INFINITY),
        weighted_increments,
        space_time_l1,
        newton,
    }
}

/// `L1` distance of two trajectories over space-time, reading both as
/// right-continuous staircases. Step counts must match or one must refine
/// the other by an integer factor.
pub fn space_time_l1_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if !a.grid().same_layout(b.grid()) {
        return Err(Error::Config("distance needs a shared grid".into()));
    }
    if (a.horizon() - b.horizon()).abs() > 1e-10 * (1.0 + a.horizon()) {
        return Err(Error::Config("distance needs matching horizons".into()));
    }
    let (coarse, fine) = if a.num_steps() <= b.num_steps() {
        (a, b)
    } else {
        (b, a)
    };
    let ratio = fine.num_steps() / coarse.num_steps();
    if ratio * coarse.num_steps() != fine.num_steps() {
        return Err(Error::Config(
            "distance needs nested time grids (integer refinement)".into(),
        ));
    }
    let eta = fine.eta();
    let mut acc = 0.0;
    for mf in 1..=fine.num_steps() {
        // Fine slab (t_{mf-1}, t_mf] sits inside coarse slab ceil(mf/ratio).
        let mc = (mf + ratio - 1) / ratio;
        let cs = coarse.state(mc);
        let diff = fine
            .state(mf)
            .map_indexed(|i, v| v - cs.values()[i]);
        acc += eta * lebesgue_norm(&diff, 1.0);
    }
    Ok(acc)
}

/// Interpolation exponents of the power-source growth bound.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GrowthExponents {
    /// Weight the gradient integrability carries.
    pub e: f64,
    /// Resulting homogeneity of the nonlinear term.
    pub b: f64,
}

/// Computes the interpolation exponents
///
/// ```text
/// E = (q+ - 2) / (p- (1 + (2 + rho)/N) - q+)
/// B = (q+ + rho + (q+ - p-) E) / (2 + rho)
/// ```
///
/// The denominator of `E` must be positive; that is exactly the growth
/// restriction `q+ < p- (1 + (2 + rho)/N)` on the power source.
pub fn gn_exponents(p_minus: f64, q_plus: f64, dim: usize, rho: f64) -> Result<GrowthExponents> {
    if dim == 0 {
        return Err(Error::Validation("space dimension must be positive".into()));
    }
    if !(p_minus > 1.0) || !(q_plus > 1.0) {
        return Err(Error::Validation(format!(
            "exponents must exceed one, got p- = {p_minus}, q+ = {q_plus}"
        )));
    }
    if !(rho > 0.0) {
        return Err(Error::Validation(format!("weight rho must be positive, got {rho}")));
    }
    let denom = p_minus * (1.0 + (2.0 + rho) / dim as f64) - q_plus;
    if denom <= 0.0 {
        return Err(Error::Validation(format!(
            "growth bound violated: need q+ < p- (1 + (2 + rho)/N), got q+ = {q_plus} \
             against {:.6}",
            p_minus * (1.0 + (2.0 + rho) / dim as f64)
        )));
    }
    let e = (q_plus - 2.0) / denom;
    let b = (q_plus + rho + (q_plus - p_minus) * e) / (2.0 + rho);
    Ok(GrowthExponents { e, b })
}

/// Growth exponents evaluated at a problem's extreme exponent values.
pub fn gn_exponents_for(
    spec: &crate::problem::ProblemSpec,
    rho: f64,
) -> Result<GrowthExponents> {
    let (p_minus, _) = crate::problem::exponent_bounds(&spec.p, &spec.grid);
    let (_, q_plus) = crate::problem::exponent_bounds(&spec.q, &spec.grid);
    gn_exponents(p_minus, q_plus, spec.grid.dim(), rho)
}

/// Space-time test function for the weak-form audit.
///
/// Admissible test functions vanish on the lateral boundary at all times and
/// at the final time; both are validated against the trajectory before use.
#[derive(Clone)]
pub struct TestFunction {
    eval: Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("TestFunction").finish_non_exhaustive()
    }
}

impl TestFunction {
    pub fn new(eval: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> TestFunction {
        TestFunction {
            eval: Arc::new(eval),
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        (self.eval)(x, t)
    }

    /// Product bump over the box, scaled to peak value one, times the linear
    /// time cutoff `1 - t / horizon`.
    pub fn space_time_bump(lo: &[f64], hi: &[f64], horizon: f64) -> TestFunction {
        let lo = lo.to_vec();
        let hi = hi.to_vec();
        TestFunction::new(move |x, t| {
            let mut v = 1.0 - t / horizon;
            for ((&xi, &a), &b) in x.iter().zip(&lo).zip(&hi) {
                let w = (b - a) * (b - a);
                v *= 4.0 * (xi - a) * (b - xi) / w;
            }
            v
        })
    }
}

/// Outcome of the weak-form audit.
#[derive(Debug, Clone)]
pub struct WeakFormReport {
    /// Absolute value of the assembled weak-form sum.
    pub residual: f64,
    /// Largest sampled test-function magnitude.
    pub phi_sup: f64,
    /// What the solver tolerance permits:
    /// `10 T #interior tol sup|phi|`.
    pub bound: f64,
    pub pass: bool,
}

/// Assembles the discrete weak form of the regularized equation against an
/// admissible test function and checks it vanishes to solver accuracy:
///
/// ```text
/// sum_m sum_i cm (w^m - w^{m-1})_i phi_i^{m-1}
///   + sum_m eta sum_e cm |grad w^m|^{p-2} grad w^m . grad phi^{m-1}
///   - sum_m eta sum_i cm [lambda h_n(w^{m-1}) + g (w^m + 1/n)^{-delta}
///                          + beta avg f]_i phi_i^{m-1}
/// ```
///
/// Only direct marches satisfy these step equations, so other trajectory
/// kinds are rejected.
pub fn weak_form_residual(traj: &Trajectory, phi: &TestFunction) -> Result<WeakFormReport> {
    if traj.kind() != TrajectoryKind::DirectMarch {
        return Err(Error::Validation(
            "weak-form audit applies to direct-march trajectories".into(),
        ));
    }
    let spec = traj.spec();
    let grid = traj.grid();
    let eta = traj.eta();
    let num_steps = traj.num_steps();
    let horizon = traj.horizon();
    let n = traj.n();
    let shift = 1.0 / n as f64;
    let cm = grid.cell_measure();
    let h = grid.spacing().to_vec();

    // Admissibility: zero on the lateral boundary at every grid time and
    // zero at the final time everywhere.
    for node in 0..grid.node_count() {
        let x = grid.node_coord(node);
        if grid.is_boundary(node) {
            for m in 0..=num_steps {
                let v = phi.eval(&x, m as f64 * eta);
                if v.abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "test function does not vanish on the boundary: |phi| = {:.3e} at node {node}",
                        v.abs()
                    )));
                }
            }
        }
        let v = phi.eval(&x, horizon);
        if v.abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "test function does not vanish at the final time: |phi| = {:.3e} at node {node}",
                v.abs()
            )));
        }
    }

    let forcing = truncated_forcing(&spec.f, n);
    let q_node: Vec<f64> = (0..grid.node_count())
        .map(|node| spec.q.at_node(grid, node))
        .collect();
    let delta_node: Vec<f64> = (0..grid.node_count())
        .map(|node| spec.delta.at_node(grid, node))
        .collect();
    let p_edge: Vec<f64> = grid
        .edges()
        .iter()
        .map(|e| spec.p.at_edge_midpoint(grid, e))
        .collect();

    let mut acc = 0.0;
    let mut phi_sup = 0.0f64;
    for m in 1..=num_steps {
        let t_prev = (m - 1) as f64 * eta;
        let phi_m =
            GridFunction::from_fn(grid, |x| phi.eval(x, t_prev));
        phi_sup = phi_sup.max(phi_m.linf());
        let w = traj.state(m);
        let w_prev = traj.state(m - 1);
        let avg = steklov_average(&forcing, grid, eta, t_prev);
        for &node in grid.interior_nodes() {
            let pv = phi_m.values()[node];
            acc += cm * (w.values()[node] - w_prev.values()[node]) * pv;
            let mut source = spec.beta * avg.values()[node]
                + spec.lambda * power_source(w_prev.values()[node], q_node[node], n);
            if spec.g.values()[node] != 0.0 {
                source +=
                    spec.g.values()[node] * (w.values()[node] + shift).powf(-delta_node[node]);
            }
            acc -= eta * cm * source * pv;
        }
        for (e, &pe) in grid.edges().iter().zip(&p_edge) {
            let dw = (w.values()[e.b] - w.values()[e.a]) / h[e.axis];
            let dphi = (phi_m.values()[e.b] - phi_m.values()[e.a]) / h[e.axis];
            acc += eta * cm * flux(dw, pe) * dphi;
        }
    }

    let tol = traj
        .reports()
        .iter()
        .map(|r| r.final_residual)
        .fold(0.0f64, f64::max)
        .max(1e-14);
    let bound = 10.0 * horizon * grid.interior_count() as f64 * tol * phi_sup.max(1e-30);
    let residual = acc.abs();
    Ok(WeakFormReport {
        residual,
        phi_sup,
        bound,
        pass: residual <= bound,
    })
}

/// Keep the clamp helper visible for exponent sweeps over ledgers.
pub fn exponent_span(field: &ExponentField, grid: &crate::grid::Grid) -> (f64, f64) {
    crate::problem::exponent_bounds(field, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::march::run_rothe;
    use crate::monotone::run_monotone;
    use crate::monotone::LadderOptions;
    use crate::step::SolverOptions;
    use crate::testutil::{plain_spec, singular_spec};
    use proptest::test_runner::Config as ProptestConfig;
    use proptest::{prop_assert, prop_assume, proptest};

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn trunc_energy_matches_direct_sum_and_is_monotone_in_level() {
        let grid = Grid::unit(&[10]).unwrap();
        let mut spec = plain_spec(&grid);
        spec.u0 = GridFunction::from_fn(&grid, |x| 3.0 * (std::f64::consts::PI * x[0]).sin());
        spec.p = ExponentField::Affine(vec![1.8, 0.3]);
        let spec = Arc::new(spec);
        let traj = run_rothe(&spec, 4, 3, opts()).unwrap();

        let k = 1.5;
        let mut expect = 0.0;
        let h = grid.spacing()[0];
        for m in 1..=3 {
            let clamped = traj.state(m).map(|v| v.clamp(-k, k));
            for e in grid.edges() {
                let d = (clamped.values()[e.b] - clamped.values()[e.a]) / h;
                let pe = spec.p.at_edge_midpoint(&grid, e);
                expect += traj.eta() * grid.cell_measure() * d.abs().powf(pe);
            }
        }
        assert!((trunc_energy(&traj, k) - expect).abs() < 1e-13 * (1.0 + expect));

        let levels = [0.25, 0.5, 1.0, 2.0, 4.0, f64::INFINITY];
        let energies: Vec<f64> = levels.iter().map(|&k| trunc_energy(&traj, k)).collect();
        for pair in energies.windows(2) {
            assert!(pair[0] <= pair[1] + 1e-14);
        }
        // Beyond the sup the clamp is inactive.
        let sup = (0..=3).map(|m| traj.state(m).linf()).fold(0.0f64, f64::max);
        assert_eq!(trunc_energy(&traj, sup + 1.0), trunc_energy(&traj, f64::INFINITY));
    }

    #[test]
    fn ledger_of_zero_trajectory_is_zero() {
        let grid = Grid::unit(&[4, 4]).unwrap();
        let spec = Arc::new(plain_spec(&grid));
        let traj = run_rothe(&spec, 1, 3, opts()).unwrap();
        let led = ledger(&traj);
        assert_eq!(led.sup_linf, 0.0);
        assert_eq!(led.sup_l1, 0.0);
        assert_eq!(led.sup_lr, 0.0);
        assert_eq!(led.grad_modular, 0.0);
        assert_eq!(led.weighted_increments, 0.0);
        assert_eq!(led.newton.total_iterations, 0);
    }

    #[test]
    fn ledger_sup_norms_come_from_the_initial_state_for_decaying_heat() {
        let grid = Grid::unit(&[16]).unwrap();
        let mut spec = plain_spec(&grid);
        spec.u0 = GridFunction::from_fn(&grid, |x| (std::f64::consts::PI * x[0]).sin());
        let spec = Arc::new(spec);
        let traj = run_rothe(&spec, 1, 8, opts()).unwrap();
        let led = ledger(&traj);
        assert!((led.sup_l1 - lebesgue_norm(traj.state(0), 1.0)).abs() < 1e-14);
        assert!((led.sup_lr - lebesgue_norm(traj.state(0), 2.0)).abs() < 1e-14);
        assert!((led.sup_linf - traj.state(0).linf()).abs() < 1e-14);
        assert!(led.grad_modular > 0.0);
        assert!(led.newton.max_residual <= 1e-10);
        assert_eq!(led.newton.max_iterations, 1);
    }

    #[test]
    fn weighted_increments_hand_value_for_one_step() {
        let grid = Grid::unit(&[8]).unwrap();
        let mut spec = plain_spec(&grid);
        spec.u0 = GridFunction::from_fn(&grid, |x| (std::f64::consts::PI * x[0]).sin());
        let spec = Arc::new(spec);
        let traj = run_rothe(&spec, 1, 1, opts()).unwrap();
        // One step: eta t_1 ||rate||^2 = ||w^1 - w^0||_{L2}^2.
        let diff = traj
            .state(1)
            .map_indexed(|i, v| v - traj.state(0).values()[i]);
        let l2 = lebesgue_norm(&diff, 2.0);
        let led = ledger(&traj);
        assert!((led.weighted_increments - l2 * l2).abs() < 1e-14);
    }

    #[test]
    fn trajectory_distance_direct_and_nested() {
        let grid = Grid::unit(&[8]).unwrap();
        let mut spec = plain_spec(&grid);
        spec.u0 = GridFunction::from_fn(&grid, |x| (std::f64::consts::PI * x[0]).sin());
        let spec = Arc::new(spec);
        let a = run_rothe(&spec, 1, 4, opts()).unwrap();
        let b = run_rothe(&spec, 2, 4, opts()).unwrap();
        assert_eq!(space_time_l1_distance(&a, &a).unwrap(), 0.0);
        // Equal step counts: direct slabwise sum.
        let mut expect = 0.0;
        for m in 1..=4 {
            let diff = a
                .state(m)
                .map_indexed(|i, v| v - b.state(m).values()[i]);
            expect += a.eta() * lebesgue_norm(&diff, 1.0);
        }
        let got = space_time_l1_distance(&a, &b).unwrap();
        assert!((got - expect).abs() < 1e-15);
        // Nested refinement is symmetric and finite.
        let c = run_rothe(&spec, 1, 8, opts()).unwrap();
        let d1 = space_time_l1_distance(&a, &c).unwrap();
        let d2 = space_time_l1_distance(&c, &a).unwrap();
        assert!((d1 - d2).abs() < 1e-15);
        // Non-nested counts are rejected.
        let e = run_rothe(&spec, 1, 3, opts()).unwrap();
        assert!(space_time_l1_distance(&a, &e).is_err());
    }

    #[test]
    fn growth_exponent_closed_forms() {
        let g = gn_exponents(2.2, 3.0, 3, 2.0).unwrap();
        assert!((g.e - 0.46875).abs() < 1e-15);
        assert!((g.b - 1.34375).abs() < 1e-15);

        let neutral = gn_exponents(2.0, 2.0, 2, 1.5).unwrap();
        assert_eq!(neutral.e, 0.0);
        assert_eq!(neutral.b, 1.0);

        assert!(gn_exponents(1.1, 3.0, 3, 2.0).is_err());
        assert!(gn_exponents(2.0, 2.0, 2, 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn homogeneity_exceeds_one_exactly_for_superquadratic_growth(
            p_minus in 1.05f64..4.0,
            q_plus in 1.05f64..5.0,
            dim in 1usize..4,
            rho in 0.05f64..4.0,
        ) {
            let denom = p_minus * (1.0 + (2.0 + rho) / dim as f64) - q_plus;
            prop_assume!(denom > 1e-6);
            prop_assume!((q_plus - 2.0).abs() > 1e-9);
            let g = gn_exponents(p_minus, q_plus, dim, rho).unwrap();
            prop_assert!((g.b > 1.0) == (q_plus > 2.0));
            prop_assert!((g.e > 0.0) == (q_plus > 2.0));
        }
    }

    #[test]
    fn weak_form_vanishes_for_direct_marches() {
        let grid = Grid::unit(&[32]).unwrap();
        let mut spec = plain_spec(&grid);
        spec.u0 = GridFunction::from_fn(&grid, |x| (std::f64::consts::PI * x[0]).sin());
        let spec = Arc::new(spec);
        let traj = run_rothe(&spec, 1, 8, opts()).unwrap();
        let phi = TestFunction::space_time_bump(&[0.0], &[1.0], traj.horizon());
        let report = weak_form_residual(&traj, &phi).unwrap();
        assert!(report.pass, "residual {} bound {}", report.residual, report.bound);
        assert!(report.residual < 1e-9);
        assert!(report.phi_sup > 0.5);
    }

    #[test]
    fn weak_form_covers_every_source_term() {
        let grid = Grid::unit(&[9]).unwrap();
        let spec = Arc::new(singular_spec(&grid));
        let traj = run_rothe(&spec, 3, 5, opts()).unwrap();
        let phi = TestFunction::space_time_bump(&[0.0], &[1.0], traj.horizon());
        let report = weak_form_residual(&traj, &phi).unwrap();
        assert!(report.pass, "residual {} bound {}", report.residual, report.bound);
    }

    #[test]
    fn weak_form_rejects_inadmissible_inputs() {
        let grid = Grid::unit(&[8]).unwrap();
        let spec = Arc::new(singular_spec(&grid));
        let traj = run_rothe(&spec, 2, 4, opts()).unwrap();
        let horizon = traj.horizon();

        let no_terminal_decay = TestFunction::new(|x, _| x[0] * (1.0 - x[0]));
        assert!(matches!(
            weak_form_residual(&traj, &no_terminal_decay),
            Err(Error::Validation(msg)) if msg.contains("final time")
        ));

        let nonzero_boundary = TestFunction::new(move |_, t| 1.0 - t / horizon);
        assert!(matches!(
            weak_form_residual(&traj, &nonzero_boundary),
            Err(Error::Validation(msg)) if msg.contains("boundary")
        ));

        let ladder = run_monotone(&spec, 2, 4, opts(), LadderOptions::default()).unwrap();
        let phi = TestFunction::space_time_bump(&[0.0], &[1.0], horizon);
        assert!(weak_form_residual(ladder.final_trajectory(), &phi).is_err());
    }
}
