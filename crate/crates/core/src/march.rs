//! Implicit Euler time marching for the regularized problem, trajectory
//! evaluation in time, and the constant-in-space barrier bound.
//!
//! Each step freezes the explicit sources: the power term reads the previous
//! state and the forcing enters through a local time average over the step
//! window. The singular term stays implicit inside the step minimization.

use std::sync::Arc;

use crate::error::Error;
use crate::fields::SpaceTimeField;
use crate::grid::{Grid, GridFunction};
use crate::operator::StepSystem;
use crate::problem::ProblemSpec;
use crate::step::{solve_step, NewtonReport, SolverOptions};
use crate::truncation::{power_source, truncate};
use crate::Result;

/// How a trajectory was produced. Consumers that rely on the self-consistent
/// step equations (weak-form residuals, barrier domination) check this.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    /// Direct march: step sources computed from the step's own previous state.
    DirectMarch,
    /// Ladder iterate: power term frozen along another trajectory.
    FrozenPower,
    /// Supersolution march with a constant dominating source and no singular
    /// term.
    Barrier,
}

/// States and solver reports of one implicit Euler march.
#[derive(Debug, Clone)]
pub struct Trajectory {
    spec: Arc<ProblemSpec>,
    kind: TrajectoryKind,
    n: u32,
    eta: f64,
    states: Vec<GridFunction>,
    reports: Vec<NewtonReport>,
}

impl Trajectory {
    pub fn spec(&self) -> &Arc<ProblemSpec> {
        &self.spec
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.spec.grid
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    /// Regularization level the march was run at.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Time step size.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn num_steps(&self) -> usize {
        self.reports.len()
    }

    pub fn horizon(&self) -> f64 {
        self.eta * self.num_steps() as f64
    }

    /// State after `m` steps; `m = 0` is the initial state.
    pub fn state(&self, m: usize) -> &GridFunction {
        &self.states[m]
    }

    pub fn states(&self) -> &[GridFunction] {
        &self.states
    }

    pub fn reports(&self) -> &[NewtonReport] {
        &self.reports
    }

    /// Grid times `0, eta, ..., M eta`.
    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|m| m as f64 * self.eta).collect()
    }

    #[cfg(test)]
    pub(crate) fn state_mut(&mut self, m: usize) -> &mut GridFunction {
        &mut self.states[m]
    }
}

/// Local time average `(1/eta) \int_t^{t+eta} f(x, s) ds` at every node,
/// using four-point Gauss-Legendre quadrature per window (exact through
/// degree seven in time).
pub fn steklov_average(f: &SpaceTimeField, grid: &Arc<Grid>, eta: f64, t: f64) -> GridFunction {
    const XI: [f64; 4] = [
        -0.8611363115940526,
        -0.3399810435848563,
        0.3399810435848563,
        0.8611363115940526,
    ];
    const WT: [f64; 4] = [
        0.34785484513745385,
        0.6521451548625461,
        0.6521451548625461,
        0.34785484513745385,
    ];
    let mut out = GridFunction::zeros(grid);
    for node in 0..grid.node_count() {
        let mut acc = 0.0;
        for (xi, wt) in XI.iter().zip(WT) {
            acc += 0.5 * wt * f.eval(node, t + 0.5 * eta * (1.0 + xi));
        }
        out.values_mut()[node] = acc;
    }
    out
}

/// Forcing with values clamped to `[-n, n]` before any averaging.
pub fn truncated_forcing(f: &SpaceTimeField, n: u32) -> SpaceTimeField {
    let inner = f.clone();
    let level = n as f64;
    SpaceTimeField::Custom(Arc::new(move |node, t| truncate(inner.eval(node, t), level)))
}

/// Shared marching loop. `source_for_step(m, prev)` supplies the frozen
/// explicit source of step `m` (1-based) given the state after `m - 1` steps.
pub(crate) fn march(
    spec: &Arc<ProblemSpec>,
    kind: TrajectoryKind,
    n: u32,
    eta: f64,
    num_steps: usize,
    initial: GridFunction,
    g: GridFunction,
    opts: SolverOptions,
    mut source_for_step: impl FnMut(usize, &GridFunction) -> GridFunction,
) -> Result<Trajectory> {
    if num_steps == 0 {
        return Err(Error::Config("need at least one time step".into()));
    }
    if n == 0 {
        return Err(Error::Config("regularization level n must be at least 1".into()));
    }
    let mut states = Vec::with_capacity(num_steps + 1);
    let mut reports = Vec::with_capacity(num_steps);
    states.push(initial);
    for m in 1..=num_steps {
        let prev = states.last().unwrap();
        let source = source_for_step(m, prev);
        let outcome = StepSystem::new(
            prev.clone(),
            eta,
            source,
            g.clone(),
            n,
            &spec.p,
            &spec.delta,
        )
        .and_then(|sys| solve_step(&sys, prev, opts));
        match outcome {
            Ok((w, report)) => {
                states.push(w);
                reports.push(report);
            }
            Err(e) => {
                let source = match e {
                    Error::NegativePart { node, magnitude, .. } => {
                        Error::NegativePart { step: m, node, magnitude }
                    }
                    other => other,
                };
                return Err(Error::StepFailed {
                    step: m,
                    source: Box::new(source),
                });
            }
        }
    }
    Ok(Trajectory {
        spec: spec.clone(),
        kind,
        n,
        eta,
        states,
        reports,
    })
}

/// Marches the regularized problem over `num_steps` uniform steps covering
/// the spec's time horizon.
///
/// The initial state is the initial datum clamped at level `n`; later states
/// carry zero boundary values. Step `m` sees the power source of state
/// `m - 1` and the window average of the truncated forcing, scaled by the
/// spec's forcing coefficient.
pub fn run_rothe(
    spec: &Arc<ProblemSpec>,
    n: u32,
    num_steps: usize,
    opts: SolverOptions,
) -> Result<Trajectory> {
    spec.validate_data()?;
    if num_steps == 0 {
        return Err(Error::Config("need at least one time step".into()));
    }
    let eta = spec.horizon / num_steps as f64;
    let initial = spec.u0.map(|v| truncate(v, n as f64));
    let forcing = truncated_forcing(&spec.f, n);
    let grid = spec.grid.clone();
    let lambda = spec.lambda;
    let beta = spec.beta;
    let q = spec.q.clone();
    march(
        spec,
        TrajectoryKind::DirectMarch,
        n,
        eta,
        num_steps,
        initial,
        spec.g.clone(),
        opts,
        move |m, prev| {
            let mut source = steklov_average(&forcing, &grid, eta, (m - 1) as f64 * eta);
            for node in 0..grid.node_count() {
                let s = source.values()[node] * beta
                    + lambda * power_source(prev.values()[node], q.at_node(&grid, node), n);
                source.values_mut()[node] = s;
            }
            source
        },
    )
}

/// Time interpolation conventions for trajectory evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeInterpolation {
    /// Right-continuous staircase: `t` in `(t_{m-1}, t_m]` reads state `m`.
    PiecewiseConstant,
    /// Affine between consecutive states.
    Linear,
}

/// Evaluates the trajectory at time `t` in `[0, horizon]`.
pub fn eval_trajectory(
    traj: &Trajectory,
    t: f64,
    interp: TimeInterpolation,
) -> Result<GridFunction> {
    let horizon = traj.horizon();
    let slack = 1e-12 * (1.0 + horizon);
    if t < -slack || t > horizon + slack {
        return Err(Error::Validation(format!(
            "time {t} outside the trajectory span [0, {horizon}]"
        )));
    }
    let t = t.clamp(0.0, horizon);
    let m_last = traj.num_steps();
    let ratio = t / traj.eta();
    match interp {
        TimeInterpolation::PiecewiseConstant => {
            if t == 0.0 {
                return Ok(traj.state(0).clone());
            }
            // Nudge below the next grid time so t = t_m lands on state m.
            let m = ((ratio - 1e-9).ceil().max(1.0) as usize).min(m_last);
            Ok(traj.state(m).clone())
        }
        TimeInterpolation::Linear => {
            let lo = (ratio.floor() as usize).min(m_last - 1);
            let theta = ratio - lo as f64;
            let a = traj.state(lo);
            let b = traj.state(lo + 1);
            Ok(a.map_indexed(|i, v| (1.0 - theta) * v + theta * b.values()[i]))
        }
    }
}

/// Outcome of the supersolution comparison at one regularization level.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BarrierReport {
    pub n: u32,
    /// Largest nodal value of the dominating source.
    pub rhs_level: f64,
    /// Largest window-averaged truncated forcing value encountered.
    pub forcing_cap: f64,
    /// Per-time-index minimum of barrier minus state over interior nodes.
    pub margins: Vec<f64>,
    /// How negative a margin may be before the check fails.
    pub slack: f64,
    pub pass: bool,
}

impl BarrierReport {
    pub fn worst_margin(&self) -> f64 {
        self.margins.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Residual tolerances propagate into the comparison through the step
/// stability bound (step size over cell measure), so the barrier slack sits
/// three orders above the solver tolerance rather than at it.
const BARRIER_SLACK_FACTOR: f64 = 1e3;

/// Marches the constant-data supersolution and checks it dominates the
/// trajectory nodewise at every step.
///
/// The barrier starts at level `n` inside the domain and obeys the same step
/// operator with the singular term replaced by the constant source
/// `lambda n + n^{delta(x)} g(x) + beta sup [f]`, which bounds every source
/// the trajectory can see while it stays nonnegative. Ordered data plus the
/// monotone step operator then force nodewise ordering at every step.
pub fn barrier_check(traj: &Trajectory, opts: SolverOptions) -> Result<BarrierReport> {
    if traj.kind() != TrajectoryKind::DirectMarch {
        return Err(Error::Validation(
            "barrier comparison is defined for direct-march trajectories".into(),
        ));
    }
    let spec = traj.spec();
    let grid = traj.grid().clone();
    let n = traj.n();
    let eta = traj.eta();
    let num_steps = traj.num_steps();

    let forcing = truncated_forcing(&spec.f, n);
    let mut forcing_cap = 0.0f64;
    for m in 1..=num_steps {
        let avg = steklov_average(&forcing, &grid, eta, (m - 1) as f64 * eta);
        for &node in grid.interior_nodes() {
            forcing_cap = forcing_cap.max(avg.values()[node]);
        }
    }

    let level = n as f64;
    let mut source = GridFunction::zeros(&grid);
    for &node in grid.interior_nodes() {
        source.values_mut()[node] = spec.lambda * level
            + level.powf(spec.delta.at_node(&grid, node)) * spec.g.values()[node]
            + spec.beta * forcing_cap;
    }
    let rhs_level = source.max_value();

    let barrier = march(
        spec,
        TrajectoryKind::Barrier,
        n,
        eta,
        num_steps,
        GridFunction::interior_constant(&grid, level),
        GridFunction::zeros(&grid),
        opts,
        |_, _| source.clone(),
    )?;

    let slack = BARRIER_SLACK_FACTOR * opts.tol;
    let mut margins = Vec::with_capacity(num_steps + 1);
    for m in 0..=num_steps {
        let v = barrier.state(m);
        let w = traj.state(m);
        let mut worst = f64::INFINITY;
        for &node in grid.interior_nodes() {
            worst = worst.min(v.values()[node] - w.values()[node]);
        }
        margins.push(worst);
    }
    let pass = margins.iter().all(|&m| m >= -slack);
    Ok(BarrierReport {
        n,
        rhs_level,
        forcing_cap,
        margins,
        slack,
        pass,
    })
}
