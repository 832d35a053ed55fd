//! Monotone iteration toward the regularized solution, and supersolution
//! trajectories that dominate it.
//!
//! The ladder starts from the zero trajectory and repeatedly re-marches with
//! the power term frozen along the previous iterate. Nonnegative data make
//! each sweep sit above the last one nodewise: the frozen power source is
//! monotone in the previous iterate and the implicit singular term only
//! tightens the ordering, so the usual subtract-and-test argument applies
//! step by step.

use std::sync::Arc;

use crate::error::Error;
use crate::fields::SpaceTimeField;
use crate::grid::GridFunction;
use crate::march::{march, run_rothe, steklov_average, truncated_forcing, Trajectory, TrajectoryKind};
use crate::problem::ProblemSpec;
use crate::step::SolverOptions;
use crate::truncation::{power_source, truncate};
use crate::Result;

/// Controls for the monotone ladder.
#[derive(Debug, Clone, Copy)]
pub struct LadderOptions {
    /// Maximum number of full marches before giving up.
    pub max_rounds: usize,
    /// Retain every iterate instead of only the last; needed to re-audit
    /// monotonicity from scratch.
    pub keep_all: bool,
}

impl Default for LadderOptions {
    fn default() -> Self {
        LadderOptions {
            max_rounds: 40,
            keep_all: false,
        }
    }
}

/// History of the monotone iteration.
#[derive(Debug, Clone)]
pub struct IterationLadder {
    n: u32,
    tol: f64,
    /// Sup-norm over all steps and nodes of consecutive iterate differences.
    gap_history: Vec<f64>,
    /// Minimum over all steps and nodes of (next - current), per pair;
    /// nonnegative when the ladder is monotone.
    pair_margins: Vec<f64>,
    last: Trajectory,
    kept: Option<Vec<Trajectory>>,
    converged: bool,
}

impl IterationLadder {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Number of full marches performed.
    pub fn iterations(&self) -> usize {
        self.gap_history.len()
    }

    pub fn gap_history(&self) -> &[f64] {
        &self.gap_history
    }

    pub fn pair_margins(&self) -> &[f64] {
        &self.pair_margins
    }

    pub fn final_trajectory(&self) -> &Trajectory {
        &self.last
    }

    /// All iterates, present only when the ladder ran with `keep_all`.
    pub fn kept_iterates(&self) -> Option<&[Trajectory]> {
        self.kept.as_deref()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }
}

/// Runs the monotone ladder: march with the power source frozen along the
/// previous iterate (the zero trajectory at first), until consecutive
/// iterates agree to the solver tolerance in the sup norm.
pub fn run_monotone(
    spec: &Arc<ProblemSpec>,
    n: u32,
    num_steps: usize,
    opts: SolverOptions,
    ladder: LadderOptions,
) -> Result<IterationLadder> {
    spec.validate_data()?;
    if num_steps == 0 {
        return Err(Error::Config("need at least one time step".into()));
    }
    if ladder.max_rounds == 0 {
        return Err(Error::Config("ladder needs at least one round".into()));
    }
    let grid = spec.grid.clone();
    let eta = spec.horizon / num_steps as f64;
    let initial = spec.u0.map(|v| truncate(v, n as f64));

    let forcing = truncated_forcing(&spec.f, n);
    let averaged: Vec<GridFunction> = (1..=num_steps)
        .map(|m| steklov_average(&forcing, &grid, eta, (m - 1) as f64 * eta))
        .collect();
    let q_node: Vec<f64> = (0..grid.node_count())
        .map(|node| spec.q.at_node(&grid, node))
        .collect();

    let mut frozen: Vec<GridFunction> =
        vec![GridFunction::zeros(&grid); num_steps + 1];
    let mut gap_history = Vec::new();
    let mut pair_margins = Vec::new();
    let mut kept = ladder.keep_all.then(Vec::new);
    let mut last: Option<Trajectory> = None;
    let mut converged = false;

    for _ in 0..ladder.max_rounds {
        let traj = march(
            spec,
            TrajectoryKind::FrozenPower,
            n,
            eta,
            num_steps,
            initial.clone(),
            spec.g.clone(),
            opts,
            |m, _| {
                let fixed = &frozen[m];
                averaged[m - 1].map_indexed(|node, v| {
                    spec.beta * v
                        + spec.lambda * power_source(fixed.values()[node], q_node[node], n)
                })
            },
        )?;

        let mut gap = 0.0f64;
        let mut margin = f64::INFINITY;
        for m in 0..=num_steps {
            for (new, old) in traj.state(m).values().iter().zip(frozen[m].values()) {
                let diff = new - old;
                gap = gap.max(diff.abs());
                margin = margin.min(diff);
            }
        }
        gap_history.push(gap);
        pair_margins.push(margin);
        frozen = traj.states().to_vec();
        if let Some(list) = kept.as_mut() {
            list.push(traj.clone());
        }
        last = Some(traj);
        if gap < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(IterationLadder {
        n,
        tol: opts.tol,
        gap_history,
        pair_margins,
        last: last.unwrap(),
        kept,
        converged,
    })
}

/// Nodewise trajectory comparison: does `upper` dominate `lower` at every
/// step, up to `slack`?
#[derive(Debug, Clone, serde::Serialize)]
pub struct ComparisonReport {
    /// Minimum over steps and interior nodes of (upper - lower).
    pub worst_margin: f64,
    pub worst_step: usize,
    pub worst_node: usize,
    pub slack: f64,
    pub pass: bool,
}

/// Checks `lower <= upper + slack` nodewise at every time index. The
/// trajectories must share the grid, step size, step count, and
/// regularization level.
pub fn check_comparison(
    lower: &Trajectory,
    upper: &Trajectory,
    slack: f64,
) -> Result<ComparisonReport> {
    if !lower.grid().same_layout(upper.grid()) {
        return Err(Error::Config("comparison needs a shared grid".into()));
    }
    if lower.num_steps() != upper.num_steps()
        || (lower.eta() - upper.eta()).abs() > 1e-12 * lower.eta()
    {
        return Err(Error::Config("comparison needs matching time discretizations".into()));
    }
    if lower.n() != upper.n() {
        return Err(Error::Config("comparison needs matching regularization levels".into()));
    }
    let grid = lower.grid();
    let mut worst = f64::INFINITY;
    let mut worst_step = 0;
    let mut worst_node = 0;
    for m in 0..=lower.num_steps() {
        let a = lower.state(m);
        let b = upper.state(m);
        for &node in grid.interior_nodes() {
            let margin = b.values()[node] - a.values()[node];
            if margin < worst {
                worst = margin;
                worst_step = m;
                worst_node = node;
            }
        }
    }
    Ok(ComparisonReport {
        worst_margin: worst,
        worst_step,
        worst_node,
        slack,
        pass: worst >= -slack,
    })
}

/// Monotonicity audit of a ladder.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MonotoneReport {
    /// Per consecutive pair, minimum of (next - current) over steps and
    /// nodes. Recomputed from retained iterates when available, otherwise the
    /// margins recorded while the ladder ran.
    pub pair_margins: Vec<f64>,
    pub recomputed: bool,
    pub slack: f64,
    pub pass: bool,
}

/// Verifies the ladder never stepped down anywhere by more than `slack`.
pub fn check_monotone(ladder: &IterationLadder, slack: f64) -> Result<MonotoneReport> {
    let (margins, recomputed) = match ladder.kept_iterates() {
        Some(list) => {
            let mut margins = Vec::new();
            // The first iterate is compared against the zero start.
            if let Some(first) = list.first() {
                let mut m0 = f64::INFINITY;
                for state in first.states() {
                    m0 = m0.min(state.min_value());
                }
                margins.push(m0);
            }
            for pair in list.windows(2) {
                margins.push(check_comparison(&pair[0], &pair[1], slack)?.worst_margin);
            }
            (margins, true)
        }
        None => (ladder.pair_margins().to_vec(), false),
    };
    let pass = margins.iter().all(|&m| m >= -slack);
    Ok(MonotoneReport {
        pair_margins: margins,
        recomputed,
        slack,
        pass,
    })
}

/// Marches the auxiliary problem whose solution dominates the ladder: the
/// power term is dropped and the forcing coefficient doubled, keeping the
/// singular term, the grid, and the horizon.
pub fn solve_auxiliary(
    spec: &Arc<ProblemSpec>,
    n: u32,
    num_steps: usize,
    opts: SolverOptions,
    initial: Option<GridFunction>,
) -> Result<Trajectory> {
    let mut aux = (**spec).clone();
    aux.lambda = 0.0;
    aux.beta = 2.0 * spec.beta;
    if let Some(v0) = initial {
        if !spec.grid.same_layout(v0.grid()) {
            return Err(Error::Config("auxiliary start lives on a different grid".into()));
        }
        if v0.min_value() < 0.0 {
            return Err(Error::Config("auxiliary start must be nonnegative".into()));
        }
        aux.u0 = v0;
    }
    run_rothe(&Arc::new(aux), n, num_steps, opts)
}

/// Forcing enlarged by the slabwise power of an auxiliary trajectory:
/// `max(f(x, t), v(x, t)^{q(x) - 1})` with `v` read as a right-continuous
/// staircase in time.
pub fn enlarge_forcing(spec: &ProblemSpec, aux: &Trajectory) -> SpaceTimeField {
    let grid = spec.grid.clone();
    let q_node: Vec<f64> = (0..grid.node_count())
        .map(|node| spec.q.at_node(&grid, node))
        .collect();
    let states: Vec<GridFunction> = aux.states().to_vec();
    let eta = aux.eta();
    let last = aux.num_steps();
    spec.f.clone().with_slabwise_floor(Arc::new(move |node, t| {
        let m = if t <= 0.0 {
            0
        } else {
            ((t / eta - 1e-9).ceil().max(1.0) as usize).min(last)
        };
        states[m].values()[node].max(0.0).powf(q_node[node] - 1.0)
    }))
}

/// Two-pass construction of a dominating supersolution together with the
/// ladder it dominates.
#[derive(Debug)]
pub struct TwoPassReport {
    /// Problem with the enlarged forcing; the ladder and the supersolution
    /// both solve it.
    pub enlarged: Arc<ProblemSpec>,
    pub ladder: IterationLadder,
    pub supersolution: Trajectory,
    pub domination: ComparisonReport,
}

/// Comparison slacks sit two orders above the solver tolerance: residuals
/// propagate through the step stability bound, so exact-arithmetic orderings
/// hold only to a small multiple of the tolerance.
pub const COMPARISON_SLACK_FACTOR: f64 = 1e2;

/// First pass bounds the problem with the doubled-forcing march; the forcing
/// is then enlarged by that trajectory's power so the bound closes, and the
/// second pass re-runs both the supersolution and the ladder against the
/// enlarged forcing.
pub fn two_pass_supersolution(
    spec: &Arc<ProblemSpec>,
    n: u32,
    num_steps: usize,
    opts: SolverOptions,
    ladder_opts: LadderOptions,
) -> Result<TwoPassReport> {
    let first = solve_auxiliary(spec, n, num_steps, opts, None)?;
    let mut enlarged = (**spec).clone();
    enlarged.f = enlarge_forcing(spec, &first);
    let enlarged = Arc::new(enlarged);
    let supersolution = solve_auxiliary(&enlarged, n, num_steps, opts, None)?;
    let ladder = run_monotone(&enlarged, n, num_steps, opts, ladder_opts)?;
    let domination = check_comparison(
        ladder.final_trajectory(),
        &supersolution,
        COMPARISON_SLACK_FACTOR * opts.tol,
    )?;
    Ok(TwoPassReport {
        enlarged,
        ladder,
        supersolution,
        domination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::testutil::{plain_spec, singular_spec};

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn zero_data_ladder_converges_immediately() {
        let grid = Grid::unit(&[5]).unwrap();
        let spec = Arc::new(plain_spec(&grid));
        let ladder = run_monotone(&spec, 2, 3, opts(), LadderOptions::default()).unwrap();
        assert!(ladder.converged());
        assert_eq!(ladder.iterations(), 1);
        assert_eq!(ladder.gap_history(), &[0.0]);
        assert_eq!(ladder.final_trajectory().state(3).linf(), 0.0);
    }

    #[test]
    fn ladder_without_power_term_repeats_itself_exactly() {
        let grid = Grid::unit(&[6]).unwrap();
        let mut spec = singular_spec(&grid);
        spec.lambda = 0.0;
        let spec = Arc::new(spec);
        let ladder = run_monotone(&spec, 2, 3, opts(), LadderOptions::default()).unwrap();
        assert!(ladder.converged());
        assert_eq!(ladder.iterations(), 2);
        assert!(ladder.gap_history()[0] > 0.0);
        // The second sweep sees identical sources, so it reproduces the
        // first bitwise.
        assert_eq!(ladder.gap_history()[1], 0.0);
    }

    #[test]
    fn gaps_shrink_and_margins_stay_nonnegative() {
        let grid = Grid::unit(&[8]).unwrap();
        let spec = Arc::new(singular_spec(&grid));
        let ladder = run_monotone(&spec, 3, 4, opts(), LadderOptions::default()).unwrap();
        assert!(ladder.converged());
        assert!(ladder.iterations() >= 2);
        for pair in ladder.gap_history().windows(2) {
            assert!(pair[1] <= pair[0]);
        }
        for &m in ladder.pair_margins() {
            assert!(m >= -1e-12);
        }
        let audit = check_monotone(&ladder, 1e-8).unwrap();
        assert!(audit.pass);
        assert!(!audit.recomputed);
    }

    #[test]
    fn audit_recomputes_from_kept_iterates() {
        let grid = Grid::unit(&[6]).unwrap();
        let spec = Arc::new(singular_spec(&grid));
        let ladder = run_monotone(
            &spec,
            2,
            3,
            opts(),
            LadderOptions {
                keep_all: true,
                ..LadderOptions::default()
            },
        )
        .unwrap();
        let audit = check_monotone(&ladder, 1e-8).unwrap();
        assert!(audit.pass);
        assert!(audit.recomputed);
        assert_eq!(audit.pair_margins.len(), ladder.iterations());

        // Reversing the retained iterates must break the audit even though
        // the recorded margins still look fine.
        let mut reversed = ladder.clone();
        reversed.kept.as_mut().unwrap().reverse();
        let audit = check_monotone(&reversed, 1e-8).unwrap();
        assert!(!audit.pass);

        let mut tampered = ladder;
        tampered.kept = None;
        tampered.pair_margins[0] = -0.5;
        assert!(!check_monotone(&tampered, 1e-8).unwrap().pass);
    }

    #[test]
    fn linear_problem_responds_linearly_to_forcing() {
        let grid = Grid::unit(&[7]).unwrap();
        let mut spec = plain_spec(&grid);
        spec.f = SpaceTimeField::Const(0.3);
        spec.beta = 1.0;
        let single = Arc::new(spec.clone());
        spec.f = SpaceTimeField::Const(0.6);
        let double = Arc::new(spec);
        let lad1 = run_monotone(&single, 1, 4, opts(), LadderOptions::default()).unwrap();
        let lad2 = run_monotone(&double, 1, 4, opts(), LadderOptions::default()).unwrap();
        for m in 0..=4 {
            let a = lad1.final_trajectory().state(m);
            let b = lad2.final_trajectory().state(m);
            for node in 0..grid.node_count() {
                assert!((b.values()[node] - 2.0 * a.values()[node]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn comparison_detects_order_and_its_violation() {
        let grid = Grid::unit(&[7]).unwrap();
        let mut spec = plain_spec(&grid);
        spec.f = SpaceTimeField::Const(0.3);
        spec.beta = 1.0;
        let single = Arc::new(spec.clone());
        spec.f = SpaceTimeField::Const(0.6);
        let double = Arc::new(spec);
        let lo = run_rothe(&single, 1, 4, opts()).unwrap();
        let hi = run_rothe(&double, 1, 4, opts()).unwrap();

        let same = check_comparison(&lo, &lo, 1e-10).unwrap();
        assert!(same.pass);
        assert_eq!(same.worst_margin, 0.0);

        let ordered = check_comparison(&lo, &hi, 1e-8).unwrap();
        assert!(ordered.pass);
        assert!(ordered.worst_margin >= 0.0);

        let swapped = check_comparison(&hi, &lo, 1e-8).unwrap();
        assert!(!swapped.pass);
        assert!(swapped.worst_margin < -1e-4);
        assert!(swapped.worst_step > 0);
        assert!(!grid.is_boundary(swapped.worst_node));
    }

    #[test]
    fn comparison_rejects_mismatched_discretizations() {
        let grid = Grid::unit(&[5]).unwrap();
        let spec = Arc::new(plain_spec(&grid));
        let a = run_rothe(&spec, 1, 4, opts()).unwrap();
        let b = run_rothe(&spec, 1, 5, opts()).unwrap();
        let c = run_rothe(&spec, 2, 4, opts()).unwrap();
        assert!(check_comparison(&a, &b, 1e-8).is_err());
        assert!(check_comparison(&a, &c, 1e-8).is_err());
    }

    #[test]
    fn auxiliary_march_dominates_the_direct_one() {
        let grid = Grid::unit(&[8]).unwrap();
        let spec = Arc::new(singular_spec(&grid));
        let u = run_rothe(&spec, 3, 4, opts()).unwrap();
        let v = solve_auxiliary(&spec, 3, 4, opts(), None).unwrap();
        assert_eq!(v.kind(), TrajectoryKind::DirectMarch);
        let cmp = check_comparison(&u, &v, 1e-8).unwrap();
        assert!(cmp.pass, "worst margin {}", cmp.worst_margin);
    }

    #[test]
    fn two_pass_enlargement_dominates_the_ladder() {
        let grid = Grid::unit(&[8]).unwrap();
        let spec = Arc::new(singular_spec(&grid));
        let report =
            two_pass_supersolution(&spec, 3, 4, opts(), LadderOptions::default()).unwrap();
        assert!(report.ladder.converged());
        assert!(report.domination.pass, "margin {}", report.domination.worst_margin);

        // The enlarged forcing floors the original one and carries the first
        // pass's power at matching slab indices.
        let first = solve_auxiliary(&spec, 3, 4, opts(), None).unwrap();
        let eta = first.eta();
        for &node in grid.interior_nodes().iter().take(3) {
            for m in 1..=4usize {
                let t = (m as f64 - 0.5) * eta;
                let enlarged = report.enlarged.f.eval(node, t);
                assert!(enlarged >= spec.f.eval(node, t) - 1e-15);
                let power = first.state(m).values()[node].powf(1.0);
                assert!(enlarged >= power - 1e-12);
            }
        }
    }
}
