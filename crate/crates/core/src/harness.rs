//! Experiment driver: turns a configuration plus run parameters into solver
//! runs, verification checks, and deterministic output files.
//!
//! Every run writes CSV data with full-precision floats plus a manifest that
//! embeds the configuration, the check outcomes, and SHA-256 hashes of the
//! data files, so identical inputs produce byte-identical outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ProblemConfig;
use crate::error::Error;
use crate::estimates::{ledger, space_time_l1_distance, EstimateLedger};
use crate::grid::GridFunction;
use crate::march::{barrier_check, run_rothe, BarrierReport, Trajectory};
use crate::monotone::{
    check_comparison, check_monotone, run_monotone, two_pass_supersolution, ComparisonReport,
    LadderOptions, MonotoneReport, COMPARISON_SLACK_FACTOR,
};
use crate::problem::HypothesisReport;
use crate::spaces::lebesgue_norm;
use crate::step::SolverOptions;
use crate::Result;

/// Closed-form references a run can be scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Reference {
    /// `exp(-pi^2 t)` times the sampled initial data: the separated heat
    /// solution on the unit interval with a single sine mode.
    HeatSine,
}

/// Parameters of one solver run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Regularization level.
    pub n: u32,
    /// Number of implicit Euler steps covering the horizon.
    pub num_steps: usize,
    pub solver: SolverOptions,
    pub reference: Option<Reference>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            n: 1,
            num_steps: 16,
            solver: SolverOptions::default(),
            reference: None,
        }
    }
}

/// A file the harness wrote, with its content hash.
#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

/// Everything a single run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub hypotheses: HypothesisReport,
    pub ledger: EstimateLedger,
    pub barrier: BarrierReport,
    pub reference_max_error: Option<f64>,
    pub outputs: Vec<OutputRecord>,
    pub trajectory: Trajectory,
}

impl RunSummary {
    /// Human-readable result lines for terminal output.
    pub fn lines(&self) -> Vec<String> {
        let mut out = hypothesis_lines(&self.hypotheses);
        out.push(format!(
            "march: n={} M={} eta={:.6e} newton_total={} max_residual={:.3e}",
            self.ledger.n,
            self.ledger.num_steps,
            self.ledger.eta,
            self.ledger.newton.total_iterations,
            self.ledger.newton.max_residual,
        ));
        out.push(format!(
            "bounds: sup_linf={:.6e} sup_l1={:.6e} sup_lr={:.6e} grad_modular={:.6e}",
            self.ledger.sup_linf, self.ledger.sup_l1, self.ledger.sup_lr, self.ledger.grad_modular,
        ));
        out.push(format!(
            "barrier: {} (worst margin {:.3e}, bound level {:.3e})",
            if self.barrier.pass { "pass" } else { "FAIL" },
            self.barrier.worst_margin(),
            self.barrier.rhs_level,
        ));
        if let Some(err) = self.reference_max_error {
            out.push(format!("reference: max nodal error {err:.6e}"));
        }
        for rec in &self.outputs {
            out.push(format!("wrote {} ({})", rec.file, &rec.sha256[..12]));
        }
        out
    }

    /// True when every runtime check of this run held.
    pub fn checks_pass(&self) -> bool {
        self.barrier.pass
    }
}

fn hypothesis_lines(report: &HypothesisReport) -> Vec<String> {
    format!("{report}").lines().map(str::to_string).collect()
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(hex)
}

fn write_output(out_dir: &Path, name: &str, content: &str) -> Result<OutputRecord> {
    let path = out_dir.join(name);
    fs::write(&path, content)?;
    Ok(OutputRecord {
        file: name.to_string(),
        sha256: sha256_hex(&path)?,
    })
}

fn reference_values(traj: &Trajectory, reference: Reference, m: usize) -> GridFunction {
    match reference {
        Reference::HeatSine => {
            let t = m as f64 * traj.eta();
            let decay = (-std::f64::consts::PI * std::f64::consts::PI * t).exp();
            traj.spec().u0.map(|v| decay * v)
        }
    }
}

fn reference_max_error(traj: &Trajectory, reference: Reference) -> f64 {
    let mut worst = 0.0f64;
    for m in 0..=traj.num_steps() {
        let exact = reference_values(traj, reference, m);
        for (a, b) in traj.state(m).values().iter().zip(exact.values()) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

fn snapshots_csv(traj: &Trajectory) -> String {
    let grid = traj.grid();
    let mut out = String::from("step,time,node");
    for d in 0..grid.dim() {
        let _ = write!(out, ",x{d}");
    }
    out.push_str(",value\n");
    for m in 0..=traj.num_steps() {
        let t = m as f64 * traj.eta();
        for node in 0..grid.node_count() {
            let _ = write!(out, "{m},{},{node}", fmt_float(t));
            for c in grid.node_coord(node) {
                let _ = write!(out, ",{}", fmt_float(c));
            }
            let _ = writeln!(out, ",{}", fmt_float(traj.state(m).values()[node]));
        }
    }
    out
}

/// Truncation levels the ledger file reports energies at.
pub const LEDGER_TRUNCATION_LEVELS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

fn ledger_csv(
    traj: &Trajectory,
    led: &EstimateLedger,
    barrier: &BarrierReport,
    reference: Option<(Reference, f64)>,
) -> String {
    let mut out = String::from("quantity,param,value\n");
    let mut row = |name: &str, param: String, value: f64| {
        let _ = writeln!(out, "{name},{param},{}", fmt_float(value));
    };
    row("sup_linf", String::new(), led.sup_linf);
    row("sup_l1", String::new(), led.sup_l1);
    row("sup_lr", format!("{}", led.r), led.sup_lr);
    row("grad_modular", String::new(), led.grad_modular);
    row("weighted_increments", String::new(), led.weighted_increments);
    row("space_time_l1", String::new(), led.space_time_l1);
    row("newton_total_iterations", String::new(), led.newton.total_iterations as f64);
    row("newton_max_residual", String::new(), led.newton.max_residual);
    for k in LEDGER_TRUNCATION_LEVELS {
        row("trunc_energy", format!("{k}"), crate::estimates::trunc_energy(traj, k));
    }
    for (m, margin) in barrier.margins.iter().enumerate() {
        row("barrier_margin", format!("{m}"), *margin);
    }
    if let Some((_, err)) = reference {
        row("reference_max_error", String::new(), err);
    }
    out
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: &'a ProblemConfig,
    n: u32,
    num_steps: usize,
    eta: f64,
    tol: f64,
    max_iter: usize,
    hypotheses: &'a HypothesisReport,
    ledger: &'a EstimateLedger,
    barrier_pass: bool,
    barrier_worst_margin: f64,
    reference_max_error: Option<f64>,
    rng_seeds: Vec<u64>,
    outputs: Vec<OutputRecord>,
}

/// Builds the problem, checks hypotheses, marches, verifies the barrier, and
/// writes `snapshots.csv`, `ledger.csv`, and `manifest.json` into `out_dir`.
///
/// A hypothesis failure aborts before solving (configuration-level error)
/// unless the only obstruction is an unsupported space dimension, which is
/// reported and run anyway.
pub fn run_experiment(
    config: &ProblemConfig,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<RunSummary> {
    let (_grid, spec) = config.build()?;
    let hypotheses = spec.validate_hypotheses();
    if !hypotheses.acceptable() {
        let mut msg = String::from("structural hypotheses failed:\n");
        for line in hypothesis_lines(&hypotheses) {
            let _ = writeln!(msg, "{line}");
        }
        return Err(Error::Validation(msg));
    }
    let trajectory = run_rothe(&spec, opts.n, opts.num_steps, opts.solver)?;
    let barrier = barrier_check(&trajectory, opts.solver)?;
    let led = ledger(&trajectory);
    let reference = opts
        .reference
        .map(|r| (r, reference_max_error(&trajectory, r)));

    fs::create_dir_all(out_dir)?;
    let mut outputs = vec![
        write_output(out_dir, "snapshots.csv", &snapshots_csv(&trajectory))?,
        write_output(
            out_dir,
            "ledger.csv",
            &ledger_csv(&trajectory, &led, &barrier, reference),
        )?,
    ];
    let manifest = RunManifest {
        command: "run",
        config,
        n: opts.n,
        num_steps: opts.num_steps,
        eta: trajectory.eta(),
        tol: opts.solver.tol,
        max_iter: opts.solver.max_iter,
        hypotheses: &hypotheses,
        ledger: &led,
        barrier_pass: barrier.pass,
        barrier_worst_margin: barrier.worst_margin(),
        reference_max_error: reference.map(|(_, e)| e),
        rng_seeds: Vec::new(),
        outputs: outputs.clone(),
    };
    outputs.push(write_output(
        out_dir,
        "manifest.json",
        &format!("{}\n", serde_json::to_string_pretty(&manifest)?),
    )?);

    Ok(RunSummary {
        hypotheses,
        ledger: led,
        barrier,
        reference_max_error: reference.map(|(_, e)| e),
        outputs,
        trajectory,
    })
}

/// Validation without solving: build the problem and evaluate the structural
/// hypotheses.
pub fn validate_config(config: &ProblemConfig) -> Result<HypothesisReport> {
    let (_grid, spec) = config.build()?;
    Ok(spec.validate_hypotheses())
}

/// Report lines for a validation-only invocation.
pub fn validation_lines(report: &HypothesisReport) -> Vec<String> {
    let mut out = hypothesis_lines(report);
    out.push(format!(
        "verdict: {}",
        if report.passes() {
            "hypotheses satisfied"
        } else if report.acceptable() {
            "outside supported dimensions; solver will proceed unverified"
        } else {
            "hypotheses FAILED"
        }
    ));
    out
}

/// What a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    /// Regularization level `n`.
    Regularization,
    /// Number of implicit Euler steps.
    TimeSteps,
    /// Cells per axis (applied to every axis).
    Resolution,
}

/// One sweep row; failed rows carry the error text in `status` and NaN data.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: u64,
    pub eta: f64,
    pub spacing: f64,
    pub sup_linf: f64,
    pub sup_l1: f64,
    pub sup_lr: f64,
    pub grad_modular: f64,
    pub weighted_increments: f64,
    pub newton_total: usize,
    pub newton_max_residual: f64,
    /// Space-time L1 distance to the previous successful row's trajectory.
    pub diff_prev: f64,
    pub reference_error: f64,
    pub status: String,
}

/// Outcome of a sweep.
#[derive(Debug)]
pub struct SweepSummary {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub outputs: Vec<OutputRecord>,
    pub all_ok: bool,
}

impl SweepSummary {
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![format!(
            "sweep over {}: {} rows",
            match self.axis {
                SweepAxis::Regularization => "n",
                SweepAxis::TimeSteps => "M",
                SweepAxis::Resolution => "cells",
            },
            self.rows.len()
        )];
        out.push(
            "value      eta          sup_linf     sup_l1       grad_mod     diff_prev    ref_err      status"
                .to_string(),
        );
        for row in &self.rows {
            out.push(format!(
                "{:<10} {:<12.4e} {:<12.4e} {:<12.4e} {:<12.4e} {:<12.4e} {:<12.4e} {}",
                row.value,
                row.eta,
                row.sup_linf,
                row.sup_l1,
                row.grad_modular,
                row.diff_prev,
                row.reference_error,
                row.status
            ));
        }
        for rec in &self.outputs {
            out.push(format!("wrote {} ({})", rec.file, &rec.sha256[..12]));
        }
        out
    }
}

/// Spatial sampling of a fine-grid trajectory on a coarser nested grid,
/// integrated as L1 over space-time. Requires equal step counts and integer
/// per-axis refinement.
fn nested_resolution_distance(coarse: &Trajectory, fine: &Trajectory) -> Result<f64> {
    if coarse.num_steps() != fine.num_steps() {
        return Err(Error::Config("resolution distance needs equal step counts".into()));
    }
    let cg = coarse.grid();
    let fg = fine.grid();
    if cg.dim() != fg.dim() {
        return Err(Error::Config("resolution distance needs equal dimensions".into()));
    }
    let dim = cg.dim();
    let mut ratios = vec![0usize; dim];
    for d in 0..dim {
        let cc = cg.dims()[d] - 1;
        let fc = fg.dims()[d] - 1;
        if fc % cc != 0 {
            return Err(Error::Config("resolution distance needs nested grids".into()));
        }
        ratios[d] = fc / cc;
    }
    // Row-major strides of the fine grid, last axis fastest.
    let mut strides = vec![1usize; dim];
    for d in (0..dim.saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * fg.dims()[d + 1];
    }
    let mut idx = vec![0usize; dim];
    let mut acc = 0.0;
    for m in 1..=coarse.num_steps() {
        let fine_state = fine.state(m);
        let coarse_state = coarse.state(m);
        let diff = GridFunction::from_values(
            cg,
            (0..cg.node_count())
                .map(|node| {
                    cg.multi_index(node, &mut idx);
                    let fine_node: usize =
                        (0..dim).map(|d| idx[d] * ratios[d] * strides[d]).sum();
                    coarse_state.values()[node] - fine_state.values()[fine_node]
                })
                .collect(),
        )?;
        acc += coarse.eta() * lebesgue_norm(&diff, 1.0);
    }
    Ok(acc)
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "value,eta,spacing,sup_linf,sup_l1,sup_lr,grad_modular,weighted_increments,\
         newton_total,newton_max_residual,diff_prev,reference_error,status\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.value,
            fmt_float(r.eta),
            fmt_float(r.spacing),
            fmt_float(r.sup_linf),
            fmt_float(r.sup_l1),
            fmt_float(r.sup_lr),
            fmt_float(r.grad_modular),
            fmt_float(r.weighted_increments),
            r.newton_total,
            fmt_float(r.newton_max_residual),
            fmt_float(r.diff_prev),
            fmt_float(r.reference_error),
            r.status.replace([',', '\n'], ";")
        );
    }
    out
}

#[derive(Serialize)]
struct SweepManifest<'a> {
    command: &'a str,
    config: &'a ProblemConfig,
    axis: SweepAxis,
    values: &'a [u64],
    n: u32,
    num_steps: usize,
    tol: f64,
    max_iter: usize,
    rng_seeds: Vec<u64>,
    outputs: Vec<OutputRecord>,
}

/// Runs the march once per axis value, recording per-run bounds and the
/// space-time L1 distance between consecutive successful runs. A failing row
/// is recorded and the sweep continues.
///
/// Distances require comparable discretizations (matching or integer-nested);
/// rows where that fails carry NaN.
pub fn run_sweep(
    config: &ProblemConfig,
    out_dir: &Path,
    axis: SweepAxis,
    values: &[u64],
    opts: &RunOptions,
) -> Result<SweepSummary> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("sweep values must be strictly increasing".into()));
    }
    config.build()?;

    let mut rows: Vec<SweepRow> = Vec::new();
    let mut prev_traj: Option<Trajectory> = None;
    for &value in values {
        let mut cfg = config.clone();
        let mut n = opts.n;
        let mut num_steps = opts.num_steps;
        match axis {
            SweepAxis::Regularization => {
                n = u32::try_from(value)
                    .map_err(|_| Error::Config(format!("n = {value} out of range")))?;
            }
            SweepAxis::TimeSteps => {
                num_steps = usize::try_from(value)
                    .map_err(|_| Error::Config(format!("M = {value} out of range")))?;
            }
            SweepAxis::Resolution => {
                let cells = usize::try_from(value)
                    .map_err(|_| Error::Config(format!("cells = {value} out of range")))?;
                cfg.resolution = vec![cells; cfg.dim];
            }
        }
        let outcome = cfg.build().and_then(|(_, spec)| {
            if num_steps == 0 {
                return Err(Error::Config("need at least one time step".into()));
            }
            run_rothe(&spec, n, num_steps, opts.solver)
        });
        match outcome {
            Ok(traj) => {
                let led = ledger(&traj);
                let diff_prev = match &prev_traj {
                    Some(prev) => match axis {
                        SweepAxis::Resolution => {
                            nested_resolution_distance(prev, &traj).unwrap_or(f64::NAN)
                        }
                        _ => space_time_l1_distance(prev, &traj).unwrap_or(f64::NAN),
                    },
                    None => f64::NAN,
                };
                let reference_error = opts
                    .reference
                    .map(|r| reference_max_error(&traj, r))
                    .unwrap_or(f64::NAN);
                rows.push(SweepRow {
                    value,
                    eta: traj.eta(),
                    spacing: traj.grid().spacing()[0],
                    sup_linf: led.sup_linf,
                    sup_l1: led.sup_l1,
                    sup_lr: led.sup_lr,
                    grad_modular: led.grad_modular,
                    weighted_increments: led.weighted_increments,
                    newton_total: led.newton.total_iterations,
                    newton_max_residual: led.newton.max_residual,
                    diff_prev,
                    reference_error,
                    status: "ok".to_string(),
                });
                prev_traj = Some(traj);
            }
            Err(e) => {
                rows.push(SweepRow {
                    value,
                    eta: f64::NAN,
                    spacing: f64::NAN,
                    sup_linf: f64::NAN,
                    sup_l1: f64::NAN,
                    sup_lr: f64::NAN,
                    grad_modular: f64::NAN,
                    weighted_increments: f64::NAN,
                    newton_total: 0,
                    newton_max_residual: f64::NAN,
                    diff_prev: f64::NAN,
                    reference_error: f64::NAN,
                    status: format!("error: {e}"),
                });
            }
        }
    }

    fs::create_dir_all(out_dir)?;
    let mut outputs = vec![write_output(out_dir, "sweep.csv", &sweep_csv(&rows))?];
    let manifest = SweepManifest {
        command: "sweep",
        config,
        axis,
        values,
        n: opts.n,
        num_steps: opts.num_steps,
        tol: opts.solver.tol,
        max_iter: opts.solver.max_iter,
        rng_seeds: Vec::new(),
        outputs: outputs.clone(),
    };
    outputs.push(write_output(
        out_dir,
        "manifest.json",
        &format!("{}\n", serde_json::to_string_pretty(&manifest)?),
    )?);
    let all_ok = rows.iter().all(|r| r.status == "ok");
    Ok(SweepSummary {
        axis,
        rows,
        outputs,
        all_ok,
    })
}

/// Outcome of a ladder experiment.
#[derive(Debug)]
pub struct MonotoneSummary {
    pub converged: bool,
    pub iterations: usize,
    pub gaps: Vec<f64>,
    pub monotone: MonotoneReport,
    /// Present when the two-pass supersolution was requested.
    pub domination: Option<ComparisonReport>,
    pub outputs: Vec<OutputRecord>,
}

impl MonotoneSummary {
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![format!(
            "ladder: {} after {} rounds",
            if self.converged { "converged" } else { "DID NOT CONVERGE" },
            self.iterations
        )];
        out.push("round  gap          margin".to_string());
        for (i, (gap, margin)) in self
            .gaps
            .iter()
            .zip(&self.monotone.pair_margins)
            .enumerate()
        {
            out.push(format!("{:<6} {:<12.4e} {:<12.4e}", i + 1, gap, margin));
        }
        out.push(format!(
            "monotone: {}",
            if self.monotone.pass { "pass" } else { "FAIL" }
        ));
        if let Some(dom) = &self.domination {
            out.push(format!(
                "domination: {} (worst margin {:.3e} at step {}, node {})",
                if dom.pass { "pass" } else { "FAIL" },
                dom.worst_margin,
                dom.worst_step,
                dom.worst_node
            ));
        }
        for rec in &self.outputs {
            out.push(format!("wrote {} ({})", rec.file, &rec.sha256[..12]));
        }
        out
    }

    pub fn checks_pass(&self) -> bool {
        self.converged
            && self.monotone.pass
            && self.domination.as_ref().map_or(true, |d| d.pass)
    }
}

fn monotone_csv(gaps: &[f64], margins: &[f64]) -> String {
    let mut out = String::from("round,gap,margin\n");
    for (i, (g, m)) in gaps.iter().zip(margins).enumerate() {
        let _ = writeln!(out, "{},{},{}", i + 1, fmt_float(*g), fmt_float(*m));
    }
    out
}

#[derive(Serialize)]
struct MonotoneManifest<'a> {
    command: &'a str,
    config: &'a ProblemConfig,
    n: u32,
    num_steps: usize,
    tol: f64,
    max_iter: usize,
    two_pass: bool,
    converged: bool,
    iterations: usize,
    monotone: &'a MonotoneReport,
    domination: Option<&'a ComparisonReport>,
    rng_seeds: Vec<u64>,
    outputs: Vec<OutputRecord>,
}

/// Runs the monotone ladder, audits monotonicity, and (optionally) builds the
/// two-pass supersolution and checks domination.
pub fn run_monotone_experiment(
    config: &ProblemConfig,
    out_dir: &Path,
    opts: &RunOptions,
    two_pass: bool,
) -> Result<MonotoneSummary> {
    let (_grid, spec) = config.build()?;
    let hypotheses = spec.validate_hypotheses();
    if !hypotheses.acceptable() {
        let mut msg = String::from("structural hypotheses failed:\n");
        for line in hypothesis_lines(&hypotheses) {
            let _ = writeln!(msg, "{line}");
        }
        return Err(Error::Validation(msg));
    }
    let slack = COMPARISON_SLACK_FACTOR * opts.solver.tol;
    let (ladder, domination) = if two_pass {
        let report =
            two_pass_supersolution(&spec, opts.n, opts.num_steps, opts.solver, LadderOptions::default())?;
        (report.ladder, Some(report.domination))
    } else {
        (
            run_monotone(&spec, opts.n, opts.num_steps, opts.solver, LadderOptions::default())?,
            None,
        )
    };
    let monotone = check_monotone(&ladder, slack)?;

    fs::create_dir_all(out_dir)?;
    let mut outputs = vec![write_output(
        out_dir,
        "monotone.csv",
        &monotone_csv(ladder.gap_history(), ladder.pair_margins()),
    )?];
    let manifest = MonotoneManifest {
        command: "monotone",
        config,
        n: opts.n,
        num_steps: opts.num_steps,
        tol: opts.solver.tol,
        max_iter: opts.solver.max_iter,
        two_pass,
        converged: ladder.converged(),
        iterations: ladder.iterations(),
        monotone: &monotone,
        domination: domination.as_ref(),
        rng_seeds: Vec::new(),
        outputs: outputs.clone(),
    };
    outputs.push(write_output(
        out_dir,
        "manifest.json",
        &format!("{}\n", serde_json::to_string_pretty(&manifest)?),
    )?);

    Ok(MonotoneSummary {
        converged: ladder.converged(),
        iterations: ladder.iterations(),
        gaps: ladder.gap_history().to_vec(),
        monotone,
        domination,
        outputs,
    })
}

/// Outcome of a barrier experiment.
#[derive(Debug)]
pub struct BarrierSummary {
    pub report: BarrierReport,
    pub outputs: Vec<OutputRecord>,
}

impl BarrierSummary {
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![format!(
            "barrier: {} (n = {}, bound level {:.3e}, worst margin {:.3e})",
            if self.report.pass { "pass" } else { "FAIL" },
            self.report.n,
            self.report.rhs_level,
            self.report.worst_margin()
        )];
        for rec in &self.outputs {
            out.push(format!("wrote {} ({})", rec.file, &rec.sha256[..12]));
        }
        out
    }
}

#[derive(Serialize)]
struct BarrierManifest<'a> {
    command: &'a str,
    config: &'a ProblemConfig,
    n: u32,
    num_steps: usize,
    tol: f64,
    max_iter: usize,
    barrier: &'a BarrierReport,
    rng_seeds: Vec<u64>,
    outputs: Vec<OutputRecord>,
}

/// Marches the problem and checks the supersolution bound, writing per-step
/// margins.
pub fn run_barrier_experiment(
    config: &ProblemConfig,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<BarrierSummary> {
    let (_grid, spec) = config.build()?;
    let traj = run_rothe(&spec, opts.n, opts.num_steps, opts.solver)?;
    let report = barrier_check(&traj, opts.solver)?;

    fs::create_dir_all(out_dir)?;
    let mut csv = String::from("step,time,margin\n");
    for (m, margin) in report.margins.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{m},{},{}",
            fmt_float(m as f64 * traj.eta()),
            fmt_float(*margin)
        );
    }
    let mut outputs = vec![write_output(out_dir, "barrier.csv", &csv)?];
    let manifest = BarrierManifest {
        command: "barrier",
        config,
        n: opts.n,
        num_steps: opts.num_steps,
        tol: opts.solver.tol,
        max_iter: opts.solver.max_iter,
        barrier: &report,
        rng_seeds: Vec::new(),
        outputs: outputs.clone(),
    };
    outputs.push(write_output(
        out_dir,
        "manifest.json",
        &format!("{}\n", serde_json::to_string_pretty(&manifest)?),
    )?);
    Ok(BarrierSummary { report, outputs })
}

/// Outcome of comparing the marches of two configurations.
#[derive(Debug)]
pub struct CompareSummary {
    pub report: ComparisonReport,
    /// Per-step minimum of (upper - lower) over interior nodes.
    pub step_margins: Vec<f64>,
    pub outputs: Vec<OutputRecord>,
}

impl CompareSummary {
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![format!(
            "comparison: {} (worst margin {:.3e} at step {}, node {})",
            if self.report.pass { "pass" } else { "FAIL" },
            self.report.worst_margin,
            self.report.worst_step,
            self.report.worst_node
        )];
        for rec in &self.outputs {
            out.push(format!("wrote {} ({})", rec.file, &rec.sha256[..12]));
        }
        out
    }
}

#[derive(Serialize)]
struct CompareManifest<'a> {
    command: &'a str,
    lower: &'a ProblemConfig,
    upper: &'a ProblemConfig,
    n: u32,
    num_steps: usize,
    tol: f64,
    max_iter: usize,
    comparison: &'a ComparisonReport,
    rng_seeds: Vec<u64>,
    outputs: Vec<OutputRecord>,
}

/// Marches both configurations with identical discretization parameters and
/// checks the first stays below the second nodewise.
pub fn run_comparison(
    lower_config: &ProblemConfig,
    upper_config: &ProblemConfig,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<CompareSummary> {
    let (_ga, lower_spec) = lower_config.build()?;
    let (_gb, upper_spec) = upper_config.build()?;
    let lower = run_rothe(&lower_spec, opts.n, opts.num_steps, opts.solver)?;
    let upper = run_rothe(&upper_spec, opts.n, opts.num_steps, opts.solver)?;
    let slack = COMPARISON_SLACK_FACTOR * opts.solver.tol;
    let report = check_comparison(&lower, &upper, slack)?;

    let grid = lower.grid();
    let mut step_margins = Vec::with_capacity(opts.num_steps + 1);
    for m in 0..=opts.num_steps {
        let mut worst = f64::INFINITY;
        for &node in grid.interior_nodes() {
            worst = worst.min(upper.state(m).values()[node] - lower.state(m).values()[node]);
        }
        step_margins.push(worst);
    }

    fs::create_dir_all(out_dir)?;
    let mut csv = String::from("step,time,margin\n");
    for (m, margin) in step_margins.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{m},{},{}",
            fmt_float(m as f64 * lower.eta()),
            fmt_float(*margin)
        );
    }
    let mut outputs = vec![write_output(out_dir, "compare.csv", &csv)?];
    let manifest = CompareManifest {
        command: "compare",
        lower: lower_config,
        upper: upper_config,
        n: opts.n,
        num_steps: opts.num_steps,
        tol: opts.solver.tol,
        max_iter: opts.solver.max_iter,
        comparison: &report,
        rng_seeds: Vec::new(),
        outputs: outputs.clone(),
    };
    outputs.push(write_output(
        out_dir,
        "manifest.json",
        &format!("{}\n", serde_json::to_string_pretty(&manifest)?),
    )?);
    Ok(CompareSummary {
        report,
        step_margins,
        outputs,
    })
}

/// Reads back one file the harness wrote, by manifest-relative name.
pub fn read_output(out_dir: &Path, name: &str) -> Result<String> {
    Ok(fs::read_to_string(out_dir.join(name))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{BoxSpec, ProblemConfig};
    use crate::fields::{SpaceTimeFieldSpec, SpatialField};
    use crate::problem::{ExponentField, Regime};

    fn heat_config(cells: usize) -> ProblemConfig {
        ProblemConfig {
            dim: 1,
            domain: BoxSpec {
                lo: vec![0.0],
                hi: vec![1.0],
            },
            resolution: vec![cells],
            p: ExponentField::Const(2.0),
            q: ExponentField::Const(2.0),
            delta: ExponentField::Const(0.5),
            g: SpatialField::Const(0.0),
            f: SpaceTimeFieldSpec::Const(0.0),
            u0: SpatialField::ProdSin { amplitude: 1.0 },
            lambda: 0.0,
            beta: 0.0,
            horizon: 0.1,
            r: 2.0,
            regime: Regime::B,
        }
    }

    fn singular_config() -> ProblemConfig {
        ProblemConfig {
            dim: 2,
            domain: BoxSpec {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            resolution: vec![8, 8],
            p: ExponentField::Const(1.8),
            q: ExponentField::Const(2.0),
            delta: ExponentField::Const(0.5),
            g: SpatialField::Const(0.2),
            f: SpaceTimeFieldSpec::Const(0.5),
            u0: SpatialField::ProdSin { amplitude: 0.1 },
            lambda: 0.5,
            beta: 1.0,
            horizon: 0.05,
            r: 3.0,
            regime: Regime::A,
        }
    }

    fn opts(n: u32, m: usize) -> RunOptions {
        RunOptions {
            n,
            num_steps: m,
            ..RunOptions::default()
        }
    }

    #[test]
    fn run_outputs_are_deterministic_and_hashed() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let cfg = singular_config();
        let summary1 = run_experiment(&cfg, dir1.path(), &opts(2, 3)).unwrap();
        let summary2 = run_experiment(&cfg, dir2.path(), &opts(2, 3)).unwrap();
        for name in ["snapshots.csv", "ledger.csv", "manifest.json"] {
            let a = read_output(dir1.path(), name).unwrap();
            let b = read_output(dir2.path(), name).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
        for (r1, r2) in summary1.outputs.iter().zip(&summary2.outputs) {
            assert_eq!(r1.sha256, r2.sha256);
            assert_eq!(r1.sha256.len(), 64);
        }
        assert!(summary1.barrier.pass);
        assert!(summary1.checks_pass());
    }

    #[test]
    fn ledger_file_round_trips_values() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = singular_config();
        let summary = run_experiment(&cfg, dir.path(), &opts(2, 3)).unwrap();
        let text = read_output(dir.path(), "ledger.csv").unwrap();
        let mut found = false;
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("sup_l1,,") {
                let v: f64 = rest.parse().unwrap();
                assert!((v - summary.ledger.sup_l1).abs() <= 1e-16 * summary.ledger.sup_l1.abs());
                found = true;
            }
        }
        assert!(found, "ledger.csv misses sup_l1:\n{text}");
        assert!(text.contains("trunc_energy,0.25,"));
        assert!(text.contains("barrier_margin,0,"));
    }

    #[test]
    fn hypothesis_failure_aborts_with_validation_error() {
        let mut cfg = singular_config();
        // Regime A needs p+ < N = 2.
        cfg.p = ExponentField::Const(2.5);
        let dir = tempfile::tempdir().unwrap();
        match run_experiment(&cfg, dir.path(), &opts(2, 3)) {
            Err(e) => {
                assert_eq!(e.exit_code(), 2);
                assert!(format!("{e}").contains("hypotheses"));
            }
            Ok(_) => panic!("hypothesis violation must abort"),
        }
        assert!(!dir.path().join("manifest.json").exists());
    }

    #[test]
    fn one_dimensional_problems_run_flagged() {
        let mut cfg = heat_config(8);
        cfg.regime = Regime::A;
        cfg.p = ExponentField::Const(1.8);
        let dir = tempfile::tempdir().unwrap();
        let summary = run_experiment(&cfg, dir.path(), &opts(1, 4)).unwrap();
        assert!(summary.hypotheses.outside_analyzed_range);
        assert!(!summary.hypotheses.passes());
        let manifest = read_output(dir.path(), "manifest.json").unwrap();
        assert!(manifest.contains("\"outside_analyzed_range\": true"));
    }

    #[test]
    fn heat_reference_error_is_small() {
        let cfg = heat_config(64);
        let dir = tempfile::tempdir().unwrap();
        let summary = run_experiment(
            &cfg,
            dir.path(),
            &RunOptions {
                n: 1,
                num_steps: 32,
                reference: Some(Reference::HeatSine),
                ..RunOptions::default()
            },
        )
        .unwrap();
        let err = summary.reference_max_error.unwrap();
        assert!(err < 6e-3, "reference error {err}");
        let text = read_output(dir.path(), "ledger.csv").unwrap();
        assert!(text.contains("reference_max_error"));
    }

    #[test]
    fn regularization_sweep_tracks_differences() {
        let cfg = singular_config();
        let dir = tempfile::tempdir().unwrap();
        let summary = run_sweep(
            &cfg,
            dir.path(),
            SweepAxis::Regularization,
            &[1, 2, 4],
            &opts(1, 3),
        )
        .unwrap();
        assert!(summary.all_ok);
        assert_eq!(summary.rows.len(), 3);
        assert!(summary.rows[0].diff_prev.is_nan());
        for row in &summary.rows[1..] {
            assert!(row.diff_prev.is_finite());
            assert!(row.diff_prev >= 0.0);
        }
        // Deterministic output bytes.
        let dir2 = tempfile::tempdir().unwrap();
        run_sweep(
            &cfg,
            dir2.path(),
            SweepAxis::Regularization,
            &[1, 2, 4],
            &opts(1, 3),
        )
        .unwrap();
        assert_eq!(
            read_output(dir.path(), "sweep.csv").unwrap(),
            read_output(dir2.path(), "sweep.csv").unwrap()
        );
    }

    #[test]
    fn time_step_sweep_needs_nested_counts_for_distances() {
        let cfg = heat_config(16);
        let dir = tempfile::tempdir().unwrap();
        let nested = run_sweep(&cfg, dir.path(), SweepAxis::TimeSteps, &[2, 4, 8], &opts(1, 2))
            .unwrap();
        assert!(nested.rows[1].diff_prev.is_finite());
        assert!(nested.rows[2].diff_prev.is_finite());

        let odd = run_sweep(&cfg, dir.path(), SweepAxis::TimeSteps, &[2, 3], &opts(1, 2)).unwrap();
        assert_eq!(odd.rows[1].status, "ok");
        assert!(odd.rows[1].diff_prev.is_nan());
    }

    #[test]
    fn resolution_sweep_samples_nested_grids() {
        let cfg = heat_config(4);
        let dir = tempfile::tempdir().unwrap();
        let summary =
            run_sweep(&cfg, dir.path(), SweepAxis::Resolution, &[4, 8, 16], &opts(1, 2)).unwrap();
        assert!(summary.all_ok);
        assert!(summary.rows[1].diff_prev.is_finite());
        assert!(summary.rows[2].diff_prev < summary.rows[1].diff_prev);
        assert!((summary.rows[0].spacing - 0.25).abs() < 1e-15);
        assert!((summary.rows[2].spacing - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn failed_sweep_rows_are_recorded_and_skipped() {
        let cfg = heat_config(8);
        let dir = tempfile::tempdir().unwrap();
        // Resolution 1 leaves no interior nodes, so that row fails.
        let summary =
            run_sweep(&cfg, dir.path(), SweepAxis::Resolution, &[1, 8], &opts(1, 2)).unwrap();
        assert!(!summary.all_ok);
        assert!(summary.rows[0].status.starts_with("error:"));
        assert!(summary.rows[0].sup_linf.is_nan());
        assert_eq!(summary.rows[1].status, "ok");
        let text = read_output(dir.path(), "sweep.csv").unwrap();
        assert!(text.lines().count() >= 3);
    }

    #[test]
    fn monotone_experiment_records_the_ladder() {
        let cfg = singular_config();
        let dir = tempfile::tempdir().unwrap();
        let summary = run_monotone_experiment(&cfg, dir.path(), &opts(2, 3), true).unwrap();
        assert!(summary.converged);
        assert!(summary.monotone.pass);
        assert!(summary.domination.as_ref().unwrap().pass);
        let text = read_output(dir.path(), "monotone.csv").unwrap();
        assert_eq!(text.lines().count(), summary.iterations + 1);
        let manifest = read_output(dir.path(), "manifest.json").unwrap();
        assert!(manifest.contains("\"two_pass\": true"));
    }

    #[test]
    fn barrier_experiment_writes_margins() {
        let cfg = singular_config();
        let dir = tempfile::tempdir().unwrap();
        let summary = run_barrier_experiment(&cfg, dir.path(), &opts(2, 3)).unwrap();
        assert!(summary.report.pass);
        let text = read_output(dir.path(), "barrier.csv").unwrap();
        assert_eq!(text.lines().count(), 3 + 2);
    }

    #[test]
    fn comparison_experiment_orders_forcing_levels() {
        let mut low = singular_config();
        low.lambda = 0.0;
        low.g = SpatialField::Const(0.0);
        low.f = SpaceTimeFieldSpec::Const(0.2);
        let mut high = low.clone();
        high.f = SpaceTimeFieldSpec::Const(0.4);
        let dir = tempfile::tempdir().unwrap();
        let ordered = run_comparison(&low, &high, dir.path(), &opts(1, 3)).unwrap();
        assert!(ordered.report.pass);
        let swapped = run_comparison(&high, &low, dir.path(), &opts(1, 3)).unwrap();
        assert!(!swapped.report.pass);
        assert!(swapped.report.worst_margin < 0.0);
    }

    #[test]
    fn validation_lines_render_every_check() {
        let report = validate_config(&singular_config()).unwrap();
        let lines = validation_lines(&report);
        assert!(lines.len() >= report.checks.len() + 2);
        assert!(lines.last().unwrap().contains("satisfied"));
    }
}
