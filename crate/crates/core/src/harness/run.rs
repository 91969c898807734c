//! One configured simulation, streamed to a run directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use super::config::{GridSpec, RunConfig, SnapshotGrid};
use super::diagnostics::{
    default_test_bank, random_test_bumps, BetaTracker, WeakFormAccumulator, WeakFormResidual,
};
use super::grid::{check_coverage, data_scale, reach_interval, resolve_grid};
use super::output::{self, TimeseriesWriter, META_FILE};
use super::{HarnessError, HarnessResult};
use crate::evolve::{run_from, DiagnosticsRow, RunOutcome};
use crate::model::{LagrangianGrid, Tolerances};
use crate::nonlocal::compute_pg_with;
use crate::transform::{eulerianize_with, lagrangianize, InitialData};

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Seeds the extra random test bumps.
    pub seed: Option<u64>,
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct BetaSummary {
    pub probe: f64,
    pub offset: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub out_dir: PathBuf,
    pub grid: LagrangianGrid,
    pub rows: Vec<DiagnosticsRow>,
    pub max_v_seen: (f64, f64),
    pub outcome: RunOutcome,
    pub weak_form: Option<WeakFormResidual>,
    pub beta: Option<BetaSummary>,
    /// Set when the solution reached the ends of the grid.
    pub coverage_error: Option<String>,
    pub wall_seconds: f64,
}

impl RunResult {
    /// The error the run should be reported with, if any.
    pub fn failure(&self) -> Option<HarnessError> {
        if let RunOutcome::Aborted(e) = &self.outcome {
            return Some(HarnessError::Solver(e.clone()));
        }
        self.coverage_error
            .as_ref()
            .map(|m| HarnessError::Numerical(m.clone()))
    }
}

/// Default Eulerian window for snapshot files.
pub fn default_snapshot_grid(config: &RunConfig) -> SnapshotGrid {
    let (x_min, x_max) =
        reach_interval(&config.initial, &config.params, config.controls.t_end, 2.0);
    SnapshotGrid {
        x_min,
        x_max,
        n_x: 2001,
    }
}

fn initial_kind(data: &InitialData) -> &'static str {
    match data {
        InitialData::PeakonSum { .. } => "peakon",
        InitialData::Gaussian { .. } => "gaussian",
        InitialData::Samples { .. } => "samples",
    }
}

/// Runs `config`, writing `timeseries.csv`, optional snapshot files and
/// `meta.json` to `out_dir`.
///
/// A run that starts always returns `Ok`; inspect [`RunResult::failure`].
pub fn run_simulation(
    config: &RunConfig,
    out_dir: &Path,
    opts: RunOptions,
) -> HarnessResult<RunResult> {
    let started = Instant::now();
    config.params.validate()?;
    config.controls.validate()?;
    let grid = resolve_grid(config)?;
    let initial = lagrangianize(&config.initial, &grid)?;
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;

    let outputs = &config.outputs;
    let params = config.params;
    let t_end = config.controls.t_end;
    let snapshot_x = outputs
        .snapshot_grid
        .unwrap_or_else(|| default_snapshot_grid(config))
        .points();

    let mut weak = if outputs.weak_form {
        let region = reach_interval(&config.initial, &params, t_end, 0.0);
        let mut bank = default_test_bank(t_end, region);
        if let Some(seed) = opts.seed {
            bank.extend(random_test_bumps(seed, outputs.random_bumps, t_end, region));
        }
        Some(WeakFormAccumulator::new(params, bank))
    } else {
        None
    };
    let mut beta = match outputs.beta_probe {
        Some(xi) => Some(BetaTracker::new(&initial, &params, xi)?),
        None => None,
    };

    let mut series = TimeseriesWriter::create(out_dir, beta.is_some())?;
    let mut failure: Option<HarnessError> = None;
    let tol = Tolerances::default().for_evolution(&grid);
    let quiet = opts.quiet;
    let coverage_pad = match config.grid {
        GridSpec::Auto { pad, .. } => Some(pad),
        GridSpec::Fixed(_) => None,
    };
    let scale = data_scale(&config.initial);
    let mut coverage_error: Option<String> = None;

    let summary = run_from(initial, &params, &config.controls, |state, row| {
        if failure.is_some() {
            return;
        }
        let mut step = || -> HarnessResult<()> {
            let mut beta_res = None;
            if weak.is_some() || beta.is_some() {
                let terms = compute_pg_with(state, &params, &tol)?;
                if let Some(acc) = weak.as_mut() {
                    acc.push_with_terms(state, &terms);
                }
                if let Some(tracker) = beta.as_mut() {
                    beta_res = Some(tracker.push_with_terms(state, &terms));
                }
            }
            series.write(row, beta_res)?;
            if let (Some(pad), None) = (coverage_pad, &coverage_error) {
                if let Err(e) = check_coverage(state, scale, pad) {
                    coverage_error = Some(e.to_string());
                }
            }
            if outputs.snapshots {
                output::write_snapshot(out_dir, &eulerianize_with(state, &snapshot_x, &tol)?)?;
            }
            if outputs.lagrangian {
                output::write_lagrangian(out_dir, state)?;
            }
            if !quiet {
                eprintln!(
                    "t = {:>10.4}  E = {:.12e}  res_alg = {:.2e}  maxV = {:.6}",
                    row.t, row.e_tilde, row.res_alg, row.max_v
                );
            }
            Ok(())
        };
        if let Err(e) = step() {
            failure = Some(e);
        }
    })?;
    series.finish()?;
    if let Some(e) = failure {
        return Err(e);
    }

    let weak_form = match &weak {
        Some(acc) if summary.rows.len() >= 2 => Some(acc.finish()?),
        _ => None,
    };
    let beta = beta.map(|b| BetaSummary {
        probe: b.probe_label(),
        offset: b.offset(),
        residual: b.max_residual(),
    });

    let result = RunResult {
        out_dir: out_dir.to_path_buf(),
        grid,
        rows: summary.rows,
        max_v_seen: summary.max_v_seen,
        outcome: summary.outcome,
        weak_form,
        beta,
        coverage_error,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    write_meta(config, &result)?;
    Ok(result)
}

fn write_meta(config: &RunConfig, result: &RunResult) -> HarnessResult<()> {
    let p = &config.params;
    let g = &result.grid;
    let outcome = match &result.outcome {
        RunOutcome::Completed => json!({ "status": "completed" }),
        RunOutcome::Aborted(e) => json!({ "status": "aborted", "error": e.to_string() }),
    };
    let last = result.rows.last();
    let meta = json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "wall_seconds": result.wall_seconds,
        "params": { "lambda": p.lambda, "alpha": p.alpha, "beta": p.beta, "gamma": p.gamma, "Gamma": p.transport },
        "grid": {
            "xi_min": g.xi_min,
            "xi_max": g.xi_max,
            "n_nodes": g.n_nodes,
            "d_xi": g.d_xi(),
            "auto": matches!(config.grid, GridSpec::Auto { .. }),
        },
        "initial": { "kind": initial_kind(&config.initial), "energy": config.initial.energy() },
        "controls": {
            "dt": config.controls.dt,
            "t_end": config.controls.t_end,
            "output_every": config.controls.output_every,
            "renormalize_alg": config.controls.renormalize_alg,
        },
        "outcome": outcome,
        "rows": result.rows.len(),
        "t_final": last.map(|r| r.t),
        "max_v_seen": { "value": result.max_v_seen.0, "t": result.max_v_seen.1 },
        "coverage_error": result.coverage_error,
        "weak_form": result.weak_form.as_ref().map(|w| json!({
            "momentum": w.momentum,
            "energy": w.energy,
            "bumps": w.per_bump.len(),
        })),
        "beta": result.beta.as_ref().map(|b| json!({
            "probe_xi": b.probe,
            "offset": b.offset,
            "offset_rule": "left-tail mass at t = 0: y(0, xi_min) - xi_min",
            "residual": b.residual,
        })),
    });
    output::write_json(&result.out_dir.join(META_FILE), &meta)
}

/// Largest relative tip errors of a PDE run against the peakon ODE.
#[derive(Debug, Clone)]
pub struct Comparison {
    /// `(t, position error, height error)` per output time, maximised over
    /// peakons; positions relative to `max(|q|, 1)`, heights to `|k(q)|`.
    pub rows: Vec<(f64, f64, f64)>,
    pub max_position_error: f64,
    pub max_height_error: f64,
    /// Time the peakon ODE stopped at a collision, if it did.
    pub collision: Option<f64>,
    pub pde_outcome: RunOutcome,
}

/// Relative error threshold used by `compare`.
pub const COMPARE_THRESHOLD: f64 = 0.02;

impl Comparison {
    pub fn passed(&self) -> bool {
        self.max_position_error <= COMPARE_THRESHOLD
            && self.max_height_error <= COMPARE_THRESHOLD
            && self.pde_outcome == RunOutcome::Completed
    }
}

/// Runs the PDE and the peakon ODE side by side. Each PDE tip is the fixed
/// label of its initial position; its location is `y` interpolated there and
/// its height the larger `|K|` of the two enclosing nodes.
pub fn compare_with_peakons(config: &RunConfig) -> HarnessResult<Comparison> {
    use crate::peakon::{
        integrate_peakons, sample_profile, PeakonOutcome, PeakonState, ProfileVariable,
    };

    let InitialData::PeakonSum { p, q } = &config.initial else {
        return Err(HarnessError::Config(
            "compare needs [initial] kind = \"peakon\"".into(),
        ));
    };
    let prm = &config.params;
    if prm.beta != 0.0 || prm.gamma != 0.0 || prm.alpha + prm.transport != 0.0 {
        return Err(HarnessError::Config(
            "compare applies only when beta = gamma = 0 and alpha = -Gamma".into(),
        ));
    }
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| q[a].partial_cmp(&q[b]).unwrap());
    let state0 = PeakonState::new(
        0.0,
        order.iter().map(|&i| p[i]).collect(),
        order.iter().map(|&i| q[i]).collect(),
    )?;
    let traj = integrate_peakons(&state0, prm, config.controls.dt, config.controls.t_end)?;
    let collision = match traj.outcome {
        PeakonOutcome::CollisionDetected { t, .. } => Some(t),
        PeakonOutcome::Completed => None,
    };

    let grid = resolve_grid(config)?;
    let labels = super::grid::tip_labels(&config.initial)?;
    let initial = lagrangianize(&config.initial, &grid)?;
    let dt = config.controls.dt;
    let mut rows = Vec::new();
    let summary = run_from(initial, prm, &config.controls, |state, _| {
        let step = (state.t / dt).round() as usize;
        let Some(ode) = traj.states.get(step) else {
            return;
        };
        if collision.is_some_and(|tc| state.t >= tc) || (ode.t - state.t).abs() > 1e-9 {
            return;
        }
        let heights = sample_profile(ode, &ode.q, ProfileVariable::K, prm);
        let (mut pos_err, mut height_err) = (0.0_f64, 0.0_f64);
        for (i, &label) in labels.iter().enumerate() {
            let r = (label - grid.xi_min) / grid.d_xi();
            let j = (r.floor() as usize).min(grid.n_nodes - 2);
            let theta = r - j as f64;
            let y = state.y[j] + theta * (state.y[j + 1] - state.y[j]);
            let k = if state.k[j].abs() >= state.k[j + 1].abs() {
                state.k[j]
            } else {
                state.k[j + 1]
            };
            pos_err = pos_err.max((y - ode.q[i]).abs() / ode.q[i].abs().max(1.0));
            height_err = height_err.max((k - heights[i]).abs() / heights[i].abs());
        }
        rows.push((state.t, pos_err, height_err));
    })?;
    let max_position_error = rows.iter().fold(0.0_f64, |m, r| m.max(r.1));
    let max_height_error = rows.iter().fold(0.0_f64, |m, r| m.max(r.2));
    Ok(Comparison {
        rows,
        max_position_error,
        max_height_error,
        collision,
        pde_outcome: summary.outcome,
    })
}
