//! Refinement studies.
//!
//! Level `l` uses `n_l = (n₀ − 1)·2^l + 1` nodes and `dt_l = dt₀/2^l`, each
//! on its own auto-sized grid. Errors are max-norm differences of the
//! reconstructed `k(t_end, ·)` on a fixed Eulerian grid, taken against the
//! peakon solution when one applies and against the finest level otherwise.

use super::config::RunConfig;
use super::grid::{reach_interval, resolve_grid};
use super::{HarnessError, HarnessResult};
use crate::evolve::{run_from, RunOutcome};
use crate::model::{ModelParams, Tolerances};
use crate::peakon::{
    integrate_peakons, sample_profile, PeakonOutcome, PeakonState, ProfileVariable,
};
use crate::transform::{eulerianize_with, lagrangianize, InitialData};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceLevel {
    pub n_nodes: usize,
    pub d_xi: f64,
    pub dt: f64,
    /// `None` for the level used as the reference.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub levels: Vec<ConvergenceLevel>,
    /// `"peakon"` or `"finest"`.
    pub reference: &'static str,
    /// Observed orders between consecutive levels with errors; `None` when an
    /// error vanishes.
    pub orders: Vec<Option<f64>>,
}

impl ConvergenceTable {
    pub fn errors(&self) -> Vec<f64> {
        self.levels.iter().filter_map(|l| l.error).collect()
    }

    pub fn min_order(&self) -> Option<f64> {
        self.orders.iter().flatten().cloned().reduce(f64::min)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "reference: {}\n{:>8} {:>12} {:>10} {:>14} {:>8}\n",
            self.reference, "n", "d_xi", "dt", "error", "order"
        );
        let mut order_iter = self.orders.iter();
        let mut first = true;
        for l in &self.levels {
            let err = l
                .error
                .map_or("reference".to_string(), |e| format!("{e:.6e}"));
            let order = if l.error.is_some() && !first {
                order_iter
                    .next()
                    .and_then(|o| o.map(|v| format!("{v:.3}")))
                    .unwrap_or_else(|| "-".into())
            } else {
                "-".into()
            };
            if l.error.is_some() {
                first = false;
            }
            out += &format!(
                "{:>8} {:>12.4e} {:>10.3e} {:>14} {:>8}\n",
                l.n_nodes, l.d_xi, l.dt, err, order
            );
        }
        out
    }
}

/// Peakon data whose ODE applies to the PDE parameters: `β = γ = 0` and
/// `α = −Γ`.
fn peakon_reference(config: &RunConfig) -> Option<PeakonState> {
    let InitialData::PeakonSum { p, q } = &config.initial else {
        return None;
    };
    let ModelParams {
        alpha,
        beta,
        gamma,
        transport,
        ..
    } = config.params;
    if beta != 0.0 || gamma != 0.0 || alpha + transport != 0.0 {
        return None;
    }
    let mut pairs: Vec<(f64, f64)> = q.iter().cloned().zip(p.iter().cloned()).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let state = PeakonState::new(
        0.0,
        pairs.iter().map(|x| x.1).collect(),
        pairs.iter().map(|x| x.0).collect(),
    )
    .ok()?;
    let dt = config.controls.dt.min(1e-3);
    let traj = integrate_peakons(&state, &config.params, dt, config.controls.t_end).ok()?;
    match traj.outcome {
        PeakonOutcome::Completed => traj.states.last().cloned(),
        PeakonOutcome::CollisionDetected { .. } => None,
    }
}

/// Reconstructed `k(t_end)` on `x` for one configuration.
fn final_profile(config: &RunConfig, x: &[f64]) -> HarnessResult<Vec<f64>> {
    let grid = resolve_grid(config)?;
    let initial = lagrangianize(&config.initial, &grid)?;
    let tol = Tolerances::default().for_evolution(&grid);
    let mut last = None;
    let mut controls = config.controls;
    controls.output_every = usize::MAX;
    let summary = run_from(initial, &config.params, &controls, |s, _| {
        last = Some(s.clone())
    })?;
    if let RunOutcome::Aborted(e) = summary.outcome {
        return Err(HarnessError::Solver(e));
    }
    let state = last.expect("final state is always emitted");
    Ok(eulerianize_with(&state, x, &tol)?.k)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Runs `levels` refinements of `config` concurrently and tabulates errors.
pub fn convergence_study(config: &RunConfig, levels: usize) -> HarnessResult<ConvergenceTable> {
    if levels < 3 {
        return Err(HarnessError::Config(format!(
            "convergence needs at least 3 levels, got {levels}"
        )));
    }
    let n0 = config.grid.n_nodes();
    let configs = (0..levels)
        .map(|l| {
            let scale = 1usize << l;
            config.refined_to(
                (n0 - 1) * scale + 1,
                config.controls.dt / scale as f64,
                usize::MAX,
            )
        })
        .collect::<HarnessResult<Vec<_>>>()?;

    let x: Vec<f64> = match config.outputs.snapshot_grid {
        Some(g) => g.points(),
        None => {
            let (lo, hi) =
                reach_interval(&config.initial, &config.params, config.controls.t_end, 2.0);
            let n = 4001;
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        }
    };

    let profiles: Vec<HarnessResult<Vec<f64>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| scope.spawn(|| final_profile(c, &x)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("refinement level panicked"))
            .collect()
    });
    let profiles = profiles.into_iter().collect::<HarnessResult<Vec<_>>>()?;

    let peakon = peakon_reference(config);
    let (reference, errors): (&'static str, Vec<Option<f64>>) = match &peakon {
        Some(state) => {
            let exact = sample_profile(state, &x, ProfileVariable::K, &config.params);
            (
                "peakon",
                profiles.iter().map(|p| Some(max_diff(p, &exact))).collect(),
            )
        }
        None => {
            let finest = &profiles[levels - 1];
            let mut e: Vec<Option<f64>> = profiles[..levels - 1]
                .iter()
                .map(|p| Some(max_diff(p, finest)))
                .collect();
            e.push(None);
            ("finest", e)
        }
    };

    let table_levels: Vec<ConvergenceLevel> = configs
        .iter()
        .zip(&errors)
        .map(|(c, e)| {
            let grid = resolve_grid(c).expect("grid resolved above");
            ConvergenceLevel {
                n_nodes: grid.n_nodes,
                d_xi: grid.d_xi(),
                dt: c.controls.dt,
                error: *e,
            }
        })
        .collect();
    let with_err: Vec<&ConvergenceLevel> =
        table_levels.iter().filter(|l| l.error.is_some()).collect();
    let orders = with_err
        .windows(2)
        .map(|w| {
            let (e0, e1) = (w[0].error.unwrap(), w[1].error.unwrap());
            (e0 > 0.0 && e1 > 0.0).then(|| (e0 / e1).ln() / (w[0].d_xi / w[1].d_xi).ln())
        })
        .collect();
    Ok(ConvergenceTable {
        levels: table_levels,
        reference,
        orders,
    })
}
