//! Grid sizing.
//!
//! The Eulerian region a run can touch is the core of the data widened by
//! `(|Γ| + √E₀)·t_end + pad`, since characteristics move with speed
//! `e^{-λt}K + Γ` and `sup K² ≤ E₀`. Its end points are mapped to labels.
//!
//! Peakon tips are fixed labels at which `V`, `W` and `Q` jump. The grid is
//! placed so that these labels fall on cell midpoints (both outermost tips
//! when there are two or more, interior ones only approximately).

use super::config::{GridSpec, RunConfig};
use super::{HarnessError, HarnessResult};
use crate::model::{LagrangianGrid, LagrangianState, ModelParams};
use crate::transform::{characteristic_label, InitialData};

/// Eulerian interval `[x_lo, x_hi]` the solution can reach by `t_end`.
pub fn reach_interval(
    data: &InitialData,
    params: &ModelParams,
    t_end: f64,
    pad: f64,
) -> (f64, f64) {
    let (lo, hi) = data.core_interval();
    let reach = (params.transport.abs() + data.energy().sqrt()) * t_end + pad;
    (lo - reach, hi + reach)
}

/// Labels of the peakon tips of `data` (empty for smooth kinds).
pub fn tip_labels(data: &InitialData) -> HarnessResult<Vec<f64>> {
    match data {
        InitialData::PeakonSum { q, .. } => {
            let mut labels = q
                .iter()
                .map(|&x| characteristic_label(data, x))
                .collect::<Result<Vec<_>, _>>()?;
            labels.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Ok(labels)
        }
        _ => Ok(Vec::new()),
    }
}

/// Uniform grid with `n_nodes` covering the reach interval of `data`.
pub fn auto_grid(
    data: &InitialData,
    params: &ModelParams,
    t_end: f64,
    n_nodes: usize,
    pad: f64,
    align_tips: bool,
) -> HarnessResult<LagrangianGrid> {
    if n_nodes < 4 {
        return Err(HarnessError::Config(format!(
            "[grid] n_nodes must be at least 4, got {n_nodes}"
        )));
    }
    let (x_lo, x_hi) = reach_interval(data, params, t_end, pad);
    let xi_lo = characteristic_label(data, x_lo)?;
    let xi_hi = characteristic_label(data, x_hi)?;
    let tips = if align_tips {
        tip_labels(data)?
    } else {
        Vec::new()
    };
    let tips: Vec<f64> = tips
        .into_iter()
        .filter(|&t| t > xi_lo && t < xi_hi)
        .collect();

    if tips.is_empty() {
        return Ok(LagrangianGrid::new(xi_lo, xi_hi, n_nodes)?);
    }
    // one spare cell pays for shifting the grid onto the tips
    let h_min = (xi_hi - xi_lo) / (n_nodes - 2) as f64;
    let first = tips[0];
    let last = tips[tips.len() - 1];
    let cells_between = ((last - first) / h_min).floor();
    let h = if tips.len() > 1 && cells_between >= 1.0 {
        (last - first) / cells_between
    } else {
        h_min
    };
    let m = ((first - xi_lo) / h - 0.5).ceil();
    let xi_min = first - (m + 0.5) * h;
    let xi_max = xi_min + (n_nodes - 1) as f64 * h;
    Ok(LagrangianGrid::new(xi_min, xi_max, n_nodes)?)
}

/// Grid a configuration asks for.
pub fn resolve_grid(config: &RunConfig) -> HarnessResult<LagrangianGrid> {
    match &config.grid {
        GridSpec::Auto {
            n_nodes,
            pad,
            align_tips,
        } => auto_grid(
            &config.initial,
            &config.params,
            config.controls.t_end,
            *n_nodes,
            *pad,
            *align_tips,
        ),
        GridSpec::Fixed(g) => Ok(*g),
    }
}

/// Checks that the solution has not reached the ends of the grid: the
/// boundary values of `K` must stay below `e^{-pad/2}·scale`.
pub fn check_coverage(state: &LagrangianState, scale: f64, pad: f64) -> HarnessResult<()> {
    let n = state.len();
    let edge = state.k[0].abs().max(state.k[n - 1].abs());
    let limit = (-0.5 * pad).exp() * scale;
    if edge > limit {
        return Err(HarnessError::Numerical(format!(
            "solution reached the grid boundary at t = {}: |K| = {edge:.3e} > {limit:.3e}; enlarge pad",
            state.t
        )));
    }
    Ok(())
}

/// Max-norm scale of the initial data on its core interval.
pub fn data_scale(data: &InitialData) -> f64 {
    match data {
        InitialData::Samples { k, .. } => k.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        InitialData::Gaussian { amplitude, .. } => amplitude.abs(),
        InitialData::PeakonSum { q, .. } => {
            q.iter().fold(0.0_f64, |m, &x| m.max(data.value(x).abs()))
        }
    }
}
