//! The semilinear Lagrangian system and its time integration.
//!
//! ```text
//! y_t = e^{-λt} K + Γ
//! K_t = −G
//! V_t = 2 W B
//! W_t = (1 − 2V) B,      B = (e^{-λt} K² − H(K) − P)(1 − V) − ½ e^{-λt} V
//! Q_t = 2 W Q (½ e^{-λt} + e^{-λt} K² − H(K) − P)
//! ```
//!
//! `W² + V² − V` is a first integral of the pointwise flow (the `V` and `W`
//! equations share the factor `B`), and so is `Ẽ = ∫ K² Q(1−V) + QV dξ` for the
//! continuous system.

use crate::error::{Result, SolverError};
use crate::model::{LagrangianGrid, LagrangianState, ModelParams, Tolerances};
use crate::nonlocal::{compute_pg_with, NonlocalTerms};
use crate::transform::{energy_eulerian_on_nodes, energy_lagrangian, lagrangianize, InitialData};

/// Smallest substep the driver will try before giving up.
pub const DT_MIN: f64 = 1e-9;

/// Time derivatives of the five unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub dy: Vec<f64>,
    pub dk: Vec<f64>,
    pub dv: Vec<f64>,
    pub dw: Vec<f64>,
    pub dq: Vec<f64>,
}

/// Right-hand side with the nonlocal terms supplied by the caller.
pub fn rhs_with_terms(
    state: &LagrangianState,
    params: &ModelParams,
    terms: &NonlocalTerms,
) -> StateDerivative {
    let n = state.len();
    let decay = params.decay(state.t);
    let source = params.source_at(state.t);
    let mut d = StateDerivative {
        dy: Vec::with_capacity(n),
        dk: Vec::with_capacity(n),
        dv: Vec::with_capacity(n),
        dw: Vec::with_capacity(n),
        dq: Vec::with_capacity(n),
    };
    for i in 0..n {
        let (k, v, w, q) = (state.k[i], state.v[i], state.w[i], state.q[i]);
        let forcing = decay * k * k - source.eval(k) - terms.p[i];
        let b = forcing * (1.0 - v) - 0.5 * decay * v;
        d.dy.push(decay * k + params.transport);
        d.dk.push(-terms.g[i]);
        d.dv.push(2.0 * w * b);
        d.dw.push((1.0 - 2.0 * v) * b);
        d.dq.push(2.0 * w * q * (0.5 * decay + forcing));
    }
    d
}

pub fn rhs(state: &LagrangianState, params: &ModelParams) -> Result<StateDerivative> {
    let terms = compute_pg_with(state, params, &Tolerances::default())?;
    Ok(rhs_with_terms(state, params, &terms))
}

/// `base + scale·d`, with time advanced by `dt`.
fn offset(base: &LagrangianState, d: &StateDerivative, scale: f64, dt: f64) -> LagrangianState {
    let axpy = |x: &[f64], dx: &[f64]| x.iter().zip(dx).map(|(a, b)| a + scale * b).collect();
    LagrangianState {
        t: base.t + dt,
        grid: base.grid,
        y: axpy(&base.y, &d.dy),
        k: axpy(&base.k, &d.dk),
        v: axpy(&base.v, &d.dv),
        w: axpy(&base.w, &d.dw),
        q: axpy(&base.q, &d.dq),
    }
}

/// One classical RK4 step; `P`, `G` are recomputed at every stage.
///
/// Rejects the step if the result has `Q ≤ 0`, `V` outside `[−tol, 1 + tol]`,
/// or non-finite entries.
pub fn step_rk4(state: &LagrangianState, params: &ModelParams, dt: f64) -> Result<LagrangianState> {
    step_rk4_with(state, params, dt, &Tolerances::default())
}

pub fn step_rk4_with(
    state: &LagrangianState,
    params: &ModelParams,
    dt: f64,
    tol: &Tolerances,
) -> Result<LagrangianState> {
    if !(dt > 0.0) {
        return Err(SolverError::InvalidParameter {
            field: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    let stage = |s: &LagrangianState| -> Result<StateDerivative> {
        let terms = compute_pg_with(s, params, tol)?;
        Ok(rhs_with_terms(s, params, &terms))
    };
    let reject = |reason: String| SolverError::StepRejected { t: state.t, reason };

    let k1 = stage(state)?;
    let s2 = offset(state, &k1, 0.5 * dt, 0.5 * dt);
    let k2 = stage(&s2).map_err(|e| reject(format!("stage 2: {e}")))?;
    let s3 = offset(state, &k2, 0.5 * dt, 0.5 * dt);
    let k3 = stage(&s3).map_err(|e| reject(format!("stage 3: {e}")))?;
    let s4 = offset(state, &k3, dt, dt);
    let k4 = stage(&s4).map_err(|e| reject(format!("stage 4: {e}")))?;

    let combine = |x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..x.len())
            .map(|i| x[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect()
    };
    let next = LagrangianState {
        t: state.t + dt,
        grid: state.grid,
        y: combine(&state.y, &k1.dy, &k2.dy, &k3.dy, &k4.dy),
        k: combine(&state.k, &k1.dk, &k2.dk, &k3.dk, &k4.dk),
        v: combine(&state.v, &k1.dv, &k2.dv, &k3.dv, &k4.dv),
        w: combine(&state.w, &k1.dw, &k2.dw, &k3.dw, &k4.dw),
        q: combine(&state.q, &k1.dq, &k2.dq, &k3.dq, &k4.dq),
    };

    for i in 0..next.len() {
        let finite = [next.y[i], next.k[i], next.v[i], next.w[i], next.q[i]]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(reject(format!("non-finite value at node {i}")));
        }
        if next.q[i] <= 0.0 {
            return Err(reject(format!("Q[{i}] = {} is not positive", next.q[i])));
        }
        if next.v[i] < -tol.alg || next.v[i] > 1.0 + tol.alg {
            return Err(reject(format!("V[{i}] = {} left [0, 1]", next.v[i])));
        }
    }
    Ok(next)
}

/// Radial projection of `(V, W)` onto the circle `W² + (V − ½)² = ¼`.
pub fn project_onto_sheet(state: &mut LagrangianState) {
    for (v, w) in state.v.iter_mut().zip(state.w.iter_mut()) {
        let dv = *v - 0.5;
        let r = (dv * dv + *w * *w).sqrt();
        if r > 0.0 {
            *v = 0.5 + 0.5 * dv / r;
            *w *= 0.5 / r;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControls {
    pub dt: f64,
    pub t_end: f64,
    /// Project onto `W² + V² = V` after every step.
    pub renormalize_alg: bool,
    /// Emit a snapshot every this many steps (plus the final time).
    pub output_every: usize,
}

impl StepControls {
    pub fn new(dt: f64, t_end: f64, output_every: usize) -> Self {
        Self {
            dt,
            t_end,
            renormalize_alg: false,
            output_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: String| Err(SolverError::InvalidParameter { field, reason });
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(
                "dt",
                format!("must be positive and finite, got {}", self.dt),
            );
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad(
                "t_end",
                format!("must be non-negative and finite, got {}", self.t_end),
            );
        }
        if self.t_end > 0.0 && self.dt > self.t_end {
            return bad(
                "dt",
                format!("dt = {} exceeds t_end = {}", self.dt, self.t_end),
            );
        }
        if self.output_every == 0 {
            return bad("output_every", "must be at least 1".into());
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`; the last one may be shorter.
    pub fn n_steps(&self) -> usize {
        if self.t_end <= 0.0 {
            return 0;
        }
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

/// Invariant and energy monitors at one output time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub e_tilde: f64,
    pub e_euler: f64,
    /// max |W² + V² − V|
    pub res_alg: f64,
    /// max |δy/δξ − Q(1−V)| over interior nodes (centered differences)
    pub res_yxi: f64,
    /// max |δK/δξ − W Q| over interior nodes
    pub res_kxi: f64,
    pub min_q: f64,
    pub max_v: f64,
    pub min_v: f64,
    pub max_abs_w: f64,
    pub sup_k2: f64,
}

impl DiagnosticsRow {
    pub fn measure(state: &LagrangianState) -> Result<Self> {
        Self::measure_with(state, &Tolerances::default())
    }

    pub fn measure_with(state: &LagrangianState, tol: &Tolerances) -> Result<Self> {
        let n = state.len();
        let h = state.grid.d_xi();
        let mut res_alg = 0.0_f64;
        let mut min_q = f64::INFINITY;
        let mut max_v = f64::NEG_INFINITY;
        let mut min_v = f64::INFINITY;
        let mut max_abs_w = 0.0_f64;
        let mut sup_k2 = 0.0_f64;
        for i in 0..n {
            let (k, v, w, q) = (state.k[i], state.v[i], state.w[i], state.q[i]);
            res_alg = res_alg.max((w * w + v * v - v).abs());
            min_q = min_q.min(q);
            max_v = max_v.max(v);
            min_v = min_v.min(v);
            max_abs_w = max_abs_w.max(w.abs());
            sup_k2 = sup_k2.max(k * k);
        }
        let (res_yxi, res_kxi) = identity_residuals(state, h, |_| true);
        Ok(Self {
            t: state.t,
            e_tilde: energy_lagrangian(state),
            e_euler: energy_eulerian_on_nodes(state, tol)?,
            res_alg,
            res_yxi,
            res_kxi,
            min_q,
            max_v,
            min_v,
            max_abs_w,
            sup_k2,
        })
    }

    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.e_tilde,
            self.e_euler,
            self.res_alg,
            self.res_yxi,
            self.res_kxi,
            self.min_q,
            self.max_v,
            self.min_v,
            self.max_abs_w,
            self.sup_k2,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Max residuals of `y_ξ = Q(1−V)` and `K_ξ = WQ` at interior nodes `i` with
/// `keep(i)`.
pub fn identity_residuals<F: Fn(usize) -> bool>(
    state: &LagrangianState,
    h: f64,
    keep: F,
) -> (f64, f64) {
    let n = state.len();
    let mut ry = 0.0_f64;
    let mut rk = 0.0_f64;
    for i in (1..n - 1).filter(|&i| keep(i)) {
        let dy = (state.y[i + 1] - state.y[i - 1]) / (2.0 * h);
        let dk = (state.k[i + 1] - state.k[i - 1]) / (2.0 * h);
        ry = ry.max((dy - state.q[i] * (1.0 - state.v[i])).abs());
        rk = rk.max((dk - state.w[i] * state.q[i]).abs());
    }
    (ry, rk)
}

/// How a simulation ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    /// Stopped early; rows up to the failure are still reported.
    Aborted(SolverError),
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub snapshots: Vec<LagrangianState>,
    pub rows: Vec<DiagnosticsRow>,
    /// Largest `V` seen at any accepted step and the time it occurred.
    pub max_v_seen: (f64, f64),
    pub outcome: RunOutcome,
}

/// Result of a streamed run; snapshots went to the observer.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rows: Vec<DiagnosticsRow>,
    pub max_v_seen: (f64, f64),
    pub outcome: RunOutcome,
}

/// Lagrangianizes `data` and integrates to `t_end`, keeping every snapshot.
pub fn simulate(
    data: &InitialData,
    grid: &LagrangianGrid,
    params: &ModelParams,
    controls: &StepControls,
) -> Result<SimulationOutput> {
    let mut snapshots = Vec::new();
    let summary = simulate_with(data, grid, params, controls, |s, _| {
        snapshots.push(s.clone())
    })?;
    Ok(SimulationOutput {
        snapshots,
        rows: summary.rows,
        max_v_seen: summary.max_v_seen,
        outcome: summary.outcome,
    })
}

/// Like [`simulate`], but hands each snapshot to `observe` instead of storing
/// it. Configuration and initial-data errors are returned as `Err`; failures
/// during the integration end the run with [`RunOutcome::Aborted`].
pub fn simulate_with<F>(
    data: &InitialData,
    grid: &LagrangianGrid,
    params: &ModelParams,
    controls: &StepControls,
    observe: F,
) -> Result<RunSummary>
where
    F: FnMut(&LagrangianState, &DiagnosticsRow),
{
    params.validate()?;
    controls.validate()?;
    let initial = lagrangianize(data, grid)?;
    run_from(initial, params, controls, observe)
}

/// Integrates an already built state.
pub fn run_from<F>(
    initial: LagrangianState,
    params: &ModelParams,
    controls: &StepControls,
    mut observe: F,
) -> Result<RunSummary>
where
    F: FnMut(&LagrangianState, &DiagnosticsRow),
{
    let tol = Tolerances::default().for_evolution(&initial.grid);
    let mut rows = Vec::new();
    let mut emit = |state: &LagrangianState, rows: &mut Vec<DiagnosticsRow>| -> Result<()> {
        let row = DiagnosticsRow::measure_with(state, &tol)?;
        if !row.is_finite() {
            return Err(SolverError::InvalidState(format!(
                "non-finite diagnostics at t = {}",
                state.t
            )));
        }
        observe(state, &row);
        rows.push(row);
        Ok(())
    };

    let max_v = |s: &LagrangianState| s.v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut max_v_seen = (max_v(&initial), initial.t);
    let t0 = initial.t;
    let mut state = initial;
    emit(&state, &mut rows)?;

    let n_steps = controls.n_steps();
    for step in 1..=n_steps {
        let target = if step == n_steps {
            t0 + controls.t_end
        } else {
            t0 + step as f64 * controls.dt
        };
        let dt = target - state.t;
        match advance(&state, params, dt, controls.renormalize_alg, &tol) {
            Ok(mut next) => {
                next.t = target;
                state = next;
            }
            Err(err) => {
                return Ok(RunSummary {
                    rows,
                    max_v_seen,
                    outcome: RunOutcome::Aborted(err),
                });
            }
        }
        let mv = max_v(&state);
        if mv > max_v_seen.0 {
            max_v_seen = (mv, state.t);
        }
        if step % controls.output_every == 0 || step == n_steps {
            if let Err(err) = emit(&state, &mut rows) {
                return Ok(RunSummary {
                    rows,
                    max_v_seen,
                    outcome: RunOutcome::Aborted(err),
                });
            }
        }
    }
    Ok(RunSummary {
        rows,
        max_v_seen,
        outcome: RunOutcome::Completed,
    })
}

/// Steps over `dt`, splitting the interval in halves whenever a step is
/// rejected.
fn advance(
    state: &LagrangianState,
    params: &ModelParams,
    dt: f64,
    renormalize: bool,
    tol: &Tolerances,
) -> Result<LagrangianState> {
    match step_rk4_with(state, params, dt, tol) {
        Ok(mut next) => {
            if renormalize {
                project_onto_sheet(&mut next);
            }
            Ok(next)
        }
        Err(SolverError::StepRejected { .. }) => {
            let half = 0.5 * dt;
            if half < DT_MIN {
                return Err(SolverError::DtUnderflow {
                    t: state.t,
                    dt: half,
                });
            }
            let mid = advance(state, params, half, renormalize, tol)?;
            advance(&mid, params, half, renormalize, tol)
        }
        Err(other) => Err(other),
    }
}
