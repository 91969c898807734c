//! Run-level checks of the weak formulation and of the β characteristic.
//!
//! Both weak identities are written in Lagrangian form, using
//! `dx = Q(1−V) dξ`, `k_x² dx = QV dξ`, `k_x dx = WQ dξ` and `P_x∘y = G`:
//!
//! ```text
//! momentum: ∫∫ [K ψ_t + (½e K² + Γ K) ψ_x − G ψ] Q(1−V) dξ dt + ∫ K̄ ψ(0) Q̄(1−V̄) dξ
//! energy:   ∫∫ [QV φ_t + (e K + Γ) QV φ_x + 2WQ (e K² − H − P) φ] dξ dt + ∫ Q̄V̄ φ(0) dξ
//! ```
//!
//! with `e = e^{-λt}` and test functions evaluated at `x = y(t, ξ)`. Space
//! integrals use the trapezoid rule on the grid, time integrals the trapezoid
//! rule over the snapshots.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SolverError};
use crate::model::{LagrangianState, ModelParams, Tolerances};
use crate::nonlocal::{compute_pg_with, NonlocalTerms};

/// `¼(1 + cos πr)²` on `|r| < 1` and its derivative in `r`.
fn raised_cosine_sq(r: f64) -> (f64, f64) {
    if r.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let c = 1.0 + (PI * r).cos();
    (0.25 * c * c, -0.5 * c * PI * (PI * r).sin())
}

/// Tensor-product test function `ψ(t, x) = φ_T(t) φ_X(x)` with `φ` a squared
/// raised cosine on each window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestBump {
    pub t_lo: f64,
    pub t_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl TestBump {
    pub fn new(t_lo: f64, t_hi: f64, x_lo: f64, x_hi: f64) -> Self {
        Self {
            t_lo,
            t_hi,
            x_lo,
            x_hi,
        }
    }

    fn factor(s: f64, lo: f64, hi: f64) -> (f64, f64) {
        let half = 0.5 * (hi - lo);
        let (v, d) = raised_cosine_sq((s - 0.5 * (lo + hi)) / half);
        (v, d / half)
    }

    /// Time factor and its derivative.
    pub fn time_part(&self, t: f64) -> (f64, f64) {
        Self::factor(t, self.t_lo, self.t_hi)
    }

    /// Space factor and its derivative.
    pub fn space_part(&self, x: f64) -> (f64, f64) {
        Self::factor(x, self.x_lo, self.x_hi)
    }

    /// `(ψ, ψ_t, ψ_x)`.
    pub fn eval(&self, t: f64, x: f64) -> (f64, f64, f64) {
        let (a, da) = self.time_part(t);
        let (b, db) = self.space_part(x);
        (a * b, da * b, a * db)
    }
}

/// Five bumps over `[0, t_end] × region`; three of them straddle `t = 0` so the
/// initial-data terms are exercised, and none extends past `t_end`.
pub fn default_test_bank(t_end: f64, region: (f64, f64)) -> Vec<TestBump> {
    let t = if t_end > 0.0 { t_end } else { 1.0 };
    let (lo, hi) = region;
    let c = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo);
    vec![
        TestBump::new(-t, t, lo, hi),
        TestBump::new(-0.5 * t, 0.5 * t, lo, c + 0.25 * r),
        TestBump::new(0.1 * t, 0.9 * t, c - 0.5 * r, c + 0.5 * r),
        TestBump::new(0.25 * t, t, c - 0.25 * r, hi),
        TestBump::new(-0.25 * t, 0.75 * t, c - 0.75 * r, c + 0.1 * r),
    ]
}

/// `count` bumps with random windows inside `[0, t_end] × region`.
pub fn random_test_bumps(seed: u64, count: usize, t_end: f64, region: (f64, f64)) -> Vec<TestBump> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = if t_end > 0.0 { t_end } else { 1.0 };
    let (lo, hi) = region;
    (0..count)
        .map(|_| {
            let t_hi = rng.gen_range(0.25 * t..=t);
            let t_lo = t_hi - rng.gen_range(0.25 * t..1.5 * t);
            let half = rng.gen_range(0.1..0.4) * (hi - lo);
            let c = rng.gen_range(lo + half..=hi - half);
            TestBump::new(t_lo, t_hi, c - half, c + half)
        })
        .collect()
}

/// Largest residuals of the two weak identities over a bank.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakFormResidual {
    pub momentum: f64,
    pub energy: f64,
    /// `[momentum, energy]` per bump, signed.
    pub per_bump: Vec<[f64; 2]>,
}

impl WeakFormResidual {
    pub fn max(&self) -> f64 {
        self.momentum.max(self.energy)
    }
}

/// Streams snapshots into the space-time integrals of both weak identities.
#[derive(Debug, Clone)]
pub struct WeakFormAccumulator {
    params: ModelParams,
    bank: Vec<TestBump>,
    sums: Vec<[f64; 2]>,
    last: Option<(f64, Vec<[f64; 2]>)>,
    count: usize,
}

impl WeakFormAccumulator {
    pub fn new(params: ModelParams, bank: Vec<TestBump>) -> Self {
        let sums = vec![[0.0; 2]; bank.len()];
        Self {
            params,
            bank,
            sums,
            last: None,
            count: 0,
        }
    }

    pub fn bank(&self) -> &[TestBump] {
        &self.bank
    }

    pub fn push(&mut self, state: &LagrangianState) -> Result<()> {
        let tol = Tolerances::default().for_evolution(&state.grid);
        let terms = compute_pg_with(state, &self.params, &tol)?;
        self.push_with_terms(state, &terms);
        Ok(())
    }

    /// Adds a snapshot whose `P`, `G` are already known. Snapshots must come
    /// in increasing time; the first one supplies the initial-data terms.
    pub fn push_with_terms(&mut self, state: &LagrangianState, terms: &NonlocalTerms) {
        let t = state.t;
        let e = self.params.decay(t);
        let source = self.params.source_at(t);
        let gamma = self.params.transport;
        let weights = state.grid.trapezoid_weights();
        let first = self.last.is_none();

        let mut now = vec![[0.0; 2]; self.bank.len()];
        for (b, bump) in self.bank.iter().enumerate() {
            let (a, da) = bump.time_part(t);
            if a == 0.0 && da == 0.0 {
                continue;
            }
            let mut acc = [0.0; 2];
            let mut init = [0.0; 2];
            for i in 0..state.len() {
                let (phi, dphi) = bump.space_part(state.y[i]);
                if phi == 0.0 && dphi == 0.0 {
                    continue;
                }
                let (k, v, w, q) = (state.k[i], state.v[i], state.w[i], state.q[i]);
                let (psi, psi_t, psi_x) = (a * phi, da * phi, a * dphi);
                let length = q * (1.0 - v);
                let mass = q * v;
                let drive = e * k * k - source.eval(k) - terms.p[i];
                acc[0] += weights[i]
                    * (k * psi_t + (0.5 * e * k * k + gamma * k) * psi_x - terms.g[i] * psi)
                    * length;
                acc[1] += weights[i]
                    * (mass * psi_t + (e * k + gamma) * mass * psi_x + 2.0 * w * q * drive * psi);
                if first {
                    init[0] += weights[i] * k * psi * length;
                    init[1] += weights[i] * mass * psi;
                }
            }
            now[b] = acc;
            if first {
                self.sums[b][0] += init[0];
                self.sums[b][1] += init[1];
            }
        }
        if let Some((t_prev, prev)) = &self.last {
            let dt = t - t_prev;
            for b in 0..self.bank.len() {
                for c in 0..2 {
                    self.sums[b][c] += 0.5 * dt * (prev[b][c] + now[b][c]);
                }
            }
        }
        self.last = Some((t, now));
        self.count += 1;
    }

    pub fn finish(&self) -> Result<WeakFormResidual> {
        if self.count < 2 {
            return Err(SolverError::InsufficientSnapshots(format!(
                "weak-form residual needs at least 2 snapshots, got {}",
                self.count
            )));
        }
        let momentum = self.sums.iter().fold(0.0_f64, |m, s| m.max(s[0].abs()));
        let energy = self.sums.iter().fold(0.0_f64, |m, s| m.max(s[1].abs()));
        Ok(WeakFormResidual {
            momentum,
            energy,
            per_bump: self.sums.clone(),
        })
    }
}

/// Weak-form residuals of a stored run; `snapshots[0]` must be the initial
/// state.
pub fn weak_form_residual(
    snapshots: &[LagrangianState],
    params: &ModelParams,
    bank: &[TestBump],
) -> Result<WeakFormResidual> {
    let mut acc = WeakFormAccumulator::new(*params, bank.to_vec());
    for s in snapshots {
        acc.push(s)?;
    }
    acc.finish()
}

/// Integral of the cubic through the four nearest nodes over cell `[j, j+1]`.
fn cell_integral(f: &[f64], h: f64, j: usize) -> f64 {
    let n = f.len();
    if n < 4 {
        return 0.5 * h * (f[j] + f[j + 1]);
    }
    if j == 0 {
        h * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0
    } else if j == n - 2 {
        h * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4]) / 24.0
    } else {
        h * (-f[j - 1] + 13.0 * f[j] + 13.0 * f[j + 1] - f[j + 2]) / 24.0
    }
}

/// `∫_{ξ_min}^{ξ_upto} f dξ`.
fn integral_to(f: &[f64], h: f64, upto: usize) -> f64 {
    (0..upto).map(|j| cell_integral(f, h, j)).sum()
}

/// Follows `β(t, ξ) = y + ∫_{-∞}^{y} k_x² dx` along one characteristic and
/// compares it with `ξ + offset + ∫₀ᵗ F ds`, where
/// `F = Γ + e^{-λt}K + ∫_{-∞}^{y} 2k_x (e^{-λt}k² − P − H) dx`.
///
/// Mass to the left of the grid is dropped on both sides. The offset
/// `y(0, ξ_min) − ξ_min` converts the origin-based labels to the
/// `−∞`-based β.
#[derive(Debug, Clone)]
pub struct BetaTracker {
    params: ModelParams,
    index: usize,
    label: f64,
    offset: f64,
    last_f: Option<(f64, f64)>,
    f_integral: f64,
    max_residual: f64,
    /// `(t, β direct, β from F)` per pushed snapshot.
    pub history: Vec<(f64, f64, f64)>,
}

impl BetaTracker {
    /// `initial` is the `t = 0` state; the probe snaps to the nearest node.
    pub fn new(initial: &LagrangianState, params: &ModelParams, xi_probe: f64) -> Result<Self> {
        let g = initial.grid;
        if !(xi_probe >= g.xi_min && xi_probe <= g.xi_max) {
            return Err(SolverError::InvalidParameter {
                field: "beta_probe",
                reason: format!(
                    "probe ξ = {xi_probe} outside the grid [{}, {}]",
                    g.xi_min, g.xi_max
                ),
            });
        }
        let index = g.nearest_node(xi_probe);
        Ok(Self {
            params: *params,
            index,
            label: g.node(index),
            offset: initial.y[0] - g.xi_min,
            last_f: None,
            f_integral: 0.0,
            max_residual: 0.0,
            history: Vec::new(),
        })
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn probe_label(&self) -> f64 {
        self.label
    }

    pub fn push(&mut self, state: &LagrangianState) -> Result<f64> {
        let tol = Tolerances::default().for_evolution(&state.grid);
        let terms = compute_pg_with(state, &self.params, &tol)?;
        Ok(self.push_with_terms(state, &terms))
    }

    /// Adds a snapshot and returns `|β_direct − β_F|` at its time.
    pub fn push_with_terms(&mut self, state: &LagrangianState, terms: &NonlocalTerms) -> f64 {
        let t = state.t;
        let h = state.grid.d_xi();
        let p = self.index;
        let e = self.params.decay(t);
        let source = self.params.source_at(t);

        let mass: Vec<f64> = state.q.iter().zip(&state.v).map(|(q, v)| q * v).collect();
        let flux: Vec<f64> = (0..state.len())
            .map(|i| {
                let k = state.k[i];
                2.0 * state.w[i] * state.q[i] * (e * k * k - terms.p[i] - source.eval(k))
            })
            .collect();
        let direct = state.y[p] + integral_to(&mass, h, p);
        let f = self.params.transport + e * state.k[p] + integral_to(&flux, h, p);
        if let Some((t_prev, f_prev)) = self.last_f {
            self.f_integral += 0.5 * (t - t_prev) * (f_prev + f);
        }
        self.last_f = Some((t, f));
        let via_f = self.label + self.offset + self.f_integral;
        let r = (direct - via_f).abs();
        self.max_residual = self.max_residual.max(r);
        self.history.push((t, direct, via_f));
        r
    }

    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }
}

/// `max_t |β_direct − β_F|` over stored snapshots (`snapshots[0]` at `t = 0`).
pub fn beta_characteristic_residual(
    snapshots: &[LagrangianState],
    params: &ModelParams,
    xi_probe: f64,
) -> Result<f64> {
    let first = snapshots.first().ok_or_else(|| {
        SolverError::InsufficientSnapshots("β residual needs at least one snapshot".into())
    })?;
    let mut tracker = BetaTracker::new(first, params, xi_probe)?;
    for s in snapshots {
        tracker.push(s)?;
    }
    Ok(tracker.max_residual())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LagrangianGrid;

    #[test]
    fn bump_derivatives_match_differences() {
        let b = TestBump::new(-0.5, 1.0, -2.0, 3.0);
        let (t, x, d) = (0.3, 0.7, 1e-6);
        let (_, pt, px) = b.eval(t, x);
        let ft = (b.eval(t + d, x).0 - b.eval(t - d, x).0) / (2.0 * d);
        let fx = (b.eval(t, x + d).0 - b.eval(t, x - d).0) / (2.0 * d);
        assert!((pt - ft).abs() < 1e-8 && (px - fx).abs() < 1e-8);
        assert_eq!(b.eval(1.0, 0.0).0, 0.0);
        assert_eq!(b.eval(0.25, 0.5).0, 1.0);
    }

    #[test]
    fn bank_respects_the_time_horizon() {
        let bank = default_test_bank(2.0, (-5.0, 5.0));
        assert_eq!(bank.len(), 5);
        assert!(bank
            .iter()
            .all(|b| b.t_hi <= 2.0 && b.t_lo < b.t_hi && b.x_lo < b.x_hi));
        assert!(bank.iter().filter(|b| b.t_lo < 0.0).count() >= 2);
        let extra = random_test_bumps(7, 20, 2.0, (-5.0, 5.0));
        assert!(extra
            .iter()
            .all(|b| b.t_hi <= 2.0 && b.x_lo >= -5.0 && b.x_hi <= 5.0));
        assert_eq!(extra, random_test_bumps(7, 20, 2.0, (-5.0, 5.0)));
    }

    #[test]
    fn zero_solution_has_zero_residuals() {
        let g = LagrangianGrid::new(-6.0, 6.0, 65).unwrap();
        let params = ModelParams::new(0.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        let snaps: Vec<_> = (0..=10)
            .map(|j| {
                let t = 0.1 * j as f64;
                let mut s = LagrangianState::zero(g, t);
                s.y.iter_mut().for_each(|y| *y += t);
                s
            })
            .collect();
        let bank = default_test_bank(1.0, (-4.0, 4.0));
        let r = weak_form_residual(&snaps, &params, &bank).unwrap();
        assert_eq!(r.max(), 0.0);
        assert!(beta_characteristic_residual(&snaps, &params, 0.0).unwrap() < 1e-14);
        assert!(matches!(
            weak_form_residual(&snaps[..1], &params, &bank),
            Err(SolverError::InsufficientSnapshots(_))
        ));
    }

    #[test]
    fn cell_rule_is_exact_for_cubics() {
        let h = 0.25;
        let f: Vec<f64> = (0..9)
            .map(|i| (i as f64 * h).powi(3) - 2.0 * (i as f64 * h))
            .collect();
        let exact = |x: f64| x.powi(4) / 4.0 - x * x;
        for upto in 1..9 {
            let x = upto as f64 * h;
            assert!((integral_to(&f, h, upto) - exact(x)).abs() < 1e-13);
        }
    }
}
