//! The nonlocal terms `P` and `G = P_x ∘ y` in Lagrangian form.
//!
//! ```text
//! P(ξ) =  ½ ∫ e^{-|y(ξ) − y(η)|} f(η) dη
//! G(ξ) = −½ ∫ sgn(ξ − η) e^{-|y(ξ) − y(η)|} f(η) dη
//! f    = (−H(K) + e^{-λt} K²) Q(1 − V) + ½ e^{-λt} Q V
//! ```
//!
//! Since `y` is nondecreasing, `e^{-|y_i − y_j|}` factorizes across cells and
//! both integrals reduce to one left-to-right and one right-to-left recurrence.
//! Inside each cell `y` and `f` are replaced by their cubic interpolants and
//! the (smooth) cell integrand is integrated by Gauss–Legendre; the kink of
//! the kernel only ever sits at a cell endpoint.

use crate::error::{Result, SolverError};
use crate::model::{LagrangianState, ModelParams, Tolerances};
use crate::quadrature::{GL6_NODES, GL6_WEIGHTS};

#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalTerms {
    pub p: Vec<f64>,
    pub g: Vec<f64>,
}

/// Lagrangian integrand `f_i` of the convolution.
pub fn integrand(state: &LagrangianState, params: &ModelParams) -> Vec<f64> {
    let decay = params.decay(state.t);
    let source = params.source_at(state.t);
    state
        .k
        .iter()
        .zip(&state.v)
        .zip(&state.q)
        .map(|((&k, &v), &q)| {
            (decay * k * k - source.eval(k)) * q * (1.0 - v) + 0.5 * decay * q * v
        })
        .collect()
}

/// Cubic Lagrange basis on the four stencil nodes `s..s+4`, evaluated at the
/// Gauss points of cell `[s + offset, s + offset + 1]`.
pub(crate) fn cell_basis(offset: usize) -> [[f64; 4]; 6] {
    let mut out = [[0.0; 4]; 6];
    for (g, &z) in GL6_NODES.iter().enumerate() {
        let u = offset as f64 + 0.5 * (z + 1.0);
        for (m, slot) in out[g].iter_mut().enumerate() {
            *slot = (0..4)
                .filter(|&l| l != m)
                .map(|l| (u - l as f64) / (m as f64 - l as f64))
                .product();
        }
    }
    out
}

/// A one-sided stencil replaces the centered one only when its third
/// difference is smaller by this factor.
const ONE_SIDED_PREFERENCE: f64 = 0.25;

/// First node of the four-point stencil used for cell `j`.
///
/// The centered stencil is kept unless a one-sided one is much smoother in
/// `f`. Next to a jump of `f` this picks the stencil lying on the smooth side,
/// while the cell containing the jump keeps the symmetric stencil.
#[inline]
pub(crate) fn stencil_start(j: usize, f: &[f64]) -> usize {
    let n = f.len();
    let centered = j.saturating_sub(1).min(n - 4);
    let third = |s: usize| (f[s + 3] - 3.0 * f[s + 2] + 3.0 * f[s + 1] - f[s]).abs();
    let reference = third(centered);
    let mut best = (ONE_SIDED_PREFERENCE * reference, centered);
    for s in [j.wrapping_sub(2), j] {
        if s != centered && s <= j && s + 3 < n {
            let d = third(s);
            if d < best.0 {
                best = (d, s);
            }
        }
    }
    best.1
}

/// Interpolated `(y, f)` at the Gauss points of every cell.
pub(crate) fn gauss_samples(y: &[f64], f: &[f64]) -> Vec<[(f64, f64); 6]> {
    let n = y.len();
    let bases = [cell_basis(0), cell_basis(1), cell_basis(2)];
    (0..n - 1)
        .map(|j| {
            let s = stencil_start(j, f);
            let basis = &bases[j - s];
            let mut pts = [(0.0, 0.0); 6];
            for (g, pt) in pts.iter_mut().enumerate() {
                let b = &basis[g];
                pt.0 = b[0] * y[s] + b[1] * y[s + 1] + b[2] * y[s + 2] + b[3] * y[s + 3];
                pt.1 = b[0] * f[s] + b[1] * f[s + 1] + b[2] * f[s + 2] + b[3] * f[s + 3];
            }
            pts
        })
        .collect()
}

/// Per-cell data for the scans.
#[derive(Debug, Clone, Copy)]
struct Cell {
    /// `e^{-(y_{j+1} − y_j)}`
    transfer: f64,
    /// `∫_cell e^{-(y_{j+1} − y(η))} f dη`, seen from the right endpoint
    to_right: f64,
    /// `∫_cell e^{-(y(η) − y_j)} f dη`, seen from the left endpoint
    to_left: f64,
}

fn cells(y: &[f64], f: &[f64], h: f64, tol_mono: f64) -> Result<Vec<Cell>> {
    if y.len() < 4 {
        return Err(SolverError::InvalidGrid(format!(
            "nonlocal terms need at least 4 nodes, got {}",
            y.len()
        )));
    }
    let samples = gauss_samples(y, f);
    y.windows(2)
        .zip(samples)
        .enumerate()
        .map(|(j, (pair, pts))| {
            let delta = pair[1] - pair[0];
            if delta < -tol_mono || delta.is_nan() {
                return Err(SolverError::NonMonotoneCharacteristic {
                    index: j,
                    next: j + 1,
                    drop: -delta,
                });
            }
            let (mut to_right, mut to_left) = (0.0, 0.0);
            for (&(yg, fg), &wg) in pts.iter().zip(GL6_WEIGHTS.iter()) {
                to_right += wg * (-(pair[1] - yg).max(0.0)).exp() * fg;
                to_left += wg * (-(yg - pair[0]).max(0.0)).exp() * fg;
            }
            Ok(Cell {
                transfer: (-delta.max(0.0)).exp(),
                to_right: 0.5 * h * to_right,
                to_left: 0.5 * h * to_left,
            })
        })
        .collect()
}

/// Evaluates `P` and `G` at every node in O(N).
pub fn compute_pg(state: &LagrangianState, params: &ModelParams) -> Result<NonlocalTerms> {
    compute_pg_with(state, params, &Tolerances::default())
}

pub fn compute_pg_with(
    state: &LagrangianState,
    params: &ModelParams,
    tol: &Tolerances,
) -> Result<NonlocalTerms> {
    let f = integrand(state, params);
    let cells = cells(&state.y, &f, state.grid.d_xi(), tol.mono)?;
    Ok(scan(&cells))
}

fn scan(cells: &[Cell]) -> NonlocalTerms {
    let n = cells.len() + 1;
    // left[i] = ∫_{η<ξ_i} e^{-(y_i − y(η))} f dη
    let mut left = vec![0.0; n];
    for i in 1..n {
        let c = cells[i - 1];
        left[i] = c.transfer * left[i - 1] + c.to_right;
    }
    // right[i] = ∫_{η>ξ_i} e^{-(y(η) − y_i)} f dη
    let mut right = vec![0.0; n];
    for i in (0..n - 1).rev() {
        let c = cells[i];
        right[i] = c.transfer * right[i + 1] + c.to_left;
    }
    let p = left
        .iter()
        .zip(&right)
        .map(|(l, r)| 0.5 * (l + r))
        .collect();
    let g = left
        .iter()
        .zip(&right)
        .map(|(l, r)| 0.5 * (r - l))
        .collect();
    NonlocalTerms { p, g }
}

/// Pointwise residuals of `P_ξ = G y_ξ` and `G_ξ = −f + P y_ξ` at interior
/// nodes, using centered differences and `y_ξ = Q(1 − V)`.
///
/// Entries `0` and `n − 1` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeResidualProfile {
    pub p: Vec<f64>,
    pub g: Vec<f64>,
}

impl DerivativeResidualProfile {
    /// Max over interior nodes `i` with `keep(i)`.
    pub fn max_where<F: Fn(usize) -> bool>(&self, keep: F) -> (f64, f64) {
        let n = self.p.len();
        (1..n.saturating_sub(1))
            .filter(|&i| keep(i))
            .fold((0.0_f64, 0.0_f64), |(rp, rg), i| {
                (rp.max(self.p[i].abs()), rg.max(self.g[i].abs()))
            })
    }
}

pub fn derivative_residual_profile(
    state: &LagrangianState,
    params: &ModelParams,
    terms: &NonlocalTerms,
) -> DerivativeResidualProfile {
    let n = state.len();
    let h = state.grid.d_xi();
    let f = integrand(state, params);
    let mut rp = vec![0.0; n];
    let mut rg = vec![0.0; n];
    for i in 1..n - 1 {
        let y_xi = state.q[i] * (1.0 - state.v[i]);
        let dp = (terms.p[i + 1] - terms.p[i - 1]) / (2.0 * h);
        let dg = (terms.g[i + 1] - terms.g[i - 1]) / (2.0 * h);
        rp[i] = dp - terms.g[i] * y_xi;
        rg[i] = dg - (-f[i] + terms.p[i] * y_xi);
    }
    DerivativeResidualProfile { p: rp, g: rg }
}

/// `(r_P, r_G)`: max-norm residuals of the derivative identities over all
/// interior nodes.
pub fn derivative_residuals(
    state: &LagrangianState,
    params: &ModelParams,
    terms: &NonlocalTerms,
) -> (f64, f64) {
    derivative_residual_profile(state, params, terms).max_where(|_| true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LagrangianGrid;

    fn zero_state() -> LagrangianState {
        LagrangianState::zero(LagrangianGrid::new(-4.0, 4.0, 41).unwrap(), 0.3)
    }

    #[test]
    fn integrand_of_zero_state_vanishes() {
        let s = zero_state();
        let p = ModelParams::new(0.5, 1.0, 2.0, 3.0, 4.0).unwrap();
        assert!(integrand(&s, &p).iter().all(|&f| f == 0.0));
    }

    #[test]
    fn integrand_single_node_values() {
        let mut s = zero_state();
        s.k[3] = 1.0;
        s.v[3] = 0.5;
        s.w[3] = 0.5;
        s.q[3] = 2.0;
        let f = integrand(&s, &ModelParams::camassa_holm());
        assert!((f[3] - 1.5).abs() < 1e-15);

        // V = 1 leaves only the ½ e^{-λt} Q term.
        let p = ModelParams::new(0.7, 1.0, 1.0, 1.0, 1.0).unwrap();
        let mut s = zero_state();
        s.k[5] = 2.0;
        s.v[5] = 1.0;
        s.q[5] = 3.0;
        let f = integrand(&s, &p);
        assert!((f[5] - 0.5 * p.decay(s.t) * 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_state_has_zero_terms_and_residuals() {
        let s = zero_state();
        let p = ModelParams::new(0.5, 1.0, 2.0, 3.0, 4.0).unwrap();
        let t = compute_pg(&s, &p).unwrap();
        assert!(t.p.iter().chain(&t.g).all(|&x| x == 0.0));
        assert_eq!(derivative_residuals(&s, &p, &t), (0.0, 0.0));
    }

    #[test]
    fn decreasing_characteristics_are_rejected() {
        let mut s = zero_state();
        s.y[10] = s.y[11] + 1e-3;
        let err = compute_pg(&s, &ModelParams::camassa_holm()).unwrap_err();
        assert!(matches!(
            err,
            SolverError::NonMonotoneCharacteristic {
                index: 10,
                next: 11,
                ..
            }
        ));
    }

    #[test]
    fn transfer_factors_never_exceed_one() {
        let mut s = zero_state();
        // flat plateau plus rounding-level inversions
        for i in 10..20 {
            s.y[i] = 1.0;
        }
        s.y[15] = 1.0 - 5e-13;
        for i in 20..41 {
            s.y[i] = 1.0 + (i - 19) as f64 * 0.3;
        }
        for i in 0..10 {
            s.y[i] = -3.0 + i as f64 * 0.1;
        }
        let f = integrand(&s, &ModelParams::camassa_holm());
        let cells = cells(&s.y, &f, s.grid.d_xi(), Tolerances::default().mono).unwrap();
        assert!(cells.iter().all(|c| c.transfer > 0.0 && c.transfer <= 1.0));
    }

    #[test]
    fn symmetric_state_gives_even_p_and_odd_g() {
        let g = LagrangianGrid::new(-5.0, 5.0, 201).unwrap();
        let mut s = LagrangianState::zero(g, 0.0);
        let n = g.n_nodes;
        for i in 0..n {
            let xi = g.node(i);
            let kx = 0.8 * (-xi * xi).exp() * xi; // odd slope, even V
            s.k[i] = (-xi * xi).exp();
            s.v[i] = kx * kx / (1.0 + kx * kx);
            s.w[i] = kx / (1.0 + kx * kx);
            s.q[i] = 1.0 + 0.2 * (-xi * xi).exp();
        }
        // y odd in ξ
        for i in 0..n {
            let xi = g.node(i);
            s.y[i] = xi - 0.3 * (xi).tanh();
        }
        for i in 0..n / 2 {
            s.y[n - 1 - i] = -s.y[i];
        }
        s.y[n / 2] = 0.0;
        let t = compute_pg(&s, &ModelParams::camassa_holm()).unwrap();
        for i in 0..n {
            assert!((t.p[i] - t.p[n - 1 - i]).abs() < 1e-12);
            assert!((t.g[i] + t.g[n - 1 - i]).abs() < 1e-12);
        }
        assert!(t.g[n / 2].abs() < 1e-12);
    }
}
