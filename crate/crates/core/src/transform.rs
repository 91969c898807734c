//! Eulerian data ↔ Lagrangian state.
//!
//! The initial characteristic map solves `ȳ + ∫₀^ȳ k̄_x² dx = ξ`, so that
//! `ȳ(0) = 0`, `|ȳ(ξ)| ≤ |ξ|` and `ȳ` is 1-Lipschitz. The remaining unknowns
//! follow pointwise: `K̄ = k̄∘ȳ`, `V̄ = k̄_x²/(1+k̄_x²)∘ȳ`,
//! `W̄ = k̄_x/(1+k̄_x²)∘ȳ`, `Q̄ = 1`.

use crate::error::{Result, SolverError};
use crate::model::{LagrangianGrid, LagrangianState, Tolerances};
use crate::quadrature::gauss_legendre;

/// Initial profile `k̄` in the Eulerian variable.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `k̄(x) = Σ pᵢ e^{-|x − qᵢ|}`
    PeakonSum { p: Vec<f64>, q: Vec<f64> },
    /// `k̄(x) = a e^{-(x − c)²/s²}`
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Samples `(xⱼ, k̄ⱼ)` on a strictly increasing grid, linearly interpolated
    /// and zero outside.
    Samples { x: Vec<f64>, k: Vec<f64> },
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialData::PeakonSum { p, q } => {
                if p.len() != q.len() || p.is_empty() {
                    return Err(SolverError::NonFiniteInput(format!(
                        "peakon data needs matching non-empty p and q (got {} and {})",
                        p.len(),
                        q.len()
                    )));
                }
                if p.iter().chain(q).any(|v| !v.is_finite()) {
                    return Err(SolverError::NonFiniteInput(
                        "peakon p/q contain NaN or infinity".into(),
                    ));
                }
            }
            InitialData::Gaussian {
                amplitude,
                center,
                width,
            } => {
                if ![*amplitude, *center, *width].iter().all(|v| v.is_finite()) {
                    return Err(SolverError::NonFiniteInput(
                        "gaussian parameters must be finite".into(),
                    ));
                }
                if *width <= 0.0 {
                    return Err(SolverError::NonFiniteInput(format!(
                        "gaussian width must be positive, got {width}"
                    )));
                }
            }
            InitialData::Samples { x, k } => {
                if x.len() != k.len() || x.len() < 3 {
                    return Err(SolverError::NonFiniteInput(
                        "samples need at least 3 (x, k) pairs of equal length".into(),
                    ));
                }
                if let Some(j) = x.iter().chain(k).position(|v| !v.is_finite()) {
                    return Err(SolverError::NonFiniteInput(format!(
                        "sample entry {j} is not finite"
                    )));
                }
                if let Some(j) = x.windows(2).position(|w| w[1] <= w[0]) {
                    return Err(SolverError::NonFiniteInput(format!(
                        "sample grid not strictly increasing at index {}",
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// `k̄(x)`.
    pub fn value(&self, x: f64) -> f64 {
        match self {
            InitialData::PeakonSum { p, q } => p
                .iter()
                .zip(q)
                .map(|(&pi, &qi)| pi * (-(x - qi).abs()).exp())
                .sum(),
            InitialData::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let r = (x - center) / width;
                amplitude * (-r * r).exp()
            }
            InitialData::Samples { x: xs, k } => interpolate(xs, k, x),
        }
    }

    /// `k̄_x(x)`; at a peakon tip the left limit is returned.
    pub fn slope(&self, x: f64) -> f64 {
        match self {
            InitialData::PeakonSum { p, q } => p
                .iter()
                .zip(q)
                .map(|(&pi, &qi)| {
                    let d = x - qi;
                    let sign = if d > 0.0 { 1.0 } else { -1.0 };
                    -sign * pi * (-d.abs()).exp()
                })
                .sum(),
            InitialData::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let r = (x - center) / width;
                -2.0 * r / width * amplitude * (-r * r).exp()
            }
            InitialData::Samples { x: xs, k } => interpolate(xs, &sample_slopes(xs, k), x),
        }
    }

    /// Points where `k̄_x` may jump.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            InitialData::PeakonSum { q, .. } => q.clone(),
            _ => Vec::new(),
        }
    }

    /// Interval outside of which `k̄` is negligible (peakon tails are handled
    /// by grid padding, not included here).
    pub fn core_interval(&self) -> (f64, f64) {
        match self {
            InitialData::PeakonSum { q, .. } => {
                let lo = q.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
            InitialData::Gaussian { center, width, .. } => {
                (center - 3.0 * width, center + 3.0 * width)
            }
            InitialData::Samples { x, .. } => (x[0], x[x.len() - 1]),
        }
    }

    /// `∫ (k̄² + k̄_x²) dx`.
    pub fn energy(&self) -> f64 {
        match self {
            InitialData::PeakonSum { p, q } => {
                let mut e = 0.0;
                for (pi, qi) in p.iter().zip(q) {
                    for (pj, qj) in p.iter().zip(q) {
                        e += 2.0 * pi * pj * (-(qi - qj).abs()).exp();
                    }
                }
                e
            }
            InitialData::Gaussian {
                amplitude, width, ..
            } => {
                // ∫ a² e^{-2r²} (1 + 4r²/s²) dx with x = s r
                let base = amplitude * amplitude * width * (std::f64::consts::PI / 2.0).sqrt();
                base * (1.0 + 1.0 / (width * width))
            }
            InitialData::Samples { x, k } => {
                let slopes = sample_slopes(x, k);
                x.windows(2)
                    .enumerate()
                    .map(|(j, w)| {
                        let a = k[j] * k[j] + slopes[j] * slopes[j];
                        let b = k[j + 1] * k[j + 1] + slopes[j + 1] * slopes[j + 1];
                        0.5 * (a + b) * (w[1] - w[0])
                    })
                    .sum()
            }
        }
    }
}

fn interpolate(xs: &[f64], vals: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x < xs[0] || x > xs[n - 1] {
        return 0.0;
    }
    let j = xs.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
    let theta = (x - xs[j]) / (xs[j + 1] - xs[j]);
    vals[j] + theta * (vals[j + 1] - vals[j])
}

/// Centered differences on a nonuniform grid, one-sided at the ends.
fn sample_slopes(x: &[f64], k: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut s = vec![0.0; n];
    s[0] = (k[1] - k[0]) / (x[1] - x[0]);
    s[n - 1] = (k[n - 1] - k[n - 2]) / (x[n - 1] - x[n - 2]);
    for j in 1..n - 1 {
        s[j] = (k[j + 1] - k[j - 1]) / (x[j + 1] - x[j - 1]);
    }
    s
}

/// Cumulative `Φ(x) = x + ∫₀ˣ k̄_x²` tabulated on a breakpoint-aligned grid.
struct CharacteristicMap<'a> {
    data: &'a InitialData,
    x: Vec<f64>,
    phi: Vec<f64>,
    /// Piecewise-linear data: Φ is linear interpolation of the table.
    linear: bool,
}

impl<'a> CharacteristicMap<'a> {
    fn analytic(data: &'a InitialData, lo: f64, hi: f64, max_cell: f64) -> Self {
        let mut knots = vec![lo, hi, 0.0];
        knots.extend(data.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.dedup();
        let mut x = Vec::new();
        for pair in knots.windows(2) {
            let m = ((pair[1] - pair[0]) / max_cell).ceil().max(1.0) as usize;
            for j in 0..m {
                x.push(pair[0] + (pair[1] - pair[0]) * j as f64 / m as f64);
            }
        }
        x.push(hi);
        let origin = x.iter().position(|&v| v == 0.0).expect("0 is a knot");
        let mut phi = vec![0.0; x.len()];
        for j in origin + 1..x.len() {
            phi[j] = phi[j - 1] + (x[j] - x[j - 1]) + kx2_integral(data, x[j - 1], x[j]);
        }
        for j in (0..origin).rev() {
            phi[j] = phi[j + 1] - (x[j + 1] - x[j]) - kx2_integral(data, x[j], x[j + 1]);
        }
        Self {
            data,
            x,
            phi,
            linear: false,
        }
    }

    fn sampled(data: &'a InitialData, xs: &[f64], k: &[f64]) -> Self {
        let slopes = sample_slopes(xs, k);
        let mut cum = vec![0.0; xs.len()];
        for j in 1..xs.len() {
            let dx = xs[j] - xs[j - 1];
            cum[j] = cum[j - 1] + dx + 0.5 * dx * (slopes[j - 1].powi(2) + slopes[j].powi(2));
        }
        // shift so that Φ(0) = 0; outside the samples k̄ ≡ 0 and Φ has slope 1
        let at_zero = if 0.0 < xs[0] {
            cum[0] - xs[0]
        } else if 0.0 > xs[xs.len() - 1] {
            cum[xs.len() - 1] - xs[xs.len() - 1]
        } else {
            interpolate(xs, &cum, 0.0)
        };
        let phi = cum.iter().map(|c| c - at_zero).collect();
        Self {
            data,
            x: xs.to_vec(),
            phi,
            linear: true,
        }
    }

    /// Solves `Φ(ȳ) = ξ`.
    fn invert(&self, xi: f64) -> Result<f64> {
        let n = self.x.len();
        if xi < self.phi[0] || xi > self.phi[n - 1] {
            if self.linear {
                return Err(SolverError::GridTooSmall(format!(
                    "ξ = {xi} is not reached by the sampled map (range [{}, {}])",
                    self.phi[0],
                    self.phi[n - 1]
                )));
            }
            // Φ(x) = x on the far side of a finite table only if the data has
            // vanished; treat it as a sizing error otherwise.
            return Err(SolverError::GridTooSmall(format!(
                "ξ = {xi} outside the tabulated map"
            )));
        }
        let j = self.phi.partition_point(|&p| p <= xi).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.x[j], self.x[j + 1]);
        let (p0, p1) = (self.phi[j], self.phi[j + 1]);
        if self.linear || p1 == p0 {
            return Ok(if p1 > p0 {
                x0 + (xi - p0) / (p1 - p0) * (x1 - x0)
            } else {
                x0
            });
        }
        // Safeguarded Newton on Φ(x) − ξ; Φ' = 1 + k̄_x² ≥ 1.
        let (mut a, mut b) = (x0, x1);
        let mut x = x0 + (xi - p0) / (p1 - p0) * (x1 - x0);
        for _ in 0..100 {
            let residual = p0 + (x - x0) + kx2_integral(self.data, x0, x) - xi;
            if residual > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let slope = 1.0 + self.data.slope(x).powi(2);
            let mut next = x - residual / slope;
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - x).abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs())
                || b - a <= f64::EPSILON * (1.0 + x.abs())
            {
                return Ok(next);
            }
            x = next;
        }
        Ok(x)
    }
}

fn kx2_integral(data: &InitialData, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    gauss_legendre(a, b, |x| data.slope(x).powi(2))
}

/// `Φ(x) = x + ∫₀ˣ k̄_x² dx`: the label carried by the characteristic that
/// starts at `x`.
pub fn characteristic_label(data: &InitialData, x: f64) -> Result<f64> {
    data.validate()?;
    if !x.is_finite() {
        return Err(SolverError::NonFiniteInput(format!(
            "label requested at x = {x}"
        )));
    }
    if let InitialData::Samples { x: xs, k } = data {
        let map = CharacteristicMap::sampled(data, xs, k);
        let n = xs.len();
        return Ok(if x < xs[0] {
            map.phi[0] - (xs[0] - x)
        } else if x > xs[n - 1] {
            map.phi[n - 1] + (x - xs[n - 1])
        } else {
            interpolate(xs, &map.phi, x)
        });
    }
    let (lo, hi) = if x < 0.0 { (x, 0.0) } else { (0.0, x) };
    let mut knots = vec![lo, hi];
    knots.extend(data.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut mass = 0.0;
    for pair in knots.windows(2) {
        let m = ((pair[1] - pair[0]) / 0.05).ceil().max(1.0) as usize;
        let w = (pair[1] - pair[0]) / m as f64;
        for j in 0..m {
            mass += kx2_integral(data, pair[0] + j as f64 * w, pair[0] + (j + 1) as f64 * w);
        }
    }
    Ok(if x < 0.0 { x - mass } else { x + mass })
}

/// Builds the `t = 0` Lagrangian state for `data` on `grid`.
pub fn lagrangianize(data: &InitialData, grid: &LagrangianGrid) -> Result<LagrangianState> {
    data.validate()?;
    let map = match data {
        InitialData::Samples { x, k } => CharacteristicMap::sampled(data, x, k),
        _ => {
            // ȳ(ξ) lies between 0 and ξ
            let lo = grid.xi_min.min(0.0);
            let hi = grid.xi_max.max(0.0);
            let max_cell = (grid.d_xi() / 4.0).min(0.05);
            CharacteristicMap::analytic(data, lo, hi, max_cell)
        }
    };
    let n = grid.n_nodes;
    let mut state = LagrangianState::zero(*grid, 0.0);
    for i in 0..n {
        let y = map.invert(grid.node(i))?;
        let kx = data.slope(y);
        let denom = 1.0 + kx * kx;
        state.y[i] = y;
        state.k[i] = data.value(y);
        state.v[i] = kx * kx / denom;
        state.w[i] = kx / denom;
        state.q[i] = 1.0;
    }
    Ok(state)
}

/// Eulerian samples reconstructed from a Lagrangian state.
///
/// `kx[i]` and `energy_density[i]` are `None` where the nearest node is
/// singular (`V ≥ 1 − eps`).
#[derive(Debug, Clone, PartialEq)]
pub struct EulerianField {
    pub t: f64,
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    pub kx: Vec<Option<f64>>,
    pub energy_density: Vec<Option<f64>>,
}

impl EulerianField {
    /// Trapezoid `∫ (k² + k_x²) dx`, skipping cells with an undefined endpoint.
    pub fn energy(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.energy_density.windows(2))
            .filter_map(|(xw, ew)| match (ew[0], ew[1]) {
                (Some(a), Some(b)) => Some(0.5 * (a + b) * (xw[1] - xw[0])),
                _ => None,
            })
            .sum()
    }

    pub fn singular_count(&self) -> usize {
        self.kx.iter().filter(|v| v.is_none()).count()
    }
}

pub fn eulerianize(state: &LagrangianState, x_query: &[f64]) -> Result<EulerianField> {
    eulerianize_with(state, x_query, &Tolerances::default())
}

pub fn eulerianize_with(
    state: &LagrangianState,
    x_query: &[f64],
    tol: &Tolerances,
) -> Result<EulerianField> {
    state.check_monotone(tol.mono)?;
    if let Some(j) = x_query.windows(2).position(|w| w[1] <= w[0]) {
        return Err(SolverError::InvalidGrid(format!(
            "query grid not strictly increasing at index {}",
            j + 1
        )));
    }
    let n = state.len();
    let y = &state.y;
    let slope_at = |i: usize| {
        let v = state.v[i];
        if v < 1.0 - tol.sing {
            Some(state.w[i] / (1.0 - v))
        } else {
            None
        }
    };
    let mut k = Vec::with_capacity(x_query.len());
    let mut kx = Vec::with_capacity(x_query.len());
    for &x in x_query {
        if x < y[0] || x > y[n - 1] {
            k.push(0.0);
            kx.push(Some(0.0));
            continue;
        }
        let j = y.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        let dy = y[j + 1] - y[j];
        let (value, nearest) = if dy > 0.0 {
            let theta = ((x - y[j]) / dy).clamp(0.0, 1.0);
            (
                state.k[j] + theta * (state.k[j + 1] - state.k[j]),
                if theta < 0.5 { j } else { j + 1 },
            )
        } else {
            (state.k[j], j)
        };
        k.push(value);
        kx.push(slope_at(nearest));
    }
    let energy_density = k
        .iter()
        .zip(&kx)
        .map(|(&k, d)| d.map(|d| k * k + d * d))
        .collect();
    Ok(EulerianField {
        t: state.t,
        x: x_query.to_vec(),
        k,
        kx,
        energy_density,
    })
}

/// Trapezoid `Ẽ = ∫ (K² Q (1 − V) + Q V) dξ`.
pub fn energy_lagrangian(state: &LagrangianState) -> f64 {
    let n = state.len();
    let h = state.grid.d_xi();
    (0..n)
        .map(|i| {
            let wgt = if i == 0 || i == n - 1 { 0.5 * h } else { h };
            let (k, v, q) = (state.k[i], state.v[i], state.q[i]);
            wgt * (k * k * q * (1.0 - v) + q * v)
        })
        .sum()
}

/// `∫ (k² + k_x²) dx` of the piecewise-linear profile through the points
/// `(y_i, K_i)`.
///
/// On a cell of width `Δy > 0` the slope is `ΔK/Δy`, so the cell contributes
/// `Δy (K_i² + K_i K_{i+1} + K_{i+1}²)/3 + ΔK²/Δy`. Collapsed cells (`Δy ≤ 0`)
/// carry no Eulerian length and are skipped.
pub fn energy_eulerian_on_nodes(state: &LagrangianState, tol: &Tolerances) -> Result<f64> {
    state.check_monotone(tol.mono)?;
    let total = state
        .y
        .windows(2)
        .zip(state.k.windows(2))
        .filter(|(y, _)| y[1] > y[0])
        .map(|(y, k)| {
            let dy = y[1] - y[0];
            let dk = k[1] - k[0];
            dy * (k[0] * k[0] + k[0] * k[1] + k[1] * k[1]) / 3.0 + dk * dk / dy
        })
        .sum();
    Ok(total)
}
