//! Equation parameters, the source polynomial and the state containers.
//!
//! In the time-weighted variable `k = e^{λt} u` the equation reads
//!
//! ```text
//! k_t + (e^{-λt} k + Γ) k_x = -P_x,
//! P = ½ e^{-|x|} * ( -H(k, t) + e^{-λt} k² + ½ e^{-λt} k_x² ),
//! H(k, t) = (α + Γ) k + (β/3) e^{-2λt} k³ + (γ/4) e^{-3λt} k⁴.
//! ```

use crate::error::{Result, SolverError};

/// The five real coefficients of the equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Dissipation rate λ ≥ 0.
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Transport shift Γ (the coefficient of `u_xxx`).
    pub transport: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, alpha: f64, beta: f64, gamma: f64, transport: f64) -> Result<Self> {
        let params = Self {
            lambda,
            alpha,
            beta,
            gamma,
            transport,
        };
        params.validate()?;
        Ok(params)
    }

    /// λ = α = β = γ = Γ = 0: the classical Camassa–Holm equation.
    pub fn camassa_holm() -> Self {
        Self {
            lambda: 0.0,
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            transport: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("Gamma", self.transport),
        ];
        for (field, value) in fields {
            if !value.is_finite() {
                return Err(SolverError::InvalidParameter {
                    field,
                    reason: format!("must be finite, got {value}"),
                });
            }
        }
        if self.lambda < 0.0 {
            return Err(SolverError::InvalidParameter {
                field: "lambda",
                reason: format!("must be non-negative, got {}", self.lambda),
            });
        }
        Ok(())
    }

    /// e^{-λt}
    #[inline]
    pub fn decay(&self, t: f64) -> f64 {
        (-self.lambda * t).exp()
    }

    /// Coefficients of `H(·, t)` frozen at time `t`.
    #[inline]
    pub fn source_at(&self, t: f64) -> SourceTerm {
        SourceTerm {
            linear: self.alpha + self.transport,
            cubic: self.beta / 3.0 * (-2.0 * self.lambda * t).exp(),
            quartic: self.gamma / 4.0 * (-3.0 * self.lambda * t).exp(),
        }
    }

    /// `H(K, t)`.
    pub fn source_h(&self, k: f64, t: f64) -> f64 {
        self.source_at(t).eval(k)
    }

    /// u = e^{-λt} k
    pub fn u_from_k(&self, k: f64, t: f64) -> f64 {
        k * self.decay(t)
    }

    /// k = e^{λt} u; the exact inverse of [`ModelParams::u_from_k`] up to
    /// rounding of the two exponentials.
    pub fn k_from_u(&self, u: f64, t: f64) -> f64 {
        u / self.decay(t)
    }
}

/// The source polynomial `H(K) = a K + b K³ + c K⁴` at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceTerm {
    pub linear: f64,
    pub cubic: f64,
    pub quartic: f64,
}

impl SourceTerm {
    #[inline]
    pub fn eval(&self, k: f64) -> f64 {
        let k2 = k * k;
        k * (self.linear + k2 * (self.cubic + self.quartic * k))
    }
}

/// Numerical slack used when checking state invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed drift of `W² + V² − V` and of `V` outside `[0, 1]`.
    pub alg: f64,
    /// Allowed decrease of `y` between neighbouring nodes.
    pub mono: f64,
    /// `V > 1 − sing` counts as singular: `k_x` is not reconstructed there.
    pub sing: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            alg: 1e-6,
            mono: 1e-12,
            sing: 1e-6,
        }
    }
}

/// Fraction of a cell width by which neighbouring characteristics may cross
/// during time stepping.
pub const CROSSING_SLACK: f64 = 1e-2;

impl Tolerances {
    /// Tolerances for evolving on `grid`: after wave breaking `y_ξ` vanishes
    /// at isolated labels and the discrete `y` may dip by a truncation-sized
    /// amount there, so `mono` is widened to `CROSSING_SLACK · d_xi`.
    pub fn for_evolution(&self, grid: &LagrangianGrid) -> Self {
        Self {
            mono: self.mono.max(CROSSING_SLACK * grid.d_xi()),
            ..*self
        }
    }
}

/// Uniform grid in the Lagrangian label ξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianGrid {
    pub xi_min: f64,
    pub xi_max: f64,
    pub n_nodes: usize,
}

impl LagrangianGrid {
    pub fn new(xi_min: f64, xi_max: f64, n_nodes: usize) -> Result<Self> {
        if !(xi_min.is_finite() && xi_max.is_finite()) || xi_min >= xi_max {
            return Err(SolverError::InvalidGrid(format!(
                "need finite xi_min < xi_max, got [{xi_min}, {xi_max}]"
            )));
        }
        if n_nodes < 3 {
            return Err(SolverError::InvalidGrid(format!(
                "need at least 3 nodes, got {n_nodes}"
            )));
        }
        Ok(Self {
            xi_min,
            xi_max,
            n_nodes,
        })
    }

    #[inline]
    pub fn d_xi(&self) -> f64 {
        (self.xi_max - self.xi_min) / (self.n_nodes - 1) as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.xi_min + i as f64 * self.d_xi()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| self.node(i)).collect()
    }

    /// Trapezoid weights over the nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.d_xi();
        let mut w = vec![h; self.n_nodes];
        w[0] = 0.5 * h;
        w[self.n_nodes - 1] = 0.5 * h;
        w
    }

    /// Same range with `2 (n − 1) + 1` nodes; every old node is kept.
    pub fn refined(&self) -> Self {
        Self {
            n_nodes: 2 * (self.n_nodes - 1) + 1,
            ..*self
        }
    }

    /// Index of the node nearest to `xi`, clamped to the grid.
    pub fn nearest_node(&self, xi: f64) -> usize {
        let r = ((xi - self.xi_min) / self.d_xi()).round();
        r.clamp(0.0, (self.n_nodes - 1) as f64) as usize
    }
}

/// The unknowns of the semilinear system at one time.
///
/// `y` is the characteristic position, `k` is the solution along it, and
/// `V = k_x²/(1+k_x²)`, `W = k_x/(1+k_x²)`, `Q = (1+k_x²) y_ξ` are evaluated at
/// `x = y`. All arrays hold one entry per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianState {
    pub t: f64,
    pub grid: LagrangianGrid,
    pub y: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub q: Vec<f64>,
}

impl LagrangianState {
    /// `K ≡ V ≡ W ≡ 0`, `Q ≡ 1`, `y = ξ`.
    pub fn zero(grid: LagrangianGrid, t: f64) -> Self {
        let n = grid.n_nodes;
        Self {
            t,
            grid,
            y: grid.nodes(),
            k: vec![0.0; n],
            v: vec![0.0; n],
            w: vec![0.0; n],
            q: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.grid.n_nodes
    }

    pub fn is_empty(&self) -> bool {
        self.grid.n_nodes == 0
    }

    /// `Z = y − ξ − Γ t`.
    pub fn z(&self, params: &ModelParams) -> Vec<f64> {
        self.y
            .iter()
            .enumerate()
            .map(|(i, &y)| y - self.grid.node(i) - params.transport * self.t)
            .collect()
    }

    /// Returns the first `(i, i+1)` where `y` drops by more than `tol`.
    pub fn check_monotone(&self, tol: f64) -> Result<()> {
        for (i, pair) in self.y.windows(2).enumerate() {
            let drop = pair[0] - pair[1];
            if drop > tol || drop.is_nan() {
                return Err(SolverError::NonMonotoneCharacteristic {
                    index: i,
                    next: i + 1,
                    drop,
                });
            }
        }
        Ok(())
    }

    pub fn check_invariants(&self, tol: &Tolerances) -> Result<()> {
        let n = self.grid.n_nodes;
        for (name, arr) in [
            ("y", &self.y),
            ("K", &self.k),
            ("V", &self.v),
            ("W", &self.w),
            ("Q", &self.q),
        ] {
            if arr.len() != n {
                return Err(SolverError::InvalidState(format!(
                    "array {name} has length {} but the grid has {n} nodes",
                    arr.len()
                )));
            }
            if let Some(i) = arr.iter().position(|x| !x.is_finite()) {
                return Err(SolverError::InvalidState(format!(
                    "{name}[{i}] is not finite"
                )));
            }
        }
        for i in 0..n {
            let (v, w, q) = (self.v[i], self.w[i], self.q[i]);
            if v < -tol.alg || v > 1.0 + tol.alg {
                return Err(SolverError::InvalidState(format!(
                    "V[{i}] = {v} outside [0, 1]"
                )));
            }
            if w.abs() > 0.5 + tol.alg {
                return Err(SolverError::InvalidState(format!(
                    "|W[{i}]| = {} exceeds 1/2",
                    w.abs()
                )));
            }
            if q <= 0.0 {
                return Err(SolverError::InvalidState(format!(
                    "Q[{i}] = {q} is not positive"
                )));
            }
            let sheet = w * w + v * v - v;
            if sheet.abs() > tol.alg {
                return Err(SolverError::InvalidState(format!(
                    "W² + V² − V = {sheet:e} at node {i}"
                )));
            }
        }
        self.check_monotone(tol.mono)
    }
}
