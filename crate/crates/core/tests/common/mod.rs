//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use chsolver::{LagrangianGrid, LagrangianState, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GL6_NODES: [f64; 6] = [
    -0.932_469_514_203_152_1,
    -0.661_209_386_466_264_5,
    -0.238_619_186_083_196_9,
    0.238_619_186_083_196_9,
    0.661_209_386_466_264_5,
    0.932_469_514_203_152_1,
];
pub const GL6_WEIGHTS: [f64; 6] = [
    0.171_324_492_379_170_3,
    0.360_761_573_048_138_6,
    0.467_913_934_572_691_0,
    0.467_913_934_572_691_0,
    0.360_761_573_048_138_6,
    0.171_324_492_379_170_3,
];

/// Smooth random function: a few low Fourier modes on `[-L, L]`.
fn modes(rng: &mut ChaCha8Rng, count: usize, amp: f64) -> Vec<(f64, f64, f64)> {
    (0..count)
        .map(|m| {
            let freq = 0.5 * (m + 1) as f64;
            (
                rng.gen_range(-amp..amp),
                freq,
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect()
}

fn eval(modes: &[(f64, f64, f64)], x: f64) -> f64 {
    modes.iter().map(|(a, f, p)| a * (f * x + p).sin()).sum()
}

/// Random state on the algebraic sheet with `V ≤ 0.9`, `Q > 0`, decaying `K`
/// and `y` the cumulative trapezoid of `Q(1 − V)`.
pub fn random_state(seed: u64, n: usize, half_width: f64, t: f64) -> LagrangianState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = LagrangianGrid::new(-half_width, half_width, n).unwrap();
    let k_modes = modes(&mut rng, 4, 0.6);
    let phi_modes = modes(&mut rng, 3, 0.9);
    let q_modes = modes(&mut rng, 3, 0.3);
    let width = rng.gen_range(1.0..2.5);
    let mut s = LagrangianState::zero(grid, t);
    let phi_max = 2.498_f64; // (1 − cos φ)/2 ≤ 0.9
    for i in 0..n {
        let xi = grid.node(i);
        let env = (-(xi / width).powi(2)).exp();
        s.k[i] = env * (0.5 + eval(&k_modes, xi));
        let phi = (env * eval(&phi_modes, xi) * 2.0).clamp(-phi_max, phi_max);
        s.v[i] = 0.5 * (1.0 - phi.cos());
        s.w[i] = 0.5 * phi.sin();
        s.q[i] = eval(&q_modes, xi).exp();
    }
    let h = grid.d_xi();
    s.y[0] = -half_width;
    for i in 1..n {
        let a = s.q[i - 1] * (1.0 - s.v[i - 1]);
        let b = s.q[i] * (1.0 - s.v[i]);
        s.y[i] = s.y[i - 1] + 0.5 * h * (a + b);
    }
    s
}

pub fn random_params(seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    ModelParams::new(
        rng.gen_range(0.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    )
    .unwrap()
}

/// Convolution integrand `f_i`, coded from the formula.
pub fn oracle_integrand(s: &LagrangianState, p: &ModelParams) -> Vec<f64> {
    let e = (-p.lambda * s.t).exp();
    (0..s.len())
        .map(|i| {
            let k = s.k[i];
            let h = (p.alpha + p.transport) * k
                + p.beta / 3.0 * (-2.0 * p.lambda * s.t).exp() * k.powi(3)
                + p.gamma / 4.0 * (-3.0 * p.lambda * s.t).exp() * k.powi(4);
            (-h + e * k * k) * s.q[i] * (1.0 - s.v[i]) + 0.5 * e * s.q[i] * s.v[i]
        })
        .collect()
}

fn third_difference(f: &[f64], s: usize) -> f64 {
    (f[s + 3] - 3.0 * f[s + 2] + 3.0 * f[s + 1] - f[s]).abs()
}

/// Stencil rule: centered four-point stencil unless a one-sided stencil has a
/// third difference below a quarter of the centered one.
pub fn oracle_stencil(j: usize, f: &[f64]) -> usize {
    let n = f.len();
    let centered = if j == 0 { 0 } else { (j - 1).min(n - 4) };
    let mut best_s = centered;
    let mut best_d = 0.25 * third_difference(f, centered);
    let candidates = [if j >= 2 { Some(j - 2) } else { None }, Some(j)];
    for s in candidates.into_iter().flatten() {
        if s != centered && s + 3 < n && third_difference(f, s) < best_d {
            best_d = third_difference(f, s);
            best_s = s;
        }
    }
    best_s
}

fn lagrange(nodes: [f64; 4], vals: [f64; 4], u: f64) -> f64 {
    let mut out = 0.0;
    for m in 0..4 {
        let mut b = 1.0;
        for l in 0..4 {
            if l != m {
                b *= (u - nodes[l]) / (nodes[m] - nodes[l]);
            }
        }
        out += b * vals[m];
    }
    out
}

/// Direct O(N²) quadrature of `P` and `G`: in each cell `y` and `f` are cubic
/// interpolants and the kernel `½e^{-|y_i − y(η)|}` is sampled at 6 Gauss
/// points.
pub fn oracle_pg(s: &LagrangianState, p: &ModelParams) -> (Vec<f64>, Vec<f64>) {
    let n = s.len();
    let h = s.grid.d_xi();
    let f = oracle_integrand(s, p);
    let mut samples = Vec::with_capacity(n - 1);
    for j in 0..n - 1 {
        let st = oracle_stencil(j, &f);
        let nodes = [st as f64, st as f64 + 1.0, st as f64 + 2.0, st as f64 + 3.0];
        let ys = [s.y[st], s.y[st + 1], s.y[st + 2], s.y[st + 3]];
        let fs = [f[st], f[st + 1], f[st + 2], f[st + 3]];
        let pts: Vec<(f64, f64, f64)> = GL6_NODES
            .iter()
            .zip(GL6_WEIGHTS)
            .map(|(&z, w)| {
                let u = j as f64 + 0.5 * (z + 1.0);
                (lagrange(nodes, ys, u), lagrange(nodes, fs, u), 0.5 * h * w)
            })
            .collect();
        samples.push(pts);
    }
    let mut pp = vec![0.0; n];
    let mut gg = vec![0.0; n];
    for i in 0..n {
        for (j, pts) in samples.iter().enumerate() {
            let sign = if j < i { 1.0 } else { -1.0 };
            for &(yg, fg, wg) in pts {
                let kern = 0.5 * (-(s.y[i] - yg).abs()).exp() * fg * wg;
                pp[i] += kern;
                gg[i] -= sign * kern;
            }
        }
    }
    (pp, gg)
}

/// Right-hand side from the formulas with oracle `P`, `G`.
pub fn oracle_rhs(s: &LagrangianState, p: &ModelParams) -> [Vec<f64>; 5] {
    let (pp, gg) = oracle_pg(s, p);
    let e = (-p.lambda * s.t).exp();
    let n = s.len();
    let mut out: [Vec<f64>; 5] = Default::default();
    for i in 0..n {
        let (k, v, w, q) = (s.k[i], s.v[i], s.w[i], s.q[i]);
        let h = (p.alpha + p.transport) * k
            + p.beta / 3.0 * (-2.0 * p.lambda * s.t).exp() * k.powi(3)
            + p.gamma / 4.0 * (-3.0 * p.lambda * s.t).exp() * k.powi(4);
        let b = e * k * k * (1.0 - v) - h * (1.0 - v) - 0.5 * e * v - pp[i] * (1.0 - v);
        out[0].push(e * k + p.transport);
        out[1].push(-gg[i]);
        out[2].push(2.0 * w * b);
        out[3].push((1.0 - 2.0 * v) * b);
        out[4].push(2.0 * w * q * (0.5 * e + e * k * k - h - pp[i]));
    }
    out
}

/// Generic classical RK4 on the stacked unknowns using [`oracle_rhs`].
pub fn oracle_rk4(s: &LagrangianState, p: &ModelParams, dt: f64) -> LagrangianState {
    let shift = |base: &LagrangianState, d: &[Vec<f64>; 5], c: f64| {
        let mut o = base.clone();
        o.t = base.t + c;
        for i in 0..base.len() {
            o.y[i] += c * d[0][i];
            o.k[i] += c * d[1][i];
            o.v[i] += c * d[2][i];
            o.w[i] += c * d[3][i];
            o.q[i] += c * d[4][i];
        }
        o
    };
    let k1 = oracle_rhs(s, p);
    let k2 = oracle_rhs(&shift(s, &k1, 0.5 * dt), p);
    let k3 = oracle_rhs(&shift(s, &k2, 0.5 * dt), p);
    let k4 = oracle_rhs(&shift(s, &k3, dt), p);
    let mut out = s.clone();
    out.t = s.t + dt;
    let fields: [&mut Vec<f64>; 5] = [&mut out.y, &mut out.k, &mut out.v, &mut out.w, &mut out.q];
    for (c, field) in fields.into_iter().enumerate() {
        for i in 0..s.len() {
            field[i] += dt / 6.0 * (k1[c][i] + 2.0 * k2[c][i] + 2.0 * k3[c][i] + k4[c][i]);
        }
    }
    out
}

/// Composite Simpson rule with `m` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(a: f64, b: f64, m: usize, f: F) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for j in 1..m {
        s += if j % 2 == 1 { 4.0 } else { 2.0 } * f(a + j as f64 * h);
    }
    s * h / 3.0
}

/// Closed forms for the stationary CH peakon `k̄ = e^{-|x|}`.
pub fn peakon_p(x: f64) -> f64 {
    (-x.abs()).exp() - 0.5 * (-2.0 * x.abs()).exp()
}

pub fn peakon_g(x: f64) -> f64 {
    -x.signum() * ((-x.abs()).exp() - (-2.0 * x.abs()).exp())
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
