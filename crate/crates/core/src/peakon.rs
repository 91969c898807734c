//! Multipeakon solutions `u = Σ pᵢ(t) e^{-|x − qᵢ(t)|}`.
//!
//! With `q₁ < … < qₙ` the amplitudes and positions obey
//!
//! ```text
//! ṗᵢ = pᵢ (aᵢ − bᵢ) − λ pᵢ
//! q̇ᵢ = pᵢ + aᵢ + bᵢ + Γ
//! aᵢ = Σ_{j<i} pⱼ e^{qⱼ − qᵢ},   bᵢ = Σ_{j>i} pⱼ e^{qᵢ − qⱼ}
//! ```
//!
//! The system lives in the `u` variable; `k = e^{λt} u` only at sampling.

use crate::error::{Result, SolverError};
use crate::model::ModelParams;

/// Collision threshold on the smallest gap `q_{i+1} − q_i`.
pub const COLLISION_GAP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PeakonState {
    pub t: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl PeakonState {
    pub fn new(t: f64, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.len() != q.len() || p.is_empty() {
            return Err(SolverError::InvalidState(format!(
                "peakon state needs matching non-empty p and q (got {} and {})",
                p.len(),
                q.len()
            )));
        }
        let s = Self { t, p, q };
        s.check_ordering()?;
        Ok(s)
    }

    pub fn check_ordering(&self) -> Result<()> {
        match self.q.windows(2).position(|w| !(w[1] > w[0])) {
            Some(i) => Err(SolverError::OrderingViolated { index: i + 1 }),
            None => Ok(()),
        }
    }

    pub fn min_gap(&self) -> f64 {
        self.q
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// `‖u‖²_{H¹} = 2 Σᵢⱼ pᵢ pⱼ e^{-|qᵢ − qⱼ|}`
    pub fn energy_u(&self) -> f64 {
        let mut e = 0.0;
        for (pi, qi) in self.p.iter().zip(&self.q) {
            for (pj, qj) in self.p.iter().zip(&self.q) {
                e += 2.0 * pi * pj * (-(qi - qj).abs()).exp();
            }
        }
        e
    }
}

/// `(ṗ, q̇)`.
pub fn peakon_rhs(state: &PeakonState, params: &ModelParams) -> Result<(Vec<f64>, Vec<f64>)> {
    state.check_ordering()?;
    let n = state.p.len();
    let (p, q) = (&state.p, &state.q);
    let mut dp = vec![0.0; n];
    let mut dq = vec![0.0; n];
    for i in 0..n {
        let a: f64 = (0..i).map(|j| p[j] * (q[j] - q[i]).exp()).sum();
        let b: f64 = (i + 1..n).map(|j| p[j] * (q[i] - q[j]).exp()).sum();
        dp[i] = p[i] * (a - b) - params.lambda * p[i];
        dq[i] = p[i] + a + b + params.transport;
    }
    Ok((dp, dq))
}

/// Closed-form single peakon `(p(t), q(t))`.
pub fn single_peakon_exact(t: f64, p0: f64, q0: f64, params: &ModelParams) -> (f64, f64) {
    let lt = params.lambda * t;
    let p = p0 * (-lt).exp();
    // (1 − e^{-λt})/λ, continuous at λ = 0
    let travel = if lt.abs() < 1e-8 {
        t * (1.0 - 0.5 * lt + lt * lt / 6.0)
    } else {
        -(-lt).exp_m1() / params.lambda
    };
    (p, p0 * travel + params.transport * t + q0)
}

/// How a peakon integration ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeakonOutcome {
    Completed,
    /// Two peakons met: the gap between `index − 1` and `index` fell below
    /// [`COLLISION_GAP`] at time `t`.
    CollisionDetected {
        t: f64,
        index: usize,
    },
}

#[derive(Debug, Clone)]
pub struct PeakonTrajectory {
    pub states: Vec<PeakonState>,
    pub outcome: PeakonOutcome,
}

fn rk4_step(state: &PeakonState, params: &ModelParams, dt: f64) -> Option<PeakonState> {
    let shifted = |s: &PeakonState, dp: &[f64], dq: &[f64], h: f64| PeakonState {
        t: s.t + h,
        p: s.p.iter().zip(dp).map(|(a, b)| a + h * b).collect(),
        q: s.q.iter().zip(dq).map(|(a, b)| a + h * b).collect(),
    };
    let (p1, q1) = peakon_rhs(state, params).ok()?;
    let (p2, q2) = peakon_rhs(&shifted(state, &p1, &q1, 0.5 * dt), params).ok()?;
    let (p3, q3) = peakon_rhs(&shifted(state, &p2, &q2, 0.5 * dt), params).ok()?;
    let (p4, q4) = peakon_rhs(&shifted(state, &p3, &q3, dt), params).ok()?;
    let n = state.p.len();
    let mix = |x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| x[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect()
    };
    let next = PeakonState {
        t: state.t + dt,
        p: mix(&state.p, &p1, &p2, &p3, &p4),
        q: mix(&state.q, &q1, &q2, &q3, &q4),
    };
    next.p
        .iter()
        .chain(&next.q)
        .all(|v| v.is_finite())
        .then_some(next)
}

/// Fixed-step RK4 up to `t_end`, recording every step.
///
/// Near a collision the step is halved until the smallest gap drops below
/// [`COLLISION_GAP`] (or the step size underflows), and the run stops there.
pub fn integrate_peakons(
    state0: &PeakonState,
    params: &ModelParams,
    dt: f64,
    t_end: f64,
) -> Result<PeakonTrajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SolverError::InvalidParameter {
            field: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    state0.check_ordering()?;
    let mut states = vec![state0.clone()];
    let mut state = state0.clone();
    let n_steps = if t_end > state0.t {
        ((t_end - state0.t) / dt - 1e-9).ceil() as usize
    } else {
        0
    };
    let collision = |s: &PeakonState| {
        let idx = s.q.windows(2).position(|w| w[1] - w[0] < COLLISION_GAP)?;
        Some(PeakonOutcome::CollisionDetected {
            t: s.t,
            index: idx + 1,
        })
    };

    for step in 1..=n_steps {
        let target = if step == n_steps {
            t_end
        } else {
            state0.t + step as f64 * dt
        };
        let mut h = target - state.t;
        loop {
            match rk4_step(&state, params, h) {
                Some(next) if next.min_gap() >= COLLISION_GAP => {
                    state = next;
                    if state.t >= target - 1e-15 {
                        state.t = target;
                        break;
                    }
                    h = target - state.t;
                }
                Some(next) if next.min_gap() > 0.0 => {
                    // landed inside the collision band
                    let outcome = collision(&next).expect("gap below threshold");
                    states.push(next);
                    return Ok(PeakonTrajectory { states, outcome });
                }
                _ => {
                    h *= 0.5;
                    if h < 1e-15 {
                        let idx = state
                            .q
                            .windows(2)
                            .enumerate()
                            .min_by(|a, b| {
                                (a.1[1] - a.1[0]).partial_cmp(&(b.1[1] - b.1[0])).unwrap()
                            })
                            .map_or(1, |(i, _)| i + 1);
                        return Ok(PeakonTrajectory {
                            outcome: PeakonOutcome::CollisionDetected {
                                t: state.t,
                                index: idx,
                            },
                            states,
                        });
                    }
                }
            }
        }
        states.push(state.clone());
    }
    Ok(PeakonTrajectory {
        states,
        outcome: PeakonOutcome::Completed,
    })
}

/// Which variable to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileVariable {
    U,
    K,
}

/// `u(x) = Σ pᵢ e^{-|x − qᵢ|}`, or `k = e^{λt} u`.
pub fn sample_profile(
    state: &PeakonState,
    x: &[f64],
    variable: ProfileVariable,
    params: &ModelParams,
) -> Vec<f64> {
    let scale = match variable {
        ProfileVariable::U => 1.0,
        ProfileVariable::K => (params.lambda * state.t).exp(),
    };
    x.iter()
        .map(|&xv| {
            scale
                * state
                    .p
                    .iter()
                    .zip(&state.q)
                    .map(|(&p, &q)| p * (-(xv - q).abs()).exp())
                    .sum::<f64>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64, transport: f64) -> ModelParams {
        ModelParams::new(lambda, 0.0, 0.0, 0.0, transport).unwrap()
    }

    #[test]
    fn single_peakon_rhs() {
        let s = PeakonState::new(0.0, vec![0.7], vec![0.3]).unwrap();
        let (dp, dq) = peakon_rhs(&s, &params(0.4, -1.0)).unwrap();
        assert!((dp[0] + 0.4 * 0.7).abs() < 1e-15);
        assert!((dq[0] - (0.7 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn ordering_is_enforced() {
        assert!(matches!(
            PeakonState::new(0.0, vec![1.0, 1.0], vec![1.0, 1.0]),
            Err(SolverError::OrderingViolated { index: 1 })
        ));
        let s = PeakonState {
            t: 0.0,
            p: vec![1.0, 1.0, 1.0],
            q: vec![0.0, 2.0, 1.0],
        };
        assert!(matches!(
            peakon_rhs(&s, &ModelParams::camassa_holm()),
            Err(SolverError::OrderingViolated { index: 2 })
        ));
    }

    #[test]
    fn exact_solution_special_cases() {
        assert_eq!(
            single_peakon_exact(0.0, 0.5, 1.0, &params(1.0, -2.0)),
            (0.5, 1.0)
        );
        let (p, q) = single_peakon_exact(3.0, 1.0, 0.25, &params(0.0, 0.0));
        assert_eq!(p, 1.0);
        assert!((q - 3.25).abs() < 1e-15);
    }

    #[test]
    fn profile_values() {
        let s = PeakonState::new(0.0, vec![0.8], vec![1.5]).unwrap();
        assert_eq!(
            sample_profile(&s, &[1.5], ProfileVariable::U, &ModelParams::camassa_holm()),
            vec![0.8]
        );

        let s = PeakonState::new(0.0, vec![0.6, 0.6], vec![-1.0, 2.0]).unwrap();
        let v = sample_profile(&s, &[0.5], ProfileVariable::U, &ModelParams::camassa_holm())[0];
        assert!((v - 2.0 * 0.6 * (-1.5f64).exp()).abs() < 1e-15);
    }
}
