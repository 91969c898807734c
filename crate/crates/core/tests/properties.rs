//! Structural properties checked on randomly generated inputs.

mod common;

use chsolver::evolve::{identity_residuals, rhs, run_from};
use chsolver::peakon::peakon_rhs;
use chsolver::transform::energy_lagrangian;
use chsolver::{
    compute_pg, lagrangianize, InitialData, LagrangianGrid, ModelParams, PeakonState, StepControls,
};
use common::*;
use proptest::prelude::*;

fn envelope(e: f64) -> f64 {
    10.0 * (e.sqrt() + e + e.powf(1.5) + e * e)
}

fn gaussian_sum() -> impl Strategy<Value = InitialData> {
    prop::collection::vec((-1.5..1.5f64, -3.0..3.0f64, 0.4..2.0f64), 1..4).prop_map(|bumps| {
        // a sum of gaussians sampled densely enough to be exact for the tests
        let x: Vec<f64> = (0..6001)
            .map(|j| -15.0 + 30.0 * j as f64 / 6000.0)
            .collect();
        let k = x
            .iter()
            .map(|&xv| {
                bumps
                    .iter()
                    .map(|(a, c, s)| a * (-((xv - c) / s).powi(2)).exp())
                    .sum()
            })
            .collect();
        InitialData::Samples { x, k }
    })
}

fn peakon_sum() -> impl Strategy<Value = InitialData> {
    prop::collection::vec((-1.5..1.5f64, -4.0..4.0f64), 1..4).prop_map(|pq| {
        InitialData::PeakonSum {
            p: pq.iter().map(|v| v.0).collect(),
            q: pq.iter().map(|v| v.1).collect(),
        }
    })
}

fn any_data() -> impl Strategy<Value = InitialData> {
    prop_oneof![
        peakon_sum(),
        (-2.0..2.0f64, -2.0..2.0f64, 0.3..3.0f64).prop_map(|(a, c, s)| InitialData::Gaussian {
            amplitude: a,
            center: c,
            width: s,
        }),
    ]
}

proptest! {
    #[test]
    fn source_is_linear_without_polynomial_terms(
        k in -10.0..10.0f64, a in -5.0..5.0f64, t in 0.0..5.0f64,
        lambda in 0.0..2.0f64, alpha in -3.0..3.0f64, transport in -3.0..3.0f64,
    ) {
        let p = ModelParams::new(lambda, alpha, 0.0, 0.0, transport).unwrap();
        let lhs = p.source_h(a * k, t);
        let rhs = a * p.source_h(k, t);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn source_is_autonomous_without_dissipation(
        k in -10.0..10.0f64, t1 in 0.0..50.0f64, t2 in 0.0..50.0f64,
        alpha in -3.0..3.0f64, beta in -3.0..3.0f64, gamma in -3.0..3.0f64,
    ) {
        let p = ModelParams::new(0.0, alpha, beta, gamma, 0.5).unwrap();
        prop_assert_eq!(p.source_h(k, t1), p.source_h(k, t2));
    }

    #[test]
    fn variable_change_round_trips(k in -1e3..1e3f64, t in 0.0..20.0f64, lambda in 0.0..3.0f64) {
        let p = ModelParams::new(lambda, 0.0, 0.0, 0.0, 0.0).unwrap();
        let back = p.k_from_u(p.u_from_k(k, t), t);
        prop_assert!((back - k).abs() <= 4.0 * f64::EPSILON * k.abs());
    }

    #[test]
    fn rhs_is_tangent_to_the_sheet(seed in any::<u64>(), t in 0.0..3.0f64) {
        let s = random_state(seed, 64, 5.0, t);
        let d = rhs(&s, &random_params(seed)).unwrap();
        for i in 0..s.len() {
            let r = 2.0 * s.w[i] * d.dw[i] + 2.0 * s.v[i] * d.dv[i] - d.dv[i];
            prop_assert!(r.abs() <= 1e-12, "node {}: {:e}", i, r);
        }
    }

    #[test]
    fn nonnegative_integrand_gives_nonnegative_p(
        seed in any::<u64>(), lambda in 0.0..1.0f64, a in -1.0..0.0f64, t in 0.0..2.0f64,
    ) {
        let mut s = random_state(seed, 96, 6.0, t);
        s.k.iter_mut().for_each(|k| *k = k.abs());
        let params = ModelParams::new(lambda, a, 0.0, 0.0, 0.0).unwrap();
        let terms = compute_pg(&s, &params).unwrap();
        for i in 0..s.len() {
            prop_assert!(terms.p[i] >= 0.0, "P[{}] = {:e}", i, terms.p[i]);
            prop_assert!(terms.g[i].abs() <= terms.p[i] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn nonlocal_terms_stay_in_energy_envelope(seed in any::<u64>()) {
        let s = random_state(seed, 96, 6.0, 0.0);
        let params = ModelParams::camassa_holm();
        let terms = compute_pg(&s, &params).unwrap();
        let bound = envelope(energy_lagrangian(&s));
        prop_assert!(max_abs(terms.p.iter().cloned()) <= bound);
        prop_assert!(max_abs(terms.g.iter().cloned()) <= bound);
    }

    #[test]
    fn initial_map_is_increasing_and_one_lipschitz(data in any_data()) {
        let grid = LagrangianGrid::new(-12.0, 12.0, 801).unwrap();
        let s = lagrangianize(&data, &grid).unwrap();
        let h = grid.d_xi();
        for w in s.y.windows(2) {
            prop_assert!(w[1] > w[0]);
            prop_assert!(w[1] - w[0] <= h * (1.0 + 1e-12));
        }
        for i in 0..s.len() {
            let alg = s.w[i] * s.w[i] + s.v[i] * s.v[i] - s.v[i];
            prop_assert!(alg.abs() <= 1e-14);
            prop_assert!(s.q[i] == 1.0);
        }
    }

    #[test]
    fn initial_identities_hold_to_second_order(
        a in -2.0..2.0f64, c in -2.0..2.0f64, width in 0.5..3.0f64,
    ) {
        let data = InitialData::Gaussian { amplitude: a, center: c, width };
        let res = |n: usize| {
            let grid = LagrangianGrid::new(-15.0, 15.0, n).unwrap();
            let s = lagrangianize(&data, &grid).unwrap();
            let (ry, rk) = identity_residuals(&s, grid.d_xi(), |_| true);
            ry.max(rk)
        };
        let (coarse, fine) = (res(2001), res(4001));
        prop_assert!(fine <= 1e-12 || coarse / fine >= 3.5, "{:e} {:e}", coarse, fine);
    }

    #[test]
    fn peakon_pair_rhs_is_antisymmetric(c in -3.0..3.0f64, d in 0.01..5.0f64, lambda in 0.0..2.0f64) {
        let params = ModelParams::new(lambda, 0.0, 0.0, 0.0, 0.0).unwrap();
        let s = PeakonState::new(0.0, vec![c, -c], vec![-d, d]).unwrap();
        let (dp, dq) = peakon_rhs(&s, &params).unwrap();
        prop_assert!((dp[0] + dp[1]).abs() <= 1e-14 * (1.0 + dp[0].abs()));
        prop_assert!((dq[0] + dq[1]).abs() <= 1e-14 * (1.0 + dq[0].abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn a_priori_bounds_along_the_flow(data in prop_oneof![peakon_sum(), gaussian_sum()]) {
        let grid = LagrangianGrid::new(-14.0, 14.0, 513).unwrap();
        let s0 = lagrangianize(&data, &grid).unwrap();
        let e0 = energy_lagrangian(&s0);
        let c = envelope(e0);
        let params = ModelParams::camassa_holm();
        let mut checked = 0;
        let mut failure = None;
        run_from(s0, &params, &StepControls::new(5e-3, 1.0, 10), |s, row| {
            checked += 1;
            let ok = row.min_v >= -1e-12
                && row.max_v <= 1.0 + 1e-12
                && row.max_abs_w <= 0.5 + 1e-12
                && row.min_q > 0.0
                && row.sup_k2 <= e0 + 1e-9
                && s.q.iter().all(|&q| (q.ln()).abs() <= c * s.t);
            if !ok && failure.is_none() {
                failure = Some(format!("{row:?}"));
            }
        })
        .unwrap();
        prop_assert!(checked == 21);
        prop_assert!(failure.is_none(), "{:?}", failure);
    }
}
