mod common;

use common::{arm_qp, kkt_violation, projected_gradient, random_theta};
use pimbs::dataset::{seeded_rng, uniform};
use pimbs::qp::{feasible_candidates, solve_kkt, solve_tension_qp};
use pimbs::{ArmModel, JointState, Matrix, QpSpec};
use proptest::prelude::*;

#[test]
fn enumeration_agrees_with_projected_gradient() {
    let arm = ArmModel::default();
    let mut rng = seeded_rng(31);
    for _ in 0..100 {
        let q = random_theta(&mut rng);
        let f_min = uniform(&mut rng, 0.0, 300.0);
        let spec = arm_qp(&arm, &q, f_min);
        let sol = solve_tension_qp(&spec).unwrap();
        let v = kkt_violation(&spec, &sol);
        assert!(v < 1e-9, "θ = {:?}, f_min = {f_min}: KKT violation {v:e}", q.theta);
        let oracle = projected_gradient(&spec, 10_000);
        let gap = (sol.objective - spec.objective(&oracle)).abs();
        assert!(gap < 1e-6, "θ = {:?}, f_min = {f_min}: objective gap {gap:e}", q.theta);
    }
}

#[test]
fn weighted_instances_agree_with_projected_gradient() {
    let arm = ArmModel::default();
    let mut rng = seeded_rng(32);
    for _ in 0..20 {
        let q = random_theta(&mut rng);
        let f_min = uniform(&mut rng, 0.0, 100.0);
        // diagonally dominant, hence positive definite
        let mut w = Matrix::identity(4);
        for i in 0..4 {
            for j in 0..i {
                let v = uniform(&mut rng, -0.3, 0.3);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
            w[(i, i)] = uniform(&mut rng, 1.0, 3.0);
        }
        let spec = QpSpec { w, ..arm_qp(&arm, &q, f_min) };
        let sol = solve_tension_qp(&spec).unwrap();
        assert!(kkt_violation(&spec, &sol) < 1e-9);
        let oracle = projected_gradient(&spec, 100_000);
        let obj = spec.objective(&oracle);
        assert!(obj >= sol.objective - 1e-6, "oracle below the exact optimum: {obj} < {}", sol.objective);
        assert!((sol.objective - obj).abs() < 1e-6, "gap {}", sol.objective - obj);
    }
}

#[test]
fn kkt_candidate_satisfies_equality() {
    let arm = ArmModel::default();
    let mut rng = seeded_rng(33);
    for _ in 0..50 {
        let q = random_theta(&mut rng);
        let spec = arm_qp(&arm, &q, uniform(&mut rng, 0.0, 300.0));
        for mask in 0..16u32 {
            let active: Vec<usize> = (0..4).filter(|i| mask & (1 << i) != 0).collect();
            if let Some(c) = solve_kkt(&spec, &active) {
                let r = spec.torque_residual(&c.f);
                assert!(r.iter().all(|v| v.abs() < 1e-10), "{active:?}: {r:?}");
            }
        }
    }
}

#[test]
fn all_feasible_candidates_coincide() {
    let arm = ArmModel::default();
    let mut rng = seeded_rng(34);
    for _ in 0..100 {
        let q = random_theta(&mut rng);
        let spec = arm_qp(&arm, &q, uniform(&mut rng, 0.0, 300.0));
        let cands = feasible_candidates(&spec).unwrap();
        assert!(!cands.is_empty());
        for (_, c) in &cands[1..] {
            for (a, b) in c.f.iter().zip(&cands[0].1.f) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn zero_pose_with_floor_is_certified() {
    let arm = ArmModel::default();
    let spec = arm_qp(&arm, &JointState::zero(), 10.0);
    let sol = solve_tension_qp(&spec).unwrap();
    assert!(sol.f.iter().all(|&f| (f - 10.0).abs() < 1e-12));
    assert!(kkt_violation(&spec, &sol) < 1e-9);
    let oracle = projected_gradient(&spec, 10_000);
    assert!((spec.objective(&oracle) - 400.0).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solutions_satisfy_invariants(t0 in -0.5f64..0.5, t1 in -0.5f64..0.5, f_min in 0.0f64..300.0) {
        let arm = ArmModel::default();
        let spec = arm_qp(&arm, &JointState::new(t0, t1), f_min);
        let sol = solve_tension_qp(&spec).unwrap();
        prop_assert!(sol.f.iter().all(|&f| f >= f_min - 1e-9));
        let tau_inf = spec.tau.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        prop_assert!(spec.torque_residual(&sol.f).iter().all(|r| r.abs() < 1e-9 * (1.0 + tau_inf)));
        prop_assert!(sol.dual_bound.iter().all(|&mu| mu >= -1e-9));
    }

    #[test]
    fn raising_the_floor_never_lowers_the_optimum(
        t0 in -0.5f64..0.5, t1 in -0.5f64..0.5, f_min in 0.0f64..300.0, bump in 0.0f64..50.0,
    ) {
        let arm = ArmModel::default();
        let q = JointState::new(t0, t1);
        let lo = solve_tension_qp(&arm_qp(&arm, &q, f_min)).unwrap().objective;
        let hi = solve_tension_qp(&arm_qp(&arm, &q, f_min + bump)).unwrap().objective;
        prop_assert!(hi >= lo - 1e-9 * (1.0 + lo));
    }
}
