mod common;

use common::*;
use graphvar_core::operators::{
    adjoint, gamma, grad, grad_objective_eps, objective, objective_eps, project_ball,
    prox_fidelity, regularizer,
};
use graphvar_core::{feature_weights, Graph, Norm, ProblemParams, Signal};
use proptest::prelude::*;
use rand::Rng;

fn norm_of(p2: bool) -> Norm {
    if p2 {
        Norm::L2
    } else {
        Norm::L1
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity(seed: u64, n in 2usize..40, d in 1usize..4) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, 0.3);
        let f = random_signal(&mut r, n, d);
        let h = random_field(&mut r, g.arc_count(), d, 1.0);
        let lhs = grad(&g, &f).unwrap().dot(&h);
        let rhs = f.dot(&adjoint(&g, &h).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn grad_is_antisymmetric(seed: u64, n in 2usize..30, d in 1usize..4) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, 0.4);
        let f = random_signal(&mut r, n, d);
        let df = grad(&g, &f).unwrap();
        for a in 0..g.arc_count() {
            let back = df.arc(g.reverse_arc()[a]);
            for (x, y) in df.arc(a).iter().zip(back) {
                prop_assert_eq!(*x, -*y);
            }
        }
    }

    #[test]
    fn projection_is_feasible_idempotent_and_nonexpansive(
        seed: u64, n in 2usize..20, d in 1usize..4, p2: bool
    ) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, 0.5);
        let norm = norm_of(p2);
        let a = random_field(&mut r, g.arc_count(), d, 3.0);
        let b = random_field(&mut r, g.arc_count(), d, 3.0);
        let pa = project_ball(&g, &a, norm).unwrap();
        let pb = project_ball(&g, &b, norm).unwrap();
        prop_assert_eq!(project_ball(&g, &pa, norm).unwrap(), pa.clone());
        prop_assert!(pa.distance_sq(&pb) <= a.distance_sq(&b) * (1.0 + 1e-12));
        match norm {
            Norm::L1 => prop_assert!(pa.as_slice().iter().all(|x| x.abs() <= 1.0)),
            Norm::L2 => {
                for i in 0..n {
                    let arcs = g.arcs_of(i);
                    let s: f64 = pa.as_slice()[arcs.start * d..arcs.end * d]
                        .iter().map(|x| x * x).sum();
                    prop_assert!(s <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn prox_beats_random_perturbations(seed: u64, n in 1usize..10, lambda in 0.01f64..5.0, tau in 0.01f64..5.0) {
        let mut r = rng(seed);
        let f = random_signal(&mut r, n, 2);
        let f0 = random_signal(&mut r, n, 2);
        let x = prox_fidelity(&f, &f0, lambda, tau).unwrap();
        let value = |y: &Signal| 0.5 * y.distance_sq(&f) + tau / (2.0 * lambda) * y.distance_sq(&f0);
        let best = value(&x);
        for _ in 0..200 {
            let mut y = x.clone();
            let scale = 10f64.powi(r.random_range(-6..0));
            for v in y.as_mut_slice() {
                *v += scale * r.random_range(-1.0..1.0);
            }
            prop_assert!(best <= value(&y));
        }
    }

    #[test]
    fn gamma_is_symmetric(seed: u64, n in 2usize..20, d in 1usize..4, p2: bool, q in 0.1f64..2.5) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, 0.4);
        let f = random_signal(&mut r, n, d);
        let params = ProblemParams::new(norm_of(p2), q, 0.3, 1e-3).unwrap();
        let gm = gamma(&g, &f, &params).unwrap();
        for a in 0..g.arc_count() {
            let b = g.reverse_arc()[a];
            for k in 0..gm.channels() {
                prop_assert_eq!(gm.get(a, k), gm.get(b, k));
                prop_assert!(gm.get(a, k) >= 0.0);
            }
        }
    }

    #[test]
    fn objectives_are_permutation_invariant(
        seed: u64, n in 2usize..25, d in 1usize..4, p2: bool, q in 0.1f64..2.5
    ) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, 0.3);
        let f = random_signal(&mut r, n, d);
        let f0 = random_signal(&mut r, n, d);
        let perm = random_permutation(&mut r, n);
        let (gp, fp, f0p) = (g.relabel(&perm).unwrap(), permute_signal(&f, &perm), permute_signal(&f0, &perm));
        let params = ProblemParams::new(norm_of(p2), q, 0.4, 1e-3).unwrap();
        let tol = |x: f64| 1e-12 * (1.0 + x.abs());
        let (j, jp) = (objective(&g, &f, &f0, &params).unwrap(), objective(&gp, &fp, &f0p, &params).unwrap());
        prop_assert!((j - jp).abs() <= tol(j));
        let (j, jp) = (objective_eps(&g, &f, &f0, &params).unwrap(), objective_eps(&gp, &fp, &f0p, &params).unwrap());
        prop_assert!((j - jp).abs() <= tol(j));

        let grad_perm = permute_signal(&grad_objective_eps(&g, &f, &f0, &params).unwrap(), &perm);
        prop_assert!(grad_perm.max_abs_diff(&grad_objective_eps(&gp, &fp, &f0p, &params).unwrap()) <= 1e-12);
        let adj_perm = permute_signal(&adjoint(&g, &grad(&g, &f).unwrap()).unwrap(), &perm);
        prop_assert!(adj_perm.max_abs_diff(&adjoint(&gp, &grad(&gp, &fp).unwrap()).unwrap()) <= 1e-12);
    }

    #[test]
    fn smoothed_objective_decreases_to_exact(seed: u64, n in 2usize..20, d in 1usize..4, p2: bool, q in 0.1f64..2.0) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, 0.4);
        let f = random_signal(&mut r, n, d);
        let f0 = random_signal(&mut r, n, d);
        let base = ProblemParams::new(norm_of(p2), q, 0.5, 0.0).unwrap();
        let exact = objective(&g, &f, &f0, &base).unwrap();
        let mut previous = f64::INFINITY;
        for e in [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8] {
            let v = objective_eps(&g, &f, &f0, &base.with_epsilon(e)).unwrap();
            prop_assert!(v <= previous);
            prop_assert!(v >= exact - 1e-12 * (1.0 + exact.abs()));
            previous = v;
        }
        prop_assert!((objective_eps(&g, &f, &f0, &base).unwrap() - exact).abs() <= 1e-12 * (1.0 + exact));
    }

    #[test]
    fn feature_weights_commute_with_relabeling(seed: u64, n in 2usize..25, kappa in 0.0f64..20.0) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, 0.3);
        let f0 = random_signal(&mut r, n, 3);
        let perm = random_permutation(&mut r, n);
        let a = feature_weights(&g, &f0, kappa).unwrap().relabel(&perm).unwrap();
        let b = feature_weights(&g.relabel(&perm).unwrap(), &permute_signal(&f0, &perm), kappa).unwrap();
        prop_assert_eq!(a.col_indices(), b.col_indices());
        prop_assert_eq!(a.weights(), b.weights());
    }
}

fn finite_difference_check(g: &Graph, f: &Signal, f0: &Signal, params: &ProblemParams) -> f64 {
    let analytic = grad_objective_eps(g, f, f0, params).unwrap();
    let h = 1e-6;
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for idx in 0..f.as_slice().len() {
        let mut plus = f.clone();
        plus.as_mut_slice()[idx] += h;
        let mut minus = f.clone();
        minus.as_mut_slice()[idx] -= h;
        let fd = (objective_eps(g, &plus, f0, params).unwrap()
            - objective_eps(g, &minus, f0, params).unwrap())
            / (2.0 * h);
        num += (fd - analytic.as_slice()[idx]).powi(2);
        den += analytic.as_slice()[idx].powi(2);
    }
    (num / den).sqrt()
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut r = rng(11);
    for (p2, q) in [(true, 1.0), (false, 1.0), (true, 2.0), (true, 0.1)] {
        for eps in [1e-4, 1e-8] {
            for trial in 0..5 {
                let g = connected_graph(&mut r, 12, 0.2);
                let f = random_signal(&mut r, 12, 2);
                let f0 = random_signal(&mut r, 12, 2);
                let params = ProblemParams::new(norm_of(p2), q, 0.3, eps).unwrap();
                let err = finite_difference_check(&g, &f, &f0, &params);
                assert!(err < 1e-5, "p2={p2} q={q} eps={eps} trial {trial}: {err:e}");
            }
        }
    }
}

#[test]
fn exact_regularizer_at_q1_is_the_composed_norm() {
    let mut r = rng(5);
    for p2 in [true, false] {
        let g = random_graph(&mut r, 15, 0.3);
        let f = random_signal(&mut r, 15, 3);
        let params = ProblemParams::new(norm_of(p2), 1.0, 1.0, 0.0).unwrap();
        let expected =
            graphvar_core::operators::composed_norm(&g, &grad(&g, &f).unwrap(), norm_of(p2)).unwrap();
        assert!((regularizer(&g, &f, &params).unwrap() - expected).abs() < 1e-12 * expected);
    }
}
