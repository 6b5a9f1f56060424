mod common;

use common::*;
use graphridge::apps::{log_returns, partial_correlations};
use graphridge::dualcheck::{dual_objective, dual_objective_eig, theta_star, DualProblem};
use graphridge::estimators::{
    alt_ridge_i, alt_ridge_i_noinv, alt_ridge_ii, en_objective, generalized, riccati_residual,
    stationarity_residual, two_step, GenTuningParams, TargetSpec, TuningParams, TwoStepConfig,
};
use graphridge::glasso::{glasso_with, kkt_check, GlassoConfig};
use graphridge::matcore::{min_eigenvalue, Matrix, SymMatrix};
use graphridge::metrics::{kl_loss, l2_loss, ql_loss, sp_loss};
use graphridge::select::{grid_search, kfold_split, CvConfig};
use graphridge::Method;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn lambda_strategy() -> impl Strategy<Value = f64> {
    (-3.0f64..2.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inverse_and_direct_forms_agree(seed in any::<u64>(), p in 2usize..15, lambda in lambda_strategy()) {
        let mut r = rng(seed);
        let s = random_spd(p, &mut r);
        let t = SymMatrix::identity(p);
        let a = alt_ridge_i(&s, &t, lambda).unwrap();
        let b = alt_ridge_i_noinv(&s, &t, lambda).unwrap();
        let scale = a.max_abs().max(1.0);
        prop_assert!(a.max_abs_diff(&b) < 1e-9 * scale);
    }

    #[test]
    fn alt_ridge_matches_spectral_oracle(seed in any::<u64>(), p in 2usize..12, lambda in lambda_strategy()) {
        let mut r = rng(seed);
        let s = random_cov(p, p / 2 + 1, &mut r);
        let t = SymMatrix::from_diag(&(0..p).map(|k| 0.5 + k as f64 / p as f64).collect::<Vec<_>>());
        let theta = alt_ridge_i(&s, &t, lambda).unwrap();
        let oracle = oracle_alt_ridge(&s, &t, lambda);
        prop_assert!(max_abs_diff(&theta, &oracle) < 1e-8 * max_abs(&oracle).max(1.0));
    }

    #[test]
    fn alt_ridge_solves_normal_and_riccati_equations(seed in any::<u64>(), p in 2usize..12, lambda in lambda_strategy()) {
        let mut r = rng(seed);
        let s = random_cov(p, 2 * p, &mut r);
        let t = SymMatrix::identity(p);
        let theta = alt_ridge_i(&s, &t, lambda).unwrap();
        let scale = theta.max_abs().max(1.0);
        prop_assert!(stationarity_residual(&theta, &s, &t, lambda).unwrap() < 1e-7 * scale * scale);
        prop_assert!(riccati_residual(&theta, &s, &t, lambda).unwrap() < 1e-7 * scale * scale);
    }

    #[test]
    fn ridge_outputs_positive_definite_for_singular_s(seed in any::<u64>(), p in 3usize..15, lambda in lambda_strategy()) {
        let mut r = rng(seed);
        let s = random_cov(p, 2, &mut r);
        let t = SymMatrix::identity(p);
        prop_assert!(min_eigenvalue(&alt_ridge_i(&s, &t, lambda).unwrap()).unwrap() > 0.0);
        prop_assert!(min_eigenvalue(&alt_ridge_ii(&s, lambda).unwrap()).unwrap() > 0.0);
        let ts = two_step(&s, &t, TuningParams::new(lambda, 0.3).unwrap(), &TwoStepConfig::default()).unwrap();
        prop_assert!(min_eigenvalue(&ts).unwrap() > 0.0);
    }

    #[test]
    fn alt_ridge_ii_rotation_equivariant(seed in any::<u64>(), p in 2usize..10, lambda in lambda_strategy()) {
        let mut r = rng(seed);
        let s = random_spd(p, &mut r);
        let q = random_orthogonal(p, &mut r);
        let rotated_fit = alt_ridge_ii(&s.congruence(&q).unwrap(), lambda).unwrap();
        let fit_rotated = alt_ridge_ii(&s, lambda).unwrap().congruence(&q).unwrap();
        prop_assert!(rotated_fit.max_abs_diff(&fit_rotated) < 1e-8 * fit_rotated.max_abs().max(1.0));
    }

    #[test]
    fn alt_ridge_i_permutation_equivariant(seed in any::<u64>(), p in 2usize..10, lambda in lambda_strategy()) {
        let mut r = rng(seed);
        let s = random_spd(p, &mut r);
        let t = SymMatrix::from_diag(&(0..p).map(|k| 1.0 + k as f64).collect::<Vec<_>>());
        let mut perm: Vec<usize> = (0..p).collect();
        perm.shuffle(&mut r);
        let a = alt_ridge_i(&s.permuted(&perm), &t.permuted(&perm), lambda).unwrap();
        let b = alt_ridge_i(&s, &t, lambda).unwrap().permuted(&perm);
        prop_assert!(a.max_abs_diff(&b) < 1e-9 * b.max_abs().max(1.0));
    }

    #[test]
    fn alt_ridge_maximizes_ridge_objective(seed in any::<u64>(), p in 2usize..8, lambda in lambda_strategy()) {
        let mut r = rng(seed);
        let s = random_spd(p, &mut r);
        let t = SymMatrix::identity(p);
        let tp = TuningParams::new(lambda, 0.0).unwrap();
        let theta = alt_ridge_i(&s, &t, lambda).unwrap();
        let best = en_objective(&theta, &s, &t, tp).unwrap();
        let step = 1e-3 * min_eigenvalue(&theta).unwrap();
        for _ in 0..5 {
            let e = SymMatrix::from_fn(p, |_, _| r.random_range(-1.0..1.0));
            let moved = SymMatrix::lin_comb(1.0, &theta, step / e.max_abs(), &e).unwrap();
            prop_assert!(en_objective(&moved, &s, &t, tp).unwrap() <= best + 1e-12 * best.abs().max(1.0));
        }
    }

    #[test]
    fn two_step_alpha_zero_is_alt_ridge(seed in any::<u64>(), p in 2usize..12, lambda in lambda_strategy()) {
        let mut r = rng(seed);
        let s = random_cov(p, p + 3, &mut r);
        let t = SymMatrix::scalar(p, 2.0);
        let cfg = TwoStepConfig::default();
        let a = two_step(&s, &t, TuningParams::new(lambda, 0.0).unwrap(), &cfg).unwrap();
        let b = alt_ridge_i(&s, &t, lambda).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-12 * b.max_abs().max(1.0));
    }

    #[test]
    fn generalized_reduces_to_alt_ridge(seed in any::<u64>(), p in 2usize..10, lambda in lambda_strategy()) {
        let mut r = rng(seed);
        let s = random_spd(p, &mut r);
        let gamma = random_spd(p, &mut r);
        let t = SymMatrix::identity(p);
        let g = generalized(&s, &gamma, &t, GenTuningParams::new(0.0, lambda).unwrap()).unwrap();
        let a = alt_ridge_i(&s, &t, lambda).unwrap();
        prop_assert!(g.max_abs_diff(&a) < 1e-10 * a.max_abs().max(1.0));
    }

    #[test]
    fn spectral_dual_form_is_negated_matrix_form(seed in any::<u64>(), p in 2usize..7, gamma in 0.2f64..3.0) {
        let mut r = rng(seed);
        let s = random_spd(p, &mut r);
        let prob = DualProblem::new(s, SymMatrix::scalar(p, gamma), TuningParams::new(0.7, 0.4).unwrap()).unwrap();
        let b = prob.bound();
        let u = SymMatrix::from_fn(p, |i, j| if i == j { b } else { r.random_range(-b..b) });
        let u = SymMatrix::from_fn(p, |i, j| u.get(i.min(j), i.max(j)));
        let m = dual_objective(&u, &prob).unwrap();
        let e = dual_objective_eig(&u, &prob, gamma).unwrap();
        prop_assert!((m + e).abs() < 1e-9 * m.abs().max(1.0), "{m} {e}");
        prop_assert!(min_eigenvalue(&theta_star(&u, &prob).unwrap()).unwrap() > 0.0);
    }

    #[test]
    fn glasso_satisfies_kkt(seed in any::<u64>(), p in 2usize..10, rho in 0.01f64..0.5) {
        let mut r = rng(seed);
        let s = random_spd(p, &mut r);
        let cfg = GlassoConfig { max_iter: 10_000, tol: 1e-10, ..Default::default() };
        let fit = glasso_with(&s, rho, &cfg).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(kkt_check(&fit, &s, rho) < 1e-4);
    }

    #[test]
    fn losses_invariant_under_joint_permutation(seed in any::<u64>(), p in 2usize..9) {
        let mut r = rng(seed);
        let sigma = random_spd(p, &mut r);
        let theta = graphridge::matcore::spd_inverse(&sigma).unwrap();
        let hat = random_spd(p, &mut r);
        let mut perm: Vec<usize> = (0..p).collect();
        perm.shuffle(&mut r);
        let (ps, pt, ph) = (sigma.permuted(&perm), theta.permuted(&perm), hat.permuted(&perm));
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        prop_assert!(close(kl_loss(&sigma, &hat).unwrap(), kl_loss(&ps, &ph).unwrap()));
        prop_assert!(close(l2_loss(&theta, &hat).unwrap(), l2_loss(&pt, &ph).unwrap()));
        prop_assert!(close(ql_loss(&sigma, &hat).unwrap(), ql_loss(&ps, &ph).unwrap()));
        prop_assert!(close(sp_loss(&theta, &hat).unwrap(), sp_loss(&pt, &ph).unwrap()));
        prop_assert!(kl_loss(&sigma, &hat).unwrap() >= 0.0);
    }

    #[test]
    fn partial_correlations_scale_invariant(seed in any::<u64>(), p in 2usize..10) {
        let mut r = rng(seed);
        let theta = random_spd(p, &mut r);
        let d: Vec<f64> = (0..p).map(|_| r.random_range(0.1..10.0)).collect();
        let a = partial_correlations(&theta, 0.0, None).unwrap();
        let b = partial_correlations(&theta.diag_scaled(&d), 0.0, None).unwrap();
        prop_assert_eq!(a.edges.len(), b.edges.len());
        for (x, y) in a.edges.iter().zip(&b.edges) {
            prop_assert_eq!((x.i, x.j), (y.i, y.j));
            prop_assert!((x.weight - y.weight).abs() < 1e-12);
            prop_assert!(x.weight.abs() <= 1.0);
        }
    }

    #[test]
    fn log_returns_invert_cumulative_products(seed in any::<u64>(), rows in 2usize..30, cols in 1usize..6) {
        let mut r = rng(seed);
        let inc: Vec<Vec<f64>> = (0..rows - 1).map(|_| (0..cols).map(|_| r.random_range(-0.2..0.2)).collect()).collect();
        let mut prices = vec![(0..cols).map(|_| r.random_range(1.0..100.0)).collect::<Vec<f64>>()];
        for step in &inc {
            let last = prices.last().unwrap();
            prices.push(last.iter().zip(step).map(|(pv, d)| pv * d.exp()).collect());
        }
        let ret = log_returns(&Matrix::from_rows(&prices).unwrap()).unwrap();
        for (i, step) in inc.iter().enumerate() {
            for (j, &d) in step.iter().enumerate() {
                prop_assert!((ret.get(i, j) - d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kfold_assignments_balanced(seed in any::<u64>(), n in 2usize..200, k in 2usize..10) {
        prop_assume!(n >= k);
        let a = kfold_split(n, k, seed).unwrap();
        let mut counts = vec![0usize; k];
        for &f in &a {
            counts[f] += 1;
        }
        prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        prop_assert_eq!(a, kfold_split(n, k, seed).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn grid_order_does_not_change_selection(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = Matrix::from_fn(30, 4, |_, _| r.random_range(-1.0..1.0));
        let mut cfg = CvConfig {
            lambda_grid: vec![0.01, 0.1, 0.5, 1.0, 3.0],
            alpha_grid: vec![0.0, 0.5, 1.0],
            seed,
            ..Default::default()
        };
        let ts = TwoStepConfig::default();
        let forward = grid_search(&x, Method::TwoStep, &TargetSpec::Identity, &cfg, &ts).unwrap();
        cfg.lambda_grid.reverse();
        cfg.alpha_grid.reverse();
        let backward = grid_search(&x, Method::TwoStep, &TargetSpec::Identity, &cfg, &ts).unwrap();
        prop_assert_eq!(forward.best_lambda, backward.best_lambda);
        prop_assert_eq!(forward.best_alpha, backward.best_alpha);
        prop_assert_eq!(forward.estimate, backward.estimate);
    }
}
