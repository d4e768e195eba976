use kanlab_core::forgetting::{
    compute_forgetting, pairwise_overlap, union_overlap, BinAxis, BranchMask, ForgettingLedger, LayerSupport,
    SupportProfile,
};
use kanlab_core::montecarlo::{fit_power_law, mc_expected_overlap, torus_overlap, Arc, McConfig, SupportModel};
use kanlab_core::spline::{fit_coefficients, KnotGrid};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn profile(task: usize, bins: usize, masks: Vec<Vec<bool>>) -> SupportProfile {
    SupportProfile {
        task_index: task,
        threshold: 1e-2,
        layers: vec![LayerSupport {
            axis: BinAxis::new(-1.0, 1.0, bins).unwrap(),
            in_dim: masks.len(),
            out_dim: 1,
            masks: masks.into_iter().map(BranchMask).collect(),
        }],
    }
}

fn profiles(tasks: usize, branches: usize, bins: usize) -> impl Strategy<Value = Vec<SupportProfile>> {
    prop::collection::vec(
        prop::collection::vec(prop::collection::vec(any::<bool>(), bins), branches),
        tasks,
    )
    .prop_map(move |sets| {
        sets.into_iter()
            .enumerate()
            .map(|(t, m)| profile(t + 1, bins, m))
            .collect()
    })
}

proptest! {
    #[test]
    fn basis_is_partition_of_unity(grid in 1usize..30, order in 1usize..6, u in 0.0f64..=1.0) {
        let g = KnotGrid::symmetric(grid, order).unwrap();
        let x = -1.0 + 2.0 * u;
        let b = g.eval_basis(x).unwrap();
        prop_assert!((b.sum() - 1.0).abs() < 1e-12);
        prop_assert!(b.nonzero_count() <= order + 1);
    }

    #[test]
    fn least_squares_recovers_a_spline(coeffs in prop::collection::vec(-2.0f64..2.0, 8)) {
        // grid 5, order 3 has exactly 8 basis functions.
        let g = KnotGrid::symmetric(5, 3).unwrap();
        let xs: Vec<f64> = (0..60).map(|i| -1.0 + 2.0 * i as f64 / 59.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| g.spline_value(&coeffs, x)).collect();
        let fitted = fit_coefficients(&g, &xs, &ys).unwrap();
        for (a, b) in fitted.iter().zip(&coeffs) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn least_squares_matches_svd_oracle(
        grid in 3usize..12,
        ys in prop::collection::vec(-3.0f64..3.0, 80),
    ) {
        let g = KnotGrid::symmetric(grid, 3).unwrap();
        let xs: Vec<f64> = (0..ys.len()).map(|i| -1.0 + 2.0 * i as f64 / (ys.len() - 1) as f64).collect();
        let n = g.num_basis();
        let mut a = DMatrix::zeros(xs.len(), n);
        for (r, &x) in xs.iter().enumerate() {
            for (c, v) in g.eval_basis(x).unwrap().values.iter().enumerate() {
                a[(r, c)] = *v;
            }
        }
        let want = a.svd(true, true).solve(&DVector::from_column_slice(&ys), 1e-14).unwrap();
        let got = fit_coefficients(&g, &xs, &ys).unwrap();
        for (x, y) in got.iter().zip(want.iter()) {
            prop_assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn torus_overlap_is_bounded_and_symmetric(a0 in 0.0f64..1.0, a in 0.0f64..=1.0, b0 in 0.0f64..1.0, b in 0.0f64..=1.0) {
        let x = Arc { start: a0, len: a };
        let y = Arc { start: b0, len: b };
        let o = torus_overlap(x, y).unwrap();
        prop_assert!(o >= 0.0);
        prop_assert!(o <= a.min(b) + 1e-12);
        prop_assert!((o - torus_overlap(y, x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn pairwise_delta_dominates_branches(ps in profiles(2, 4, 32)) {
        let p = pairwise_overlap(&ps[0], &ps[1]).unwrap();
        for (b, v) in p.per_branch[0].iter().enumerate() {
            prop_assert!(*v <= p.delta);
            prop_assert!(*v <= ps[0].layers[0].measure(b).min(ps[1].layers[0].measure(b)) + 1e-15);
        }
    }

    #[test]
    fn union_bound_never_fails(ps in profiles(5, 3, 24), i in 0usize..4) {
        let u = union_overlap(&ps, i).unwrap();
        prop_assert_eq!(u.violations(), 0);
        for b in u.per_branch.iter().flatten() {
            prop_assert!(b.union_measure <= b.own_measure + 1e-15);
            prop_assert!(b.union_measure <= b.delta_sum + 1e-12);
        }
    }

    #[test]
    fn forgetting_is_final_minus_own_loss(loss in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 4), 4)) {
        let ledger = ForgettingLedger::from_losses(loss.clone()).unwrap();
        let f = compute_forgetting(&ledger).unwrap();
        for i in 0..4 {
            prop_assert_eq!(f[i], loss[3][i] - loss[i][i]);
        }
        prop_assert_eq!(f[3], 0.0);
    }

    #[test]
    fn power_law_fit_is_exact_on_exact_data(slope in -4.0f64..4.0, scale in 0.1f64..10.0) {
        let xs = [0.1, 0.2, 0.4, 0.8, 1.6];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| scale * x.powf(slope)).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - scale.ln()).abs() < 1e-9);
        prop_assert!(fit.slope_stderr < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn seeded_monte_carlo_is_reproducible(seed in any::<u64>(), s_i in 0.0f64..1.0, s_j in 0.0f64..1.0) {
        let cfg = McConfig { trials: 2000, seed, shard_size: 300 };
        let a = SupportModel::TorusInterval { s: s_i };
        let b = SupportModel::TorusInterval { s: s_j };
        let x = mc_expected_overlap(&a, &b, &cfg).unwrap();
        let y = mc_expected_overlap(&a, &b, &cfg).unwrap();
        prop_assert_eq!(x.mean.to_bits(), y.mean.to_bits());
        prop_assert_eq!(x.std_error.to_bits(), y.std_error.to_bits());
        prop_assert!(x.mean <= s_i.min(s_j) + 1e-12);
    }
}
