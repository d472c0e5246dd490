//! Property tests over randomized models, points and matrices.

mod common;

use proptest::prelude::*;
use warm_core::dynamics::{drift, SimplexPoint};
use warm_core::equilibria::det_rank_one_update;
use warm_core::model::*;

fn arb_interior(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.02f64..1.0, n).prop_map(|mut v| {
        let s: f64 = v.iter().sum();
        for x in v.iter_mut() {
            *x /= s;
        }
        v
    })
}

proptest! {
    #[test]
    fn fixed_m_builder_is_normalized(n in 1usize..=10, m_frac in 0.0f64..1.0) {
        let m = 1 + ((n - 1) as f64 * m_frac) as usize;
        let d = build_fixed_m(n, m).unwrap();
        let total: f64 = d.entries().iter().map(|&(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() <= PROB_TOL);
        prop_assert!(d.entries().iter().all(|&(mask, _)| mask.count_ones() as usize == m));
        prop_assert_eq!(d.entries().len() as u64, binomial(n, m));
    }

    #[test]
    fn bernoulli_builder_is_normalized(n in 1usize..=8, p in 0.05f64..0.95) {
        let d = build_bernoulli(n, p).unwrap();
        let total: f64 = d.entries().iter().map(|&(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() <= PROB_TOL);
        prop_assert!(d.entries().iter().all(|&(mask, _)| mask != 0));
        prop_assert_eq!(d.entries().len(), (1usize << n) - 1);
    }

    #[test]
    fn drift_sums_to_zero_on_random_models(
        n in 2usize..=6,
        alpha in 1.05f64..8.0,
        seed in 0u64..1000,
    ) {
        // A random strongly-connected subset law: all singletons plus a few
        // random subsets, with random weights.
        let mut lcg = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut masks: Vec<u64> = (0..n).map(|i| 1u64 << i).collect();
        for _ in 0..n {
            lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let mask = (lcg >> 20) as u64 % (1u64 << n);
            if mask != 0 && !masks.contains(&mask) {
                masks.push(mask);
            }
        }
        let mut weights: Vec<f64> = Vec::new();
        for _ in 0..masks.len() {
            lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            weights.push(0.05 + ((lcg >> 11) as f64 / (1u64 << 53) as f64));
        }
        let total: f64 = weights.iter().sum();
        let entries: Vec<(u64, f64)> =
            masks.into_iter().zip(weights.into_iter().map(|w| w / total)).collect();
        let model = SubsetDistribution::new(n, entries).unwrap().with_alpha(alpha).unwrap();
        let point = SimplexPoint::barycenter(n);
        let f = drift(&model, &point).unwrap();
        prop_assert!(f.iter().sum::<f64>().abs() <= 1e-12);
    }

    #[test]
    fn drift_zero_components_stay_zero(v in arb_interior(3), alpha in 1.1f64..6.0) {
        // On a face, zero colours have zero drift (the face is invariant).
        let model = graph_to_warm(&build_cycle(4).unwrap(), alpha).unwrap();
        let point = SimplexPoint::new(vec![v[0], 0.0, v[1], v[2]]).unwrap();
        let f = drift(&model, &point).unwrap();
        prop_assert_eq!(f[1], 0.0);
    }

    #[test]
    fn det_lemma_matches_dense(
        n in 1usize..=6,
        r in prop::collection::vec(-2.0f64..2.0, 6),
        y in prop::collection::vec(-2.0f64..2.0, 6),
        w in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let r = &r[..n];
        let y = &y[..n];
        let w = &w[..n];
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = r[i];
            for j in 0..n {
                m[(i, j)] += y[i] * w[j];
            }
        }
        prop_assert!((m.determinant() - det_rank_one_update(r, y, w)).abs() < 1e-10);
    }

    #[test]
    fn singular_diagonal_det_lemma(
        n in 2usize..=6,
        zero_at in 0usize..6,
        y in prop::collection::vec(-2.0f64..2.0, 6),
        w in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        // The formula must survive singular R where the inverse-based
        // determinant identity breaks down.
        let zero_at = zero_at % n;
        let mut r = vec![1.5f64; n];
        r[zero_at] = 0.0;
        let y = &y[..n];
        let w = &w[..n];
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = r[i];
            for j in 0..n {
                m[(i, j)] += y[i] * w[j];
            }
        }
        prop_assert!((m.determinant() - det_rank_one_update(&r, y, w)).abs() < 1e-10);
    }

    #[test]
    fn flow_stays_on_simplex(v in arb_interior(3), alpha in 1.1f64..5.0) {
        let model = graph_to_warm(&build_cycle(3).unwrap(), alpha).unwrap();
        let opts = warm_core::dynamics::FlowOptions { t_max: 5.0, ..Default::default() };
        let traj =
            warm_core::dynamics::flow(&model, &SimplexPoint::new(v).unwrap(), &opts).unwrap();
        for p in &traj.points {
            let sum: f64 = p.as_slice().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-10);
            prop_assert!(p.as_slice().iter().all(|&x| x >= 0.0));
        }
    }
}
