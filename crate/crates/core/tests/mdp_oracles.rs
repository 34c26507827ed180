mod common;

use std::time::Instant;

use common::*;
use ndarray::Array3;
use proptest::prelude::*;
use rand::Rng;
use tabail::mdp::{
    bellman_value, l1_occupancy_distance, mixture_occupancy, occupancy, q_values, value_dual, value_iteration, Dims,
    Dynamics, MixturePolicy,
};

#[test]
fn occupancy_matches_trajectory_enumeration() {
    let start = Instant::now();
    let mut rng = rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (h, s, a) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=3));
        let mdp = random_mdp(&mut rng, h, s, a);
        let pi = random_policy(&mut rng, mdp.dims());
        let fast = occupancy(&mdp, &pi).unwrap();
        worst = worst.max(max_abs_diff(fast.table(), &brute_force_occupancy(&mdp, &pi)));
    }
    assert!(worst <= 1e-10, "max abs error {worst}");
    assert!(start.elapsed().as_secs_f64() < 5.0, "took {:?}", start.elapsed());
}

#[test]
fn dual_value_equals_bellman_value() {
    let mut rng = rng(12);
    for _ in 0..100 {
        let (h, s, a) = (rng.random_range(1..=6), rng.random_range(1..=6), rng.random_range(1..=4));
        let mdp = random_mdp(&mut rng, h, s, a);
        let pi = random_policy(&mut rng, mdp.dims());
        let occ = occupancy(&mdp, &pi).unwrap();
        let dual = value_dual(&occ, mdp.rewards()).unwrap();
        let primal = bellman_value(&mdp, &pi, mdp.rewards()).unwrap();
        assert!((dual - primal).abs() <= 1e-10, "{dual} vs {primal}");
    }
}

#[test]
fn value_iteration_equals_exhaustive_search() {
    let mut rng = rng(13);
    for _ in 0..30 {
        let (h, s) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let mdp = random_mdp(&mut rng, h, s, 2);
        let (vi_policy, vi_value) = value_iteration(&mdp, mdp.rewards()).unwrap();
        let best = all_deterministic_policies(mdp.dims())
            .iter()
            .map(|p| bellman_value(&mdp, p, mdp.rewards()).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((vi_value - best).abs() <= 1e-12, "{vi_value} vs {best}");
        let realized = bellman_value(&mdp, &vi_policy, mdp.rewards()).unwrap();
        assert!((realized - vi_value).abs() <= 1e-12);
    }
}

#[test]
fn value_iteration_dominates_random_policies() {
    let mut rng = rng(14);
    for _ in 0..5 {
        let mdp = random_mdp(&mut rng, 8, 10, 4);
        let (_, best) = value_iteration(&mdp, mdp.rewards()).unwrap();
        for _ in 0..100 {
            let pi = random_policy(&mut rng, mdp.dims());
            assert!(bellman_value(&mdp, &pi, mdp.rewards()).unwrap() <= best + 1e-12);
        }
    }
}

#[test]
fn zero_reward_gives_action_zero_everywhere() {
    let mut rng = rng(15);
    let mdp = random_mdp(&mut rng, 3, 4, 3);
    let (pi, v) = value_iteration(&mdp, &mdp.dims().zeros()).unwrap();
    assert_eq!(v, 0.0);
    for h in 0..3 {
        for s in 0..4 {
            assert_eq!(pi.deterministic_action(h, s), Some(0));
        }
    }
}

#[test]
fn mixture_occupancy_is_linear() {
    let mut rng = rng(16);
    for _ in 0..20 {
        let mdp = random_mdp(&mut rng, 4, 5, 3);
        let comps: Vec<_> = (0..3).map(|_| random_policy(&mut rng, mdp.dims())).collect();
        let raw: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 0.1).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mut expected = mdp.dims().zeros();
        for (p, w) in comps.iter().zip(&weights) {
            expected.scaled_add(*w, occupancy(&mdp, p).unwrap().table());
        }
        let mix = MixturePolicy::new(comps, weights).unwrap();
        let got = mixture_occupancy(&mdp, &mix).unwrap();
        assert!(max_abs_diff(got.table(), &expected) <= 1e-12);
    }
}

#[test]
fn q_values_average_to_the_policy_value() {
    let mut rng = rng(17);
    let mdp = random_mdp(&mut rng, 4, 3, 2);
    let pi = random_policy(&mut rng, mdp.dims());
    let q = q_values(&mdp, &pi, mdp.rewards()).unwrap();
    let v0: f64 = (0..3)
        .map(|s| mdp.initial_dist()[s] * (0..2).map(|a| pi.prob(0, s, a) * q.table()[[0, s, a]]).sum::<f64>())
        .sum();
    assert!((v0 - bellman_value(&mdp, &pi, mdp.rewards()).unwrap()).abs() <= 1e-12);
}

fn dims_strategy() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=5, 1usize..=5, 1usize..=4, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn occupancy_is_normalized_per_step((h, s, a, seed) in dims_strategy()) {
        let mut rng = rng(seed);
        let mdp = random_mdp(&mut rng, h, s, a);
        let pi = random_policy(&mut rng, mdp.dims());
        let occ = occupancy(&mdp, &pi).unwrap();
        for step in 0..h {
            let total: f64 = occ.table().index_axis(ndarray::Axis(0), step).sum();
            prop_assert!((total - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn l1_distance_is_a_metric((h, s, a, seed) in dims_strategy()) {
        let mut rng = rng(seed);
        let mdp = random_mdp(&mut rng, h, s, a);
        let occ: Vec<Array3<f64>> = (0..3)
            .map(|_| occupancy(&mdp, &random_policy(&mut rng, mdp.dims())).unwrap().into_table())
            .collect();
        let d = |i: usize, j: usize| l1_occupancy_distance(&occ[i], &occ[j]).unwrap();
        prop_assert!((d(0, 1) - d(1, 0)).abs() <= 1e-12);
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
        prop_assert!(d(0, 0) == 0.0);
    }

    #[test]
    fn value_difference_is_bounded_by_l1_distance((h, s, a, seed) in dims_strategy()) {
        let mut rng = rng(seed);
        let mdp = random_mdp(&mut rng, h, s, a);
        let dims = mdp.dims();
        let occ_a = occupancy(&mdp, &random_policy(&mut rng, dims)).unwrap();
        let occ_b = occupancy(&mdp, &random_deterministic_policy(&mut rng, dims)).unwrap();
        let reward = Array3::from_shape_fn(dims.shape(), |_| rng.random_range(-1.0..=1.0));
        let gap = (value_dual(&occ_a, &reward).unwrap() - value_dual(&occ_b, &reward).unwrap()).abs();
        prop_assert!(gap <= l1_occupancy_distance(&occ_a, &occ_b).unwrap() + 1e-12);
    }

    #[test]
    fn dims_reject_zero_sizes(h in 0usize..3, s in 0usize..3, a in 0usize..3) {
        prop_assert_eq!(Dims::new(h, s, a).is_ok(), h > 0 && s > 0 && a > 0);
    }
}
