mod common;

use common::*;
use tabail::env::{make_reset_cliff, make_standard_imitation, EnvBundle};
use tabail::harness::run_algorithm;
use tabail::imitation::{match_in_model, reward_free_explore, run_mbtail, Algorithm, ImitationResult};
use tabail::mdp::{bellman_value, l1_occupancy_distance, mixture_occupancy, occupancy, Dynamics, MixturePolicy};
use tabail::rng::stream;
use tabail::solvers::SolverConfig;
use tabail::trajectory::{sample_trajectories, DataSource, Dataset, Simulator};
use tabail::Error;

fn expert_data(env: &EnvBundle, m: usize, seed: u64) -> Dataset {
    sample_trajectories(&env.mdp, &env.expert, m, DataSource::Expert, &mut stream(seed, 99)).unwrap()
}

/// Mixture value as the weighted sum of component values.
fn mixture_value_by_parts(env: &EnvBundle, mix: &MixturePolicy) -> f64 {
    mix.components()
        .iter()
        .zip(mix.weights())
        .map(|(p, w)| w * bellman_value(&env.mdp, p, env.mdp.rewards()).unwrap())
        .sum()
}

fn check_result(env: &EnvBundle, algo: Algorithm, r: &ImitationResult, budget: usize) {
    let expert_value = bellman_value(&env.mdp, &env.expert, env.mdp.rewards()).unwrap();
    let gap = expert_value - mixture_value_by_parts(env, &r.policy);
    assert!((gap - r.value_gap).abs() <= 1e-10, "{algo}: reported {} recomputed {gap}", r.value_gap);
    let dist = l1_occupancy_distance(
        &occupancy(&env.mdp, &env.expert).unwrap(),
        &mixture_occupancy(&env.mdp, &r.policy).unwrap(),
    )
    .unwrap();
    assert!(r.value_gap <= dist + 1e-9, "{algo}: gap {} above distance {dist}", r.value_gap);
    assert!(r.value_gap >= -1e-9 && r.value_gap <= env.mdp.dims().horizon as f64 + 1e-9);
    let expected_interactions = if algo.needs_interactions() { budget } else { 0 };
    assert_eq!(r.interactions, expected_interactions, "{algo}");
}

#[test]
fn every_driver_reports_an_exact_gap() {
    let envs = [make_standard_imitation(8, 3, 4).unwrap(), make_reset_cliff(6, 3, 5, 20).unwrap()];
    let budget = 41;
    for env in &envs {
        let data = expert_data(env, 20, 1);
        for algo in Algorithm::ALL {
            let mut rng = stream(2, algo as u64);
            let r = run_algorithm(algo, env, &data, 60, Some(budget), true, &mut rng).unwrap();
            check_result(env, algo, &r, budget);
        }
    }
}

#[test]
fn perfect_model_and_exact_target_recover_the_expert() {
    let env = make_reset_cliff(5, 3, 4, 20).unwrap();
    let data = expert_data(&env, 10, 3);
    let exact = occupancy(&env.mdp, &env.expert).unwrap();
    let iterations = 400;
    let r = match_in_model(&env, &env.mdp, &exact, &SolverConfig::new(iterations), &data, 0).unwrap();
    let (h, s, a) = env.mdp.dims().shape();
    let bound = 2.0 * h as f64 * (2.0 * (s * a) as f64 / iterations as f64).sqrt();
    assert!(r.expert_l1 <= bound + 1e-9, "{} vs {bound}", r.expert_l1);
}

#[test]
fn mbtail_is_accurate_with_full_coverage() {
    let env = make_standard_imitation(4, 2, 3).unwrap();
    let data = expert_data(&env, 200, 4);
    let r = run_mbtail(&env, &data, 4001, &SolverConfig::new(2000), &mut stream(4, 1)).unwrap();
    assert_eq!(r.interactions, 4001);
    assert!(r.value_gap <= 0.05, "{}", r.value_gap);
}

#[test]
fn mbtail_rejects_tiny_budgets() {
    let env = make_standard_imitation(4, 2, 3).unwrap();
    let data = expert_data(&env, 4, 5);
    assert!(run_mbtail(&env, &data, 1, &SolverConfig::new(5), &mut stream(5, 1)).is_err());
}

#[test]
fn simulator_refuses_overdraw() {
    let env = make_standard_imitation(3, 2, 2).unwrap();
    let mut sim = Simulator::new(&env.mdp, 3);
    let mut rng = stream(6, 1);
    sim.rollouts(&env.expert, 3, &mut rng).unwrap();
    assert_eq!(sim.remaining(), 0);
    assert!(matches!(sim.episode(&env.expert, &mut rng), Err(Error::Budget { .. })));
}

#[test]
fn reward_free_model_evaluates_policies_accurately() {
    let mut r = rng(7);
    let mdp = random_mdp(&mut r, 3, 3, 2);
    let model = reward_free_explore(&mdp, 20_000, &mut stream(7, 1)).unwrap();
    for _ in 0..20 {
        let pi = random_policy(&mut r, mdp.dims());
        let truth = occupancy(&mdp, &pi).unwrap();
        let est = occupancy(&model, &pi).unwrap();
        let err = l1_occupancy_distance(&truth, &est).unwrap();
        assert!(err <= 0.1, "{err}");
    }
}
