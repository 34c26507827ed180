#![allow(dead_code)]

use ndarray::{Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabail::mdp::{Dims, Dynamics, Policy, TabularMdp};
use tabail::trajectory::Trajectory;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A probability vector with roughly a third of its entries zeroed.
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.33) { 0.0 } else { rng.random::<f64>() + 1e-3 })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[rng.random_range(0..n)] = 1.0;
    }
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

pub fn random_mdp(rng: &mut ChaCha8Rng, horizon: usize, states: usize, actions: usize) -> TabularMdp {
    let rho = random_simplex(rng, states);
    let mut p = Array4::zeros((horizon, states, actions, states));
    for h in 0..horizon {
        for s in 0..states {
            for a in 0..actions {
                for (t, q) in random_simplex(rng, states).into_iter().enumerate() {
                    p[[h, s, a, t]] = q;
                }
            }
        }
    }
    let r = Array3::from_shape_fn((horizon, states, actions), |_| rng.random::<f64>());
    TabularMdp::from_dense(rho, &p, r).unwrap()
}

pub fn random_policy(rng: &mut ChaCha8Rng, dims: Dims) -> Policy {
    let mut t = dims.zeros();
    for h in 0..dims.horizon {
        for s in 0..dims.num_states {
            for (a, q) in random_simplex(rng, dims.num_actions).into_iter().enumerate() {
                t[[h, s, a]] = q;
            }
        }
    }
    Policy::from_table(t).unwrap()
}

pub fn random_deterministic_policy(rng: &mut ChaCha8Rng, dims: Dims) -> Policy {
    let actions = (0..dims.horizon * dims.num_states)
        .map(|_| rng.random_range(0..dims.num_actions))
        .collect();
    Policy::from_actions(dims, actions).unwrap()
}

/// Every deterministic policy of `dims`, in lexicographic order of the action table.
pub fn all_deterministic_policies(dims: Dims) -> Vec<Policy> {
    let cells = dims.horizon * dims.num_states;
    let count = dims.num_actions.pow(cells as u32);
    (0..count)
        .map(|mut code| {
            let actions = (0..cells)
                .map(|_| {
                    let a = code % dims.num_actions;
                    code /= dims.num_actions;
                    a
                })
                .collect();
            Policy::from_actions(dims, actions).unwrap()
        })
        .collect()
}

/// Occupancy by summing the probability of every full trajectory.
pub fn brute_force_occupancy(mdp: &TabularMdp, policy: &Policy) -> Array3<f64> {
    let dims = mdp.dims();
    let mut occ = dims.zeros();
    fn walk(mdp: &TabularMdp, policy: &Policy, h: usize, s: usize, prob: f64, occ: &mut Array3<f64>) {
        let dims = mdp.dims();
        for a in 0..dims.num_actions {
            let pa = prob * policy.prob(h, s, a);
            if pa == 0.0 {
                continue;
            }
            occ[[h, s, a]] += pa;
            if h + 1 < dims.horizon {
                for t in 0..dims.num_states {
                    let q = mdp.transition_prob(h, s, a, t);
                    if q > 0.0 {
                        walk(mdp, policy, h + 1, t, pa * q, occ);
                    }
                }
            }
        }
    }
    for (s, &p) in mdp.initial_dist().iter().enumerate() {
        if p > 0.0 {
            walk(mdp, policy, 0, s, p, &mut occ);
        }
    }
    occ
}

/// Probability that `policy` generates the first `len` state-action pairs of `tr`.
pub fn prefix_probability(mdp: &TabularMdp, policy: &Policy, tr: &Trajectory, len: usize) -> f64 {
    let mut p = mdp.initial_dist()[tr.state(0)];
    for h in 0..len {
        p *= policy.prob(h, tr.state(h), tr.action(h));
        if h + 1 < len {
            p *= mdp.transition_prob(h, tr.state(h), tr.action(h), tr.state(h + 1));
        }
    }
    p
}

pub fn max_abs_diff(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
