//! The two benchmark MDPs and their deterministic experts.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Dims, Policy, StepKernel, TabularMdp};

/// An environment together with its expert policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvBundle {
    pub name: String,
    pub mdp: TabularMdp,
    pub expert: Policy,
}

/// Every state is absorbing and only the expert action earns reward. The
/// initial distribution is uniform, so every policy has a uniform state
/// marginal at every step.
///
/// The expert takes action `s mod |A|` in state `s`.
pub fn make_standard_imitation(num_states: usize, num_actions: usize, horizon: usize) -> Result<EnvBundle> {
    if num_actions < 2 {
        return Err(Error::arg("standard imitation needs at least 2 actions"));
    }
    let dims = Dims::new(horizon, num_states, num_actions)?;
    let rows = (0..num_states * num_actions)
        .map(|r| vec![(r / num_actions, 1.0)])
        .collect();
    let kernel = StepKernel::from_rows(num_states, num_actions, rows)?;
    let reward = Array2::from_shape_fn((num_states, num_actions), |(s, a)| {
        if a == s % num_actions {
            1.0
        } else {
            0.0
        }
    });
    let rho = vec![1.0 / num_states as f64; num_states];
    let mdp = TabularMdp::stationary(rho, kernel, &reward, horizon)?;
    let expert = Policy::deterministic(dims, &Array2::from_shape_fn((horizon, num_states), |(_, s)| s % num_actions))?;
    Ok(EnvBundle {
        name: "standard_imitation".into(),
        mdp,
        expert,
    })
}

/// Initial distribution of Reset Cliff for an expert sample size `m`:
/// `(1/(m+1), …, 1/(m+1), 1 − (|S|−2)/(m+1), 0)`.
pub fn reset_cliff_initial_dist(num_states: usize, m_expert: usize) -> Result<Vec<f64>> {
    if num_states < 3 {
        return Err(Error::arg("reset cliff needs at least 3 states"));
    }
    if m_expert + 3 < num_states {
        return Err(Error::arg(format!(
            "m_expert must be at least |S| - 3 = {} so that the initial distribution is valid, got {m_expert}",
            num_states - 3
        )));
    }
    let rare = 1.0 / (m_expert as f64 + 1.0);
    let mut rho = vec![rare; num_states];
    rho[num_states - 2] = 1.0 - (num_states - 2) as f64 * rare;
    rho[num_states - 1] = 0.0;
    Ok(rho)
}

/// The expert action (index 0) earns +1 and resets the state according to `ρ`;
/// any other action earns 0 and falls into the absorbing bad state (the last index).
pub fn make_reset_cliff(num_states: usize, num_actions: usize, horizon: usize, m_expert: usize) -> Result<EnvBundle> {
    let rho = reset_cliff_initial_dist(num_states, m_expert)?;
    let dims = Dims::new(horizon, num_states, num_actions)?;
    let bad = num_states - 1;
    let reset_row: Vec<(usize, f64)> = rho.iter().copied().enumerate().filter(|&(_, p)| p > 0.0).collect();
    let rows = (0..num_states * num_actions)
        .map(|r| {
            let (s, a) = (r / num_actions, r % num_actions);
            if s != bad && a == 0 {
                reset_row.clone()
            } else {
                vec![(bad, 1.0)]
            }
        })
        .collect();
    let kernel = StepKernel::from_rows(num_states, num_actions, rows)?;
    let reward = Array2::from_shape_fn((num_states, num_actions), |(s, a)| {
        if s != bad && a == 0 {
            1.0
        } else {
            0.0
        }
    });
    let mdp = TabularMdp::stationary(rho, kernel, &reward, horizon)?;
    let expert = Policy::deterministic(dims, &Array2::zeros((horizon, num_states)))?;
    Ok(EnvBundle {
        name: "reset_cliff".into(),
        mdp,
        expert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{bellman_value, occupancy, Dynamics};
    use approx::assert_abs_diff_eq;

    #[test]
    fn standard_imitation_layout() {
        let env = make_standard_imitation(4, 2, 3).unwrap();
        assert_eq!(env.mdp.initial_dist(), &[0.25; 4]);
        for h in 0..3 {
            for s in 0..4 {
                for a in 0..2 {
                    let row: Vec<_> = env.mdp.kernel(h).row(s, a).collect();
                    assert_eq!(row, vec![(s, 1.0)]);
                }
            }
        }
        assert_abs_diff_eq!(
            bellman_value(&env.mdp, &env.expert, env.mdp.rewards()).unwrap(),
            3.0,
            epsilon = 1e-12
        );
        assert!(env.expert.is_deterministic());
    }

    #[test]
    fn standard_imitation_rejects_bad_sizes() {
        assert!(make_standard_imitation(0, 2, 3).is_err());
        assert!(make_standard_imitation(3, 1, 3).is_err());
        assert!(make_standard_imitation(3, 2, 0).is_err());
    }

    #[test]
    fn reset_cliff_initial_distribution() {
        let env = make_reset_cliff(5, 3, 4, 9).unwrap();
        let rho = env.mdp.initial_dist();
        let expected = [0.1, 0.1, 0.1, 0.7, 0.0];
        for (x, y) in rho.iter().zip(expected) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn reset_cliff_bad_state_absorbs() {
        let env = make_reset_cliff(5, 3, 4, 9).unwrap();
        for a in 0..3 {
            assert_eq!(env.mdp.kernel(0).row(4, a).collect::<Vec<_>>(), vec![(4, 1.0)]);
            assert_eq!(env.mdp.rewards()[[0, 4, a]], 0.0);
        }
        assert_eq!(env.mdp.kernel(1).row(2, 1).collect::<Vec<_>>(), vec![(4, 1.0)]);
    }

    #[test]
    fn reset_cliff_expert_earns_horizon_and_avoids_bad_state() {
        let env = make_reset_cliff(6, 4, 7, 20).unwrap();
        assert_abs_diff_eq!(
            bellman_value(&env.mdp, &env.expert, env.mdp.rewards()).unwrap(),
            7.0,
            epsilon = 1e-12
        );
        let occ = occupancy(&env.mdp, &env.expert).unwrap();
        for h in 0..7 {
            assert_eq!(occ.state_marginal(h)[5], 0.0);
        }
    }

    #[test]
    fn reset_cliff_m_lower_bound() {
        let err = make_reset_cliff(10, 2, 3, 6).unwrap_err();
        assert!(err.to_string().contains("m_expert"));
        assert!(make_reset_cliff(10, 2, 3, 7).is_ok());
        assert!(make_reset_cliff(2, 2, 3, 7).is_err());
    }
}
