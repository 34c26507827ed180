//! Exact occupancy measures, the two ways of computing a value, and value
//! iteration on a small Reset Cliff instance.
//!
//! ```bash
//! cargo run --example occupancy_and_values
//! ```

use tabail::env::make_reset_cliff;
use tabail::mdp::{
    bellman_value, l1_occupancy_distance, occupancy, value_dual, value_iteration, Dynamics, Policy,
};

fn main() -> tabail::Result<()> {
    let env = make_reset_cliff(6, 3, 5, 20)?;
    let rewards = env.mdp.rewards();

    let expert_occ = occupancy(&env.mdp, &env.expert)?;
    println!("expert state marginals:");
    for h in 0..env.mdp.dims().horizon {
        let marginal: Vec<String> = expert_occ.state_marginal(h).iter().map(|p| format!("{p:.3}")).collect();
        println!("  h={h}: [{}]", marginal.join(", "));
    }

    // The dual form sums occupancy times reward, the Bellman form recurses backwards.
    let uniform = Policy::uniform(env.mdp.dims());
    for (name, pi) in [("expert", &env.expert), ("uniform", &uniform)] {
        let dual = value_dual(&occupancy(&env.mdp, pi)?, rewards)?;
        let bellman = bellman_value(&env.mdp, pi, rewards)?;
        println!("{name:>8}: dual {dual:.6}  bellman {bellman:.6}");
    }

    let (optimal, best) = value_iteration(&env.mdp, rewards)?;
    let gap_to_expert = l1_occupancy_distance(&occupancy(&env.mdp, &optimal)?, &expert_occ)?;
    println!("optimal value {best:.6}, occupancy distance to the expert {gap_to_expert:.2e}");
    Ok(())
}
