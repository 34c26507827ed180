//! The two benchmark environments and what a cheap imitator looks like on each.
//!
//! ```bash
//! cargo run --example environments
//! ```

use tabail::env::{make_reset_cliff, make_standard_imitation, EnvBundle};
use tabail::imitation::run_bc;
use tabail::mdp::{bellman_value, Dynamics, Policy};
use tabail::rng::stream;
use tabail::trajectory::{sample_trajectories, DataSource};

fn describe(env: &EnvBundle, m: usize) -> tabail::Result<()> {
    let (h, s, a) = env.mdp.dims().shape();
    let rewards = env.mdp.rewards();
    let expert = bellman_value(&env.mdp, &env.expert, rewards)?;
    let uniform = bellman_value(&env.mdp, &Policy::uniform(env.mdp.dims()), rewards)?;
    let data = sample_trajectories(&env.mdp, &env.expert, m, DataSource::Expert, &mut stream(1, 0))?;
    let bc = run_bc(env, &data)?;
    println!("{} (H={h}, S={s}, A={a})", env.name);
    println!("  expert value {expert:.3}, uniform value {uniform:.3}");
    println!("  behavioral cloning from {m} trajectories: gap {:.3}", bc.value_gap);
    Ok(())
}

fn main() -> tabail::Result<()> {
    describe(&make_standard_imitation(20, 4, 10)?, 20)?;
    // Reset Cliff puts mass 1/(m+1) on each rare state, so some stay unseen in the data.
    let m = 20;
    describe(&make_reset_cliff(20, 4, 10, m)?, m)?;
    Ok(())
}
