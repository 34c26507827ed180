//! Learning without a simulator model: the model-based method explores first
//! and then matches in the learned model, while the online baseline learns
//! as it goes. Behavioral cloning needs no interactions at all.
//!
//! ```bash
//! cargo run --release --example unknown_transitions
//! ```

use tabail::env::make_reset_cliff;
use tabail::imitation::{run_bc, run_mbtail, run_oal, OalConfig};
use tabail::rng::stream;
use tabail::solvers::SolverConfig;
use tabail::trajectory::{sample_trajectories, DataSource};

fn main() -> tabail::Result<()> {
    let m = 50;
    let env = make_reset_cliff(10, 3, 10, m)?;
    let data = sample_trajectories(&env.mdp, &env.expert, m, DataSource::Expert, &mut stream(0, 0))?;
    println!("behavioral cloning gap {:.3}", run_bc(&env, &data)?.value_gap);
    println!("{:>8} {:>10} {:>10}", "budget", "mbtail", "oal");
    for budget in [500, 2000, 8000] {
        let mb = run_mbtail(&env, &data, budget, &SolverConfig::new(500), &mut stream(1, budget as u64))?;
        let oal = run_oal(&env, &data, &OalConfig::new(budget), &mut stream(2, budget as u64))?;
        println!("{budget:>8} {:>10.3} {:>10.3}", mb.value_gap, oal.value_gap);
    }
    Ok(())
}
