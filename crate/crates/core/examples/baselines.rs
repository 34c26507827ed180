//! Every imitation method on one Reset Cliff dataset, with the value gap,
//! the occupancy distance that bounds it, and the interactions spent.
//!
//! ```bash
//! cargo run --release --example baselines
//! ```

use tabail::env::make_reset_cliff;
use tabail::harness::run_algorithm;
use tabail::imitation::Algorithm;
use tabail::rng::stream;
use tabail::trajectory::{sample_trajectories, DataSource};

fn main() -> tabail::Result<()> {
    let m = 30;
    let env = make_reset_cliff(10, 3, 8, m)?;
    let data = sample_trajectories(&env.mdp, &env.expert, m, DataSource::Expert, &mut stream(0, 0))?;
    let iterations = 100;
    let budget = 2000;
    println!("{:>8} {:>10} {:>10} {:>13}", "method", "gap", "distance", "interactions");
    for algo in Algorithm::ALL {
        let r = run_algorithm(algo, &env, &data, iterations, Some(budget), false, &mut stream(0, algo as u64 + 1))?;
        println!("{:>8} {:>10.4} {:>10.4} {:>13}", algo.name(), r.value_gap, r.expert_l1, r.interactions);
    }
    Ok(())
}
