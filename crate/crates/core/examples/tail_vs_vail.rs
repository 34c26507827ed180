//! Matching the empirical occupancy against matching the sample-split estimate
//! on Standard Imitation, as the number of expert trajectories grows.
//!
//! ```bash
//! cargo run --release --example tail_vs_vail
//! ```

use tabail::env::make_standard_imitation;
use tabail::harness::mean_std;
use tabail::imitation::{run_tail, run_vail};
use tabail::rng::stream;
use tabail::solvers::SolverConfig;
use tabail::trajectory::{sample_trajectories, DataSource};

fn main() -> tabail::Result<()> {
    let env = make_standard_imitation(50, 4, 5)?;
    let cfg = SolverConfig::new(200);
    println!("{:>6} {:>10} {:>10}", "m", "vail", "tail");
    for m in [10, 40, 160] {
        let (mut vail, mut tail) = (Vec::new(), Vec::new());
        for seed in 0..5 {
            let mut rng = stream(seed, m as u64);
            let data = sample_trajectories(&env.mdp, &env.expert, m, DataSource::Expert, &mut rng)?;
            vail.push(run_vail(&env, &data, &cfg)?.value_gap);
            tail.push(run_tail(&env, &data, &cfg, &mut rng)?.value_gap);
        }
        println!("{m:>6} {:>10.4} {:>10.4}", mean_std(&vail).0, mean_std(&tail).0);
    }
    Ok(())
}
