//! Occupancy estimation error as the expert sample size grows: the empirical
//! estimate against the sample-split estimate that uses the known transitions.
//! Once every state appears in the data the split estimate is exact, so its
//! error falls off far faster than the square-root rate of the counts.
//!
//! ```bash
//! cargo run --release --example estimator_error
//! ```

use tabail::env::make_standard_imitation;
use tabail::estimators::{l1_estimation_error, mle_estimate, split_estimate_known};
use tabail::harness::{fit_loglog_slope, mean_std};
use tabail::mdp::{occupancy, Dynamics};
use tabail::rng::stream;
use tabail::trajectory::{sample_trajectories, split_dataset, DataSource};

fn main() -> tabail::Result<()> {
    let seeds = 10;
    let mut mle_points = Vec::new();
    let mut split_points = Vec::new();
    println!("{:>6} {:>12} {:>12}", "m", "mle", "split");
    let env = make_standard_imitation(50, 5, 10)?;
    let truth = occupancy(&env.mdp, &env.expert)?;
    for m in [10, 30, 100, 300] {
        let (mut mle, mut split) = (Vec::new(), Vec::new());
        for seed in 0..seeds {
            let mut rng = stream(seed, m as u64);
            let data = sample_trajectories(&env.mdp, &env.expert, m, DataSource::Expert, &mut rng)?;
            mle.push(l1_estimation_error(&mle_estimate(&data, env.mdp.dims())?, &truth)?);
            let halves = split_dataset(&data, &mut rng)?;
            split.push(l1_estimation_error(&split_estimate_known(&env.mdp, &halves)?, &truth)?);
        }
        let (mle_mean, split_mean) = (mean_std(&mle).0, mean_std(&split).0);
        println!("{m:>6} {mle_mean:>12.4} {split_mean:>12.4}");
        mle_points.push((m as f64, mle_mean));
        split_points.push((m as f64, split_mean.max(1e-12)));
    }
    println!("log-log slope: mle {:+.3}", fit_loglog_slope(&mle_points)?.slope);
    println!("log-log slope: split {:+.3}", fit_loglog_slope(&split_points)?.slope);
    Ok(())
}
