//! A declarative sweep written to disk: `records.csv`, `summary.json` and
//! `manifest.json`, plus the fitted log-log slopes.
//!
//! ```bash
//! cargo run --release --example sweep -- /tmp/sweep-out
//! ```

use std::path::PathBuf;

use tabail::harness::{run_and_write, ExperimentSpec, SweepOptions};

const SPEC: &str = r#"
id = "example-sweep"
algorithms = ["bc", "vail", "tail"]
seeds = 4

[iterations]
vail = "20H"
tail = "20H"

[env]
kind = "standard_imitation"
states = 30
actions = 3
horizon = 5

[sweep]
axis = "expert_m"
values = [10, 30, 100]
"#;

fn main() -> tabail::Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tabail-example-sweep"));
    let spec = ExperimentSpec::from_toml_str(SPEC, "example")?;
    let (out, summary) = run_and_write(&spec, &SweepOptions::default(), &out_dir)?;
    println!("{} records written to {}", out.records.len(), out_dir.display());
    for entry in &summary.slopes {
        println!("{:>6} slope {:+.3} (r² {:.3})", entry.algo, entry.fit.slope, entry.fit.r_squared);
    }
    Ok(())
}
