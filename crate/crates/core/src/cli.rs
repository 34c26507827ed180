//! Command-line front end. Machine-readable output goes to stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{
    estimation_to_csv, read_records_csv, run_algorithm, run_and_write, run_estimation_study, summarize,
    summarize_estimation, write_atomic, write_json, write_manifest_for, EnvKind, EstimationStudy, EstimatorKind,
    ExperimentSpec, RunRecord, SweepAxis, SweepOptions, PRESET_NAMES,
};
use crate::imitation::Algorithm;
use crate::rng::{stream, stream_id};
use crate::trajectory::{sample_trajectories, DataSource};

#[derive(Debug, Parser)]
#[command(name = "tabail", version, about = "Tabular imitation learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a benchmark environment and its expert as JSON.
    Env(EnvCmd),
    /// Run one algorithm once and print its record as JSON.
    Run(RunCmd),
    /// Run a sweep from a preset or spec file and write records.csv, summary.json and manifest.json.
    Sweep(SweepCmd),
    /// Fit log-log slopes to an existing records.csv and print the summary as JSON.
    Slopes(SlopesCmd),
    /// Measure the l1 error of the occupancy estimators across an expert-sample grid.
    EstimatorError(EstimatorErrorCmd),
}

#[derive(Debug, Args)]
pub struct EnvFlags {
    /// standard-imitation or reset-cliff.
    #[arg(long = "env", default_value = "standard-imitation")]
    pub env: String,
    /// Number of states.
    #[arg(long = "S", default_value_t = 50)]
    pub states: usize,
    /// Number of actions.
    #[arg(long = "A", default_value_t = 5)]
    pub actions: usize,
    /// Horizon.
    #[arg(long = "H", default_value_t = 10)]
    pub horizon: usize,
}

impl EnvFlags {
    fn kind(&self) -> Result<EnvKind> {
        self.env.parse().map_err(|_| Error::arg(format!("--env: unknown environment `{}`", self.env)))
    }
}

#[derive(Debug, Args)]
pub struct EnvCmd {
    #[command(flatten)]
    pub env: EnvFlags,
    /// Expert sample size (shapes the Reset Cliff initial distribution).
    #[arg(long, default_value_t = 100, allow_negative_numbers = true)]
    pub m: usize,
}

#[derive(Debug, Args)]
pub struct RunCmd {
    #[command(flatten)]
    pub env: EnvFlags,
    /// bc, vail, tail, fem, gtal, gail, oal or mbtail.
    #[arg(long)]
    pub algo: String,
    /// Number of expert trajectories.
    #[arg(long, allow_negative_numbers = true)]
    pub m: usize,
    /// Solver iterations (T, or K for OAL when no budget is given).
    #[arg(long = "T", default_value_t = 500, allow_negative_numbers = true)]
    pub iterations: usize,
    /// Environment episodes for oal and mbtail.
    #[arg(long, allow_negative_numbers = true)]
    pub budget: Option<usize>,
    /// Master seed.
    #[arg(long, env = "TAB_AIL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Also write the output policy as JSON to this file.
    #[arg(long)]
    pub dump_policy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    /// Preset name or path to a .toml / .json spec.
    pub spec: String,
    /// Output directory (defaults to the spec's output_dir, then ./out/<id>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, env = "TAB_AIL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, allow_negative_numbers = true)]
    pub parallel: Option<usize>,
    /// Override the number of seeds.
    #[arg(long, allow_negative_numbers = true)]
    pub seeds: Option<usize>,
    /// Record wall-clock time per run (makes records.csv non-reproducible).
    #[arg(long)]
    pub timing: bool,
    /// Write solver traces to traces/*.jsonl.
    #[arg(long)]
    pub traces: bool,
    /// Write every output policy to policies/*.json.
    #[arg(long)]
    pub dump_policies: bool,
}

#[derive(Debug, Args)]
pub struct SlopesCmd {
    /// Path to records.csv.
    pub records: PathBuf,
    /// horizon, expert_m or interactions (inferred when omitted).
    #[arg(long)]
    pub axis: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimatorErrorCmd {
    #[command(flatten)]
    pub env: EnvFlags,
    /// Comma-separated expert sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 200, 400, 800, 1600, 3200])]
    pub m_grid: Vec<usize>,
    /// Comma-separated estimators: mle, split.
    #[arg(long, value_delimiter = ',', default_values_t = ["mle".to_string(), "split".to_string()])]
    pub estimators: Vec<String>,
    #[arg(long, default_value_t = 20, allow_negative_numbers = true)]
    pub seeds: usize,
    /// Output directory for estimates.csv, summary.json and manifest.json.
    #[arg(long, default_value = "out/estimator-error")]
    pub out: PathBuf,
    /// Master seed.
    #[arg(long, env = "TAB_AIL_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, allow_negative_numbers = true)]
    pub parallel: Option<usize>,
    /// Write each estimate to estimates/*.json.
    #[arg(long)]
    pub dump_estimates: bool,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Env(c) => cmd_env(c),
        Command::Run(c) => cmd_run(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Slopes(c) => cmd_slopes(c),
        Command::EstimatorError(c) => cmd_estimator_error(c),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}

fn cmd_env(c: EnvCmd) -> Result<()> {
    let env = c.env.kind()?.build(c.env.states, c.env.actions, c.env.horizon, c.m)?;
    print_json(&env)
}

fn cmd_run(c: RunCmd) -> Result<()> {
    let algo: Algorithm = c.algo.parse().map_err(|_| Error::arg(format!("--algo: unknown algorithm `{}`", c.algo)))?;
    if c.m == 0 {
        return Err(Error::arg("--m must be positive"));
    }
    if algo.needs_interactions() && c.budget.is_none() {
        return Err(Error::arg(format!("--budget is required for {algo}")));
    }
    let env = c.env.kind()?.build(c.env.states, c.env.actions, c.env.horizon, c.m)?;
    let mut data_rng = stream(c.seed, stream_id(&["run", "expert-data"]));
    let data = sample_trajectories(&env.mdp, &env.expert, c.m, DataSource::Expert, &mut data_rng)?;
    let mut rng = stream(c.seed, stream_id(&["run", algo.name()]));
    let result = run_algorithm(algo, &env, &data, c.iterations, c.budget, false, &mut rng)?;
    if let Some(path) = &c.dump_policy {
        write_json(path, &result.policy)?;
    }
    print_json(&RunRecord {
        experiment: "run".into(),
        env: env.name.clone(),
        algo,
        seed: c.seed as usize,
        horizon: c.env.horizon,
        m: c.m,
        interactions: result.interactions,
        value_gap: result.value_gap,
        l1_error: Some(result.expert_l1),
        wall_ms: None,
    })
}

fn cmd_sweep(c: SweepCmd) -> Result<()> {
    let spec = ExperimentSpec::resolve(&c.spec)?;
    if c.parallel == Some(0) || c.seeds == Some(0) {
        return Err(Error::arg("--parallel and --seeds must be positive"));
    }
    let out_dir = c
        .out
        .or_else(|| spec.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&spec.id));
    let opts = SweepOptions {
        master_seed: c.seed,
        parallel: c.parallel,
        timing: c.timing,
        traces: c.traces,
        dump_policies: c.dump_policies,
        seeds: c.seeds,
    };
    eprintln!(
        "sweep `{}`: {} grid points x {} algorithms x {} seeds -> {}",
        spec.id,
        spec.sweep.values.len(),
        spec.algorithms.len(),
        opts.seeds.unwrap_or(spec.seeds),
        out_dir.display()
    );
    let (out, summary) = run_and_write(&spec, &opts, &out_dir)?;
    for s in &summary.slopes {
        eprintln!("  {:<20} {:<7} slope {:+.3} (r2 {:.3})", s.env, s.algo, s.fit.slope, s.fit.r_squared);
    }
    eprintln!("wrote {} records", out.records.len());
    Ok(())
}

fn infer_axis(records: &[RunRecord]) -> SweepAxis {
    let distinct = |f: fn(&RunRecord) -> usize| {
        let mut v: Vec<usize> = records.iter().map(f).collect();
        v.sort_unstable();
        v.dedup();
        v.len()
    };
    if distinct(|r| r.horizon) > 1 {
        SweepAxis::Horizon
    } else if distinct(|r| r.m) > 1 {
        SweepAxis::ExpertM
    } else {
        SweepAxis::Interactions
    }
}

fn cmd_slopes(c: SlopesCmd) -> Result<()> {
    if !c.records.exists() {
        return Err(Error::config(c.records.display().to_string(), "no such records file"));
    }
    let records = read_records_csv(&c.records)?;
    if records.is_empty() {
        return Err(Error::config(c.records.display().to_string(), "no records"));
    }
    let axis = match c.axis.as_deref() {
        None => infer_axis(&records),
        Some("horizon" | "H") => SweepAxis::Horizon,
        Some("expert_m" | "m") => SweepAxis::ExpertM,
        Some("interactions") => SweepAxis::Interactions,
        Some(other) => return Err(Error::arg(format!("--axis: unknown axis `{other}`"))),
    };
    let summary = summarize(&records[0].experiment, axis, &records)?;
    print_json(&summary)
}

fn cmd_estimator_error(c: EstimatorErrorCmd) -> Result<()> {
    let estimators = c
        .estimators
        .iter()
        .map(|s| s.parse::<EstimatorKind>().map_err(|_| Error::arg(format!("--estimators: unknown estimator `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    let study = EstimationStudy {
        id: "estimator-error".into(),
        env: c.env.kind()?,
        states: c.env.states,
        actions: c.env.actions,
        horizon: c.env.horizon,
        m_values: c.m_grid,
        estimators,
        seeds: c.seeds,
    };
    let (records, estimates) = run_estimation_study(&study, c.seed, c.parallel, c.dump_estimates)?;
    let summary = summarize_estimation(&study.id, &records)?;
    write_atomic(&c.out.join("estimates.csv"), &estimation_to_csv(&records)?)?;
    write_json(&c.out.join("summary.json"), &summary)?;
    write_manifest_for(&c.out.join("manifest.json"), &study, c.seed, study.seeds, records.len())?;
    for (r, est) in &estimates {
        let name = format!("{}_m{}_s{}.json", r.estimator, r.m, r.seed);
        write_json(&c.out.join("estimates").join(name), est)?;
    }
    for s in &summary.slopes {
        eprintln!("  {:<8} slope {:+.3} (r2 {:.3})", s.algo, s.fit.slope, s.fit.r_squared);
    }
    print_json(&summary)
}

/// Names accepted by `sweep` in place of a spec file.
pub fn preset_names() -> &'static [&'static str] {
    &PRESET_NAMES
}
