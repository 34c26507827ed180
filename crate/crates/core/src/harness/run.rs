use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{ExperimentSpec, GridPoint, SweepAxis};
use crate::env::EnvBundle;
use crate::error::{Error, Result};
use crate::imitation::{
    run_bc, run_fem, run_gail, run_gtal, run_mbtail, run_oal, run_tail, run_vail, Algorithm, ImitationResult, OalConfig,
};
use crate::mdp::ARITHMETIC_TOL;
use crate::rng::{stream, stream_id};
use crate::solvers::SolverConfig;
use crate::trajectory::{sample_trajectories_keyed, DataSource, Dataset};

/// Slack allowed in the check `value_gap ≤ Σ_h ‖P^{πE}_h − P^π_h‖₁`.
pub const SANDWICH_TOL: f64 = 1e-9;

/// One driver invocation. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    pub env: String,
    pub algo: Algorithm,
    pub seed: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub m: usize,
    pub interactions: usize,
    pub value_gap: f64,
    pub l1_error: Option<f64>,
    pub wall_ms: Option<f64>,
}

impl RunRecord {
    /// The value on the given sweep axis.
    pub fn axis_value(&self, axis: SweepAxis) -> usize {
        match axis {
            SweepAxis::Horizon => self.horizon,
            SweepAxis::ExpertM => self.m,
            SweepAxis::Interactions => self.interactions,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub master_seed: u64,
    /// Worker threads; `None` uses every available core.
    pub parallel: Option<usize>,
    /// Fill `wall_ms`. Off by default so that records are reproducible byte for byte.
    pub timing: bool,
    /// Write solver traces to `traces/*.jsonl`.
    pub traces: bool,
    /// Write each output policy to `policies/*.json`.
    pub dump_policies: bool,
    /// Seeds to run, overriding the spec.
    pub seeds: Option<usize>,
}

/// Everything a sweep produced.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<RunRecord>,
}

/// Key of the expert data stream for one seed. It excludes the grid point, so
/// datasets are nested across expert sample sizes and share initial states
/// across horizons.
fn data_key(spec: &ExperimentSpec, seed: usize) -> String {
    format!("{}/expert-data/{seed}", spec.id)
}

fn algo_stream_id(spec: &ExperimentSpec, algo: Algorithm, point: &GridPoint, seed: usize) -> u64 {
    stream_id(&[&spec.id, algo.name(), &point.index.to_string(), &seed.to_string()])
}

/// Runs one algorithm on one dataset.
pub fn run_algorithm(
    algo: Algorithm,
    env: &EnvBundle,
    data: &Dataset,
    iterations: usize,
    budget: Option<usize>,
    record_trace: bool,
    rng: &mut crate::rng::Stream,
) -> Result<ImitationResult> {
    let cfg = SolverConfig {
        iterations,
        record_trace,
        ..SolverConfig::new(iterations)
    };
    let need_budget = || budget.ok_or_else(|| Error::arg(format!("`{algo}` needs an interaction budget")));
    match algo {
        Algorithm::Bc => run_bc(env, data),
        Algorithm::Vail => run_vail(env, data, &cfg),
        Algorithm::Tail => run_tail(env, data, &cfg, rng),
        Algorithm::Fem => run_fem(env, data, &cfg),
        Algorithm::Gtal => run_gtal(env, data, &cfg),
        Algorithm::Gail => run_gail(env, data, &cfg, None),
        Algorithm::Oal => {
            let oal = OalConfig {
                record_trace,
                ..OalConfig::new(need_budget()?)
            };
            run_oal(env, data, &oal, rng)
        }
        Algorithm::Mbtail => run_mbtail(env, data, need_budget()?, &cfg, rng),
    }
}

fn artifact_name(spec: &ExperimentSpec, algo: Algorithm, point: &GridPoint, seed: usize) -> String {
    format!("{}_{}_g{}_s{}", spec.id, algo, point.index, seed)
}

fn write_new(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct CellJob<'a> {
    point: GridPoint,
    env: &'a EnvBundle,
    seed: usize,
}

fn run_cell(spec: &ExperimentSpec, job: &CellJob<'_>, opts: &SweepOptions, out_dir: Option<&Path>) -> Result<Vec<RunRecord>> {
    let point = &job.point;
    let key = data_key(spec, job.seed);
    let data = sample_trajectories_keyed(
        &job.env.mdp,
        &job.env.expert,
        point.expert_m,
        DataSource::Expert,
        opts.master_seed,
        &key,
    )?;
    let mut records = Vec::new();
    for &algo in &spec.algorithms {
        // Without interactions the result does not depend on the budget.
        if spec.sweep.axis == SweepAxis::Interactions && !algo.needs_interactions() && point.index > 0 {
            continue;
        }
        let mut rng = stream(opts.master_seed, algo_stream_id(spec, algo, point, job.seed));
        let start = Instant::now();
        let iterations = spec.iterations_for(algo, point);
        let result = run_algorithm(algo, job.env, &data, iterations, point.budget, opts.traces, &mut rng)?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        if result.value_gap > result.expert_l1 + SANDWICH_TOL {
            return Err(Error::Check(format!(
                "{algo} at grid point {} seed {}: value gap {} exceeds occupancy distance {}",
                point.index, job.seed, result.value_gap, result.expert_l1
            )));
        }
        if result.value_gap < -ARITHMETIC_TOL * 10.0 {
            return Err(Error::Check(format!("{algo}: negative value gap {}", result.value_gap)));
        }
        if let Some(dir) = out_dir {
            let name = artifact_name(spec, algo, point, job.seed);
            if let Some(trace) = result.trace.as_ref().filter(|_| opts.traces) {
                let mut buf = Vec::new();
                trace.write_jsonl(&mut buf).map_err(|e| Error::io(dir, e))?;
                write_new(&dir.join("traces").join(format!("{name}.jsonl")), &buf)?;
            }
            if opts.dump_policies {
                let json = serde_json::to_vec(&result.policy)?;
                write_new(&dir.join("policies").join(format!("{name}.json")), &json)?;
            }
        }
        records.push(RunRecord {
            experiment: spec.id.clone(),
            env: job.env.name.clone(),
            algo,
            seed: job.seed,
            horizon: point.horizon,
            m: point.expert_m,
            interactions: result.interactions,
            value_gap: result.value_gap,
            l1_error: Some(result.expert_l1),
            wall_ms: opts.timing.then_some(elapsed),
        });
    }
    Ok(records)
}

/// Runs every grid point × seed × algorithm cell. Records come back sorted by
/// (algorithm, grid index, seed) regardless of scheduling.
///
/// When `out_dir` is given, traces and policies are written there as they are produced;
/// use [`write_records_csv`] for the records themselves.
pub fn run_sweep(spec: &ExperimentSpec, opts: &SweepOptions, out_dir: Option<&Path>) -> Result<SweepOutput> {
    spec.validate()?;
    let seeds = opts.seeds.unwrap_or(spec.seeds);
    if seeds == 0 {
        return Err(Error::arg("at least one seed is required"));
    }
    let grid = spec.grid();
    let envs = grid
        .iter()
        .map(|g| spec.env.kind.build(spec.env.states, spec.env.actions, g.horizon, g.expert_m))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<CellJob<'_>> = grid
        .iter()
        .zip(&envs)
        .flat_map(|(g, env)| (0..seeds).map(move |seed| CellJob { point: *g, env, seed }))
        .collect();

    let threads = opts.parallel.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::arg(format!("cannot start worker pool: {e}")))?;
    let per_cell: Vec<Result<Vec<RunRecord>>> =
        pool.install(|| jobs.par_iter().map(|job| run_cell(spec, job, opts, out_dir)).collect());

    let mut indexed = Vec::new();
    for (job, cell) in jobs.iter().zip(per_cell) {
        for r in cell? {
            indexed.push(((r.env.clone(), r.algo, job.point.index, job.seed), r));
        }
    }
    indexed.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(SweepOutput {
        records: indexed.into_iter().map(|(_, r)| r).collect(),
    })
}

/// Serializes records as CSV with the fixed column order.
pub fn records_to_csv(records: &[RunRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| Error::Serde(e.to_string()))?;
    }
    if records.is_empty() {
        w.write_record(CSV_HEADER).map_err(|e| Error::Serde(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Serde(e.to_string()))
}

pub const CSV_HEADER: [&str; 10] = [
    "experiment",
    "env",
    "algo",
    "seed",
    "H",
    "m",
    "interactions",
    "value_gap",
    "l1_error",
    "wall_ms",
];

pub fn read_records_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::config(path.display().to_string(), e.to_string())))
        .collect()
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp: PathBuf = dir.join(format!(".{file_name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_records_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    write_atomic(path, &records_to_csv(records)?)
}
