//! Declarative sweeps, their CSV/JSON artifacts, and log-log slope summaries.

mod estimation;
mod run;
mod spec;
mod summary;

pub use estimation::{
    estimation_to_csv, run_estimation_study, summarize_estimation, EstimationRecord, EstimationStudy, EstimatorKind,
};
pub use run::{
    read_records_csv, records_to_csv, run_algorithm, run_sweep, write_atomic, write_records_csv, RunRecord, SweepOptions,
    SweepOutput, CSV_HEADER, SANDWICH_TOL,
};
pub use spec::{
    preset, EnvKind, EnvSpec, ExperimentSpec, GridPoint, IterationRule, SweepAxis, SweepSpec, PRESET_NAMES,
};
pub use summary::{fit_loglog_slope, mean_std, summarize, summarize_points, GroupStats, SlopeEntry, SlopeFit, Summary};

use std::path::Path;

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Serialize)]
struct Manifest<'a, S: Serialize> {
    tool: &'static str,
    version: &'static str,
    master_seed: u64,
    seeds: usize,
    records: usize,
    spec: &'a S,
}

/// Runs `spec` and writes `records.csv`, `summary.json` and `manifest.json` to `out_dir`.
pub fn run_and_write(spec: &ExperimentSpec, opts: &SweepOptions, out_dir: &Path) -> Result<(SweepOutput, Summary)> {
    let out = run_sweep(spec, opts, Some(out_dir))?;
    let summary = summarize(&spec.id, spec.sweep.axis, &out.records)?;
    write_records_csv(&out_dir.join("records.csv"), &out.records)?;
    write_json(&out_dir.join("summary.json"), &summary)?;
    write_manifest_for(
        &out_dir.join("manifest.json"),
        spec,
        opts.master_seed,
        opts.seeds.unwrap_or(spec.seeds),
        out.records.len(),
    )?;
    Ok((out, summary))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_manifest_for<S: Serialize>(path: &Path, spec: &S, master_seed: u64, seeds: usize, records: usize) -> Result<()> {
    write_json(
        path,
        &Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            master_seed,
            seeds,
            records,
            spec,
        },
    )
}
