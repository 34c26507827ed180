use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{EnvKind, SweepAxis};
use super::summary::{summarize_points, Point, Summary};
use crate::error::{Error, Result};
use crate::estimators::{l1_estimation_error, mle_estimate, split_estimate_known, OccupancyEstimate};
use crate::mdp::{occupancy, Dynamics};
use crate::rng::{stream, stream_id};
use crate::trajectory::{sample_trajectories_keyed, split_dataset, DataSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Mle,
    Split,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Mle => "mle",
            EstimatorKind::Split => "split",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mle" => Ok(EstimatorKind::Mle),
            "split" | "split_known" | "split-known" => Ok(EstimatorKind::Split),
            _ => Err(Error::arg(format!("unknown estimator `{s}`"))),
        }
    }
}

/// ℓ₁ estimation error of the expert occupancy across an expert-sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationStudy {
    pub id: String,
    pub env: EnvKind,
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub m_values: Vec<usize>,
    pub estimators: Vec<EstimatorKind>,
    pub seeds: usize,
}

impl EstimationStudy {
    /// The desk-scale Standard Imitation study.
    pub fn desk() -> Self {
        EstimationStudy {
            id: "estimation-desk".into(),
            env: EnvKind::StandardImitation,
            states: 50,
            actions: 5,
            horizon: 10,
            m_values: vec![100, 200, 400, 800, 1600, 3200],
            estimators: vec![EstimatorKind::Mle, EstimatorKind::Split],
            seeds: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty() || self.m_values[0] < 2 || self.m_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("m grid must be strictly increasing with values of at least 2"));
        }
        if self.seeds == 0 || self.estimators.is_empty() {
            return Err(Error::arg("need at least one seed and one estimator"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRecord {
    pub experiment: String,
    pub env: String,
    pub estimator: EstimatorKind,
    pub seed: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub m: usize,
    pub l1_error: f64,
}

/// One record per (m, seed, estimator). Also returns the estimates when `keep_estimates` is set.
pub fn run_estimation_study(
    study: &EstimationStudy,
    master_seed: u64,
    parallel: Option<usize>,
    keep_estimates: bool,
) -> Result<(Vec<EstimationRecord>, Vec<(EstimationRecord, OccupancyEstimate)>)> {
    study.validate()?;
    let cells: Vec<(usize, usize)> = study
        .m_values
        .iter()
        .flat_map(|&m| (0..study.seeds).map(move |s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.unwrap_or(0))
        .build()
        .map_err(|e| Error::arg(format!("cannot start worker pool: {e}")))?;
    type Cell = Vec<(EstimationRecord, Option<OccupancyEstimate>)>;
    let results: Vec<Result<Cell>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(m, seed)| -> Result<Cell> {
                let env = study.env.build(study.states, study.actions, study.horizon, m)?;
                let truth = occupancy(&env.mdp, &env.expert)?;
                let key = format!("{}/expert-data/{seed}", study.id);
                let data = sample_trajectories_keyed(&env.mdp, &env.expert, m, DataSource::Expert, master_seed, &key)?;
                let mut out = Vec::new();
                for &kind in &study.estimators {
                    let est = match kind {
                        EstimatorKind::Mle => mle_estimate(&data, env.mdp.dims())?,
                        EstimatorKind::Split => {
                            let sid = stream_id(&[&study.id, kind.name(), &m.to_string(), &seed.to_string()]);
                            let split = split_dataset(&data, &mut stream(master_seed, sid))?;
                            split_estimate_known(&env.mdp, &split)?
                        }
                    };
                    let record = EstimationRecord {
                        experiment: study.id.clone(),
                        env: env.name.clone(),
                        estimator: kind,
                        seed,
                        horizon: study.horizon,
                        m,
                        l1_error: l1_estimation_error(&est, &truth)?,
                    };
                    out.push((record, keep_estimates.then_some(est)));
                }
                Ok(out)
            })
            .collect()
    });
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    all.sort_by_key(|(r, _)| (r.estimator, r.m, r.seed));
    let records = all.iter().map(|(r, _)| r.clone()).collect();
    let estimates = all.into_iter().filter_map(|(r, e)| e.map(|e| (r, e))).collect();
    Ok((records, estimates))
}

pub fn summarize_estimation(id: &str, records: &[EstimationRecord]) -> Result<Summary> {
    let points: Vec<Point> = records
        .iter()
        .map(|r| (r.env.clone(), r.estimator.to_string(), r.m, r.l1_error, None))
        .collect();
    summarize_points(id, SweepAxis::ExpertM, "l1_error", &points)
}

pub fn estimation_to_csv(records: &[EstimationRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| Error::Serde(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Serde(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_study_shapes() {
        let study = EstimationStudy {
            id: "t".into(),
            env: EnvKind::StandardImitation,
            states: 5,
            actions: 2,
            horizon: 3,
            m_values: vec![4, 8],
            estimators: vec![EstimatorKind::Mle, EstimatorKind::Split],
            seeds: 3,
        };
        let (recs, est) = run_estimation_study(&study, 1, Some(1), true).unwrap();
        assert_eq!(recs.len(), 12);
        assert_eq!(est.len(), 12);
        let summary = summarize_estimation("t", &recs).unwrap();
        assert!(summary.slope("standard_imitation", "mle").is_some());
        let csv = String::from_utf8(estimation_to_csv(&recs).unwrap()).unwrap();
        assert!(csv.starts_with("experiment,env,estimator,seed,H,m,l1_error\n"));
    }
}
