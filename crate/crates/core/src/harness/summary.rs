use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::run::RunRecord;
use super::spec::SweepAxis;
use crate::error::{Error, Result};

/// Values at or below this are floored before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Number of points whose `y` was raised to [`LOG_FLOOR`].
    pub floored: usize,
}

/// Ordinary least squares on `(ln x, ln y)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.iter().any(|&(x, y)| x <= 0.0 || !x.is_finite() || y.is_nan()) {
        return Err(Error::arg("log-log fit needs positive x and non-NaN y"));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 2 {
        return Err(Error::arg("log-log fit needs at least two distinct x values"));
    }
    let floored = points.iter().filter(|p| p.1 <= LOG_FLOOR).count();
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.max(LOG_FLOOR).ln()).collect();
    let n = points.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        floored,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub env: String,
    pub algo: String,
    pub x: usize,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEntry {
    pub env: String,
    pub algo: String,
    #[serde(flatten)]
    pub fit: SlopeFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub axis: SweepAxis,
    pub metric: String,
    /// How `std` is computed.
    pub std_convention: String,
    pub groups: Vec<GroupStats>,
    pub slopes: Vec<SlopeEntry>,
}

impl Summary {
    pub fn slope(&self, env: &str, algo: &str) -> Option<f64> {
        self.slopes.iter().find(|s| s.env == env && s.algo == algo).map(|s| s.fit.slope)
    }

    pub fn mean_at(&self, env: &str, algo: &str, x: usize) -> Option<f64> {
        self.groups
            .iter()
            .find(|g| g.env == env && g.algo == algo && g.x == x)
            .map(|g| g.mean)
    }
}

/// One observation for [`summarize_points`]: group labels, axis value, metric, optional ℓ₁.
pub type Point = (String, String, usize, f64, Option<f64>);

/// Groups by (env, algo, x), then fits the mean-vs-x slope for every (env, algo)
/// with at least two distinct positive x.
pub fn summarize_points(experiment: &str, axis: SweepAxis, metric: &str, points: &[Point]) -> Result<Summary> {
    if points.is_empty() {
        return Err(Error::arg("nothing to summarize"));
    }
    let mut grouped: BTreeMap<(String, String, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (env, algo, x, y, l1) in points {
        let slot = grouped.entry((env.clone(), algo.clone(), *x)).or_default();
        slot.0.push(*y);
        if let Some(l) = l1 {
            slot.1.push(*l);
        }
    }
    let groups: Vec<GroupStats> = grouped
        .into_iter()
        .map(|((env, algo, x), (ys, ls))| {
            let (mean, std) = mean_std(&ys);
            GroupStats {
                env,
                algo,
                x,
                n: ys.len(),
                mean,
                std,
                l1_mean: (ls.len() == ys.len()).then(|| mean_std(&ls).0),
            }
        })
        .collect();
    let mut series: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
    for g in &groups {
        if g.x > 0 {
            series.entry((g.env.clone(), g.algo.clone())).or_default().push((g.x as f64, g.mean));
        }
    }
    let slopes = series
        .into_iter()
        .filter(|(_, pts)| pts.len() >= 2)
        .map(|((env, algo), pts)| fit_loglog_slope(&pts).map(|fit| SlopeEntry { env, algo, fit }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Summary {
        experiment: experiment.to_string(),
        axis,
        metric: metric.to_string(),
        std_convention: "population (divide by n)".to_string(),
        groups,
        slopes,
    })
}

/// Mean and standard deviation of the value gap per (env, algorithm, axis value),
/// and the log-log slope of the mean gap for each (env, algorithm).
pub fn summarize(experiment: &str, axis: SweepAxis, records: &[RunRecord]) -> Result<Summary> {
    let points: Vec<Point> = records
        .iter()
        .map(|r| (r.env.clone(), r.algo.to_string(), r.axis_value(axis), r.value_gap, r.l1_error))
        .collect();
    summarize_points(experiment, axis, "value_gap", &points)
}
