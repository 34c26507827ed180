use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{make_reset_cliff, make_standard_imitation, EnvBundle};
use crate::error::{Error, Result};
use crate::imitation::Algorithm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    #[serde(alias = "standard-imitation")]
    StandardImitation,
    #[serde(alias = "reset-cliff")]
    ResetCliff,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::StandardImitation => "standard_imitation",
            EnvKind::ResetCliff => "reset_cliff",
        }
    }

    pub fn build(self, num_states: usize, num_actions: usize, horizon: usize, expert_m: usize) -> Result<EnvBundle> {
        match self {
            EnvKind::StandardImitation => make_standard_imitation(num_states, num_actions, horizon),
            EnvKind::ResetCliff => make_reset_cliff(num_states, num_actions, horizon, expert_m),
        }
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "standard_imitation" => Ok(EnvKind::StandardImitation),
            "reset_cliff" => Ok(EnvKind::ResetCliff),
            _ => Err(Error::arg(format!("unknown environment `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Horizon,
    ExpertM,
    Interactions,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Horizon => "horizon",
            SweepAxis::ExpertM => "expert_m",
            SweepAxis::Interactions => "interactions",
        }
    }
}

/// Iteration count for an algorithm: a constant, or a multiple of the horizon.
/// Written as `300`, `"300"`, `"H"` or `"4H"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "IterationRepr", into = "IterationRepr")]
pub enum IterationRule {
    Fixed(usize),
    PerHorizon(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum IterationRepr {
    Count(usize),
    Text(String),
}

impl IterationRule {
    pub fn resolve(self, horizon: usize) -> usize {
        match self {
            IterationRule::Fixed(n) => n,
            IterationRule::PerHorizon(k) => k * horizon,
        }
    }
}

impl fmt::Display for IterationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IterationRule::Fixed(n) => write!(f, "{n}"),
            IterationRule::PerHorizon(1) => f.write_str("H"),
            IterationRule::PerHorizon(k) => write!(f, "{k}H"),
        }
    }
}

impl FromStr for IterationRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let t = s.trim();
        let bad = || format!("iteration rule `{s}` is not a count, `H` or `<k>H`");
        let rule = if let Some(k) = t.strip_suffix(['H', 'h']) {
            let k = if k.trim().is_empty() { 1 } else { k.trim().parse().map_err(|_| bad())? };
            IterationRule::PerHorizon(k)
        } else {
            IterationRule::Fixed(t.parse().map_err(|_| bad())?)
        };
        match rule {
            IterationRule::Fixed(0) | IterationRule::PerHorizon(0) => Err("iteration count must be positive".into()),
            r => Ok(r),
        }
    }
}

impl TryFrom<IterationRepr> for IterationRule {
    type Error = String;

    fn try_from(r: IterationRepr) -> std::result::Result<Self, String> {
        match r {
            IterationRepr::Count(0) => Err("iteration count must be positive".into()),
            IterationRepr::Count(n) => Ok(IterationRule::Fixed(n)),
            IterationRepr::Text(s) => s.parse(),
        }
    }
}

impl From<IterationRule> for IterationRepr {
    fn from(r: IterationRule) -> Self {
        match r {
            IterationRule::Fixed(n) => IterationRepr::Count(n),
            r => IterationRepr::Text(r.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub states: usize,
    pub actions: usize,
    /// Fixed horizon; required unless the sweep is over the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Fixed expert sample size; required unless the sweep is over it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert_m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
}

fn default_seeds() -> usize {
    20
}

/// A declarative experiment: one environment family, one swept quantity, a set
/// of algorithms and their iteration counts, and a number of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: String,
    pub env: EnvSpec,
    pub sweep: SweepSpec,
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub iterations: BTreeMap<Algorithm, IterationRule>,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// Episode budget for interactive algorithms when the sweep is not over it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Concrete sizes of one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPoint {
    pub index: usize,
    pub horizon: usize,
    pub expert_m: usize,
    pub budget: Option<usize>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let cfg = |path: &str, msg: String| Err(Error::config(path, msg));
        if self.id.trim().is_empty() {
            return cfg("id", "must not be empty".into());
        }
        if self.env.states == 0 {
            return cfg("env.states", "must be positive".into());
        }
        if self.env.actions < 2 {
            return cfg("env.actions", "must be at least 2".into());
        }
        let v = &self.sweep.values;
        if v.is_empty() {
            return cfg("sweep.values", "must not be empty".into());
        }
        if v[0] == 0 {
            return cfg("sweep.values", "values must be positive".into());
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return cfg("sweep.values", format!("values must be strictly increasing, got {v:?}"));
        }
        if self.seeds == 0 {
            return cfg("seeds", "must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return cfg("algorithms", "must list at least one algorithm".into());
        }
        let mut seen = Vec::new();
        for (i, a) in self.algorithms.iter().enumerate() {
            if seen.contains(a) {
                return cfg(&format!("algorithms[{i}]"), format!("`{a}` listed twice"));
            }
            seen.push(*a);
            if a.is_iterative() && *a != Algorithm::Oal && !self.iterations.contains_key(a) {
                return cfg(&format!("iterations.{a}"), "missing iteration count".into());
            }
            if a.needs_interactions() && self.sweep.axis != SweepAxis::Interactions && self.interaction_budget.is_none() {
                return cfg("interaction_budget", format!("required by `{a}`"));
            }
        }
        if self.sweep.axis != SweepAxis::Horizon && self.env.horizon.is_none() {
            return cfg("env.horizon", "required unless sweeping the horizon".into());
        }
        if self.sweep.axis != SweepAxis::ExpertM && self.env.expert_m.is_none() {
            return cfg("env.expert_m", "required unless sweeping the expert sample size".into());
        }
        if self.env.horizon == Some(0) {
            return cfg("env.horizon", "must be positive".into());
        }
        for g in self.grid() {
            if g.expert_m == 0 {
                return cfg("env.expert_m", "must be positive".into());
            }
            if self.env.kind == EnvKind::ResetCliff && g.expert_m + 3 < self.env.states {
                return cfg(
                    "env.expert_m",
                    format!("reset cliff with {} states needs m_expert >= {}", self.env.states, self.env.states - 3),
                );
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<GridPoint> {
        self.sweep
            .values
            .iter()
            .enumerate()
            .map(|(index, &x)| {
                let mut g = GridPoint {
                    index,
                    horizon: self.env.horizon.unwrap_or(0),
                    expert_m: self.env.expert_m.unwrap_or(0),
                    budget: self.interaction_budget,
                };
                match self.sweep.axis {
                    SweepAxis::Horizon => g.horizon = x,
                    SweepAxis::ExpertM => g.expert_m = x,
                    SweepAxis::Interactions => g.budget = Some(x),
                }
                g
            })
            .collect()
    }

    pub fn iterations_for(&self, algo: Algorithm, point: &GridPoint) -> usize {
        match algo {
            Algorithm::Bc => 0,
            Algorithm::Oal => point.budget.unwrap_or(0),
            a => self.iterations.get(&a).map_or(0, |r| r.resolve(point.horizon)),
        }
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config(origin, e.to_string().trim().to_string()))?;
        let spec: ExperimentSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string().trim().to_string())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let spec: ExperimentSpec = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a `.json` or `.toml` spec file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text, &path.display().to_string())
        }
    }

    /// A preset name, or else a path to a spec file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if let Some(spec) = preset(name_or_path) {
            return Ok(spec);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(Error::config(
                name_or_path,
                format!("no such spec file or preset (presets: {})", PRESET_NAMES.join(", ")),
            ));
        }
        Self::load(path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }
}

pub const PRESET_NAMES: [&str; 12] = [
    "fig-bandit-m",
    "fig-bandit-h",
    "fig-cliff-m",
    "fig-cliff-h",
    "unknown-cliff",
    "unknown-bandit",
    "fig-bandit-m-desk",
    "fig-bandit-h-desk",
    "fig-cliff-m-desk",
    "fig-cliff-h-desk",
    "unknown-cliff-desk",
    "unknown-bandit-desk",
];

const KNOWN_ALGOS: [Algorithm; 6] = [
    Algorithm::Bc,
    Algorithm::Vail,
    Algorithm::Fem,
    Algorithm::Gtal,
    Algorithm::Tail,
    Algorithm::Gail,
];

const UNKNOWN_ALGOS: [Algorithm; 3] = [Algorithm::Bc, Algorithm::Oal, Algorithm::Mbtail];

fn same_iterations(t: usize) -> BTreeMap<Algorithm, IterationRule> {
    KNOWN_ALGOS[1..].iter().map(|&a| (a, IterationRule::Fixed(t))).collect()
}

fn cliff_h_iterations() -> BTreeMap<Algorithm, IterationRule> {
    BTreeMap::from([
        (Algorithm::Vail, IterationRule::PerHorizon(4)),
        (Algorithm::Fem, IterationRule::Fixed(300)),
        (Algorithm::Gtal, IterationRule::PerHorizon(4)),
        (Algorithm::Tail, IterationRule::PerHorizon(1)),
        (Algorithm::Gail, IterationRule::PerHorizon(4)),
    ])
}

fn known(
    id: &str,
    kind: EnvKind,
    (states, actions): (usize, usize),
    horizon: Option<usize>,
    expert_m: Option<usize>,
    axis: SweepAxis,
    values: Vec<usize>,
    iterations: BTreeMap<Algorithm, IterationRule>,
) -> ExperimentSpec {
    ExperimentSpec {
        id: id.into(),
        env: EnvSpec {
            kind,
            states,
            actions,
            horizon,
            expert_m,
        },
        sweep: SweepSpec { axis, values },
        algorithms: KNOWN_ALGOS.to_vec(),
        iterations,
        seeds: 20,
        interaction_budget: None,
        output_dir: None,
    }
}

fn unknown(id: &str, kind: EnvKind, (states, actions): (usize, usize), horizon: usize, expert_m: usize, budgets: Vec<usize>, iterations: usize) -> ExperimentSpec {
    ExperimentSpec {
        id: id.into(),
        env: EnvSpec {
            kind,
            states,
            actions,
            horizon: Some(horizon),
            expert_m: Some(expert_m),
        },
        sweep: SweepSpec {
            axis: SweepAxis::Interactions,
            values: budgets,
        },
        algorithms: UNKNOWN_ALGOS.to_vec(),
        iterations: BTreeMap::from([(Algorithm::Mbtail, IterationRule::Fixed(iterations))]),
        seeds: 20,
        interaction_budget: None,
        output_dir: None,
    }
}

const M_GRID: [usize; 5] = [100, 300, 1000, 3000, 10000];
const H_GRID: [usize; 5] = [10, 30, 100, 300, 1000];
const DESK_M_GRID: [usize; 6] = [100, 200, 400, 800, 1600, 3200];
const DESK_H_GRID: [usize; 6] = [10, 20, 40, 80, 160, 320];
const UNKNOWN_BUDGETS: [usize; 3] = [1000, 3000, 10000];

/// Built-in experiment by name. The un-suffixed presets use the published task
/// sizes; `-desk` variants shrink the state space or grid to run in minutes.
pub fn preset(name: &str) -> Option<ExperimentSpec> {
    use EnvKind::*;
    use SweepAxis::*;
    let spec = match name {
        "fig-bandit-m" => known(name, StandardImitation, (500, 5), Some(10), None, ExpertM, M_GRID.to_vec(), same_iterations(8000)),
        "fig-bandit-h" => known(name, StandardImitation, (500, 5), None, Some(300), Horizon, H_GRID.to_vec(), same_iterations(500)),
        "fig-cliff-m" => known(name, ResetCliff, (5, 5), Some(5), None, ExpertM, M_GRID.to_vec(), same_iterations(20000)),
        "fig-cliff-h" => known(name, ResetCliff, (20, 5), None, Some(5000), Horizon, H_GRID.to_vec(), cliff_h_iterations()),
        "unknown-cliff" => unknown(name, ResetCliff, (20, 5), 20, 100, UNKNOWN_BUDGETS.to_vec(), 2000),
        "unknown-bandit" => unknown(name, StandardImitation, (100, 5), 10, 400, UNKNOWN_BUDGETS.to_vec(), 2000),
        "fig-bandit-m-desk" => known(name, StandardImitation, (50, 5), Some(10), None, ExpertM, DESK_M_GRID.to_vec(), same_iterations(2000)),
        "fig-bandit-h-desk" => known(name, StandardImitation, (50, 5), None, Some(30), Horizon, DESK_H_GRID.to_vec(), same_iterations(500)),
        "fig-cliff-m-desk" => known(name, ResetCliff, (5, 5), Some(5), None, ExpertM, DESK_M_GRID.to_vec(), same_iterations(2000)),
        "fig-cliff-h-desk" => known(name, ResetCliff, (20, 5), None, Some(5000), Horizon, DESK_H_GRID.to_vec(), cliff_h_iterations()),
        "unknown-cliff-desk" => unknown(name, ResetCliff, (20, 5), 20, 100, UNKNOWN_BUDGETS.to_vec(), 1000),
        "unknown-bandit-desk" => unknown(name, StandardImitation, (100, 5), 10, 400, UNKNOWN_BUDGETS.to_vec(), 1000),
        _ => return None,
    };
    Some(spec)
}
