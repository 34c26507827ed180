//! Finite-horizon tabular MDPs and the exact quantities computed on them.
//!
//! Every table is time-indexed (`[h, s, a]`, `h` zero-based) even when the
//! underlying environment is stationary; stationary models share one
//! [`StepKernel`] across steps instead of copying it.
//!
//! The forward and backward recursions are written against the [`Dynamics`]
//! trait so that the same code runs on a known [`TabularMdp`] and on an
//! empirical model learned from interaction data.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array1, Array2, Array3, Array4, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for probability vectors supplied at construction.
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Absolute tolerance for quantities obtained by arithmetic (occupancies, mixtures).
pub const ARITHMETIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub horizon: usize,
    pub num_states: usize,
    pub num_actions: usize,
}

impl Dims {
    pub fn new(horizon: usize, num_states: usize, num_actions: usize) -> Result<Self> {
        if horizon == 0 || num_states == 0 || num_actions == 0 {
            return Err(Error::arg(format!(
                "dimensions must be positive, got H={horizon}, |S|={num_states}, |A|={num_actions}"
            )));
        }
        Ok(Dims {
            horizon,
            num_states,
            num_actions,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.horizon, self.num_states, self.num_actions)
    }

    /// Number of entries of a per-step state-action table.
    pub fn len(&self) -> usize {
        self.horizon * self.num_states * self.num_actions
    }

    /// Always false: every dimension is validated to be positive.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zeros(&self) -> Array3<f64> {
        Array3::zeros(self.shape())
    }

    pub(crate) fn check_table(&self, table: &Array3<f64>, what: &str) -> Result<()> {
        if table.dim() != self.shape() {
            return Err(Error::arg(format!(
                "{what} has shape {:?}, expected {:?}",
                table.dim(),
                self.shape()
            )));
        }
        Ok(())
    }
}

fn check_probability_vector(p: &[f64], tol: f64, what: &str) -> Result<()> {
    let mut total = 0.0;
    for (i, &x) in p.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::arg(format!("{what}: entry {i} = {x} is not a probability")));
        }
        total += x;
    }
    if (total - 1.0).abs() > tol {
        return Err(Error::arg(format!("{what}: sums to {total}, expected 1")));
    }
    Ok(())
}

/// Transition kernel of a single step, `P_h(s' | s, a)`, stored row-compressed.
#[derive(Debug, Clone, PartialEq)]
pub struct StepKernel {
    num_states: usize,
    num_actions: usize,
    offsets: Vec<usize>,
    next: Vec<usize>,
    prob: Vec<f64>,
}

impl StepKernel {
    /// Builds a kernel from sparse rows indexed by `s * |A| + a`. Zero entries are dropped and
    /// repeated successors are summed.
    pub fn from_rows(num_states: usize, num_actions: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != num_states * num_actions {
            return Err(Error::arg(format!(
                "kernel needs {} rows, got {}",
                num_states * num_actions,
                rows.len()
            )));
        }
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut next = Vec::new();
        let mut prob = Vec::new();
        offsets.push(0);
        for (row_idx, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(s, _)| s);
            let mut total = 0.0;
            let start = next.len();
            for (s_next, p) in row {
                if s_next >= num_states {
                    return Err(Error::arg(format!(
                        "kernel row {row_idx}: successor {s_next} out of range"
                    )));
                }
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::arg(format!("kernel row {row_idx}: invalid probability {p}")));
                }
                total += p;
                if p == 0.0 {
                    continue;
                }
                if next.len() > start && *next.last().unwrap() == s_next {
                    *prob.last_mut().unwrap() += p;
                } else {
                    next.push(s_next);
                    prob.push(p);
                }
            }
            if (total - 1.0).abs() > CONSTRUCTION_TOL {
                let (s, a) = (row_idx / num_actions, row_idx % num_actions);
                return Err(Error::arg(format!(
                    "transition row (s={s}, a={a}) sums to {total}, expected 1"
                )));
            }
            offsets.push(next.len());
        }
        Ok(StepKernel {
            num_states,
            num_actions,
            offsets,
            next,
            prob,
        })
    }

    /// Builds a kernel from a dense `[s, a, s']` array.
    pub fn from_dense(probs: ArrayView3<'_, f64>) -> Result<Self> {
        let (num_states, num_actions, num_next) = probs.dim();
        if num_next != num_states {
            return Err(Error::arg(format!(
                "dense kernel has {num_next} successors for {num_states} states"
            )));
        }
        let rows = (0..num_states * num_actions)
            .map(|i| {
                let (s, a) = (i / num_actions, i % num_actions);
                (0..num_states)
                    .map(|t| (t, probs[[s, a, t]]))
                    .filter(|&(_, p)| p != 0.0)
                    .collect()
            })
            .collect();
        Self::from_rows(num_states, num_actions, rows)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Non-zero successors of `(s, a)` with their probabilities.
    pub fn row(&self, s: usize, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = s * self.num_actions + a;
        let span = self.offsets[r]..self.offsets[r + 1];
        self.next[span.clone()].iter().copied().zip(self.prob[span].iter().copied())
    }

    pub fn prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.row(s, a).find(|&(t, _)| t == s_next).map_or(0.0, |(_, p)| p)
    }

    pub fn to_dense(&self) -> Array3<f64> {
        let mut out = Array3::zeros((self.num_states, self.num_actions, self.num_states));
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                for (t, p) in self.row(s, a) {
                    out[[s, a, t]] = p;
                }
            }
        }
        out
    }

    fn expected_next(&self, values: &[f64], out: &mut [f64]) {
        for (r, slot) in out.iter_mut().enumerate() {
            let span = self.offsets[r]..self.offsets[r + 1];
            *slot = self.next[span.clone()]
                .iter()
                .zip(&self.prob[span])
                .map(|(&t, &p)| p * values[t])
                .sum();
        }
    }

    fn push_forward(&self, sa_mass: &[f64], next_mass: &mut [f64]) {
        for (r, &m) in sa_mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let span = self.offsets[r]..self.offsets[r + 1];
            for (&t, &p) in self.next[span.clone()].iter().zip(&self.prob[span]) {
                next_mass[t] += m * p;
            }
        }
    }
}

/// Step-wise dynamics: an initial distribution and a transition operator per step.
pub trait Dynamics {
    fn dims(&self) -> Dims;

    fn initial_dist(&self) -> &[f64];

    /// `out[s * |A| + a] = Σ_{s'} P_h(s'|s,a) · values[s']`.
    fn expected_next(&self, h: usize, values: &[f64], out: &mut [f64]);

    /// `next_mass[s'] += Σ_{s,a} sa_mass[s * |A| + a] · P_h(s'|s,a)`.
    fn push_forward(&self, h: usize, sa_mass: &[f64], next_mass: &mut [f64]);
}

/// A finite-horizon tabular MDP with initial distribution `ρ`, per-step
/// transitions `P_h` and rewards `r_h ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    dims: Dims,
    initial_dist: Vec<f64>,
    kernels: Vec<Arc<StepKernel>>,
    rewards: Array3<f64>,
}

impl TabularMdp {
    pub fn new(initial_dist: Vec<f64>, kernels: Vec<Arc<StepKernel>>, rewards: Array3<f64>) -> Result<Self> {
        let (horizon, num_states, num_actions) = rewards.dim();
        let dims = Dims::new(horizon, num_states, num_actions)?;
        if initial_dist.len() != num_states {
            return Err(Error::arg(format!(
                "initial distribution has {} entries for {num_states} states",
                initial_dist.len()
            )));
        }
        check_probability_vector(&initial_dist, CONSTRUCTION_TOL, "initial distribution")?;
        if kernels.len() != horizon {
            return Err(Error::arg(format!("{} transition kernels for horizon {horizon}", kernels.len())));
        }
        for (h, k) in kernels.iter().enumerate() {
            if k.num_states != num_states || k.num_actions != num_actions {
                return Err(Error::arg(format!("kernel at step {h} has mismatched dimensions")));
            }
        }
        if let Some(r) = rewards.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::arg(format!("reward {r} outside [0, 1]")));
        }
        Ok(TabularMdp {
            dims,
            initial_dist,
            kernels,
            rewards,
        })
    }

    /// Builds an MDP from dense `[h, s, a, s']` transitions.
    pub fn from_dense(initial_dist: Vec<f64>, transitions: &Array4<f64>, rewards: Array3<f64>) -> Result<Self> {
        let kernels = transitions
            .outer_iter()
            .map(|step| StepKernel::from_dense(step).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Self::new(initial_dist, kernels, rewards)
    }

    /// Replicates one kernel and one reward table across `horizon` steps.
    pub fn stationary(
        initial_dist: Vec<f64>,
        kernel: StepKernel,
        step_reward: &Array2<f64>,
        horizon: usize,
    ) -> Result<Self> {
        let (s, a) = step_reward.dim();
        let shared = Arc::new(kernel);
        let kernels = vec![shared; horizon];
        let rewards = Array3::from_shape_fn((horizon, s, a), |(_, s, a)| step_reward[[s, a]]);
        Self::new(initial_dist, kernels, rewards)
    }

    /// Same dynamics, different rewards.
    pub fn with_rewards(&self, rewards: Array3<f64>) -> Result<Self> {
        Self::new(self.initial_dist.clone(), self.kernels.clone(), rewards)
    }

    pub fn rewards(&self) -> &Array3<f64> {
        &self.rewards
    }

    pub fn kernel(&self, h: usize) -> &StepKernel {
        &self.kernels[h]
    }

    pub fn transition_prob(&self, h: usize, s: usize, a: usize, s_next: usize) -> f64 {
        self.kernels[h].prob(s, a, s_next)
    }
}

impl Dynamics for TabularMdp {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    fn expected_next(&self, h: usize, values: &[f64], out: &mut [f64]) {
        self.kernels[h].expected_next(values, out);
    }

    fn push_forward(&self, h: usize, sa_mass: &[f64], next_mass: &mut [f64]) {
        self.kernels[h].push_forward(sa_mass, next_mass);
    }
}

#[derive(Serialize, Deserialize)]
struct MdpWire {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    initial_dist: Vec<f64>,
    /// `transitions[h][s * |A| + a]` lists `(s', p)` pairs with `p > 0`.
    transitions: Vec<Vec<Vec<(usize, f64)>>>,
    rewards: Vec<Vec<Vec<f64>>>,
}

impl Serialize for TabularMdp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let Dims {
            horizon,
            num_states,
            num_actions,
        } = self.dims;
        let transitions = self
            .kernels
            .iter()
            .map(|k| {
                (0..num_states * num_actions)
                    .map(|r| k.row(r / num_actions, r % num_actions).collect())
                    .collect()
            })
            .collect();
        MdpWire {
            num_states,
            num_actions,
            horizon,
            initial_dist: self.initial_dist.clone(),
            transitions,
            rewards: table_to_nested(&self.rewards),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TabularMdp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = MdpWire::deserialize(deserializer)?;
        let dims = Dims::new(w.horizon, w.num_states, w.num_actions).map_err(D::Error::custom)?;
        let rewards = nested_to_table(dims, &w.rewards).map_err(D::Error::custom)?;
        let kernels = w
            .transitions
            .into_iter()
            .map(|rows| StepKernel::from_rows(w.num_states, w.num_actions, rows).map(Arc::new))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        TabularMdp::new(w.initial_dist, kernels, rewards).map_err(D::Error::custom)
    }
}

pub(crate) fn table_to_nested(t: &Array3<f64>) -> Vec<Vec<Vec<f64>>> {
    t.outer_iter()
        .map(|step| step.outer_iter().map(|row| row.to_vec()).collect())
        .collect()
}

pub(crate) fn nested_to_table(dims: Dims, nested: &[Vec<Vec<f64>>]) -> Result<Array3<f64>> {
    let mut out = dims.zeros();
    if nested.len() != dims.horizon {
        return Err(Error::arg("table horizon mismatch"));
    }
    for (h, step) in nested.iter().enumerate() {
        if step.len() != dims.num_states {
            return Err(Error::arg(format!("table step {h}: state count mismatch")));
        }
        for (s, row) in step.iter().enumerate() {
            if row.len() != dims.num_actions {
                return Err(Error::arg(format!("table step {h}, state {s}: action count mismatch")));
            }
            for (a, &x) in row.iter().enumerate() {
                out[[h, s, a]] = x;
            }
        }
    }
    Ok(out)
}

/// The action distribution of a policy at one `(h, s)`.
#[derive(Debug, Clone, Copy)]
pub enum ActionDist<'a> {
    Deterministic(usize),
    Stochastic(&'a [f64]),
}

impl ActionDist<'_> {
    pub fn prob(&self, a: usize) -> f64 {
        match *self {
            ActionDist::Deterministic(b) => f64::from(u8::from(a == b)),
            ActionDist::Stochastic(p) => p[a],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum PolicyRepr {
    /// One action per `(h, s)`, stored at `h * |S| + s`.
    Deterministic(Vec<usize>),
    Stochastic(Array3<f64>),
}

/// A time-indexed stochastic policy `π_h(a | s)`.
#[derive(Debug, Clone)]
pub struct Policy {
    dims: Dims,
    repr: PolicyRepr,
}

impl Policy {
    /// Validates a `[h, s, a]` table of action probabilities.
    pub fn from_table(table: Array3<f64>) -> Result<Self> {
        let (h, s, a) = table.dim();
        let dims = Dims::new(h, s, a)?;
        let table = table.as_standard_layout().into_owned();
        for (i, row) in table.as_slice().unwrap().chunks(a).enumerate() {
            check_probability_vector(row, CONSTRUCTION_TOL, &format!("policy row (h={}, s={})", i / s, i % s))?;
        }
        Ok(Policy {
            dims,
            repr: PolicyRepr::Stochastic(table),
        })
    }

    /// `actions[[h, s]]` is the action taken at step `h` in state `s`.
    pub fn deterministic(dims: Dims, actions: &Array2<usize>) -> Result<Self> {
        if actions.dim() != (dims.horizon, dims.num_states) {
            return Err(Error::arg(format!(
                "action table has shape {:?}, expected {:?}",
                actions.dim(),
                (dims.horizon, dims.num_states)
            )));
        }
        Self::from_actions(dims, actions.iter().copied().collect())
    }

    /// Deterministic policy from actions laid out at `h * |S| + s`.
    pub fn from_actions(dims: Dims, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != dims.horizon * dims.num_states {
            return Err(Error::arg(format!(
                "expected {} actions, got {}",
                dims.horizon * dims.num_states,
                actions.len()
            )));
        }
        if let Some(&bad) = actions.iter().find(|&&a| a >= dims.num_actions) {
            return Err(Error::arg(format!("action {bad} out of range")));
        }
        Ok(Policy {
            dims,
            repr: PolicyRepr::Deterministic(actions),
        })
    }

    pub fn uniform(dims: Dims) -> Self {
        let p = 1.0 / dims.num_actions as f64;
        Policy {
            dims,
            repr: PolicyRepr::Stochastic(Array3::from_elem(dims.shape(), p)),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn action_dist(&self, h: usize, s: usize) -> ActionDist<'_> {
        match &self.repr {
            PolicyRepr::Deterministic(acts) => ActionDist::Deterministic(acts[h * self.dims.num_states + s]),
            PolicyRepr::Stochastic(t) => {
                let a = self.dims.num_actions;
                let start = (h * self.dims.num_states + s) * a;
                ActionDist::Stochastic(&t.as_slice().unwrap()[start..start + a])
            }
        }
    }

    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.action_dist(h, s).prob(a)
    }

    /// The action at `(h, s)` if the row is one-hot.
    pub fn deterministic_action(&self, h: usize, s: usize) -> Option<usize> {
        match self.action_dist(h, s) {
            ActionDist::Deterministic(a) => Some(a),
            ActionDist::Stochastic(p) => {
                let mut ones = p.iter().enumerate().filter(|(_, &x)| x != 0.0);
                match (ones.next(), ones.next()) {
                    (Some((a, &x)), None) if (x - 1.0).abs() <= CONSTRUCTION_TOL => Some(a),
                    _ => None,
                }
            }
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match &self.repr {
            PolicyRepr::Deterministic(_) => true,
            PolicyRepr::Stochastic(_) => (0..self.dims.horizon)
                .all(|h| (0..self.dims.num_states).all(|s| self.deterministic_action(h, s).is_some())),
        }
    }

    pub fn table(&self) -> Array3<f64> {
        match &self.repr {
            PolicyRepr::Stochastic(t) => t.clone(),
            PolicyRepr::Deterministic(acts) => {
                let mut t = self.dims.zeros();
                let s_count = self.dims.num_states;
                for (i, &a) in acts.iter().enumerate() {
                    t[[i / s_count, i % s_count, a]] = 1.0;
                }
                t
            }
        }
    }

    pub(crate) fn action_key(&self) -> Option<&[usize]> {
        match &self.repr {
            PolicyRepr::Deterministic(acts) => Some(acts),
            PolicyRepr::Stochastic(_) => None,
        }
    }
}

impl PartialEq for Policy {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && match (&self.repr, &other.repr) {
                (PolicyRepr::Deterministic(a), PolicyRepr::Deterministic(b)) => a == b,
                _ => self.table() == other.table(),
            }
    }
}

#[derive(Serialize, Deserialize)]
struct PolicyWire {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    actions: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    probs: Option<Vec<Vec<Vec<f64>>>>,
}

impl Serialize for Policy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dims;
        let (actions, probs) = match &self.repr {
            PolicyRepr::Deterministic(acts) => (Some(acts.chunks(d.num_states).map(<[usize]>::to_vec).collect()), None),
            PolicyRepr::Stochastic(t) => (None, Some(table_to_nested(t))),
        };
        PolicyWire {
            horizon: d.horizon,
            num_states: d.num_states,
            num_actions: d.num_actions,
            actions,
            probs,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Policy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = PolicyWire::deserialize(deserializer)?;
        let dims = Dims::new(w.horizon, w.num_states, w.num_actions).map_err(D::Error::custom)?;
        match (w.actions, w.probs) {
            (Some(acts), None) => {
                if acts.len() != dims.horizon || acts.iter().any(|r| r.len() != dims.num_states) {
                    return Err(D::Error::custom("action table shape mismatch"));
                }
                Policy::from_actions(dims, acts.concat()).map_err(D::Error::custom)
            }
            (None, Some(p)) => nested_to_table(dims, &p)
                .and_then(Policy::from_table)
                .map_err(D::Error::custom),
            _ => Err(D::Error::custom("policy needs exactly one of `actions` or `probs`")),
        }
    }
}

/// Per-episode randomization over component policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePolicy {
    components: Vec<Policy>,
    weights: Vec<f64>,
}

impl MixturePolicy {
    pub fn new(components: Vec<Policy>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::arg("mixture needs at least one component"));
        }
        if components.len() != weights.len() {
            return Err(Error::arg("mixture component and weight counts differ"));
        }
        check_probability_vector(&weights, CONSTRUCTION_TOL, "mixture weights")?;
        let dims = components[0].dims();
        if components.iter().any(|c| c.dims() != dims) {
            return Err(Error::arg("mixture components have different dimensions"));
        }
        Ok(MixturePolicy { components, weights })
    }

    pub fn single(policy: Policy) -> Self {
        MixturePolicy {
            components: vec![policy],
            weights: vec![1.0],
        }
    }

    /// Uniform mixture over `iterates`; identical deterministic iterates are merged.
    pub fn uniform(iterates: Vec<Policy>) -> Result<Self> {
        let n = iterates.len();
        let mut b = MixtureBuilder::default();
        for p in iterates {
            b.add(p, 1.0 / n.max(1) as f64);
        }
        b.finish()
    }

    pub fn components(&self) -> &[Policy] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dims(&self) -> Dims {
        self.components[0].dims()
    }
}

impl From<Policy> for MixturePolicy {
    fn from(p: Policy) -> Self {
        MixturePolicy::single(p)
    }
}

/// Accumulates weighted components, merging repeated deterministic policies.
#[derive(Debug, Default)]
pub(crate) struct MixtureBuilder {
    components: Vec<Policy>,
    weights: Vec<f64>,
    index: HashMap<Vec<usize>, usize>,
}

impl MixtureBuilder {
    pub(crate) fn add(&mut self, policy: Policy, weight: f64) {
        if let Some(key) = policy.action_key() {
            if let Some(&i) = self.index.get(key) {
                self.weights[i] += weight;
                return;
            }
            self.index.insert(key.to_vec(), self.components.len());
        }
        self.components.push(policy);
        self.weights.push(weight);
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
    }

    pub(crate) fn finish(self) -> Result<MixturePolicy> {
        let total: f64 = self.weights.iter().sum();
        let weights = self.weights.iter().map(|w| w / total).collect();
        MixturePolicy::new(self.components, weights)
    }
}

/// Read access shared by every per-step `[h, s, a]` table.
pub trait PerStepTable {
    fn values(&self) -> &Array3<f64>;
}

impl PerStepTable for Array3<f64> {
    fn values(&self) -> &Array3<f64> {
        self
    }
}

/// State-action visitation distribution `P^π_h(s, a)`; sums to one at every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    table: Array3<f64>,
}

impl OccupancyMeasure {
    pub fn new(table: Array3<f64>) -> Result<Self> {
        for (h, step) in table.outer_iter().enumerate() {
            if step.iter().any(|&x| !x.is_finite() || x < -ARITHMETIC_TOL) {
                return Err(Error::arg(format!("occupancy step {h} has a negative or non-finite entry")));
            }
            let total = step.sum();
            if (total - 1.0).abs() > ARITHMETIC_TOL {
                return Err(Error::arg(format!("occupancy step {h} sums to {total}")));
            }
        }
        Ok(OccupancyMeasure { table })
    }

    pub fn table(&self) -> &Array3<f64> {
        &self.table
    }

    pub fn into_table(self) -> Array3<f64> {
        self.table
    }

    /// State marginal at step `h`.
    pub fn state_marginal(&self, h: usize) -> Array1<f64> {
        self.table.index_axis(ndarray::Axis(0), h).sum_axis(ndarray::Axis(1))
    }
}

impl PerStepTable for OccupancyMeasure {
    fn values(&self) -> &Array3<f64> {
        &self.table
    }
}

/// Reward weights in the ℓ∞ unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardWeights {
    table: Array3<f64>,
}

impl RewardWeights {
    pub fn new(table: Array3<f64>) -> Result<Self> {
        if let Some(x) = table.iter().find(|x| !(-1.0..=1.0).contains(*x)) {
            return Err(Error::arg(format!("reward weight {x} outside [-1, 1]")));
        }
        Ok(RewardWeights { table })
    }

    pub fn zeros(dims: Dims) -> Self {
        RewardWeights { table: dims.zeros() }
    }

    pub fn table(&self) -> &Array3<f64> {
        &self.table
    }
}

impl PerStepTable for RewardWeights {
    fn values(&self) -> &Array3<f64> {
        &self.table
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    table: Array3<f64>,
}

impl QFunction {
    pub fn from_table(table: Array3<f64>) -> Self {
        QFunction { table }
    }

    pub fn table(&self) -> &Array3<f64> {
        &self.table
    }
}

impl PerStepTable for QFunction {
    fn values(&self) -> &Array3<f64> {
        &self.table
    }
}

fn check_policy<D: Dynamics + ?Sized>(dynamics: &D, policy: &Policy) -> Result<()> {
    if policy.dims() != dynamics.dims() {
        return Err(Error::arg(format!(
            "policy dimensions {:?} do not match the MDP {:?}",
            policy.dims(),
            dynamics.dims()
        )));
    }
    Ok(())
}

/// Forward recursion for the occupancy measure of `policy`.
pub fn occupancy<D: Dynamics + ?Sized>(dynamics: &D, policy: &Policy) -> Result<OccupancyMeasure> {
    check_policy(dynamics, policy)?;
    Ok(OccupancyMeasure {
        table: occupancy_table(dynamics, policy),
    })
}

pub(crate) fn occupancy_table<D: Dynamics + ?Sized>(dynamics: &D, policy: &Policy) -> Array3<f64> {
    let dims = dynamics.dims();
    let (ns, na) = (dims.num_states, dims.num_actions);
    let mut table = dims.zeros();
    let mut state_mass = dynamics.initial_dist().to_vec();
    let flat = table.as_slice_mut().unwrap();
    for h in 0..dims.horizon {
        let step = &mut flat[h * ns * na..(h + 1) * ns * na];
        for (s, &m) in state_mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            match policy.action_dist(h, s) {
                ActionDist::Deterministic(a) => step[s * na + a] = m,
                ActionDist::Stochastic(p) => {
                    for (slot, &pa) in step[s * na..(s + 1) * na].iter_mut().zip(p) {
                        *slot = m * pa;
                    }
                }
            }
        }
        if h + 1 < dims.horizon {
            state_mass.iter_mut().for_each(|x| *x = 0.0);
            dynamics.push_forward(h, step, &mut state_mass);
        }
    }
    table
}

/// Weighted sum of the component occupancies.
pub fn mixture_occupancy<D: Dynamics + ?Sized>(dynamics: &D, mix: &MixturePolicy) -> Result<OccupancyMeasure> {
    let mut table = dynamics.dims().zeros();
    for (c, &w) in mix.components().iter().zip(mix.weights()) {
        table.scaled_add(w, occupancy(dynamics, c)?.table());
    }
    Ok(OccupancyMeasure { table })
}

/// The Markov policy `π_h(a|s) = occ_h(s, a) / Σ_b occ_h(s, b)`, uniform where a state
/// carries no mass. Any policy mixture is realized exactly by the policy built from
/// its averaged occupancy.
pub fn policy_from_occupancy(occ: &Array3<f64>) -> Result<Policy> {
    let (h, ns, na) = occ.dim();
    Dims::new(h, ns, na)?;
    let mut table = occ.clone();
    for mut row in table.lanes_mut(ndarray::Axis(2)) {
        let total: f64 = row.iter().map(|x| x.max(0.0)).sum();
        if total > 0.0 {
            row.mapv_inplace(|x| x.max(0.0) / total);
        } else {
            row.fill(1.0 / na as f64);
        }
    }
    Policy::from_table(table)
}

/// `Σ_h Σ_{s,a} P_h(s, a) · r_h(s, a)`.
pub fn value_dual<T: PerStepTable + ?Sized>(occ: &T, reward: &Array3<f64>) -> Result<f64> {
    let occ = occ.values();
    if occ.dim() != reward.dim() {
        return Err(Error::arg(format!(
            "occupancy shape {:?} and reward shape {:?} differ",
            occ.dim(),
            reward.dim()
        )));
    }
    Ok(occ.iter().zip(reward.iter()).map(|(p, r)| p * r).sum())
}

/// Expected return of `policy` by backward induction, `E_{s∼ρ} V_1(s)`.
pub fn bellman_value<D: Dynamics + ?Sized>(dynamics: &D, policy: &Policy, reward: &Array3<f64>) -> Result<f64> {
    check_policy(dynamics, policy)?;
    dynamics.dims().check_table(reward, "reward")?;
    let (_, v1) = evaluate(dynamics, policy, reward);
    Ok(dot(dynamics.initial_dist(), &v1))
}

/// Expected return of a mixture: the weighted sum of its components' values.
pub fn mixture_value<D: Dynamics + ?Sized>(dynamics: &D, mix: &MixturePolicy, reward: &Array3<f64>) -> Result<f64> {
    mix.components()
        .iter()
        .zip(mix.weights())
        .map(|(c, &w)| bellman_value(dynamics, c, reward).map(|v| w * v))
        .sum()
}

/// Policy evaluation; returns the Q table and `V_1`.
fn evaluate<D: Dynamics + ?Sized>(dynamics: &D, policy: &Policy, reward: &Array3<f64>) -> (Array3<f64>, Vec<f64>) {
    let dims = dynamics.dims();
    let (ns, na) = (dims.num_states, dims.num_actions);
    let reward = reward.as_standard_layout();
    let r = reward.as_slice().unwrap();
    let mut q = dims.zeros();
    let qf = q.as_slice_mut().unwrap();
    let mut v_next = vec![0.0; ns];
    for h in (0..dims.horizon).rev() {
        let step = &mut qf[h * ns * na..(h + 1) * ns * na];
        if h + 1 < dims.horizon {
            dynamics.expected_next(h, &v_next, step);
        } else {
            step.iter_mut().for_each(|x| *x = 0.0);
        }
        for (slot, &rv) in step.iter_mut().zip(&r[h * ns * na..(h + 1) * ns * na]) {
            *slot += rv;
        }
        for (s, v) in v_next.iter_mut().enumerate() {
            let row = &step[s * na..(s + 1) * na];
            *v = match policy.action_dist(h, s) {
                ActionDist::Deterministic(a) => row[a],
                ActionDist::Stochastic(p) => dot(p, row),
            };
        }
    }
    (q, v_next)
}

/// Q-function of `policy` under `reward`.
pub fn q_values<D: Dynamics + ?Sized>(dynamics: &D, policy: &Policy, reward: &Array3<f64>) -> Result<QFunction> {
    check_policy(dynamics, policy)?;
    dynamics.dims().check_table(reward, "reward")?;
    Ok(QFunction {
        table: evaluate(dynamics, policy, reward).0,
    })
}

/// Greedy backward induction. Returns a deterministic optimal policy (ties go to the
/// lowest action index) and its value. Rewards may be negative.
pub fn value_iteration<D: Dynamics + ?Sized>(dynamics: &D, reward: &Array3<f64>) -> Result<(Policy, f64)> {
    let dims = dynamics.dims();
    dims.check_table(reward, "reward")?;
    if reward.iter().any(|r| !r.is_finite()) {
        return Err(Error::Numeric("reward has a non-finite entry".into()));
    }
    let (ns, na) = (dims.num_states, dims.num_actions);
    let reward = reward.as_standard_layout();
    let r = reward.as_slice().unwrap();
    let mut actions = vec![0usize; dims.horizon * ns];
    let mut v_next = vec![0.0; ns];
    let mut q = vec![0.0; ns * na];
    for h in (0..dims.horizon).rev() {
        if h + 1 < dims.horizon {
            dynamics.expected_next(h, &v_next, &mut q);
        } else {
            q.iter_mut().for_each(|x| *x = 0.0);
        }
        let rh = &r[h * ns * na..(h + 1) * ns * na];
        for s in 0..ns {
            let mut best = 0;
            let mut best_q = rh[s * na] + q[s * na];
            for a in 1..na {
                let qa = rh[s * na + a] + q[s * na + a];
                if qa > best_q {
                    best_q = qa;
                    best = a;
                }
            }
            actions[h * ns + s] = best;
            v_next[s] = best_q;
        }
    }
    let value = dot(dynamics.initial_dist(), &v_next);
    Ok((Policy::from_actions(dims, actions)?, value))
}

/// `Σ_h ‖a_h − b_h‖₁`.
pub fn l1_occupancy_distance<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: PerStepTable + ?Sized,
    B: PerStepTable + ?Sized,
{
    let (a, b) = (a.values(), b.values());
    if a.dim() != b.dim() {
        return Err(Error::arg(format!("shapes {:?} and {:?} differ", a.dim(), b.dim())));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
