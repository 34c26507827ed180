//! Trajectories, demonstration datasets, the two-way dataset split and the
//! known-prefix index built from the first half.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionDist, Dims, Dynamics, MixturePolicy, Policy, TabularMdp};
use crate::rng::Stream;

/// A length-`H` sequence of `(state, action)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    steps: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn new(steps: Vec<(usize, usize)>) -> Self {
        Trajectory { steps }
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn state(&self, h: usize) -> usize {
        self.steps[h].0
    }

    pub fn action(&self, h: usize) -> usize {
        self.steps[h].1
    }

    fn check(&self, dims: Dims) -> Result<()> {
        if self.steps.len() != dims.horizon {
            return Err(Error::Data(format!(
                "trajectory has {} steps, expected {}",
                self.steps.len(),
                dims.horizon
            )));
        }
        if let Some(&(s, a)) = self
            .steps
            .iter()
            .find(|&&(s, a)| s >= dims.num_states || a >= dims.num_actions)
        {
            return Err(Error::Data(format!("pair ({s}, {a}) out of range")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Expert,
    Rollout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    trajectories: Vec<Trajectory>,
    source: DataSource,
}

impl Dataset {
    pub fn new(trajectories: Vec<Trajectory>, source: DataSource) -> Result<Self> {
        if let Some(first) = trajectories.first() {
            if trajectories.iter().any(|t| t.len() != first.len()) {
                return Err(Error::Data("trajectories have different horizons".into()));
            }
        }
        Ok(Dataset { trajectories, source })
    }

    pub fn empty(source: DataSource) -> Self {
        Dataset {
            trajectories: Vec::new(),
            source,
        }
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn source(&self) -> DataSource {
        self.source
    }

    /// Checks every trajectory against the given dimensions.
    pub fn validate(&self, dims: Dims) -> Result<()> {
        self.trajectories.iter().try_for_each(|t| t.check(dims))
    }

    /// Newline-delimited JSON, one `[[s, a], …]` array per trajectory.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for t in &self.trajectories {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R, source: DataSource) -> Result<Self> {
        let mut trajectories = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Data(format!("line {}: {e}", i + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            let t: Trajectory =
                serde_json::from_str(&line).map_err(|e| Error::Data(format!("line {}: {e}", i + 1)))?;
            trajectories.push(t);
        }
        Dataset::new(trajectories, source)
    }
}

/// Anything that can drive an episode: a single policy or a mixture, which
/// draws one component per episode.
pub trait RolloutPolicy {
    fn dims(&self) -> Dims;
    fn episode_policy(&self, rng: &mut Stream) -> &Policy;
}

impl RolloutPolicy for Policy {
    fn dims(&self) -> Dims {
        Policy::dims(self)
    }

    fn episode_policy(&self, _rng: &mut Stream) -> &Policy {
        self
    }
}

impl RolloutPolicy for MixturePolicy {
    fn dims(&self) -> Dims {
        MixturePolicy::dims(self)
    }

    fn episode_policy(&self, rng: &mut Stream) -> &Policy {
        if self.components().len() == 1 {
            return &self.components()[0];
        }
        let i = sample_index(self.weights().iter().copied(), rng);
        &self.components()[i]
    }
}

fn sample_index(probs: impl Iterator<Item = f64>, rng: &mut Stream) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn sample_action(dist: ActionDist<'_>, rng: &mut Stream) -> usize {
    match dist {
        ActionDist::Deterministic(a) => a,
        ActionDist::Stochastic(p) => sample_index(p.iter().copied(), rng),
    }
}

/// Draws one episode: `s₁ ∼ ρ`, `a_h ∼ π_h(·|s_h)`, `s_{h+1} ∼ P_h(·|s_h, a_h)`.
pub fn sample_episode(env: &TabularMdp, policy: &Policy, rng: &mut Stream) -> Trajectory {
    let dims = env.dims();
    let mut steps = Vec::with_capacity(dims.horizon);
    let mut s = sample_index(env.initial_dist().iter().copied(), rng);
    for h in 0..dims.horizon {
        let a = sample_action(policy.action_dist(h, s), rng);
        steps.push((s, a));
        if h + 1 < dims.horizon {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut next = s;
            for (t, p) in env.kernel(h).row(s, a) {
                acc += p;
                next = t;
                if u < acc {
                    break;
                }
            }
            s = next;
        }
    }
    Trajectory::new(steps)
}

/// `count` i.i.d. episodes of `policy` in `env`.
pub fn sample_trajectories<P: RolloutPolicy + ?Sized>(
    env: &TabularMdp,
    policy: &P,
    count: usize,
    source: DataSource,
    rng: &mut Stream,
) -> Result<Dataset> {
    if policy.dims() != env.dims() {
        return Err(Error::arg("policy dimensions do not match the environment"));
    }
    let trajectories = (0..count)
        .map(|_| {
            let pi = policy.episode_policy(rng);
            sample_episode(env, pi, rng)
        })
        .collect();
    Ok(Dataset { trajectories, source })
}

/// Like [`sample_trajectories`], but trajectory `i` draws from its own stream
/// `(master_seed, stream_id([key, i]))`. Datasets of different sizes built from the
/// same key are nested, and trajectories keep their initial state across horizons.
pub fn sample_trajectories_keyed<P: RolloutPolicy + ?Sized>(
    env: &TabularMdp,
    policy: &P,
    count: usize,
    source: DataSource,
    master_seed: u64,
    key: &str,
) -> Result<Dataset> {
    if policy.dims() != env.dims() {
        return Err(Error::arg("policy dimensions do not match the environment"));
    }
    let trajectories = (0..count)
        .map(|i| {
            let mut rng = crate::rng::stream(master_seed, crate::rng::stream_id(&[key, &i.to_string()]));
            let pi = policy.episode_policy(&mut rng);
            sample_episode(env, pi, &mut rng)
        })
        .collect();
    Ok(Dataset { trajectories, source })
}

/// An environment that refuses episodes beyond a fixed budget.
#[derive(Debug)]
pub struct Simulator<'a> {
    env: &'a TabularMdp,
    budget: usize,
    used: usize,
}

impl<'a> Simulator<'a> {
    pub fn new(env: &'a TabularMdp, budget: usize) -> Self {
        Simulator { env, budget, used: 0 }
    }

    pub fn dims(&self) -> Dims {
        self.env.dims()
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.used
    }

    pub fn episode<P: RolloutPolicy + ?Sized>(&mut self, policy: &P, rng: &mut Stream) -> Result<Trajectory> {
        if self.used >= self.budget {
            return Err(Error::Budget {
                used: self.used,
                budget: self.budget,
            });
        }
        if policy.dims() != self.env.dims() {
            return Err(Error::arg("policy dimensions do not match the environment"));
        }
        self.used += 1;
        let pi = policy.episode_policy(rng);
        Ok(sample_episode(self.env, pi, rng))
    }

    pub fn rollouts<P: RolloutPolicy + ?Sized>(&mut self, policy: &P, count: usize, rng: &mut Stream) -> Result<Dataset> {
        let trajectories = (0..count)
            .map(|_| self.episode(policy, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            trajectories,
            source: DataSource::Rollout,
        })
    }
}

/// The random two-way split `D = D₁ ∪ D₁ᶜ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub d1: Dataset,
    pub d1c: Dataset,
}

/// Uniformly random partition into halves; with an odd count `d1` gets the extra trajectory.
pub fn split_dataset(d: &Dataset, rng: &mut Stream) -> Result<SplitDataset> {
    if d.len() < 2 {
        return Err(Error::arg(format!("cannot split a dataset of {} trajectories", d.len())));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(rng);
    let n1 = d.len().div_ceil(2);
    let pick = |idx: &[usize]| Dataset {
        trajectories: idx.iter().map(|&i| d.trajectories[i].clone()).collect(),
        source: d.source,
    };
    Ok(SplitDataset {
        d1: pick(&order[..n1]),
        d1c: pick(&order[n1..]),
    })
}

/// States observed at each step of `D₁` together with the action recorded there.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixIndex {
    dims: Dims,
    /// Recorded action at `h * |S| + s`, `None` if `s` was not observed at step `h`.
    seen_action: Vec<Option<usize>>,
}

impl PrefixIndex {
    /// Indexes `d1`. When `expert_hint` is given, each recorded action must agree with it.
    pub fn build(d1: &Dataset, dims: Dims, expert_hint: Option<&Policy>) -> Result<Self> {
        d1.validate(dims)?;
        if let Some(hint) = expert_hint {
            if hint.dims() != dims {
                return Err(Error::arg("expert hint dimensions do not match"));
            }
        }
        let ns = dims.num_states;
        let mut seen_action = vec![None; dims.horizon * ns];
        for t in d1.trajectories() {
            for (h, &(s, a)) in t.steps().iter().enumerate() {
                let slot = &mut seen_action[h * ns + s];
                match *slot {
                    Some(b) if b != a => {
                        return Err(Error::Data(format!(
                            "non-deterministic expert: actions {b} and {a} both recorded at step {h}, state {s}"
                        )))
                    }
                    _ => *slot = Some(a),
                }
                if let Some(hint) = expert_hint {
                    if hint.prob(h, s, a) == 0.0 {
                        return Err(Error::Data(format!(
                            "recorded action {a} at step {h}, state {s} has zero probability under the expert"
                        )));
                    }
                }
            }
        }
        Ok(PrefixIndex { dims, seen_action })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn seen_action(&self, h: usize, s: usize) -> Option<usize> {
        self.seen_action[h * self.dims.num_states + s]
    }

    pub fn is_seen(&self, h: usize, s: usize) -> bool {
        self.seen_action(h, s).is_some()
    }

    /// Length of the longest prefix of `tr` whose states were all observed at their step.
    pub fn known_prefix_len(&self, tr: &Trajectory) -> usize {
        tr.steps()
            .iter()
            .enumerate()
            .take_while(|&(h, &(s, _))| self.is_seen(h, s))
            .count()
    }

    /// Whether the first `h` states of `tr` (`1 ≤ h ≤ H`) were all observed at their step in `D₁`.
    pub fn is_known_prefix(&self, tr: &Trajectory, h: usize) -> bool {
        assert!(h >= 1 && h <= tr.len(), "prefix length {h} out of range");
        self.known_prefix_len(tr) >= h
    }

    /// The member of `Π_BC(D₁)` that replays the recorded action on observed
    /// `(h, s)` and is uniform elsewhere.
    pub fn bc_policy(&self) -> Policy {
        let d = self.dims;
        let p = 1.0 / d.num_actions as f64;
        let table = ndarray::Array3::from_shape_fn(d.shape(), |(h, s, a)| match self.seen_action(h, s) {
            Some(b) => f64::from(u8::from(a == b)),
            None => p,
        });
        Policy::from_table(table).expect("rows are one-hot or uniform")
    }
}

pub fn build_prefix_index(d1: &Dataset, dims: Dims, expert_hint: Option<&Policy>) -> Result<PrefixIndex> {
    PrefixIndex::build(d1, dims, expert_hint)
}

pub fn is_known_prefix(idx: &PrefixIndex, tr: &Trajectory, h: usize) -> bool {
    idx.is_known_prefix(tr, h)
}

pub fn bc_policy(idx: &PrefixIndex) -> Policy {
    idx.bc_policy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_reset_cliff, make_standard_imitation};
    use crate::rng::stream;

    fn traj(states: &[usize], actions: &[usize]) -> Trajectory {
        Trajectory::new(states.iter().copied().zip(actions.iter().copied()).collect())
    }

    #[test]
    fn deterministic_rollouts_are_identical() {
        let env = make_standard_imitation(1, 2, 4).unwrap();
        let d = sample_trajectories(&env.mdp, &env.expert, 5, DataSource::Expert, &mut stream(1, 0)).unwrap();
        assert!(d.trajectories().windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn cliff_expert_never_visits_bad_state() {
        let env = make_reset_cliff(6, 3, 10, 10).unwrap();
        let d = sample_trajectories(&env.mdp, &env.expert, 300, DataSource::Expert, &mut stream(2, 0)).unwrap();
        assert!(d.trajectories().iter().all(|t| t.steps().iter().all(|&(s, a)| s != 5 && a == 0)));
    }

    #[test]
    fn split_sizes() {
        let env = make_standard_imitation(3, 2, 2).unwrap();
        for (m, n1, n2) in [(10, 5, 5), (7, 4, 3), (2, 1, 1)] {
            let d = sample_trajectories(&env.mdp, &env.expert, m, DataSource::Expert, &mut stream(3, 0)).unwrap();
            let split = split_dataset(&d, &mut stream(3, 1)).unwrap();
            assert_eq!((split.d1.len(), split.d1c.len()), (n1, n2));
        }
        let one = Dataset::new(vec![traj(&[0, 0], &[0, 0])], DataSource::Expert).unwrap();
        assert!(split_dataset(&one, &mut stream(3, 2)).is_err());
    }

    #[test]
    fn split_is_seeded() {
        let env = make_standard_imitation(5, 2, 2).unwrap();
        let d = sample_trajectories(&env.mdp, &env.expert, 2, DataSource::Expert, &mut stream(4, 0)).unwrap();
        let a = split_dataset(&d, &mut stream(4, 1)).unwrap();
        let b = split_dataset(&d, &mut stream(4, 1)).unwrap();
        assert_eq!(a, b);
        let mut union: Vec<_> = a.d1.trajectories().iter().chain(a.d1c.trajectories()).cloned().collect();
        let mut orig = d.trajectories().to_vec();
        union.sort();
        orig.sort();
        assert_eq!(union, orig);
    }

    #[test]
    fn prefix_index_membership() {
        let dims = Dims::new(3, 3, 2).unwrap();
        let d1 = Dataset::new(
            vec![traj(&[0, 1, 2], &[0, 1, 0]), traj(&[1, 1, 0], &[1, 1, 0])],
            DataSource::Expert,
        )
        .unwrap();
        let idx = build_prefix_index(&d1, dims, None).unwrap();
        assert!(idx.is_seen(0, 0) && idx.is_seen(0, 1) && !idx.is_seen(0, 2));
        assert!(idx.is_seen(1, 1) && !idx.is_seen(1, 0));
        assert!(idx.is_seen(2, 2) && idx.is_seen(2, 0) && !idx.is_seen(2, 1));

        let all = traj(&[0, 1, 2], &[0, 0, 0]);
        assert!((1..=3).all(|h| is_known_prefix(&idx, &all, h)));
        let first_unseen = traj(&[2, 1, 2], &[0, 0, 0]);
        assert!((1..=3).all(|h| !is_known_prefix(&idx, &first_unseen, h)));
        let mixed = traj(&[1, 1, 1], &[0, 0, 0]);
        assert!(is_known_prefix(&idx, &mixed, 1) && is_known_prefix(&idx, &mixed, 2));
        assert!(!is_known_prefix(&idx, &mixed, 3));
    }

    #[test]
    fn conflicting_actions_are_rejected() {
        let dims = Dims::new(1, 2, 2).unwrap();
        let d1 = Dataset::new(vec![traj(&[0], &[0]), traj(&[0], &[1])], DataSource::Expert).unwrap();
        let err = build_prefix_index(&d1, dims, None).unwrap_err();
        assert!(err.to_string().contains("non-deterministic expert"));
    }

    #[test]
    fn bc_policy_from_index() {
        let env = make_standard_imitation(3, 2, 2).unwrap();
        let dims = env.mdp.dims();
        let empty = build_prefix_index(&Dataset::empty(DataSource::Expert), dims, None).unwrap();
        assert_eq!(bc_policy(&empty), Policy::uniform(dims));

        let full = Dataset::new(
            (0..3).map(|s| traj(&[s, s], &[s % 2, s % 2])).collect(),
            DataSource::Expert,
        )
        .unwrap();
        let idx = build_prefix_index(&full, dims, Some(&env.expert)).unwrap();
        assert_eq!(bc_policy(&idx), env.expert);

        let partial = Dataset::new(vec![traj(&[1, 1], &[1, 1])], DataSource::Expert).unwrap();
        let pi = bc_policy(&build_prefix_index(&partial, dims, None).unwrap());
        assert_eq!(pi.deterministic_action(0, 1), Some(1));
        assert_eq!(pi.prob(1, 0, 0), 0.5);
    }

    #[test]
    fn simulator_enforces_budget() {
        let env = make_standard_imitation(2, 2, 2).unwrap();
        let mut sim = Simulator::new(&env.mdp, 3);
        let mut rng = stream(5, 0);
        assert_eq!(sim.rollouts(&env.expert, 3, &mut rng).unwrap().len(), 3);
        assert!(matches!(sim.episode(&env.expert, &mut rng), Err(Error::Budget { used: 3, budget: 3 })));
    }

    #[test]
    fn jsonl_round_trip() {
        let d = Dataset::new(vec![traj(&[0, 1], &[1, 0]), traj(&[2, 2], &[0, 0])], DataSource::Expert).unwrap();
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().next().unwrap(), "[[0,1],[1,0]]");
        assert_eq!(Dataset::read_jsonl(&buf[..], DataSource::Expert).unwrap(), d);
    }
}
