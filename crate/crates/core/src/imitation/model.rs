use std::sync::Arc;

use ndarray::Array3;

use crate::error::Result;
use crate::mdp::{Dims, Dynamics, Policy, StepKernel, TabularMdp};
use crate::rng::Stream;
use crate::trajectory::{Dataset, Simulator, Trajectory};

/// Failure probability used inside exploration and optimism bonuses.
pub const DEFAULT_DELTA: f64 = 0.05;

/// Count-based transition model `P̂_h(s'|s,a) = n_h(s,a,s') / n_h(s,a)`.
///
/// Pairs that were never visited fall back to the uniform distribution over
/// states. The initial distribution is the empirical distribution of observed
/// first states, uniform until one is observed.
#[derive(Debug, Clone)]
pub struct EmpiricalModel {
    dims: Dims,
    visit_counts: Vec<u64>,
    /// Sparse `(s', count)` lists per `(h, s, a)`, in first-seen order.
    transition_counts: Vec<Vec<(usize, u64)>>,
    initial_counts: Vec<u64>,
    initial_dist: Vec<f64>,
    episodes: usize,
}

impl EmpiricalModel {
    pub fn new(dims: Dims) -> Self {
        let cells = dims.len();
        let ns = dims.num_states;
        EmpiricalModel {
            dims,
            visit_counts: vec![0; cells],
            transition_counts: vec![Vec::new(); cells],
            initial_counts: vec![0; ns],
            initial_dist: vec![1.0 / ns as f64; ns],
            episodes: 0,
        }
    }

    fn cell(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.dims.num_states + s) * self.dims.num_actions + a
    }

    /// Adds the transitions and the initial state of one episode.
    pub fn record(&mut self, tr: &Trajectory) {
        let steps = tr.steps();
        if let Some(&(s0, _)) = steps.first() {
            self.observe_initial_state(s0);
        }
        for h in 0..steps.len().saturating_sub(1) {
            let (s, a) = steps[h];
            let next = steps[h + 1].0;
            let c = self.cell(h, s, a);
            self.visit_counts[c] += 1;
            let row = &mut self.transition_counts[c];
            match row.iter_mut().find(|(t, _)| *t == next) {
                Some((_, n)) => *n += 1,
                None => row.push((next, 1)),
            }
        }
        self.episodes += 1;
    }

    /// Counts a first state without any transition information.
    pub fn observe_initial_state(&mut self, s: usize) {
        self.initial_counts[s] += 1;
        let total: u64 = self.initial_counts.iter().sum();
        for (p, &n) in self.initial_dist.iter_mut().zip(&self.initial_counts) {
            *p = n as f64 / total as f64;
        }
    }

    pub fn record_dataset(&mut self, d: &Dataset) {
        for t in d.trajectories() {
            self.record(t);
        }
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    pub fn visit_count(&self, h: usize, s: usize, a: usize) -> u64 {
        self.visit_counts[self.cell(h, s, a)]
    }

    pub fn transition_count(&self, h: usize, s: usize, a: usize, s_next: usize) -> u64 {
        self.transition_counts[self.cell(h, s, a)]
            .iter()
            .find(|(t, _)| *t == s_next)
            .map_or(0, |&(_, n)| n)
    }

    /// `P̂_h(s'|s,a)`, including the uniform fallback.
    pub fn prob(&self, h: usize, s: usize, a: usize, s_next: usize) -> f64 {
        let n = self.visit_count(h, s, a);
        if n == 0 {
            1.0 / self.dims.num_states as f64
        } else {
            self.transition_count(h, s, a, s_next) as f64 / n as f64
        }
    }

    /// Per-step visit counts as an `[h, s, a]` table (the last step is always zero).
    pub fn visit_table(&self) -> Array3<f64> {
        Array3::from_shape_vec(self.dims.shape(), self.visit_counts.iter().map(|&n| n as f64).collect())
            .expect("count table matches dims")
    }

    /// A standalone MDP with the estimated dynamics and the given rewards.
    pub fn to_mdp(&self, rewards: Array3<f64>) -> Result<TabularMdp> {
        let (ns, na) = (self.dims.num_states, self.dims.num_actions);
        let mut kernels = Vec::with_capacity(self.dims.horizon);
        for h in 0..self.dims.horizon {
            let rows = (0..ns * na)
                .map(|r| {
                    let c = h * ns * na + r;
                    let n = self.visit_counts[c];
                    if n == 0 {
                        (0..ns).map(|t| (t, 1.0 / ns as f64)).collect()
                    } else {
                        let mut row: Vec<(usize, f64)> =
                            self.transition_counts[c].iter().map(|&(t, k)| (t, k as f64 / n as f64)).collect();
                        row.sort_by_key(|&(t, _)| t);
                        row
                    }
                })
                .collect();
            kernels.push(Arc::new(StepKernel::from_rows(ns, na, rows)?));
        }
        TabularMdp::new(self.initial_dist.clone(), kernels, rewards)
    }
}

impl Dynamics for EmpiricalModel {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    fn expected_next(&self, h: usize, values: &[f64], out: &mut [f64]) {
        let base = h * out.len();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        for (r, slot) in out.iter_mut().enumerate() {
            let n = self.visit_counts[base + r];
            *slot = if n == 0 {
                mean
            } else {
                self.transition_counts[base + r].iter().map(|&(t, k)| k as f64 * values[t]).sum::<f64>() / n as f64
            };
        }
    }

    fn push_forward(&self, h: usize, sa_mass: &[f64], next_mass: &mut [f64]) {
        let base = h * sa_mass.len();
        let mut spread = 0.0;
        for (r, &m) in sa_mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let n = self.visit_counts[base + r];
            if n == 0 {
                spread += m;
                continue;
            }
            for &(t, k) in &self.transition_counts[base + r] {
                next_mass[t] += m * k as f64 / n as f64;
            }
        }
        if spread > 0.0 {
            let share = spread / next_mass.len() as f64;
            next_mass.iter_mut().for_each(|x| *x += share);
        }
    }
}

/// Exploration bonus scale `log(|S||A|H·n/δ)` for a budget of `n` episodes.
pub fn exploration_scale(dims: Dims, episodes: usize, delta: f64) -> f64 {
    (dims.len() as f64 * episodes.max(1) as f64 / delta).ln()
}

/// Greedy policy on the uncertainty recursion
/// `W_h(s,a) = β / max(n_h(s,a), 1) + Σ_{s'} P̂_h(s'|s,a) max_{a'} W_{h+1}(s', a')`.
///
/// `W` is not capped at `H`: β alone is of order `H` at practical sizes, so a cap
/// saturates every entry and the greedy choice loses all look-ahead.
pub fn uncertainty_policy(model: &EmpiricalModel, beta: f64) -> Result<Policy> {
    let dims = model.dims;
    let (ns, na) = (dims.num_states, dims.num_actions);
    let mut actions = vec![0usize; dims.horizon * ns];
    let mut w_next = vec![0.0; ns];
    let mut w = vec![0.0; ns * na];
    for h in (0..dims.horizon).rev() {
        if h + 1 < dims.horizon {
            model.expected_next(h, &w_next, &mut w);
        } else {
            w.iter_mut().for_each(|x| *x = 0.0);
        }
        for s in 0..ns {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for a in 0..na {
                let n = model.visit_count(h, s, a).max(1) as f64;
                let score = beta / n + w[s * na + a];
                if score > best_score {
                    best_score = score;
                    best = a;
                }
            }
            actions[h * ns + s] = best;
            w_next[s] = best_score;
        }
    }
    Policy::from_actions(dims, actions)
}

/// Budget-driven reward-free exploration: each episode follows the greedy policy
/// on the current uncertainty estimate, then its counts are added to the model.
pub fn explore_into(
    sim: &mut Simulator<'_>,
    model: &mut EmpiricalModel,
    episodes: usize,
    delta: f64,
    rng: &mut Stream,
) -> Result<()> {
    let beta = exploration_scale(model.dims, episodes, delta);
    for _ in 0..episodes {
        let pi = uncertainty_policy(model, beta)?;
        let tr = sim.episode(&pi, rng)?;
        model.record(&tr);
    }
    Ok(())
}

/// Runs `episodes` exploration episodes against `env` and returns the model.
pub fn reward_free_explore(env: &TabularMdp, episodes: usize, rng: &mut Stream) -> Result<EmpiricalModel> {
    let mut sim = Simulator::new(env, episodes);
    let mut model = EmpiricalModel::new(env.dims());
    explore_into(&mut sim, &mut model, episodes, DEFAULT_DELTA, rng)?;
    Ok(model)
}
