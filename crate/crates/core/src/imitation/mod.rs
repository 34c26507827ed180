//! Imitation algorithms: estimators composed with solvers, each evaluated
//! exactly on the true environment.

mod model;

pub use model::{
    exploration_scale, explore_into, reward_free_explore, uncertainty_policy, EmpiricalModel, DEFAULT_DELTA,
};

use std::fmt;
use std::str::FromStr;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::env::EnvBundle;
use crate::error::{Error, Result};
use crate::estimators::{mle_estimate, split_estimate_known, split_estimate_unknown, OccupancyEstimate};
use crate::mdp::{
    bellman_value, l1_occupancy_distance, mixture_occupancy, mixture_value, occupancy, occupancy_table,
    policy_from_occupancy, q_values, Dynamics, MixturePolicy, PerStepTable, Policy,
};
use crate::rng::Stream;
use crate::solvers::{
    adaptive_step, frank_wolfe_solve, mirror_descent_policy, mw_saddle_solve, ogd_saddle_solve, SolverConfig,
    SolverTrace, TraceEntry,
};
use crate::trajectory::{split_dataset, Dataset, PrefixIndex, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bc,
    Vail,
    Tail,
    Fem,
    Gtal,
    Gail,
    Oal,
    Mbtail,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Bc,
        Algorithm::Vail,
        Algorithm::Tail,
        Algorithm::Fem,
        Algorithm::Gtal,
        Algorithm::Gail,
        Algorithm::Oal,
        Algorithm::Mbtail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bc => "bc",
            Algorithm::Vail => "vail",
            Algorithm::Tail => "tail",
            Algorithm::Fem => "fem",
            Algorithm::Gtal => "gtal",
            Algorithm::Gail => "gail",
            Algorithm::Oal => "oal",
            Algorithm::Mbtail => "mbtail",
        }
    }

    /// Whether the method queries the environment for episodes.
    pub fn needs_interactions(self) -> bool {
        matches!(self, Algorithm::Oal | Algorithm::Mbtail)
    }

    /// Whether the method has an iteration count.
    pub fn is_iterative(self) -> bool {
        !matches!(self, Algorithm::Bc)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == lower)
            .ok_or_else(|| Error::arg(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct ImitationResult {
    pub algorithm: Algorithm,
    pub policy: MixturePolicy,
    /// `V^{πE} − V^π` under the environment rewards, by exact evaluation.
    pub value_gap: f64,
    /// `Σ_h ‖P^{πE}_h − P^π_h‖₁` on the true environment.
    pub expert_l1: f64,
    /// `Σ_h ‖P^{πE}_h − target_h‖₁` for methods that match an occupancy estimate.
    pub target_l1: Option<f64>,
    pub expert_trajectories: usize,
    pub interactions: usize,
    pub iterations: usize,
    pub trace: Option<SolverTrace>,
}

struct Outcome {
    policy: MixturePolicy,
    iterations: usize,
    interactions: usize,
    trace: SolverTrace,
}

fn evaluate(
    algorithm: Algorithm,
    env: &EnvBundle,
    d: &Dataset,
    outcome: Outcome,
    target: Option<&Array3<f64>>,
) -> Result<ImitationResult> {
    let rewards = env.mdp.rewards();
    let expert_occ = occupancy(&env.mdp, &env.expert)?;
    let expert_value = bellman_value(&env.mdp, &env.expert, rewards)?;
    let value = mixture_value(&env.mdp, &outcome.policy, rewards)?;
    let occ = mixture_occupancy(&env.mdp, &outcome.policy)?;
    let target_l1 = target.map(|t| l1_occupancy_distance(&expert_occ, t)).transpose()?;
    Ok(ImitationResult {
        algorithm,
        value_gap: expert_value - value,
        expert_l1: l1_occupancy_distance(&expert_occ, &occ)?,
        target_l1,
        expert_trajectories: d.len(),
        interactions: outcome.interactions,
        iterations: outcome.iterations,
        trace: (!outcome.trace.is_empty()).then_some(outcome.trace),
        policy: outcome.policy,
    })
}

fn require(d: &Dataset, min: usize, what: &str) -> Result<()> {
    if d.len() < min {
        return Err(Error::arg(format!("{what} needs at least {min} expert trajectories, got {}", d.len())));
    }
    Ok(())
}

/// Behavioral cloning: replay the recorded action on every observed `(h, s)`,
/// uniform elsewhere.
pub fn run_bc(env: &EnvBundle, d: &Dataset) -> Result<ImitationResult> {
    require(d, 1, "behavioral cloning")?;
    let idx = PrefixIndex::build(d, env.mdp.dims(), None)?;
    let outcome = Outcome {
        policy: MixturePolicy::single(idx.bc_policy()),
        iterations: 0,
        interactions: 0,
        trace: SolverTrace::default(),
    };
    evaluate(Algorithm::Bc, env, d, outcome, None)
}

fn solve_known(
    algorithm: Algorithm,
    env: &EnvBundle,
    d: &Dataset,
    target: &OccupancyEstimate,
    cfg: &SolverConfig,
) -> Result<ImitationResult> {
    let out = match algorithm {
        Algorithm::Fem => frank_wolfe_solve(&env.mdp, target, cfg)?,
        Algorithm::Gtal => mw_saddle_solve(&env.mdp, target, cfg)?,
        _ => ogd_saddle_solve(&env.mdp, target, cfg)?,
    };
    let outcome = Outcome {
        policy: out.policy,
        iterations: out.iterations,
        interactions: 0,
        trace: out.trace,
    };
    evaluate(algorithm, env, d, outcome, Some(target.table()))
}

/// Occupancy matching against the count estimate with the OGD saddle solver.
pub fn run_vail(env: &EnvBundle, d: &Dataset, cfg: &SolverConfig) -> Result<ImitationResult> {
    require(d, 1, "VAIL")?;
    let target = mle_estimate(d, env.mdp.dims())?;
    solve_known(Algorithm::Vail, env, d, &target, cfg)
}

/// Occupancy matching against the split-dataset estimate that uses the known
/// transitions on prefixes observed in the first half.
pub fn run_tail(env: &EnvBundle, d: &Dataset, cfg: &SolverConfig, rng: &mut Stream) -> Result<ImitationResult> {
    require(d, 2, "TAIL")?;
    let split = split_dataset(d, rng)?;
    let target = split_estimate_known(&env.mdp, &split)?;
    solve_known(Algorithm::Tail, env, d, &target, cfg)
}

/// Frank-Wolfe on the squared distance to the count estimate.
pub fn run_fem(env: &EnvBundle, d: &Dataset, cfg: &SolverConfig) -> Result<ImitationResult> {
    require(d, 1, "FEM")?;
    let target = mle_estimate(d, env.mdp.dims())?;
    solve_known(Algorithm::Fem, env, d, &target, cfg)
}

/// Multiplicative-weights saddle solver against the count estimate.
pub fn run_gtal(env: &EnvBundle, d: &Dataset, cfg: &SolverConfig) -> Result<ImitationResult> {
    require(d, 1, "GTAL")?;
    let target = mle_estimate(d, env.mdp.dims())?;
    solve_known(Algorithm::Gtal, env, d, &target, cfg)
}

/// Discriminator probabilities are kept inside `[floor, 1 − floor]`.
pub const DISCRIMINATOR_FLOOR: f64 = 1e-8;

/// `D*_h(s,a) = occ / (occ + target)` clamped to `[floor, 1 − floor]`; `0/0` maps to the floor.
pub fn optimal_discriminator(occ: &Array3<f64>, target: &Array3<f64>) -> Array3<f64> {
    let mut out = occ.clone();
    out.zip_mut_with(target, |o, &t| {
        let denom = *o + t;
        let raw = if denom > 0.0 { *o / denom } else { 0.0 };
        *o = raw.clamp(DISCRIMINATOR_FLOOR, 1.0 - DISCRIMINATOR_FLOOR);
    });
    out
}

/// `sqrt(2 ln|A| / (H² T))`.
pub fn default_policy_step(horizon: usize, num_actions: usize, iterations: usize) -> f64 {
    (2.0 * (num_actions as f64).ln() / ((horizon * horizon) as f64 * iterations as f64)).sqrt()
}

/// Mean of `occupancy_sum / count` realized as one Markov policy.
fn averaged_policy(occupancy_sum: &Array3<f64>, count: usize) -> Result<MixturePolicy> {
    let avg = occupancy_sum / count as f64;
    Ok(MixturePolicy::single(policy_from_occupancy(&avg)?))
}

/// GAIL with the closed-form discriminator: reward `−log D*` and a mirror-descent
/// policy step on its Q-function, starting from the uniform policy.
///
/// The returned mixture over the iterates `π⁽¹⁾..π⁽ᵀ⁾` is stored as the single
/// Markov policy with the same occupancy.
pub fn run_gail(env: &EnvBundle, d: &Dataset, cfg: &SolverConfig, eta: Option<f64>) -> Result<ImitationResult> {
    require(d, 1, "GAIL")?;
    cfg.validate()?;
    let dims = env.mdp.dims();
    let eta = eta.unwrap_or_else(|| default_policy_step(dims.horizon, dims.num_actions, cfg.iterations));
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::arg(format!("GAIL step size must be positive, got {eta}")));
    }
    let target = mle_estimate(d, dims)?;
    let mut pi = Policy::uniform(dims);
    let mut occ_sum = dims.zeros();
    let mut trace = SolverTrace::default();
    for t in 1..=cfg.iterations {
        let occ = occupancy_table(&env.mdp, &pi);
        let reward = optimal_discriminator(&occ, target.table()).mapv(|p| -p.ln());
        let q = q_values(&env.mdp, &pi, &reward)?;
        if cfg.record_trace {
            let gap: f64 = occ.iter().zip(target.table().iter()).map(|(a, b)| (a - b).abs()).sum();
            trace.entries.push(TraceEntry {
                iteration: t,
                loss: gap,
                grad_norm: 0.0,
                best_response_value: bellman_value(&env.mdp, &pi, &reward)?,
                weights_max_abs: 0.0,
                weights_hash: 0,
            });
        }
        occ_sum += &occ;
        pi = mirror_descent_policy(&pi, &q, eta)?;
    }
    let outcome = Outcome {
        policy: averaged_policy(&occ_sum, cfg.iterations)?,
        iterations: cfg.iterations,
        interactions: 0,
        trace,
    };
    evaluate(Algorithm::Gail, env, d, outcome, Some(target.table()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OalConfig {
    pub episodes: usize,
    pub delta: f64,
    /// Policy mirror-descent step; `None` means `sqrt(2 ln|A| / (H² K))`.
    pub policy_step: Option<f64>,
    pub record_trace: bool,
}

impl OalConfig {
    pub fn new(episodes: usize) -> Self {
        OalConfig {
            episodes,
            delta: DEFAULT_DELTA,
            policy_step: None,
            record_trace: false,
        }
    }
}

/// Optimism bonus `sqrt(log(|S||A|H·K/δ) / max(n, 1))` per `(h, s, a)`.
pub fn oal_bonus(model: &EmpiricalModel, episodes: usize, delta: f64) -> Array3<f64> {
    let scale = exploration_scale(model.dims(), episodes, delta);
    model.visit_table().mapv(|n| (scale / n.max(1.0)).sqrt())
}

/// Online model-based imitation: an OGD reward player against the model
/// occupancy, an optimistic mirror-descent policy player, and one real episode
/// per round to refine the model.
pub fn run_oal(env: &EnvBundle, d: &Dataset, cfg: &OalConfig, rng: &mut Stream) -> Result<ImitationResult> {
    require(d, 1, "OAL")?;
    if cfg.episodes == 0 {
        return Err(Error::arg("OAL needs at least one episode"));
    }
    let dims = env.mdp.dims();
    let k_total = cfg.episodes;
    let eta_pi = cfg
        .policy_step
        .unwrap_or_else(|| default_policy_step(dims.horizon, dims.num_actions, k_total));
    let target = mle_estimate(d, dims)?;
    let mut sim = Simulator::new(&env.mdp, k_total);
    let mut model = EmpiricalModel::new(dims);
    let mut pi = Policy::uniform(dims);
    let mut w = dims.zeros();
    let mut grad_sq_accum = 0.0;
    let mut occ_sum = dims.zeros();
    let mut trace = SolverTrace::default();

    for k in 1..=k_total {
        let grad = occupancy_table(&model, &pi) - target.table();
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        grad_sq_accum += grad_sq;
        let eta_w = adaptive_step(grad_sq_accum, dims);
        w.zip_mut_with(&grad, |wi, gi| *wi = (*wi - eta_w * gi).clamp(-1.0, 1.0));

        let reward = &w + &oal_bonus(&model, k_total, cfg.delta);
        let q = q_values(&model, &pi, &reward)?;
        pi = mirror_descent_policy(&pi, &q, eta_pi)?;
        if cfg.record_trace {
            trace.entries.push(TraceEntry {
                iteration: k,
                loss: w.iter().zip(grad.iter()).map(|(a, b)| a * b).sum(),
                grad_norm: grad_sq.sqrt(),
                best_response_value: bellman_value(&model, &pi, &reward)?,
                weights_max_abs: crate::solvers::max_abs(&w),
                weights_hash: crate::solvers::weights_hash(&w),
            });
        }

        let tr = sim.episode(&pi, rng)?;
        model.record(&tr);
        occ_sum += &occupancy_table(&env.mdp, &pi);
    }

    let outcome = Outcome {
        policy: averaged_policy(&occ_sum, k_total)?,
        iterations: k_total,
        interactions: sim.used(),
        trace,
    };
    evaluate(Algorithm::Oal, env, d, outcome, Some(target.table()))
}

/// OGD occupancy matching planned entirely inside `model`, evaluated on the true
/// environment. This is the last stage of MB-TAIL; with a perfect model and an
/// exact target it is plain TAIL.
pub fn match_in_model<D, T>(
    env: &EnvBundle,
    model: &D,
    target: &T,
    cfg: &SolverConfig,
    d: &Dataset,
    interactions: usize,
) -> Result<ImitationResult>
where
    D: Dynamics + ?Sized,
    T: PerStepTable + ?Sized,
{
    let out = ogd_saddle_solve(model, target, cfg)?;
    let outcome = Outcome {
        policy: out.policy,
        iterations: out.iterations,
        interactions,
        trace: out.trace,
    };
    evaluate(Algorithm::Mbtail, env, d, outcome, Some(target.values()))
}

/// Explore, estimate, match: half of the budget rolls out the BC policy for the
/// split estimate, the other half explores reward-free to fit the model, and the
/// OGD solver runs inside the model.
pub fn run_mbtail(
    env: &EnvBundle,
    d: &Dataset,
    interaction_budget: usize,
    cfg: &SolverConfig,
    rng: &mut Stream,
) -> Result<ImitationResult> {
    require(d, 2, "MB-TAIL")?;
    if interaction_budget < 2 {
        return Err(Error::arg(format!(
            "MB-TAIL needs an interaction budget of at least 2, got {interaction_budget}"
        )));
    }
    cfg.validate()?;
    let dims = env.mdp.dims();
    let split = split_dataset(d, rng)?;
    let idx = PrefixIndex::build(&split.d1, dims, None)?;
    let bc = idx.bc_policy();
    let bc_episodes = interaction_budget / 2;
    let explore_episodes = interaction_budget - bc_episodes;

    let mut sim = Simulator::new(&env.mdp, interaction_budget);
    let rollouts = sim.rollouts(&bc, bc_episodes, rng)?;
    let mut model = EmpiricalModel::new(dims);
    explore_into(&mut sim, &mut model, explore_episodes, DEFAULT_DELTA, rng)?;
    for t in rollouts.trajectories() {
        model.observe_initial_state(t.state(0));
    }

    let target = split_estimate_unknown(&split, &rollouts, &idx)?;
    match_in_model(env, &model, &target, cfg, d, sim.used())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_reset_cliff, make_standard_imitation};
    use crate::rng::stream;
    use crate::trajectory::{sample_trajectories, DataSource};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn expert_data(env: &EnvBundle, m: usize, seed: u64) -> Dataset {
        sample_trajectories(&env.mdp, &env.expert, m, DataSource::Expert, &mut stream(seed, 1)).unwrap()
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("foo".parse::<Algorithm>().is_err());
        assert_eq!("TAIL".parse::<Algorithm>().unwrap(), Algorithm::Tail);
    }

    #[test]
    fn discriminator_rules() {
        let occ = array![[[0.25, 0.0, 0.0]]];
        let target = array![[[0.25, 0.5, 0.0]]];
        let d = optimal_discriminator(&occ, &target);
        assert_eq!(d[[0, 0, 0]], 0.5);
        assert_eq!(d[[0, 0, 1]], DISCRIMINATOR_FLOOR);
        assert_eq!(d[[0, 0, 2]], DISCRIMINATOR_FLOOR);
        assert_abs_diff_eq!(-d[[0, 0, 0]].ln(), std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn bc_rejects_empty_and_covers_fully() {
        let env = make_standard_imitation(4, 2, 3).unwrap();
        assert!(run_bc(&env, &Dataset::empty(DataSource::Expert)).is_err());
        let d = expert_data(&env, 200, 0);
        let r = run_bc(&env, &d).unwrap();
        assert_abs_diff_eq!(r.value_gap, 0.0, epsilon = 1e-12);
        assert_eq!(r.interactions, 0);
    }

    #[test]
    fn bc_with_one_trajectory_on_cliff_has_positive_gap() {
        let env = make_reset_cliff(5, 3, 4, 2).unwrap();
        let d = expert_data(&env, 1, 4);
        let r = run_bc(&env, &d).unwrap();
        assert!(r.value_gap > 0.0);
    }

    #[test]
    fn known_transition_drivers_report_consistent_gaps() {
        let env = make_reset_cliff(5, 3, 4, 4).unwrap();
        let d = expert_data(&env, 30, 2);
        let cfg = SolverConfig::new(40);
        let results = [
            run_vail(&env, &d, &cfg).unwrap(),
            run_tail(&env, &d, &cfg, &mut stream(2, 2)).unwrap(),
            run_fem(&env, &d, &cfg).unwrap(),
            run_gtal(&env, &d, &cfg).unwrap(),
            run_gail(&env, &d, &cfg, None).unwrap(),
        ];
        let v_expert = bellman_value(&env.mdp, &env.expert, env.mdp.rewards()).unwrap();
        for r in &results {
            let v = mixture_value(&env.mdp, &r.policy, env.mdp.rewards()).unwrap();
            assert_abs_diff_eq!(r.value_gap, v_expert - v, epsilon = 1e-10);
            assert!(r.value_gap >= -1e-9 && r.value_gap <= 4.0);
            assert!(r.value_gap <= r.expert_l1 + 1e-9, "{:?}", r.algorithm);
            assert_eq!(r.interactions, 0);
        }
    }

    #[test]
    fn tail_needs_two_trajectories() {
        let env = make_standard_imitation(3, 2, 2).unwrap();
        let d = expert_data(&env, 1, 0);
        assert!(run_tail(&env, &d, &SolverConfig::new(2), &mut stream(0, 0)).is_err());
    }

    #[test]
    fn oal_single_episode() {
        let env = make_standard_imitation(4, 2, 3).unwrap();
        let d = expert_data(&env, 5, 3);
        let r = run_oal(&env, &d, &OalConfig::new(1), &mut stream(1, 1)).unwrap();
        assert_eq!(r.interactions, 1);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn oal_bonus_floor_for_unvisited() {
        let dims = crate::mdp::Dims::new(2, 3, 2).unwrap();
        let model = EmpiricalModel::new(dims);
        let b = oal_bonus(&model, 10, 0.05);
        let expected = ((12.0f64 * 10.0 / 0.05).ln()).sqrt();
        assert_abs_diff_eq!(b[[0, 1, 1]], expected, epsilon = 1e-12);
    }

    #[test]
    fn mbtail_budget_accounting() {
        let env = make_reset_cliff(5, 3, 4, 4).unwrap();
        let d = expert_data(&env, 10, 5);
        for budget in [2, 7, 10] {
            let r = run_mbtail(&env, &d, budget, &SolverConfig::new(5), &mut stream(9, budget as u64)).unwrap();
            assert_eq!(r.interactions, budget);
        }
        assert!(run_mbtail(&env, &d, 1, &SolverConfig::new(5), &mut stream(0, 0)).is_err());
    }
}
