//! Estimators of the expert's state-action distribution.
//!
//! * [`mle_estimate`]: per-step empirical frequencies.
//! * [`split_estimate_known`]: exact mass of known prefixes (computed by a
//!   restricted forward recursion through the true transitions) plus the
//!   empirical mass of unknown prefixes in the held-out half.
//! * [`split_estimate_unknown`]: the same decomposition with the known-prefix
//!   mass estimated from rollouts of a policy in `Π_BC(D₁)`.
//!
//! The split estimates are not renormalized; a step may carry total mass in `[0, 2]`.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Dims, Dynamics, OccupancyMeasure, PerStepTable};
use crate::trajectory::{Dataset, PrefixIndex, SplitDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Mle,
    SplitKnown,
    SplitUnknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyEstimate {
    table: Array3<f64>,
    kind: EstimateKind,
}

impl OccupancyEstimate {
    pub fn new(table: Array3<f64>, kind: EstimateKind) -> Result<Self> {
        if table.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::arg("estimate entries must be finite and non-negative"));
        }
        Ok(OccupancyEstimate { table, kind })
    }

    pub fn table(&self) -> &Array3<f64> {
        &self.table
    }

    pub fn kind(&self) -> EstimateKind {
        self.kind
    }

    pub fn dims(&self) -> Dims {
        let (h, s, a) = self.table.dim();
        Dims {
            horizon: h,
            num_states: s,
            num_actions: a,
        }
    }

    /// Total mass at each step.
    pub fn step_mass(&self) -> Vec<f64> {
        self.table.outer_iter().map(|step| step.sum()).collect()
    }
}

impl PerStepTable for OccupancyEstimate {
    fn values(&self) -> &Array3<f64> {
        &self.table
    }
}

impl From<OccupancyMeasure> for OccupancyEstimate {
    /// An exact occupancy used as an estimate (the infinite-data limit).
    fn from(occ: OccupancyMeasure) -> Self {
        OccupancyEstimate {
            table: occ.into_table(),
            kind: EstimateKind::Mle,
        }
    }
}

/// Adds `weight` at `(h, s_h, a_h)` for every step `h` in `steps` of each trajectory.
fn accumulate<F>(table: &mut Array3<f64>, data: &Dataset, weight: f64, mut steps: F)
where
    F: FnMut(&crate::trajectory::Trajectory) -> std::ops::Range<usize>,
{
    for t in data.trajectories() {
        for h in steps(t) {
            let (s, a) = t.steps()[h];
            table[[h, s, a]] += weight;
        }
    }
}

/// `P̂_h(s, a) = #{(s_h, a_h) = (s, a)} / |D|`.
pub fn mle_estimate(d: &Dataset, dims: Dims) -> Result<OccupancyEstimate> {
    if d.is_empty() {
        return Err(Error::arg("maximum likelihood estimate needs at least one trajectory"));
    }
    d.validate(dims)?;
    let mut table = dims.zeros();
    accumulate(&mut table, d, 1.0 / d.len() as f64, |_| 0..dims.horizon);
    OccupancyEstimate::new(table, EstimateKind::Mle)
}

/// Exact mass of known prefixes, `Σ_{tr_h ∈ Tr_h^{D₁}} P(tr_h) 𝟙{(s_h, a_h) = (s, a)}`,
/// by forward recursion restricted to indexed states.
pub fn known_prefix_mass<D: Dynamics + ?Sized>(dynamics: &D, idx: &PrefixIndex) -> Result<Array3<f64>> {
    let dims = dynamics.dims();
    if idx.dims() != dims {
        return Err(Error::arg("prefix index dimensions do not match the dynamics"));
    }
    let (ns, na) = (dims.num_states, dims.num_actions);
    let mut table = dims.zeros();
    let mut mass: Vec<f64> = dynamics.initial_dist().to_vec();
    let flat = table.as_slice_mut().unwrap();
    for h in 0..dims.horizon {
        let step = &mut flat[h * ns * na..(h + 1) * ns * na];
        for (s, &m) in mass.iter().enumerate() {
            if let Some(a) = idx.seen_action(h, s) {
                step[s * na + a] = m;
            }
        }
        if h + 1 < dims.horizon {
            mass.iter_mut().for_each(|x| *x = 0.0);
            dynamics.push_forward(h, step, &mut mass);
        }
    }
    Ok(table)
}

/// Split estimator with known transitions.
pub fn split_estimate_known<D: Dynamics + ?Sized>(dynamics: &D, split: &SplitDataset) -> Result<OccupancyEstimate> {
    let idx = PrefixIndex::build(&split.d1, dynamics.dims(), None)?;
    split_estimate_known_with_index(dynamics, &idx, &split.d1c)
}

pub fn split_estimate_known_with_index<D: Dynamics + ?Sized>(
    dynamics: &D,
    idx: &PrefixIndex,
    d1c: &Dataset,
) -> Result<OccupancyEstimate> {
    if d1c.is_empty() {
        return Err(Error::arg("held-out half of the split is empty"));
    }
    let dims = dynamics.dims();
    d1c.validate(dims)?;
    let mut table = known_prefix_mass(dynamics, idx)?;
    accumulate(&mut table, d1c, 1.0 / d1c.len() as f64, |t| idx.known_prefix_len(t)..dims.horizon);
    OccupancyEstimate::new(table, EstimateKind::SplitKnown)
}

/// Split estimator with unknown transitions: known-prefix mass from `rollouts`
/// (collected by a policy in `Π_BC(D₁)`), unknown-prefix mass from `D₁ᶜ`.
pub fn split_estimate_unknown(split: &SplitDataset, rollouts: &Dataset, idx: &PrefixIndex) -> Result<OccupancyEstimate> {
    if rollouts.is_empty() {
        return Err(Error::arg("split estimate needs at least one rollout"));
    }
    if split.d1c.is_empty() {
        return Err(Error::arg("held-out half of the split is empty"));
    }
    let dims = idx.dims();
    rollouts.validate(dims)?;
    split.d1c.validate(dims)?;
    let mut table = dims.zeros();
    accumulate(&mut table, rollouts, 1.0 / rollouts.len() as f64, |t| 0..idx.known_prefix_len(t));
    accumulate(&mut table, &split.d1c, 1.0 / split.d1c.len() as f64, |t| {
        idx.known_prefix_len(t)..dims.horizon
    });
    OccupancyEstimate::new(table, EstimateKind::SplitUnknown)
}

/// `Σ_h ‖est_h − truth_h‖₁`.
pub fn l1_estimation_error(est: &OccupancyEstimate, truth: &OccupancyMeasure) -> Result<f64> {
    crate::mdp::l1_occupancy_distance(est, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::make_standard_imitation;
    use crate::mdp::occupancy;
    use crate::trajectory::{DataSource, Trajectory};
    use approx::assert_abs_diff_eq;

    fn traj(states: &[usize], actions: &[usize]) -> Trajectory {
        Trajectory::new(states.iter().copied().zip(actions.iter().copied()).collect())
    }

    #[test]
    fn mle_of_one_trajectory_is_an_indicator() {
        let dims = Dims::new(2, 2, 2).unwrap();
        let d = Dataset::new(vec![traj(&[0, 1], &[1, 1])], DataSource::Expert).unwrap();
        let est = mle_estimate(&d, dims).unwrap();
        let mut expected = dims.zeros();
        expected[[0, 0, 1]] = 1.0;
        expected[[1, 1, 1]] = 1.0;
        assert_eq!(est.table(), &expected);
        let twice = Dataset::new(vec![traj(&[0, 1], &[1, 1]); 2], DataSource::Expert).unwrap();
        assert_eq!(mle_estimate(&twice, dims).unwrap().table(), &expected);
        assert!(mle_estimate(&Dataset::empty(DataSource::Expert), dims).is_err());
    }

    #[test]
    fn full_coverage_split_is_exact() {
        let env = make_standard_imitation(3, 2, 3).unwrap();
        let cover = |s: usize| traj(&[s; 3], &[s % 2; 3]);
        let split = SplitDataset {
            d1: Dataset::new((0..3).map(cover).collect(), DataSource::Expert).unwrap(),
            d1c: Dataset::new(vec![cover(0)], DataSource::Expert).unwrap(),
        };
        let est = split_estimate_known(&env.mdp, &split).unwrap();
        let truth = occupancy(&env.mdp, &env.expert).unwrap();
        assert_abs_diff_eq!(l1_estimation_error(&est, &truth).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_first_half_reduces_to_mle() {
        let env = make_standard_imitation(3, 2, 3).unwrap();
        let d1c = Dataset::new(
            vec![traj(&[0; 3], &[0; 3]), traj(&[2; 3], &[0; 3]), traj(&[2; 3], &[0; 3])],
            DataSource::Expert,
        )
        .unwrap();
        let split = SplitDataset {
            d1: Dataset::empty(DataSource::Expert),
            d1c: d1c.clone(),
        };
        let mle = mle_estimate(&d1c, env.mdp.dims()).unwrap();
        assert_eq!(split_estimate_known(&env.mdp, &split).unwrap().table(), mle.table());
        let idx = PrefixIndex::build(&split.d1, env.mdp.dims(), None).unwrap();
        let rollouts = Dataset::new(vec![traj(&[1; 3], &[0; 3])], DataSource::Rollout).unwrap();
        assert_eq!(split_estimate_unknown(&split, &rollouts, &idx).unwrap().table(), mle.table());
    }

    #[test]
    fn empty_halves_are_rejected() {
        let env = make_standard_imitation(2, 2, 1).unwrap();
        let d = Dataset::new(vec![traj(&[0], &[0])], DataSource::Expert).unwrap();
        let split = SplitDataset {
            d1: d.clone(),
            d1c: Dataset::empty(DataSource::Expert),
        };
        assert!(split_estimate_known(&env.mdp, &split).is_err());
        let idx = PrefixIndex::build(&d, env.mdp.dims(), None).unwrap();
        assert!(split_estimate_unknown(&split, &d, &idx).is_err());
        let split = SplitDataset { d1: d.clone(), d1c: d };
        assert!(split_estimate_unknown(&split, &Dataset::empty(DataSource::Rollout), &idx).is_err());
    }

    #[test]
    fn zero_estimate_error_is_horizon() {
        let env = make_standard_imitation(2, 2, 4).unwrap();
        let truth = occupancy(&env.mdp, &env.expert).unwrap();
        let zero = OccupancyEstimate::new(env.mdp.dims().zeros(), EstimateKind::Mle).unwrap();
        assert_abs_diff_eq!(l1_estimation_error(&zero, &truth).unwrap(), 4.0, epsilon = 1e-12);
        let exact = OccupancyEstimate::from(truth.clone());
        assert_eq!(l1_estimation_error(&exact, &truth).unwrap(), 0.0);
    }
}
