use ndarray::Array3;

use super::{adaptive_step, check_target, max_abs, weights_hash, SolverConfig, SolverOutput, SolverTrace, StepRule, TraceEntry};
use crate::error::Result;
use crate::mdp::{occupancy_table, value_iteration, Dynamics, MixtureBuilder, OccupancyMeasure, PerStepTable};

/// Online projected gradient descent on the reward player against exact best
/// responses.
///
/// With `f⁽ᵗ⁾(w) = ⟨w, P^{π⁽ᵗ⁾} − target⟩`, each round plays `π⁽ᵗ⁾ = argmax_π ⟨w⁽ᵗ⁾, P^π⟩`
/// and updates `w⁽ᵗ⁺¹⁾ = clip(w⁽ᵗ⁾ − η_t ∇f⁽ᵗ⁾)`, starting from `w⁽¹⁾ = 0`.
pub fn ogd_saddle_solve<D, T>(dynamics: &D, target: &T, cfg: &SolverConfig) -> Result<SolverOutput>
where
    D: Dynamics + ?Sized,
    T: PerStepTable + ?Sized,
{
    cfg.validate()?;
    let target = target.values();
    check_target(dynamics, target)?;
    let dims = dynamics.dims();
    let iterations = cfg.iterations;

    let mut w = dims.zeros();
    let mut grad_sq_accum = 0.0;
    let mut occ_sum: Array3<f64> = dims.zeros();
    let mut mixture = MixtureBuilder::default();
    let mut trace = SolverTrace::default();

    for t in 1..=iterations {
        let (pi, br_value) = value_iteration(dynamics, &w)?;
        let occ = occupancy_table(dynamics, &pi);
        let grad = &occ - target;
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        if cfg.record_trace {
            trace.entries.push(TraceEntry {
                iteration: t,
                loss: w.iter().zip(grad.iter()).map(|(a, b)| a * b).sum(),
                grad_norm: grad_sq.sqrt(),
                best_response_value: br_value,
                weights_max_abs: max_abs(&w),
                weights_hash: weights_hash(&w),
            });
        }
        grad_sq_accum += grad_sq;
        let eta = match cfg.step_rule {
            StepRule::Adaptive => adaptive_step(grad_sq_accum, dims),
            StepRule::Fixed(eta) => eta,
        };
        if eta > 0.0 {
            w.zip_mut_with(&grad, |wi, gi| *wi = (*wi - eta * gi).clamp(-1.0, 1.0));
        }
        occ_sum += &occ;
        mixture.add(pi, 1.0 / iterations as f64);
    }

    occ_sum /= iterations as f64;
    Ok(SolverOutput {
        policy: mixture.finish()?,
        occupancy: OccupancyMeasure::new(occ_sum)?,
        iterations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::make_standard_imitation;
    use crate::mdp::{l1_occupancy_distance, mixture_occupancy, occupancy, Policy};

    #[test]
    fn single_iteration_is_zero_reward_best_response() {
        let env = make_standard_imitation(3, 2, 2).unwrap();
        let target = occupancy(&env.mdp, &env.expert).unwrap();
        let out = ogd_saddle_solve(&env.mdp, &target, &SolverConfig::new(1)).unwrap();
        assert_eq!(out.policy.components().len(), 1);
        let zero_br = Policy::from_actions(env.mdp.dims(), vec![0; 6]).unwrap();
        assert_eq!(out.policy.components()[0], zero_br);
    }

    #[test]
    fn reported_occupancy_matches_mixture() {
        let env = make_standard_imitation(4, 3, 3).unwrap();
        let target = occupancy(&env.mdp, &env.expert).unwrap();
        let out = ogd_saddle_solve(&env.mdp, &target, &SolverConfig::new(50).with_trace()).unwrap();
        assert_eq!(out.trace.len(), 50);
        let recomputed = mixture_occupancy(&env.mdp, &out.policy).unwrap();
        assert!(l1_occupancy_distance(&recomputed, &out.occupancy).unwrap() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let env = make_standard_imitation(3, 2, 2).unwrap();
        let bad = ndarray::Array3::<f64>::zeros((2, 3, 3));
        assert!(ogd_saddle_solve(&env.mdp, &bad, &SolverConfig::new(3)).is_err());
    }
}
