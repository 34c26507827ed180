use super::{check_target, max_abs, weights_hash, SolverConfig, SolverOutput, SolverTrace, TraceEntry};
use crate::error::Result;
use crate::mdp::{occupancy_table, value_iteration, Dynamics, MixtureBuilder, OccupancyMeasure, PerStepTable, Policy};

/// Frank-Wolfe on `g(μ) = Σ (μ − target)²` over the occupancy polytope, with exact
/// line search. The linear minimization oracle is value iteration on `−∇g`.
///
/// Starts from the uniform policy and tracks the mixture weights through each
/// convex update so the returned mixture realizes the final iterate exactly.
/// Stops early once the line search returns `γ = 0`.
pub fn frank_wolfe_solve<D, T>(dynamics: &D, target: &T, cfg: &SolverConfig) -> Result<SolverOutput>
where
    D: Dynamics + ?Sized,
    T: PerStepTable + ?Sized,
{
    cfg.validate()?;
    let target = target.values();
    check_target(dynamics, target)?;
    let dims = dynamics.dims();

    let uniform = Policy::uniform(dims);
    let mut mu = occupancy_table(dynamics, &uniform);
    let mut mixture = MixtureBuilder::default();
    mixture.add(uniform, 1.0);
    let mut trace = SolverTrace::default();
    let mut rounds = 0;

    for k in 1..=cfg.iterations {
        let residual = &mu - target;
        let objective: f64 = residual.iter().map(|r| r * r).sum();
        let descent = residual.mapv(|r| -r);
        let (pi, br_value) = value_iteration(dynamics, &descent)?;
        if cfg.record_trace {
            trace.entries.push(TraceEntry {
                iteration: k,
                loss: objective,
                grad_norm: 2.0 * objective.sqrt(),
                best_response_value: br_value,
                weights_max_abs: max_abs(&descent),
                weights_hash: weights_hash(&descent),
            });
        }
        rounds = k;
        let vertex = occupancy_table(dynamics, &pi);
        let direction = &mu - &vertex;
        let denom: f64 = direction.iter().map(|d| d * d).sum();
        if denom == 0.0 {
            break;
        }
        let numer: f64 = residual.iter().zip(direction.iter()).map(|(r, d)| r * d).sum();
        let gamma = (numer / denom).clamp(0.0, 1.0);
        if gamma == 0.0 {
            break;
        }
        mu.zip_mut_with(&vertex, |m, v| *m = (1.0 - gamma) * *m + gamma * v);
        mixture.scale(1.0 - gamma);
        mixture.add(pi, gamma);
    }

    Ok(SolverOutput {
        policy: mixture.finish()?,
        occupancy: OccupancyMeasure::new(mu)?,
        iterations: rounds,
        trace,
    })
}

/// Line-search step for one Frank-Wolfe update, exposed for tests.
#[cfg(test)]
pub(crate) fn line_search(
    mu: &ndarray::Array3<f64>,
    vertex: &ndarray::Array3<f64>,
    target: &ndarray::Array3<f64>,
) -> f64 {
    let residual = mu - target;
    let direction = mu - vertex;
    let denom: f64 = direction.iter().map(|d| d * d).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let numer: f64 = residual.iter().zip(direction.iter()).map(|(r, d)| r * d).sum();
    (numer / denom).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{mixture_occupancy, StepKernel, TabularMdp};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn bandit(num_actions: usize) -> TabularMdp {
        let k = StepKernel::from_rows(1, num_actions, vec![vec![(0, 1.0)]; num_actions]).unwrap();
        TabularMdp::stationary(vec![1.0], k, &Array2::zeros((1, num_actions)), 1).unwrap()
    }

    #[test]
    fn gamma_zero_at_target() {
        let mu = array![[[0.3, 0.7]]];
        assert_eq!(line_search(&mu, &array![[[1.0, 0.0]]], &mu), 0.0);
    }

    #[test]
    fn one_step_from_uniform_matches_closed_form() {
        // μ⁰ = (1/3, 1/3, 1/3), target = (0.6, 0.3, 0.1). The oracle picks action 0,
        // vertex (1, 0, 0); d = μ⁰ − v = (−2/3, 1/3, 1/3);
        // γ = ⟨μ⁰ − target, d⟩ / ‖d‖² = (0.4/3·… ) computed by hand below.
        let mdp = bandit(3);
        let target = array![[[0.6, 0.3, 0.1]]];
        let r = [1.0 / 3.0 - 0.6, 1.0 / 3.0 - 0.3, 1.0 / 3.0 - 0.1];
        let d = [-2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let expected = (r[0] * d[0] + r[1] * d[1] + r[2] * d[2]) / (4.0 / 9.0 + 1.0 / 9.0 + 1.0 / 9.0);
        assert_abs_diff_eq!(expected, 0.4, epsilon = 1e-12);
        let out = frank_wolfe_solve(&mdp, &target, &SolverConfig::new(1)).unwrap();
        let mu = out.occupancy.table();
        assert_abs_diff_eq!(mu[[0, 0, 0]], (1.0 - expected) / 3.0 + expected, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[[0, 0, 1]], (1.0 - expected) / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn mixture_reproduces_iterate() {
        let mdp = bandit(4);
        let target = array![[[0.1, 0.2, 0.3, 0.4]]];
        let out = frank_wolfe_solve(&mdp, &target, &SolverConfig::new(40).with_trace()).unwrap();
        let mix = mixture_occupancy(&mdp, &out.policy).unwrap();
        for (a, b) in mix.table().iter().zip(out.occupancy.table().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(out.trace.entries.windows(2).all(|w| w[1].loss <= w[0].loss + 1e-15));
    }
}
