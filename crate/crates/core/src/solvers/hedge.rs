use ndarray::Array3;

use super::{check_target, max_abs, weights_hash, SolverConfig, SolverOutput, SolverTrace, TraceEntry};
use crate::error::Result;
use crate::mdp::{occupancy_table, value_iteration, Dynamics, MixtureBuilder, OccupancyMeasure, PerStepTable};

/// Mean of two-expert Hedge over the signs `{+1, −1}` with cumulative loss `±G`:
/// `(e^{−ηG} − e^{ηG}) / (e^{−ηG} + e^{ηG}) = −tanh(ηG)`.
pub(crate) fn hedge_weight(cumulative_grad: f64, eta: f64) -> f64 {
    -(eta * cumulative_grad).tanh()
}

/// Multiplicative-weights saddle solver: each coordinate of the reward box is a
/// two-expert Hedge game with learning rate `sqrt(ln 2 / T)`, the policy player
/// best-responds exactly, and the output is the uniform mixture of best responses.
pub fn mw_saddle_solve<D, T>(dynamics: &D, target: &T, cfg: &SolverConfig) -> Result<SolverOutput>
where
    D: Dynamics + ?Sized,
    T: PerStepTable + ?Sized,
{
    cfg.validate()?;
    let target = target.values();
    check_target(dynamics, target)?;
    let dims = dynamics.dims();
    let iterations = cfg.iterations;
    let eta = (std::f64::consts::LN_2 / iterations as f64).sqrt();

    let mut cumulative: Array3<f64> = dims.zeros();
    let mut w = dims.zeros();
    let mut occ_sum: Array3<f64> = dims.zeros();
    let mut mixture = MixtureBuilder::default();
    let mut trace = SolverTrace::default();

    for t in 1..=iterations {
        let (pi, br_value) = value_iteration(dynamics, &w)?;
        let occ = occupancy_table(dynamics, &pi);
        let grad = &occ - target;
        if cfg.record_trace {
            trace.entries.push(TraceEntry {
                iteration: t,
                loss: w.iter().zip(grad.iter()).map(|(a, b)| a * b).sum(),
                grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
                best_response_value: br_value,
                weights_max_abs: max_abs(&w),
                weights_hash: weights_hash(&w),
            });
        }
        cumulative += &grad;
        w.zip_mut_with(&cumulative, |wi, &g| *wi = hedge_weight(g, eta));
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
