//! Optimization engines for occupancy matching.
//!
//! The saddle solvers share one shape: the reward player proposes `w ∈ [-1, 1]^{H×S×A}`,
//! the policy player answers with an exact best response by value iteration,
//! and the output is the uniform mixture of the best responses.

mod frank_wolfe;
mod hedge;
mod mirror;
mod ogd;

pub use frank_wolfe::frank_wolfe_solve;
pub use hedge::mw_saddle_solve;
pub use mirror::mirror_descent_policy;
pub use ogd::ogd_saddle_solve;

use std::io::Write;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Dims, Dynamics, MixturePolicy, OccupancyMeasure, RewardWeights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `η_t = D / sqrt(Σ_{i≤t} ‖∇f⁽ⁱ⁾‖²)` with `D = sqrt(2H|S||A|)`.
    Adaptive,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub iterations: usize,
    pub step_rule: StepRule,
    pub record_trace: bool,
}

impl SolverConfig {
    pub fn new(iterations: usize) -> Self {
        SolverConfig {
            iterations,
            step_rule: StepRule::Adaptive,
            record_trace: false,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub fn with_step_rule(mut self, rule: StepRule) -> Self {
        self.step_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::arg("solver needs at least one iteration"));
        }
        if let StepRule::Fixed(eta) = self.step_rule {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::arg(format!("fixed step size must be positive, got {eta}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Objective value at this iterate: `f⁽ᵗ⁾(w⁽ᵗ⁾)` for the saddle solvers,
    /// the squared distance for Frank-Wolfe.
    pub loss: f64,
    pub grad_norm: f64,
    pub best_response_value: f64,
    /// `‖w⁽ᵗ⁾‖∞` of the reward weights (the descent direction for Frank-Wolfe).
    pub weights_max_abs: f64,
    pub weights_hash: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub entries: Vec<TraceEntry>,
}

impl SolverTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// JSON lines, one object per iteration.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// What every solver returns.
#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub policy: MixturePolicy,
    /// Occupancy of `policy` under the dynamics the solver ran on.
    pub occupancy: OccupancyMeasure,
    pub iterations: usize,
    pub trace: SolverTrace,
}

/// Entrywise clamp onto `[-1, 1]`.
pub fn project_linf(w: &Array3<f64>) -> Result<RewardWeights> {
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("cannot project a non-finite reward weight".into()));
    }
    RewardWeights::new(w.mapv(|x| x.clamp(-1.0, 1.0)))
}

/// Diameter of the reward box, `sqrt(2H|S||A|)`.
pub fn reward_box_diameter(dims: Dims) -> f64 {
    (2.0 * dims.len() as f64).sqrt()
}

/// Adaptive step `D / sqrt(accum)`; zero when nothing has accumulated.
pub fn adaptive_step(grad_sq_accum: f64, dims: Dims) -> f64 {
    if grad_sq_accum <= 0.0 {
        0.0
    } else {
        reward_box_diameter(dims) / grad_sq_accum.sqrt()
    }
}

pub(crate) fn check_target<D: Dynamics + ?Sized>(dynamics: &D, target: &Array3<f64>) -> Result<()> {
    dynamics.dims().check_table(target, "target")
}

pub(crate) fn weights_hash(w: &Array3<f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in w.iter() {
        h ^= x.to_bits();
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub(crate) fn max_abs(w: &Array3<f64>) -> f64 {
    w.iter().fold(0.0, |m, x| m.max(x.abs()))
}
