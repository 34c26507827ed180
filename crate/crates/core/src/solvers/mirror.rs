use crate::error::{Error, Result};
use crate::mdp::{Policy, QFunction};

/// Exponentiated-gradient policy step, `π'_h(a|s) ∝ π_h(a|s) · exp(η Q_h(s, a))`,
/// stabilized by subtracting the row maximum of `η Q` over the row's support
/// before exponentiating.
pub fn mirror_descent_policy(policy: &Policy, q: &QFunction, eta: f64) -> Result<Policy> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::arg(format!("mirror descent step must be non-negative, got {eta}")));
    }
    let dims = policy.dims();
    dims.check_table(q.table(), "Q-function")?;
    let mut table = policy.table();
    let na = dims.num_actions;
    for (h, step) in q.table().outer_iter().enumerate() {
        for (s, q_row) in step.outer_iter().enumerate() {
            // Taking the max over unsupported actions too could underflow every
            // supported weight to zero.
            let top = (0..na)
                .filter(|&a| table[[h, s, a]] > 0.0)
                .fold(f64::NEG_INFINITY, |m, a| m.max(eta * q_row[a]));
            let mut total = 0.0;
            for a in 0..na {
                let p = table[[h, s, a]];
                let v = if p > 0.0 { p * (eta * q_row[a] - top).exp() } else { 0.0 };
                table[[h, s, a]] = v;
                total += v;
            }
            for a in 0..na {
                table[[h, s, a]] /= total;
            }
        }
    }
    Policy::from_table(table)
}
