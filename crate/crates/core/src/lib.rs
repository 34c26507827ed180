//! Tabular finite-horizon imitation learning.
//!
//! Exact occupancy and value computations for time-inhomogeneous MDPs, expert
//! occupancy estimators, saddle-point and Frank-Wolfe occupancy matching, the
//! imitation algorithms built on them, and an experiment harness.

pub mod cli;
pub mod env;
pub mod error;
pub mod harness;
pub mod imitation;
pub mod estimators;
pub mod mdp;
pub mod rng;
pub mod solvers;
pub mod trajectory;

pub use error::{Error, Result};
