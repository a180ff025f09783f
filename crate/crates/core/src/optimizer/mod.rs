//! Two-step hybrid precoder design.
//!
//! The digital part is a concave program in the stacked power-allocation
//! vector `λ` and is solved globally; the analog part is relaxed to an
//! `ℓp`-bounded problem and solved to a local maximum. [`two_step`]
//! alternates the two and finally restores the phase-only analog structure.

mod alternating;
mod analog;
mod digital;
mod gradient;
mod partition;

pub use alternating::{initial_analog, two_step, OuterRecord, OptimizationTrace, TwoStepOutcome};
pub use analog::{
    analog_objective, analog_objective_gradient, lp_norm, optimize_analog, project_to_feasible_analog, AnalogOutcome,
};
pub use digital::{digital_objective, optimize_digital, DigitalOutcome};
pub use gradient::{grad_a, grad_lambda, grad_lambda_full};
pub use partition::{candidate_partitions, select_partition, PartitionScore, PartitionSelection};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    /// Barrier scale `t_B`.
    pub t_b: f64,
    /// Exponent of the `ℓp` norm standing in for `ℓ∞`.
    pub p_norm: f64,
    pub step_init: f64,
    pub backtrack_ratio: f64,
    pub armijo_c: f64,
    pub grad_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Minimum `R_LB` gain (bits/s/Hz) per sweep to keep alternating.
    pub outer_tol: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            t_b: 100.0,
            p_norm: 16.0,
            step_init: 1.0,
            backtrack_ratio: 0.5,
            armijo_c: 1e-4,
            grad_tol: 1e-6,
            max_inner: 500,
            max_outer: 30,
            outer_tol: 1e-3,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("optimizer: {msg}")));
        if !(self.t_b > 0.0 && self.t_b.is_finite()) {
            return bad("t_b must be positive");
        }
        if !(self.p_norm >= 2.0 && self.p_norm.fract() == 0.0 && self.p_norm as u64 % 2 == 0) {
            return bad("p_norm must be an even integer >= 2");
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return bad("backtrack_ratio must lie in (0, 1)");
        }
        if !(self.step_init > 0.0 && self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("step_init must be positive and armijo_c in (0, 1)");
        }
        if !(self.grad_tol > 0.0 && self.outer_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return bad("iteration caps must be at least 1");
        }
        Ok(())
    }
}
