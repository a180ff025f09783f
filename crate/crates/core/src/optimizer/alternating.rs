use nalgebra::DVector;
use num_complex::Complex64;

use super::analog::{lp_norm, optimize_analog, project_to_feasible_analog};
use super::digital::optimize_digital;
use super::OptimizerSettings;
use crate::channel::ChannelMatrix;
use crate::error::Result;
use crate::linalg::CVector;
use crate::metrics::se_lower_bound;
use crate::system::{AgcTable, HybridPrecoder, SystemConfig};

/// Margin keeping the initial analog vector inside the `ℓp` barrier.
const INTERIOR_MARGIN: f64 = 1e-3;

/// One digital + analog sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    /// `R_LB` after the sweep.
    pub r_lb: f64,
    /// `|1ᵀλ − M·N_S|`.
    pub lambda_residual: f64,
    /// `‖a‖_p − 1/√n_k` (negative inside the relaxed set).
    pub analog_residual: f64,
    pub digital_iterations: usize,
    pub analog_iterations: usize,
    pub digital_converged: bool,
    pub analog_converged: bool,
    /// Whether the digital and analog updates were kept; an update that
    /// lowers `R_LB` is discarded.
    pub digital_accepted: bool,
    pub analog_accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTrace {
    /// `R_LB` at the interior starting point.
    pub initial_r_lb: f64,
    pub records: Vec<OuterRecord>,
    /// Best relaxed precoder before phase projection.
    pub relaxed: HybridPrecoder,
    pub relaxed_r_lb: f64,
    /// `R_LB` right after projecting the analog vector.
    pub projected_r_lb: f64,
    pub final_digital_iterations: usize,
    pub final_digital_converged: bool,
    /// `R_LB` of the returned precoder.
    pub final_r_lb: f64,
    /// True if the feasible non-optimized precoder beat the optimized one
    /// and was returned instead.
    pub fell_back_to_uniform: bool,
}

impl OptimizationTrace {
    /// Outer `R_LB` sequence, starting with the initial value.
    pub fn r_lb_sequence(&self) -> Vec<f64> {
        std::iter::once(self.initial_r_lb).chain(self.records.iter().map(|r| r.r_lb)).collect()
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.r_lb_sequence().windows(2).all(|w| w[1] >= w[0] - slack)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepOutcome {
    pub precoder: HybridPrecoder,
    pub trace: OptimizationTrace,
    /// Alternation stopped on `outer_tol` (not on `max_outer`) and the final
    /// digital pass converged.
    pub converged: bool,
}

/// Zero-phase analog start with `‖a‖_p = (1 − 10⁻³)/√n_k`.
pub fn initial_analog(cfg: &SystemConfig, p_norm: f64) -> CVector {
    let mag = (1.0 - INTERIOR_MARGIN) * cfg.analog_bound() / (cfg.n_t as f64).powf(1.0 / p_norm);
    CVector::from_element(cfg.n_t, Complex64::new(mag, 0.0))
}

/// Alternating digital/analog optimization of the hybrid precoder.
///
/// Starts from uniform power and a zero-phase analog vector strictly inside
/// the `ℓp` barrier, then repeats (digital, analog) sweeps until a sweep
/// gains less than `outer_tol` or `max_outer` is reached. A sub-problem
/// result that would lower `R_LB` is discarded, so the recorded outer
/// sequence never decreases. The analog vector is then projected onto the
/// phase-only set and the power allocation re-optimized once.
pub fn two_step(
    h: &ChannelMatrix,
    table: &AgcTable,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
) -> Result<TwoStepOutcome> {
    settings.validate()?;
    cfg.validate()?;
    let m = table.m();
    let budget = (m * cfg.n_s) as f64;
    let r_of = |lambda: &DVector<f64>, a: &CVector| se_lower_bound(h, &HybridPrecoder::new(lambda.clone(), a.clone()), table, cfg);

    let mut lambda = DVector::from_element(m * cfg.n_s, 1.0);
    let mut a = initial_analog(cfg, settings.p_norm);
    let initial_r_lb = r_of(&lambda, &a)?;
    let mut r_current = initial_r_lb;
    let mut records = Vec::new();
    let mut outer_converged = false;

    for _ in 0..settings.max_outer {
        let r_start = r_current;

        let dig = optimize_digital(h, &a, table, cfg, settings, &lambda)?;
        let digital_accepted = dig.r_lb >= r_current;
        if digital_accepted {
            lambda = dig.lambda.clone();
            r_current = dig.r_lb;
        }

        let ana = optimize_analog(h, &lambda, table, cfg, settings, &a)?;
        let analog_accepted = ana.r_lb >= r_current;
        if analog_accepted {
            a = ana.a.clone();
            r_current = ana.r_lb;
        }

        records.push(OuterRecord {
            r_lb: r_current,
            lambda_residual: (lambda.sum() - budget).abs(),
            analog_residual: lp_norm(&a, settings.p_norm) - cfg.analog_bound(),
            digital_iterations: dig.iterations,
            analog_iterations: ana.iterations,
            digital_converged: dig.converged,
            analog_converged: ana.converged,
            digital_accepted,
            analog_accepted,
        });

        if r_current - r_start < settings.outer_tol {
            outer_converged = true;
            break;
        }
    }

    let relaxed = HybridPrecoder::new(lambda.clone(), a.clone());
    let relaxed_r_lb = r_current;

    let a_proj = project_to_feasible_analog(&a, cfg.n_k);
    let projected_r_lb = r_of(&lambda, &a_proj)?;
    let fin = optimize_digital(h, &a_proj, table, cfg, settings, &lambda)?;
    let (final_lambda, mut final_r_lb) = if fin.r_lb >= projected_r_lb {
        (fin.lambda.clone(), fin.r_lb)
    } else {
        (lambda, projected_r_lb)
    };
    let mut precoder = HybridPrecoder::new(final_lambda, a_proj);

    let uniform = HybridPrecoder::uniform(cfg, m);
    let uniform_r_lb = se_lower_bound(h, &uniform, table, cfg)?;
    let fell_back_to_uniform = uniform_r_lb > final_r_lb;
    if fell_back_to_uniform {
        precoder = uniform;
        final_r_lb = uniform_r_lb;
    }

    Ok(TwoStepOutcome {
        precoder,
        converged: outer_converged && fin.converged,
        trace: OptimizationTrace {
            initial_r_lb,
            records,
            relaxed,
            relaxed_r_lb,
            projected_r_lb,
            final_digital_iterations: fin.iterations,
            final_digital_converged: fin.converged,
            final_r_lb,
            fell_back_to_uniform,
        },
    })
}
