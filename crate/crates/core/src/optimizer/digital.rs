//! Power allocation sub-problem: barrier gradient ascent on the simplex
//! `1ᵀλ = M·N_S`.

use nalgebra::DVector;

use super::gradient::lambda_gradient;
use super::OptimizerSettings;
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::metrics::PairTerms;
use crate::system::{AgcTable, HybridPrecoder, SystemConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalOutcome {
    pub lambda: DVector<f64>,
    /// `R_LB` at `lambda`.
    pub r_lb: f64,
    /// Barrier objective `f_B` at `lambda`.
    pub objective: f64,
    /// `f_B` at the start and after every accepted step.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit or the line search stalled.
    pub converged: bool,
}

struct Point {
    lambda: DVector<f64>,
    terms: PairTerms,
    r_lb: f64,
    objective: f64,
}

fn evaluate(
    h: &ChannelMatrix,
    a: &CVector,
    table: &AgcTable,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
    lambda: DVector<f64>,
) -> Result<Point> {
    let p = HybridPrecoder::new(lambda, a.clone());
    let terms = PairTerms::new(h, &p, table, cfg, true)?;
    let r_lb = terms.lower_bound(cfg);
    let objective = r_lb + p.lambda.iter().map(|l| l.ln()).sum::<f64>() / settings.t_b;
    Ok(Point { lambda: p.lambda, terms, r_lb, objective })
}

/// `f_B(λ) = R_LB(λ) + (1/t_B) Σ ln λ_i`.
pub fn digital_objective(
    h: &ChannelMatrix,
    a: &CVector,
    table: &AgcTable,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
    lambda: &DVector<f64>,
) -> Result<f64> {
    if lambda.iter().any(|&l| !(l > 0.0)) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(evaluate(h, a, table, cfg, settings, lambda.clone())?.objective)
}

/// Maximizes `f_B` over `λ` for a fixed analog vector.
///
/// The ascent direction is the full stacked gradient of `f_B` projected onto
/// `1ᵀΔλ = 0`; steps are chosen by Armijo backtracking that also keeps every
/// entry strictly positive. The trial step starts at `step_init` and then at
/// twice the last accepted step.
pub fn optimize_digital(
    h: &ChannelMatrix,
    a: &CVector,
    table: &AgcTable,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
    lambda0: &DVector<f64>,
) -> Result<DigitalOutcome> {
    settings.validate()?;
    let budget = (table.m() * cfg.n_s) as f64;
    if lambda0.len() != table.m() * cfg.n_s {
        return Err(Error::Dimension(format!(
            "lambda has length {}, expected {}",
            lambda0.len(),
            table.m() * cfg.n_s
        )));
    }
    for (i, &l) in lambda0.iter().enumerate() {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::PowerAllocation {
                index: i + 1,
                value: l,
                expected: "> 0 (barrier interior)",
            });
        }
    }
    let total = lambda0.sum();
    if (total - budget).abs() > 1e-9 * budget {
        return Err(Error::PowerAllocation {
            index: 0,
            value: total,
            expected: "sum equal to M * n_s",
        });
    }

    let mut x = evaluate(h, a, table, cfg, settings, lambda0.clone())?;
    let mut history = vec![x.objective];
    let mut step = settings.step_init;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_inner {
        let mut grad = lambda_gradient(&x.terms, table, cfg);
        for (g, l) in grad.iter_mut().zip(x.lambda.iter()) {
            *g += 1.0 / (settings.t_b * l);
        }
        let mean = grad.mean();
        let dir = grad.add_scalar(-mean);
        let norm = dir.norm();
        if norm < settings.grad_tol {
            converged = true;
            break;
        }
        let slope = norm * norm;

        let mut mu = step;
        let mut accepted = None;
        while mu * norm > 1e-14 * budget {
            let cand = &x.lambda + &dir * mu;
            if cand.iter().all(|&l| l > 0.0) {
                let y = evaluate(h, a, table, cfg, settings, cand)?;
                if y.objective >= x.objective + settings.armijo_c * mu * slope {
                    accepted = Some(y);
                    break;
                }
            }
            mu *= settings.backtrack_ratio;
        }
        iterations += 1;
        match accepted {
            Some(y) => {
                x = y;
                history.push(x.objective);
                step = mu / settings.backtrack_ratio;
            }
            None => break,
        }
    }

    // remove rounding drift from the simplex constraint
    let drift = x.lambda.sum();
    if (drift - budget).abs() > 0.0 {
        let rescaled = &x.lambda * (budget / drift);
        x = evaluate(h, a, table, cfg, settings, rescaled)?;
    }

    Ok(DigitalOutcome {
        r_lb: x.r_lb,
        objective: x.objective,
        lambda: x.lambda,
        history,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{random_channel, random_lambda, random_analog};
    use crate::linalg::CMatrix;
    use crate::metrics::se_lower_bound;
    use crate::system::enumerate_agcs;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_entry_is_pinned() {
        let cfg = SystemConfig::new(3, 4, 1, 1, 2.0, 1.0).unwrap();
        let table = enumerate_agcs(1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_channel(&cfg, &mut rng);
        let a = random_analog(&cfg, &mut rng);
        let out = optimize_digital(&h, &a, &table, &cfg, &OptimizerSettings::default(), &DVector::from_element(1, 1.0)).unwrap();
        assert_eq!(out.lambda[0], 1.0);
        assert!(out.converged);
    }

    #[test]
    fn symmetric_streams_get_equal_power() {
        // orthogonal, equal-gain effective columns: the optimum is uniform
        let cfg = SystemConfig::new(2, 1, 2, 2, 1.0, 1.0).unwrap().with_snr_db(10.0);
        let table = enumerate_agcs(2, 2).unwrap();
        let h = ChannelMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)],
        ));
        let a = CVector::from_element(2, Complex64::new(1.0, 0.0));
        let lambda0 = DVector::from_vec(vec![1.6, 0.4]);
        let out = optimize_digital(&h, &a, &table, &cfg, &OptimizerSettings::default(), &lambda0).unwrap();
        assert!(out.converged);
        assert!((out.lambda[0] - 1.0).abs() < 1e-4 && (out.lambda[1] - 1.0).abs() < 1e-4, "{:?}", out.lambda);
    }

    #[test]
    fn ascent_from_uniform_start() {
        let cfg = SystemConfig::reference(0.0);
        let table = enumerate_agcs(4, 2).unwrap();
        let settings = OptimizerSettings::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let h = random_channel(&cfg, &mut rng);
            let a = random_analog(&cfg, &mut rng);
            let lambda0 = DVector::from_element(8, 1.0);
            let out = optimize_digital(&h, &a, &table, &cfg, &settings, &lambda0).unwrap();
            let f0 = digital_objective(&h, &a, &table, &cfg, &settings, &lambda0).unwrap();
            let r0 = se_lower_bound(&h, &HybridPrecoder::new(lambda0, a.clone()), &table, &cfg).unwrap();
            assert!(out.objective >= f0);
            assert!(out.r_lb >= r0);
            assert!(out.history.windows(2).all(|w| w[1] > w[0]));
            assert!((out.lambda.sum() - 8.0).abs() < 1e-9);
            assert!(out.lambda.iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn restarts_agree() {
        let cfg = SystemConfig::reference(5.0);
        let table = enumerate_agcs(4, 2).unwrap();
        let settings = OptimizerSettings::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = random_channel(&cfg, &mut rng);
        let a = random_analog(&cfg, &mut rng);
        let values: Vec<f64> = (0..5)
            .map(|_| {
                let l0 = random_lambda(&cfg, 4, &mut rng);
                optimize_digital(&h, &a, &table, &cfg, &settings, &l0).unwrap().r_lb
            })
            .collect();
        let spread = values.iter().cloned().fold(f64::MIN, f64::max) - values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-4, "{values:?}");
    }

    #[test]
    fn rejects_bad_start() {
        let cfg = SystemConfig::reference(0.0);
        let table = enumerate_agcs(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_channel(&cfg, &mut rng);
        let a = random_analog(&cfg, &mut rng);
        let s = OptimizerSettings::default();
        let mut l0 = DVector::from_element(8, 1.0);
        l0[0] = 0.0;
        l0[1] = 2.0;
        assert!(optimize_digital(&h, &a, &table, &cfg, &s, &l0).is_err());
        assert!(optimize_digital(&h, &a, &table, &cfg, &s, &DVector::from_element(8, 0.9)).is_err());
        assert!(optimize_digital(&h, &a, &table, &cfg, &s, &DVector::from_element(6, 8.0 / 6.0)).is_err());
    }
}
