//! Analog sub-problem: the `ℓ∞` magnitude constraint is smoothed by an
//! `ℓp` norm and enforced with a log barrier.

use nalgebra::DVector;
use num_complex::Complex64;

use super::gradient::analog_gradient;
use super::OptimizerSettings;
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::metrics::PairTerms;
use crate::system::{AgcTable, HybridPrecoder, SystemConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogOutcome {
    pub a: CVector,
    pub r_lb: f64,
    /// Barrier objective `g_B` at `a`.
    pub objective: f64,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `‖a‖_p`, scaled by the largest magnitude to avoid overflow.
pub fn lp_norm(a: &CVector, p: f64) -> f64 {
    let max = a.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    max * a.iter().map(|x| (x.norm() / max).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `∂‖a‖_p/∂a* = ½ ‖a‖_p^{1−p} · [a_n |a_n|^{p−2}]`.
fn lp_norm_gradient(a: &CVector, p: f64, norm: f64) -> CVector {
    a.map(|x| {
        let r = x.norm();
        if r == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            x / r * (0.5 * (r / norm).powf(p - 1.0))
        }
    })
}

struct Point {
    a: CVector,
    terms: PairTerms,
    r_lb: f64,
    objective: f64,
    norm: f64,
}

fn evaluate(
    h: &ChannelMatrix,
    lambda: &DVector<f64>,
    table: &AgcTable,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
    a: CVector,
) -> Result<Option<Point>> {
    let norm = lp_norm(&a, settings.p_norm);
    let slack = cfg.analog_bound() - norm;
    if !(slack > 0.0) {
        return Ok(None);
    }
    let p = HybridPrecoder::new(lambda.clone(), a);
    let terms = PairTerms::new(h, &p, table, cfg, true)?;
    let r_lb = terms.lower_bound(cfg);
    Ok(Some(Point {
        a: p.a,
        terms,
        r_lb,
        objective: r_lb + slack.ln() / settings.t_b,
        norm,
    }))
}

/// `g_B(a) = R_LB(a) + (1/t_B) ln(1/√n_k − ‖a‖_p)`; `-inf` outside the interior.
pub fn analog_objective(
    h: &ChannelMatrix,
    lambda: &DVector<f64>,
    table: &AgcTable,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
    a: &CVector,
) -> Result<f64> {
    Ok(evaluate(h, lambda, table, cfg, settings, a.clone())?
        .map(|pt| pt.objective)
        .unwrap_or(f64::NEG_INFINITY))
}

/// Conjugate-coordinate gradient of `g_B`.
pub fn analog_objective_gradient(
    h: &ChannelMatrix,
    lambda: &DVector<f64>,
    table: &AgcTable,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
    a: &CVector,
) -> Result<CVector> {
    let pt = evaluate(h, lambda, table, cfg, settings, a.clone())?.ok_or_else(|| Error::InfeasibleAnalog {
        norm: lp_norm(a, settings.p_norm),
        bound: cfg.analog_bound(),
    })?;
    Ok(barrier_gradient(&pt, h, lambda, table, cfg, settings))
}

fn barrier_gradient(
    pt: &Point,
    h: &ChannelMatrix,
    lambda: &DVector<f64>,
    table: &AgcTable,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
) -> CVector {
    let p = HybridPrecoder::new(lambda.clone(), pt.a.clone());
    let mut grad = analog_gradient(&pt.terms, h, &p, table, cfg);
    if pt.norm > 0.0 {
        let slack = cfg.analog_bound() - pt.norm;
        let push = lp_norm_gradient(&pt.a, settings.p_norm, pt.norm);
        grad -= push * Complex64::new(1.0 / (settings.t_b * slack), 0.0);
    }
    grad
}

/// Local maximization of `g_B` over the analog diagonal for fixed `λ`.
///
/// Steps `a ← a + μ∇g_B` with Armijo backtracking; trial points outside
/// `‖a‖_p < 1/√n_k` are rejected by the line search.
pub fn optimize_analog(
    h: &ChannelMatrix,
    lambda: &DVector<f64>,
    table: &AgcTable,
    cfg: &SystemConfig,
    settings: &OptimizerSettings,
    a0: &CVector,
) -> Result<AnalogOutcome> {
    settings.validate()?;
    if a0.len() != cfg.n_t {
        return Err(Error::Dimension(format!("analog vector has length {}, expected {}", a0.len(), cfg.n_t)));
    }
    let mut x = evaluate(h, lambda, table, cfg, settings, a0.clone())?.ok_or_else(|| Error::InfeasibleAnalog {
        norm: lp_norm(a0, settings.p_norm),
        bound: cfg.analog_bound(),
    })?;
    let mut history = vec![x.objective];
    let mut step = settings.step_init;
    let mut converged = false;
    let mut iterations = 0;
    let scale = cfg.analog_bound();

    while iterations < settings.max_inner {
        let dir = barrier_gradient(&x, h, lambda, table, cfg, settings);
        let norm = dir.norm();
        if norm < settings.grad_tol {
            converged = true;
            break;
        }
        // directional derivative along `dir` is 2‖dir‖²
        let slope = 2.0 * norm * norm;
        let mut mu = step;
        let mut accepted = None;
        while mu * norm > 1e-14 * scale {
            let cand = &x.a + &dir * Complex64::new(mu, 0.0);
            if let Some(y) = evaluate(h, lambda, table, cfg, settings, cand)? {
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

    Ok(AnalogOutcome {
        a: x.a,
        r_lb: x.r_lb,
        objective: x.objective,
        history,
        iterations,
        converged,
    })
}

/// Maps every entry onto the phase-only set: `a_n → e^{j arg a_n}/√n_k`,
/// with `0 → 1/√n_k`.
pub fn project_to_feasible_analog(a: &CVector, n_k: usize) -> CVector {
    let mag = 1.0 / (n_k as f64).sqrt();
    a.map(|x| {
        if x.norm() == 0.0 {
            Complex64::new(mag, 0.0)
        } else {
            Complex64::from_polar(mag, x.arg())
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{random_analog, random_channel, random_lambda};
    use crate::metrics::se_lower_bound;
    use crate::system::enumerate_agcs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interior_start(cfg: &SystemConfig, p: f64) -> CVector {
        let mag = (1.0 - 1e-3) * cfg.analog_bound() / (cfg.n_t as f64).powf(1.0 / p);
        CVector::from_element(cfg.n_t, Complex64::new(mag, 0.0))
    }

    #[test]
    fn lp_norm_values() {
        let a = CVector::from_vec(vec![Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)]);
        assert!((lp_norm(&a, 16.0) - 5.0).abs() < 1e-12);
        let b = CVector::from_element(8, Complex64::new(0.0, 0.5));
        assert!((lp_norm(&b, 16.0) - 0.5 * 8f64.powf(1.0 / 16.0)).abs() < 1e-12);
        assert!(lp_norm(&b, 16.0) >= 0.5);
        assert_eq!(lp_norm(&CVector::zeros(3), 16.0), 0.0);
    }

    #[test]
    fn barrier_gradient_matches_finite_differences() {
        let cfg = SystemConfig::reference(3.0);
        let table = enumerate_agcs(4, 2).unwrap();
        let settings = OptimizerSettings::default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = random_channel(&cfg, &mut rng);
        let lambda = random_lambda(&cfg, 4, &mut rng);
        let a = random_analog(&cfg, &mut rng) * Complex64::new(0.8, 0.0);
        let g = analog_objective_gradient(&h, &lambda, &table, &cfg, &settings, &a).unwrap();
        let f = |x: &CVector| analog_objective(&h, &lambda, &table, &cfg, &settings, x).unwrap();
        let step = 1e-7;
        for k in 0..cfg.n_t {
            for (dir, part) in [(Complex64::new(1.0, 0.0), g[k].re), (Complex64::new(0.0, 1.0), g[k].im)] {
                let mut plus = a.clone();
                let mut minus = a.clone();
                plus[k] += dir * step;
                minus[k] -= dir * step;
                let fd = (f(&plus) - f(&minus)) / (2.0 * step);
                assert!((2.0 * part - fd).abs() < 1e-5 * g.norm().max(1.0), "k={k}: {} vs {fd}", 2.0 * part);
            }
        }
    }

    #[test]
    fn ascent_and_feasibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let settings = OptimizerSettings::default();
        for snr in [-5.0, 10.0] {
            let cfg = SystemConfig::reference(snr);
            let table = enumerate_agcs(4, 2).unwrap();
            let h = random_channel(&cfg, &mut rng);
            let lambda = random_lambda(&cfg, 4, &mut rng);
            let out = optimize_analog(&h, &lambda, &table, &cfg, &settings, &interior_start(&cfg, 16.0)).unwrap();
            assert!(out.history.windows(2).all(|w| w[1] > w[0]));
            assert!(lp_norm(&out.a, 16.0) < cfg.analog_bound());
            assert!(out.a.iter().all(|x| x.norm() <= cfg.analog_bound()));
        }
    }

    #[test]
    fn accepted_iterates_are_first_order_ascent_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = SystemConfig::reference(5.0);
        let table = enumerate_agcs(4, 2).unwrap();
        let h = random_channel(&cfg, &mut rng);
        let lambda = random_lambda(&cfg, 4, &mut rng);
        let mut settings = OptimizerSettings::default();
        let mut a = interior_start(&cfg, settings.p_norm);
        settings.max_inner = 1;
        for _ in 0..15 {
            let g = analog_objective_gradient(&h, &lambda, &table, &cfg, &settings, &a).unwrap();
            if g.norm() < settings.grad_tol {
                break;
            }
            let probe = &a + &g * Complex64::new(1e-6 / g.norm(), 0.0);
            let f0 = analog_objective(&h, &lambda, &table, &cfg, &settings, &a).unwrap();
            assert!(analog_objective(&h, &lambda, &table, &cfg, &settings, &probe).unwrap() > f0);
            a = optimize_analog(&h, &lambda, &table, &cfg, &settings, &a).unwrap().a;
        }
    }

    #[test]
    fn zero_power_leaves_bound_unchanged() {
        let cfg = SystemConfig::reference(0.0);
        let table = enumerate_agcs(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_channel(&cfg, &mut rng);
        let lambda = DVector::zeros(8);
        let a0 = interior_start(&cfg, 16.0);
        let out = optimize_analog(&h, &lambda, &table, &cfg, &OptimizerSettings::default(), &a0).unwrap();
        let before = se_lower_bound(&h, &HybridPrecoder::new(lambda.clone(), a0), &table, &cfg).unwrap();
        assert!((out.r_lb - before).abs() < 1e-12);
        assert!((out.r_lb - crate::metrics::constant_gap(8)).abs() < 1e-9);
    }

    #[test]
    fn rejects_infeasible_start() {
        let cfg = SystemConfig::reference(0.0);
        let table = enumerate_agcs(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_channel(&cfg, &mut rng);
        let lambda = DVector::from_element(8, 1.0);
        // |a_n| = 1/√n_k exactly puts ‖a‖_p above the bound
        let a0 = CVector::from_element(8, Complex64::new(cfg.analog_bound(), 0.0));
        let err = optimize_analog(&h, &lambda, &table, &cfg, &OptimizerSettings::default(), &a0).unwrap_err();
        assert!(matches!(err, Error::InfeasibleAnalog { .. }));
    }

    #[test]
    fn projection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n_k = 3;
        let mag = 1.0 / 3f64.sqrt();
        let a = CVector::from_fn(6, |_, _| Complex64::from_polar(mag, rng.random_range(-3.0..3.0)));
        assert!((project_to_feasible_analog(&a, n_k) - &a).norm() < 1e-12);

        let z = project_to_feasible_analog(&CVector::zeros(4), n_k);
        assert!(z.iter().all(|x| *x == Complex64::new(mag, 0.0)));

        let b = CVector::from_fn(10, |_, _| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)));
        let pb = project_to_feasible_analog(&b, n_k);
        for (x, y) in b.iter().zip(pb.iter()) {
            assert!((y.norm() - mag).abs() < 1e-15);
            assert!((x.arg() - y.arg()).abs() < 1e-12);
        }
    }
}
