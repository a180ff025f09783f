use crate::channel::ChannelMatrix;
use crate::error::Result;
use crate::metrics::se_lower_bound;
use crate::optimizer::{grad_a, grad_lambda_full};
use crate::system::{AgcTable, HybridPrecoder, SystemConfig};

/// Central-difference step in the power allocation.
pub const LAMBDA_STEP: f64 = 1e-5;
/// Central-difference step on the real and imaginary parts of `a`.
pub const ANALOG_STEP: f64 = 1e-6;

/// Largest deviation between an analytic gradient and its finite-difference
/// estimate, relative to the largest finite-difference component.
fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dev = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    if scale == 0.0 {
        dev
    } else {
        dev / scale
    }
}

/// Relative errors `(λ, a)` of the analytic `R_LB` gradients against
/// central finite differences. `λ` must be strictly positive.
pub fn gradient_errors(h: &ChannelMatrix, p: &HybridPrecoder, table: &AgcTable, cfg: &SystemConfig) -> Result<(f64, f64)> {
    let r = |q: &HybridPrecoder| se_lower_bound(h, q, table, cfg);

    let g_lambda = grad_lambda_full(h, p, table, cfg)?;
    let mut fd_lambda = Vec::with_capacity(p.lambda.len());
    for i in 0..p.lambda.len() {
        let (mut plus, mut minus) = (p.clone(), p.clone());
        plus.lambda[i] += LAMBDA_STEP;
        minus.lambda[i] -= LAMBDA_STEP;
        fd_lambda.push((r(&plus)? - r(&minus)?) / (2.0 * LAMBDA_STEP));
    }

    // ∂R/∂Re a_n = 2 Re g_n and ∂R/∂Im a_n = 2 Im g_n.
    let g_a = grad_a(h, p, table, cfg)?;
    let mut analytic = Vec::with_capacity(2 * p.a.len());
    let mut fd_a = Vec::with_capacity(2 * p.a.len());
    for n in 0..p.a.len() {
        for unit in [num_complex::Complex64::new(1.0, 0.0), num_complex::Complex64::new(0.0, 1.0)] {
            let (mut plus, mut minus) = (p.clone(), p.clone());
            plus.a[n] += unit * ANALOG_STEP;
            minus.a[n] -= unit * ANALOG_STEP;
            fd_a.push((r(&plus)? - r(&minus)?) / (2.0 * ANALOG_STEP));
            analytic.push(2.0 * if unit.re == 1.0 { g_a[n].re } else { g_a[n].im });
        }
    }

    Ok((
        relative_error(g_lambda.as_slice(), &fd_lambda),
        relative_error(&analytic, &fd_a),
    ))
}
