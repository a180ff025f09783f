//! Small dense complex linear-algebra helpers.
//!
//! Determinants of the receive covariances overflow double precision at
//! realistic dimensions, so everything here works with log-determinants
//! obtained from a Hermitian Cholesky factorization.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type HermitianFactor = Cholesky<Complex64, Dyn>;

/// Cholesky factor of a Hermitian positive definite matrix.
///
/// Only the lower triangle of `m` is read.
pub fn cholesky(m: CMatrix) -> Option<HermitianFactor> {
    let chol = Cholesky::new(m)?;
    let l = chol.l_dirty();
    // nalgebra takes a complex square root of the pivot, so an indefinite
    // input shows up as a (nearly) imaginary diagonal entry.
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re.is_finite() && d.re > 0.0 && d.im.abs() <= 1e-8 * d.re
    });
    if ok {
        Some(chol)
    } else {
        None
    }
}

/// Natural log-determinant from a Cholesky factor.
pub fn ln_det(chol: &HermitianFactor) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>()
}

/// `yᴴ Σ⁻¹ y` given the Cholesky factor of Σ.
pub fn quad_form_inv(chol: &HermitianFactor, y: &CVector) -> f64 {
    let l = chol.l_dirty();
    let n = y.len();
    // forward substitution L z = y; yᴴΣ⁻¹y = ‖z‖²
    let mut z = y.clone();
    for i in 0..n {
        let mut acc = z[i];
        for j in 0..i {
            acc -= l[(i, j)] * z[j];
        }
        z[i] = acc / l[(i, i)].re;
    }
    z.iter().map(|v| v.norm_sqr()).sum()
}

/// Max-shifted `ln Σ exp(x_i)`. Returns `-inf` on an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Frobenius norm of `m − mᴴ`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}
