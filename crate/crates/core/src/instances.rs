//! Random problem instances for property checks, gradient checks and demos.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{complex_normal, ChannelMatrix};
use crate::linalg::{CMatrix, CVector};
use crate::system::{HybridPrecoder, SystemConfig};

/// Channel with i.i.d. `CN(0, 1)` entries.
pub fn random_channel<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ChannelMatrix {
    ChannelMatrix::new(CMatrix::from_fn(cfg.n_r, cfg.n_t, |_, _| complex_normal(rng)))
}

/// Strictly positive `λ` on the power simplex `Σλ = M·n_s`.
pub fn random_lambda<R: Rng + ?Sized>(cfg: &SystemConfig, m: usize, rng: &mut R) -> DVector<f64> {
    let len = m * cfg.n_s;
    let raw = DVector::from_fn(len, |_, _| rng.random_range(0.05..1.0));
    let total = raw.sum();
    raw * (len as f64 / total)
}

/// Analog vector with `|a_n| ≤ 0.95/√n_k` and random phases.
pub fn random_analog<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> CVector {
    let bound = cfg.analog_bound();
    CVector::from_fn(cfg.n_t, |_, _| {
        let r = bound * rng.random_range(0.3..0.95);
        Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
    })
}

pub fn random_precoder<R: Rng + ?Sized>(cfg: &SystemConfig, m: usize, rng: &mut R) -> HybridPrecoder {
    HybridPrecoder::new(random_lambda(cfg, m, rng), random_analog(cfg, rng))
}
