use std::f64::consts::LOG2_E;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::metrics::PairTerms;
use crate::system::{AgcTable, HybridPrecoder, SystemConfig};

/// `bᵢᴴ X bᵢ` for every column of `b`.
fn column_quad_forms<'a>(b: &'a CMatrix, x: &CMatrix) -> impl Iterator<Item = f64> + 'a {
    let xb = x * b;
    (0..b.ncols()).map(move |i| b.column(i).dotc(&xb.column(i)).re)
}

/// Stacked `∇_λ R_LB` (length `M·N_S`) from cached pair terms.
pub(crate) fn lambda_gradient(terms: &PairTerms, table: &AgcTable, cfg: &SystemConfig) -> DVector<f64> {
    let m = table.m();
    let n_s = cfg.n_s;
    let scale = cfg.rho * LOG2_E / (m * n_s) as f64;
    let w = terms.weights();
    let mut grad = DVector::zeros(m * n_s);
    for k in 0..m {
        let b = &terms.steered[k];
        for other in 0..m {
            // pair (other, k) enters through the first sum, (k, other) through the second
            let coef = w[other * m + k] + w[k * m + other];
            for (i, q) in column_quad_forms(b, terms.inverse(other, k)).enumerate() {
                grad[k * n_s + i] += coef * q;
            }
        }
    }
    grad * scale
}

/// Per-AGC power seen by each transmit antenna: `λ_{n,i}` if antenna `k`
/// belongs to the group driven by stream `i` of AGC `n`, else 0.
fn antenna_loads(p: &HybridPrecoder, table: &AgcTable, cfg: &SystemConfig) -> Vec<Vec<f64>> {
    (0..table.m())
        .map(|n| {
            let mut load = vec![0.0; cfg.n_t];
            let c = table.selection(n, cfg.n_k);
            for (i, &l) in p.lambda_block(n, cfg.n_s).iter().enumerate() {
                for k in c.rows_of(i) {
                    load[k] = l;
                }
            }
            load
        })
        .collect()
}

/// Conjugate-coordinate `∂R_LB/∂a*` from cached pair terms.
pub(crate) fn analog_gradient(
    terms: &PairTerms,
    h: &ChannelMatrix,
    p: &HybridPrecoder,
    table: &AgcTable,
    cfg: &SystemConfig,
) -> CVector {
    let m = table.m();
    let hm = h.as_matrix();
    let scale = cfg.rho * LOG2_E / (m * cfg.n_s) as f64;
    let w = terms.weights();
    let loads = antenna_loads(p, table, cfg);
    let mut grad = CVector::zeros(cfg.n_t);
    let mut y = vec![Complex64::new(0.0, 0.0); cfg.n_t];
    for n in 0..m {
        for t in n..m {
            let coef = if n == t { w[n * m + n] } else { w[n * m + t] + w[t * m + n] };
            if coef == 0.0 {
                continue;
            }
            let xh = terms.inverse(n, t) * hm;
            // y_k = Σ_{j in group(k)} (Hᴴ X H)_kj a_j
            for g in 0..cfg.n_m {
                let rows = g * cfg.n_k..(g + 1) * cfg.n_k;
                for k in rows.clone() {
                    let hk = hm.column(k);
                    y[k] = rows.clone().map(|j| hk.dotc(&xh.column(j)) * p.a[j]).sum();
                }
            }
            for k in 0..cfg.n_t {
                let load = loads[n][k] + loads[t][k];
                if load != 0.0 {
                    grad[k] += y[k] * (coef * load);
                }
            }
        }
    }
    grad * Complex64::new(scale, 0.0)
}

fn require_interior(p: &HybridPrecoder) -> Result<()> {
    for (i, &l) in p.lambda.iter().enumerate() {
        if !(l > 0.0) {
            return Err(Error::PowerAllocation {
                index: i + 1,
                value: l,
                expected: "> 0 (barrier interior)",
            });
        }
    }
    Ok(())
}

/// `∇_{λ_m} R_LB` for the `m`-th AGC (length `N_S`).
pub fn grad_lambda(
    h: &ChannelMatrix,
    p: &HybridPrecoder,
    table: &AgcTable,
    cfg: &SystemConfig,
    m: usize,
) -> Result<DVector<f64>> {
    if m >= table.m() {
        return Err(Error::Dimension(format!("AGC index {} outside 1..={}", m + 1, table.m())));
    }
    let full = grad_lambda_full(h, p, table, cfg)?;
    Ok(full.rows(m * cfg.n_s, cfg.n_s).into_owned())
}

/// Stacked gradient `[∇_{λ_1} R_LB; …; ∇_{λ_M} R_LB]`.
pub fn grad_lambda_full(h: &ChannelMatrix, p: &HybridPrecoder, table: &AgcTable, cfg: &SystemConfig) -> Result<DVector<f64>> {
    require_interior(p)?;
    let terms = PairTerms::new(h, p, table, cfg, true)?;
    Ok(lambda_gradient(&terms, table, cfg))
}

/// Gradient of `R_LB` with respect to the analog diagonal, in conjugate
/// coordinates: `R_LB(a + ε·g) ≈ R_LB(a) + 2ε‖g‖²`, and the partial
/// derivatives along `Re a_n` and `Im a_n` are `2 Re g_n` and `2 Im g_n`.
pub fn grad_a(h: &ChannelMatrix, p: &HybridPrecoder, table: &AgcTable, cfg: &SystemConfig) -> Result<CVector> {
    let terms = PairTerms::new(h, p, table, cfg, true)?;
    Ok(analog_gradient(&terms, h, p, table, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{random_channel, random_precoder};
    use crate::metrics::se_lower_bound;
    use crate::system::enumerate_agcs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_lambda(h: &ChannelMatrix, p: &HybridPrecoder, table: &AgcTable, cfg: &SystemConfig, idx: usize, step: f64) -> f64 {
        let mut plus = p.clone();
        let mut minus = p.clone();
        plus.lambda[idx] += step;
        minus.lambda[idx] -= step;
        (se_lower_bound(h, &plus, table, cfg).unwrap() - se_lower_bound(h, &minus, table, cfg).unwrap()) / (2.0 * step)
    }

    #[test]
    fn lambda_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for snr in [-10.0, 0.0, 10.0] {
            let cfg = SystemConfig::reference(snr);
            let table = enumerate_agcs(4, 2).unwrap();
            for _ in 0..4 {
                let h = random_channel(&cfg, &mut rng);
                let p = random_precoder(&cfg, 4, &mut rng);
                for m in 0..4 {
                    let g = grad_lambda(&h, &p, &table, &cfg, m).unwrap();
                    let fd: Vec<f64> = (0..2).map(|i| fd_lambda(&h, &p, &table, &cfg, m * 2 + i, 1e-5)).collect();
                    let scale = fd.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                    for i in 0..2 {
                        assert!((g[i] - fd[i]).abs() <= 1e-5 * scale, "m={m} i={i}: {} vs {}", g[i], fd[i]);
                    }
                }
            }
        }
    }

    #[test]
    fn lambda_gradient_zero_without_signal() {
        let cfg = SystemConfig { rho: 0.0, ..SystemConfig::reference(0.0) };
        let table = enumerate_agcs(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_channel(&cfg, &mut rng);
        let p = random_precoder(&cfg, 4, &mut rng);
        assert!(grad_lambda_full(&h, &p, &table, &cfg).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lambda_gradient_rejects_boundary() {
        let cfg = SystemConfig::reference(0.0);
        let table = enumerate_agcs(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_channel(&cfg, &mut rng);
        let mut p = random_precoder(&cfg, 4, &mut rng);
        p.lambda[5] = 0.0;
        assert!(matches!(grad_lambda(&h, &p, &table, &cfg, 0), Err(Error::PowerAllocation { index: 6, .. })));
    }

    #[test]
    fn scalar_link_gradient_closed_form() {
        // M = 1, N_R = N_S = 1: R_LB = log2(2σ² + 2ρλ|g·a|²) − log2(eσ²)
        let cfg = SystemConfig::new(1, 3, 1, 1, 2.5, 0.8).unwrap();
        let table = enumerate_agcs(1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_channel(&cfg, &mut rng);
        let p = random_precoder(&cfg, 1, &mut rng);
        let ga: Complex64 = (0..3).map(|k| h.as_matrix()[(0, k)] * p.a[k]).sum();
        let lam = p.lambda[0];
        let (rho, s2) = (cfg.rho, cfg.sigma2);
        let closed = LOG2_E * 2.0 * rho * ga.norm_sqr() / (2.0 * s2 + 2.0 * rho * lam * ga.norm_sqr());
        let g = grad_lambda(&h, &p, &table, &cfg, 0).unwrap()[0];
        assert!((g - closed).abs() < 1e-12 * closed);
        let rlb = se_lower_bound(&h, &p, &table, &cfg).unwrap();
        let direct = (2.0 * s2 + 2.0 * rho * lam * ga.norm_sqr()).log2() - (std::f64::consts::E * s2).log2();
        assert!((rlb - direct).abs() < 1e-12);
        assert!((fd_lambda(&h, &p, &table, &cfg, 0, 1e-5) - closed).abs() < 1e-6 * closed);
    }

    #[test]
    fn analog_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let step = 1e-6;
        for (cfg, table) in [
            (SystemConfig::reference(0.0), enumerate_agcs(4, 2).unwrap()),
            (SystemConfig::new(6, 4, 2, 2, 1.0, 1.0).unwrap().with_snr_db(10.0), enumerate_agcs(2, 2).unwrap()),
            (SystemConfig::new(5, 1, 6, 3, 1.0, 1.0).unwrap().with_snr_db(-5.0), enumerate_agcs(6, 3).unwrap()),
        ] {
            for _ in 0..3 {
                let h = random_channel(&cfg, &mut rng);
                let p = random_precoder(&cfg, table.m(), &mut rng);
                let g = grad_a(&h, &p, &table, &cfg).unwrap();
                let f = |q: &HybridPrecoder| se_lower_bound(&h, q, &table, &cfg).unwrap();
                let mut fd = Vec::new();
                for k in 0..cfg.n_t {
                    for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                        let mut plus = p.clone();
                        let mut minus = p.clone();
                        plus.a[k] += dir * step;
                        minus.a[k] -= dir * step;
                        fd.push((f(&plus) - f(&minus)) / (2.0 * step));
                    }
                }
                let scale = fd.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                for k in 0..cfg.n_t {
                    assert!((2.0 * g[k].re - fd[2 * k]).abs() <= 1e-5 * scale);
                    assert!((2.0 * g[k].im - fd[2 * k + 1]).abs() <= 1e-5 * scale);
                }
            }
        }
    }

    #[test]
    fn analog_gradient_zero_without_power() {
        let cfg = SystemConfig::reference(5.0);
        let table = enumerate_agcs(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_channel(&cfg, &mut rng);
        let mut p = random_precoder(&cfg, 4, &mut rng);
        p.lambda.fill(0.0);
        assert!(grad_a(&h, &p, &table, &cfg).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn analog_gradient_zero_on_unused_groups() {
        // C(3, 1) = 3 but only M = 2 AGCs are legitimate: group 3 never fires
        let cfg = SystemConfig::new(4, 2, 3, 1, 1.0, 1.0).unwrap().with_snr_db(3.0);
        let table = enumerate_agcs(3, 1).unwrap();
        assert_eq!(table.m(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = random_channel(&cfg, &mut rng);
        let p = random_precoder(&cfg, 2, &mut rng);
        let g = grad_a(&h, &p, &table, &cfg).unwrap();
        assert_eq!(g[4], Complex64::new(0.0, 0.0));
        assert_eq!(g[5], Complex64::new(0.0, 0.0));
        assert!(g[0].norm() > 0.0);
    }
}
