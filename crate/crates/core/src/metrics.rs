//! Spectral-efficiency evaluation: the closed-form mixture lower bound, a
//! Monte-Carlo estimate of the true mutual information and the MIMO
//! waterfilling capacity.
//!
//! All determinant work is done in the log domain. For every AGC pair
//! `(n, t)` the bound needs `ln|Σ_n + Σ_t|`; those values and (optionally)
//! the pair inverses are cached in [`PairTerms`] so that the bound and both
//! gradients share one factorization pass.

use std::f64::consts::{LN_2, LOG2_E, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{complex_normal, ChannelMatrix};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, ln_det, log_sum_exp, quad_form_inv, CMatrix, CVector, HermitianFactor};
use crate::system::{analog_gain, covariance_from_gain, AgcTable, HybridPrecoder, SystemConfig};

/// Minimum Monte-Carlo sample count.
pub const MIN_MC_SAMPLES: usize = 1_000;
/// Default Monte-Carlo sample count per (channel, SNR) point.
pub const DEFAULT_MC_SAMPLES: usize = 20_000;
/// Samples per independently seeded substream.
const MC_CHUNK: usize = 1_000;

/// `N_R (1 − log2 e)`: the asymptotic offset of the bound below the true SE.
pub fn constant_gap(n_r: usize) -> f64 {
    n_r as f64 * (1.0 - LOG2_E)
}

/// Per-AGC covariances and pairwise log-determinants for one
/// (channel, precoder) pair.
pub(crate) struct PairTerms {
    m: usize,
    /// `H·A·C_n` without the digital part.
    pub(crate) steered: Vec<CMatrix>,
    pub(crate) sigmas: Vec<CMatrix>,
    /// `ln|Σ_n + Σ_t|`, row-major `m × m`, symmetric.
    ln_dets: Vec<f64>,
    /// `(Σ_n + Σ_t)⁻¹` for `n ≤ t`, row-major upper triangle.
    inverses: Option<Vec<CMatrix>>,
}

impl PairTerms {
    pub(crate) fn new(
        h: &ChannelMatrix,
        p: &HybridPrecoder,
        table: &AgcTable,
        cfg: &SystemConfig,
        with_inverses: bool,
    ) -> Result<Self> {
        cfg.validate()?;
        let m = table.m();
        if h.n_r() != cfg.n_r || h.n_t() != cfg.n_t {
            return Err(Error::Dimension(format!(
                "channel is {}x{}, config expects {}x{}",
                h.n_r(),
                h.n_t(),
                cfg.n_r,
                cfg.n_t
            )));
        }
        if table.n_rf() != cfg.n_rf || table.n_m() != cfg.n_m {
            return Err(Error::Dimension("AGC table does not match the config".into()));
        }
        p.check_shape(cfg, m)?;

        let mut steered = Vec::with_capacity(m);
        let mut sigmas = Vec::with_capacity(m);
        for n in 0..m {
            let b = analog_gain(h, &p.a, &table.selection(n, cfg.n_k));
            let mut g = b.clone();
            for (col, &l) in p.lambda_block(n, cfg.n_s).iter().enumerate() {
                g.column_mut(col).scale_mut(l.sqrt());
            }
            sigmas.push(covariance_from_gain(&g, cfg));
            steered.push(b);
        }

        let mut ln_dets = vec![0.0; m * m];
        let mut inverses = with_inverses.then(|| Vec::with_capacity(m * (m + 1) / 2));
        for n in 0..m {
            for t in n..m {
                let sum = &sigmas[n] + &sigmas[t];
                let chol = cholesky(sum).ok_or(Error::NotPositiveDefinite(n + 1, t + 1))?;
                let ld = ln_det(&chol);
                if !ld.is_finite() {
                    return Err(Error::NonFinite(format!("ln|Σ_{} + Σ_{}| = {ld}", n + 1, t + 1)));
                }
                ln_dets[n * m + t] = ld;
                ln_dets[t * m + n] = ld;
                if let Some(inv) = inverses.as_mut() {
                    inv.push(chol.inverse());
                }
            }
        }
        Ok(PairTerms { m, steered, sigmas, ln_dets, inverses })
    }

    pub(crate) fn ln_det(&self, n: usize, t: usize) -> f64 {
        self.ln_dets[n * self.m + t]
    }

    pub(crate) fn inverse(&self, n: usize, t: usize) -> &CMatrix {
        let (lo, hi) = if n <= t { (n, t) } else { (t, n) };
        // row `lo` of the packed upper triangle starts after Σ_{i<lo} (m − i) entries
        let idx = lo * self.m - lo * lo.saturating_sub(1) / 2 + (hi - lo);
        &self.inverses.as_ref().expect("pair inverses were not computed")[idx]
    }

    /// `ln Σ_t exp(−ln|Σ_n + Σ_t|)` for each `n`.
    fn row_lse(&self) -> Vec<f64> {
        (0..self.m)
            .map(|n| {
                let row: Vec<f64> = (0..self.m).map(|t| -self.ln_det(n, t)).collect();
                log_sum_exp(&row)
            })
            .collect()
    }

    /// Normalized determinant weights
    /// `w_nt = |Σ_n+Σ_t|⁻¹ / Σ_t' |Σ_n+Σ_t'|⁻¹`, row-major.
    pub(crate) fn weights(&self) -> Vec<f64> {
        let lse = self.row_lse();
        let mut w = vec![0.0; self.m * self.m];
        for n in 0..self.m {
            for t in 0..self.m {
                w[n * self.m + t] = (-self.ln_det(n, t) - lse[n]).exp();
            }
        }
        w
    }

    pub(crate) fn lower_bound(&self, cfg: &SystemConfig) -> f64 {
        let m = self.m as f64;
        let mean_lse = self.row_lse().iter().sum::<f64>() / m;
        m.log2() - cfg.n_r as f64 * (std::f64::consts::E * cfg.sigma2).log2() - mean_lse / LN_2
    }
}

/// Closed-form lower bound on the SE, in bits/s/Hz:
/// `log2(M / (eσ²)^{N_R}) − (1/M) Σ_n log2 Σ_t |Σ_n + Σ_t|⁻¹`.
pub fn se_lower_bound(h: &ChannelMatrix, p: &HybridPrecoder, table: &AgcTable, cfg: &SystemConfig) -> Result<f64> {
    let r = PairTerms::new(h, p, table, cfg, false)?.lower_bound(cfg);
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::NonFinite(format!("lower bound evaluated to {r}")))
    }
}

/// Bound shifted by the constant gap, `R_LB − N_R(1 − log2 e)`.
pub fn se_shifted_bound(h: &ChannelMatrix, p: &HybridPrecoder, table: &AgcTable, cfg: &SystemConfig) -> Result<f64> {
    Ok(se_lower_bound(h, p, table, cfg)? - constant_gap(cfg.n_r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Monte-Carlo estimate of `I(y; x, m)` in bits/s/Hz.
///
/// Samples `m` uniformly, `x ~ CN(0, I/N_S)` and `n ~ CN(0, σ²I)`, forms
/// `y = √ρ G_m x + n` and averages `−log2 p(y) − N_R log2(πeσ²)` with the
/// exact Gaussian-mixture density `p(y)`. The draws are split into
/// fixed-size substreams seeded from one value taken from `rng`, so the
/// result does not depend on the thread count.
pub fn se_monte_carlo<R: Rng + ?Sized>(
    h: &ChannelMatrix,
    p: &HybridPrecoder,
    table: &AgcTable,
    cfg: &SystemConfig,
    n_samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::TooFewSamples { got: n_samples, min: MIN_MC_SAMPLES });
    }
    let terms = PairTerms::new(h, p, table, cfg, false)?;
    let m = table.m();
    let n_r = cfg.n_r;

    let mut gains = Vec::with_capacity(m);
    let mut factors: Vec<HermitianFactor> = Vec::with_capacity(m);
    let mut ln_dets = Vec::with_capacity(m);
    for n in 0..m {
        let mut g = terms.steered[n].clone();
        for (col, &l) in p.lambda_block(n, cfg.n_s).iter().enumerate() {
            g.column_mut(col).scale_mut((l * cfg.rho / cfg.n_s as f64).sqrt());
        }
        gains.push(g);
        let chol = cholesky(terms.sigmas[n].clone()).ok_or(Error::NotPositiveDefinite(n + 1, n + 1))?;
        ln_dets.push(ln_det(&chol));
        factors.push(chol);
    }

    let base_seed: u64 = rng.random();
    let noise_std = cfg.sigma2.sqrt();
    let offset = (m as f64).ln() / LN_2 - n_r as f64 * (std::f64::consts::E * cfg.sigma2).log2();
    let n_chunks = n_samples.div_ceil(MC_CHUNK);

    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
            rng.set_stream(chunk as u64);
            let len = MC_CHUNK.min(n_samples - chunk * MC_CHUNK);
            let mut log_terms = vec![0.0; m];
            let mut y = CVector::zeros(n_r);
            let mut x = CVector::zeros(cfg.n_s);
            (0..len)
                .map(|_| {
                    let sel = rng.random_range(0..m);
                    for v in x.iter_mut() {
                        // gains already carry √(ρ/N_S)
                        *v = complex_normal(&mut rng);
                    }
                    y.gemv(Complex64::new(1.0, 0.0), &gains[sel], &x, Complex64::new(0.0, 0.0));
                    for v in y.iter_mut() {
                        *v += complex_normal(&mut rng) * noise_std;
                    }
                    for t in 0..m {
                        log_terms[t] = -quad_form_inv(&factors[t], &y) - ln_dets[t];
                    }
                    // −log2 p(y) − N_R log2(πeσ²), the π terms cancel
                    -log_sum_exp(&log_terms) / LN_2 + offset
                })
                .collect()
        })
        .collect();

    let values: Vec<f64> = chunks.into_iter().flatten().collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if !mean.is_finite() {
        return Err(Error::NonFinite(format!("Monte-Carlo mean evaluated to {mean}")));
    }
    Ok(McEstimate { estimate: mean, stderr: (var / n).sqrt() })
}

/// [`se_monte_carlo`] with a `ChaCha8` generator seeded from `seed`.
pub fn se_monte_carlo_seeded(
    h: &ChannelMatrix,
    p: &HybridPrecoder,
    table: &AgcTable,
    cfg: &SystemConfig,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    se_monte_carlo(h, p, table, cfg, n_samples, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Exact SE of a single-AGC configuration, `log2|I + (ρ/(N_S σ²)) G Gᴴ|`.
pub fn gaussian_mutual_information(h: &ChannelMatrix, p: &HybridPrecoder, table: &AgcTable, cfg: &SystemConfig, m: usize) -> Result<f64> {
    let terms = PairTerms::new(h, p, table, cfg, false)?;
    let chol = cholesky(terms.sigmas[m].clone()).ok_or(Error::NotPositiveDefinite(m + 1, m + 1))?;
    Ok((ln_det(&chol) - cfg.n_r as f64 * cfg.sigma2.ln()) / LN_2)
}

/// Waterfilling over per-mode gains `g_i = ρ s_i² / σ²` with unit total power.
///
/// The water level is found by bisection to relative tolerance `1e-10`.
pub fn waterfilling_from_gains(gains: &[f64]) -> f64 {
    let active: Vec<f64> = gains.iter().copied().filter(|&g| g > 0.0 && g.is_finite()).collect();
    if active.is_empty() {
        return 0.0;
    }
    let floors: Vec<f64> = active.iter().map(|g| 1.0 / g).collect();
    let fill = |mu: f64| floors.iter().map(|f| (mu - f).max(0.0)).sum::<f64>();
    let mut lo = floors.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = lo + 1.0;
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if fill(mid) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    active
        .iter()
        .zip(&floors)
        .map(|(g, f)| (1.0 + g * (mu - f).max(0.0)).log2())
        .sum()
}

/// MIMO waterfilling capacity of `H` at the config's `ρ/σ²`.
pub fn waterfilling_capacity(h: &ChannelMatrix, cfg: &SystemConfig) -> f64 {
    let snr = cfg.rho / cfg.sigma2;
    let gains: Vec<f64> = h.singular_values().iter().map(|s| snr * s * s).collect();
    waterfilling_from_gains(&gains)
}

/// All SE figures for one (channel, precoder, SNR) point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeReport {
    pub snr_db: f64,
    pub r_lb: f64,
    pub r_shifted: f64,
    pub r_mc: f64,
    pub r_mc_stderr: f64,
    pub c_wf: f64,
}

impl SeReport {
    pub fn evaluate<R: Rng + ?Sized>(
        h: &ChannelMatrix,
        p: &HybridPrecoder,
        table: &AgcTable,
        cfg: &SystemConfig,
        n_samples: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let r_lb = se_lower_bound(h, p, table, cfg)?;
        let mc = se_monte_carlo(h, p, table, cfg, n_samples, rng)?;
        Ok(SeReport {
            snr_db: cfg.snr_db(),
            r_lb,
            r_shifted: r_lb - constant_gap(cfg.n_r),
            r_mc: mc.estimate,
            r_mc_stderr: mc.stderr,
            c_wf: waterfilling_capacity(h, cfg),
        })
    }
}

/// `π`-free complex Gaussian log-density `ln CN(y; 0, Σ)`, exposed for checks.
pub fn complex_gaussian_ln_pdf(y: &CVector, sigma: &CMatrix) -> Result<f64> {
    let chol = cholesky(sigma.clone()).ok_or(Error::NotPositiveDefinite(1, 1))?;
    Ok(-quad_form_inv(&chol, y) - y.len() as f64 * PI.ln() - ln_det(&chol))
}
