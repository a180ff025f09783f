//! System dimensioning, antenna-group combinatorics and precoder representation.
//!
//! Antenna groups are labelled `1..=n_m` and an AGC is stored as the
//! strictly increasing list of the group labels it activates. AGC and
//! stream positions used as Rust indices are 0-based; error messages
//! report them 1-based.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

/// Slack allowed on the total-power constraint.
pub const POWER_SLACK: f64 = 1e-9;

/// Dimensioning and power parameters of one GenSM link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub n_t: usize,
    pub n_r: usize,
    /// Antennas per group.
    pub n_k: usize,
    /// Number of antenna groups.
    pub n_m: usize,
    pub n_rf: usize,
    /// APM-domain streams, always equal to `n_rf`.
    pub n_s: usize,
    /// Average transmit power (linear).
    pub rho: f64,
    /// Noise variance (linear).
    pub sigma2: f64,
}

impl SystemConfig {
    pub fn new(n_r: usize, n_k: usize, n_m: usize, n_rf: usize, rho: f64, sigma2: f64) -> Result<Self> {
        let cfg = SystemConfig {
            n_t: n_k * n_m,
            n_r,
            n_k,
            n_m,
            n_rf,
            n_s: n_rf,
            rho,
            sigma2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The reference 8×8 link: four groups of two antennas, two RF chains.
    pub fn reference(snr_db: f64) -> Self {
        SystemConfig::new(8, 2, 4, 2, 1.0, 1.0)
            .expect("reference config is valid")
            .with_snr_db(snr_db)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_r == 0 || self.n_k == 0 || self.n_m == 0 || self.n_rf == 0 {
            return bad("all antenna counts must be at least 1".into());
        }
        if self.n_t != self.n_k * self.n_m {
            return bad(format!("n_t = {} but n_k * n_m = {}", self.n_t, self.n_k * self.n_m));
        }
        if self.n_m < self.n_rf {
            return bad(format!("n_m = {} must be >= n_rf = {}", self.n_m, self.n_rf));
        }
        if self.n_s != self.n_rf {
            return bad(format!("n_s = {} must equal n_rf = {}", self.n_s, self.n_rf));
        }
        // rho = 0 is admitted as the noise-only limit.
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return bad(format!("rho = {} must be finite and non-negative", self.rho));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return bad(format!("sigma2 = {} must be finite and positive", self.sigma2));
        }
        Ok(())
    }

    /// Sets `rho` so that `rho / sigma2` equals the given SNR.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.rho = self.sigma2 * 10f64.powf(snr_db / 10.0);
        self
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.rho / self.sigma2).log10()
    }

    /// Same link with a different `(n_k, n_m)` split of the transmit array.
    pub fn with_partition(&self, n_k: usize, n_m: usize) -> Result<Self> {
        if n_k * n_m != self.n_t {
            return Err(Error::InvalidConfig(format!(
                "partition ({n_k}, {n_m}) does not factor n_t = {}",
                self.n_t
            )));
        }
        SystemConfig::new(self.n_r, n_k, n_m, self.n_rf, self.rho, self.sigma2)
    }

    /// Number of legitimate AGCs, `2^⌊log2 C(n_m, n_rf)⌋`.
    pub fn agc_count(&self) -> usize {
        agc_count(self.n_m, self.n_rf)
    }

    /// Analog magnitude bound `1/√n_k`.
    pub fn analog_bound(&self) -> f64 {
        1.0 / (self.n_k as f64).sqrt()
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn agc_count(n_m: usize, n_rf: usize) -> usize {
    let c = binomial(n_m, n_rf);
    if c == 0 {
        return 0;
    }
    let log2_floor = 127 - c.leading_zeros();
    1usize << log2_floor
}

/// The legitimate antenna-group combinations of a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgcTable {
    n_m: usize,
    combos: Vec<Vec<usize>>,
}

impl AgcTable {
    /// Builds a table from explicit combinations, checking each one.
    pub fn from_combos(n_m: usize, combos: Vec<Vec<usize>>) -> Result<Self> {
        let n_rf = combos.first().map(Vec::len).unwrap_or(0);
        for (i, u) in combos.iter().enumerate() {
            if u.len() != n_rf {
                return Err(Error::InvalidCombination(format!(
                    "combination {} has {} groups, expected {n_rf}",
                    i + 1,
                    u.len()
                )));
            }
            check_groups(u, n_m)?;
            if combos[..i].contains(u) {
                return Err(Error::InvalidCombination(format!("combination {} is a duplicate", i + 1)));
            }
        }
        Ok(AgcTable { n_m, combos })
    }

    pub fn m(&self) -> usize {
        self.combos.len()
    }

    pub fn n_m(&self) -> usize {
        self.n_m
    }

    pub fn n_rf(&self) -> usize {
        self.combos.first().map(Vec::len).unwrap_or(0)
    }

    pub fn combos(&self) -> &[Vec<usize>] {
        &self.combos
    }

    /// Group labels of the `m`-th AGC (0-based position).
    pub fn combo(&self, m: usize) -> &[usize] {
        &self.combos[m]
    }

    /// Selection matrix of the `m`-th AGC.
    pub fn selection(&self, m: usize, n_k: usize) -> SelectionMatrix {
        SelectionMatrix {
            n_k,
            n_m: self.n_m,
            groups: self.combos[m].clone(),
        }
    }
}

/// First `2^⌊log2 C(n_m, n_rf)⌋` subsets of `{1..n_m}` of size `n_rf`, in
/// lexicographic order.
pub fn enumerate_agcs(n_m: usize, n_rf: usize) -> Result<AgcTable> {
    if n_rf == 0 || n_rf > n_m {
        return Err(Error::InvalidCombination(format!(
            "need 1 <= n_rf <= n_m, got n_rf = {n_rf}, n_m = {n_m}"
        )));
    }
    let m = agc_count(n_m, n_rf);
    let mut combos = Vec::with_capacity(m);
    let mut current: Vec<usize> = (1..=n_rf).collect();
    loop {
        combos.push(current.clone());
        if combos.len() == m {
            break;
        }
        // advance to the next lexicographic subset
        let mut i = n_rf;
        while i > 0 && current[i - 1] == n_m - n_rf + i {
            i -= 1;
        }
        debug_assert!(i > 0, "ran out of subsets before reaching M");
        current[i - 1] += 1;
        for j in i..n_rf {
            current[j] = current[j - 1] + 1;
        }
    }
    Ok(AgcTable { n_m, combos })
}

fn check_groups(u: &[usize], n_m: usize) -> Result<()> {
    if u.is_empty() {
        return Err(Error::InvalidCombination("empty group list".into()));
    }
    for (i, &g) in u.iter().enumerate() {
        if g == 0 || g > n_m {
            return Err(Error::InvalidCombination(format!(
                "group label {g} at position {} is outside 1..={n_m}",
                i + 1
            )));
        }
        if i > 0 && u[i - 1] >= g {
            return Err(Error::InvalidCombination(format!(
                "group labels must be strictly increasing, got {:?}",
                u
            )));
        }
    }
    Ok(())
}

/// AG-selection matrix `[e_{u1}, …, e_{u n_rf}] ⊗ 1_{n_k}`, kept in
/// structured form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMatrix {
    n_k: usize,
    n_m: usize,
    groups: Vec<usize>,
}

impl SelectionMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_k * self.n_m
    }

    pub fn n_cols(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    /// Transmit antennas (0-based rows) driven by column `col`.
    pub fn rows_of(&self, col: usize) -> std::ops::Range<usize> {
        let g = self.groups[col] - 1;
        g * self.n_k..(g + 1) * self.n_k
    }

    /// Dense 0/1 matrix.
    pub fn entries(&self) -> DMatrix<i64> {
        let mut c = DMatrix::zeros(self.n_rows(), self.n_cols());
        for col in 0..self.n_cols() {
            for row in self.rows_of(col) {
                c[(row, col)] = 1;
            }
        }
        c
    }
}

pub fn selection_matrix(u: &[usize], n_k: usize, n_m: usize) -> Result<SelectionMatrix> {
    if n_k == 0 {
        return Err(Error::InvalidCombination("n_k must be at least 1".into()));
    }
    check_groups(u, n_m)?;
    Ok(SelectionMatrix {
        n_k,
        n_m,
        groups: u.to_vec(),
    })
}

/// Digital power allocation `λ` (stacked per AGC) plus the analog diagonal `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridPrecoder {
    pub lambda: DVector<f64>,
    pub a: CVector,
}

impl HybridPrecoder {
    pub fn new(lambda: DVector<f64>, a: CVector) -> Self {
        HybridPrecoder { lambda, a }
    }

    /// Non-optimized reference: identity digital precoders and `A = I/√n_k`.
    pub fn uniform(cfg: &SystemConfig, m: usize) -> Self {
        HybridPrecoder {
            lambda: DVector::from_element(m * cfg.n_s, 1.0),
            a: CVector::from_element(cfg.n_t, Complex64::new(cfg.analog_bound(), 0.0)),
        }
    }

    /// Power allocation of the `m`-th AGC.
    pub fn lambda_block(&self, m: usize, n_s: usize) -> &[f64] {
        &self.lambda.as_slice()[m * n_s..(m + 1) * n_s]
    }

    /// Diagonal `D_m = diag(√λ_m)`.
    pub fn digital_diagonal(&self, m: usize, n_s: usize) -> DVector<f64> {
        DVector::from_iterator(n_s, self.lambda_block(m, n_s).iter().map(|l| l.sqrt()))
    }

    /// Checks shapes and `λ ≥ 0`.
    pub fn check_shape(&self, cfg: &SystemConfig, m: usize) -> Result<()> {
        if self.lambda.len() != m * cfg.n_s {
            return Err(Error::Dimension(format!(
                "lambda has length {}, expected M * n_s = {}",
                self.lambda.len(),
                m * cfg.n_s
            )));
        }
        if self.a.len() != cfg.n_t {
            return Err(Error::Dimension(format!(
                "analog vector has length {}, expected n_t = {}",
                self.a.len(),
                cfg.n_t
            )));
        }
        for (i, &l) in self.lambda.iter().enumerate() {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::PowerAllocation {
                    index: i + 1,
                    value: l,
                    expected: "finite and >= 0",
                });
            }
        }
        Ok(())
    }

    pub fn total_power(&self) -> f64 {
        self.lambda.sum()
    }

    /// `λ ≥ 0`, `Σλ ≤ M·n_s` and `|a_n| ≤ 1/√n_k`.
    pub fn satisfies_constraints(&self, cfg: &SystemConfig, m: usize) -> bool {
        self.check_shape(cfg, m).is_ok()
            && self.total_power() <= (m * cfg.n_s) as f64 + POWER_SLACK
            && self.a.iter().all(|x| x.norm() <= cfg.analog_bound() * (1.0 + 1e-12))
    }

    /// Membership of `a` in the phase-only set (`|a_n| = 1/√n_k`).
    pub fn analog_is_phase_only(&self, cfg: &SystemConfig, tol: f64) -> bool {
        self.a.iter().all(|x| (x.norm() - cfg.analog_bound()).abs() <= tol)
    }
}

/// `H · diag(a) · C` without the digital part: column `i` sums the weighted
/// channel columns of the group driven by RF chain `i`.
pub fn analog_gain(h: &ChannelMatrix, a: &CVector, c: &SelectionMatrix) -> CMatrix {
    let hm = h.as_matrix();
    let mut b = CMatrix::zeros(hm.nrows(), c.n_cols());
    for col in 0..c.n_cols() {
        for k in c.rows_of(col) {
            let w = a[k];
            for r in 0..hm.nrows() {
                b[(r, col)] += hm[(r, k)] * w;
            }
        }
    }
    b
}

fn check_dims(h: &ChannelMatrix, p: &HybridPrecoder, c: &SelectionMatrix) -> Result<()> {
    if h.n_t() != c.n_rows() || p.a.len() != h.n_t() {
        return Err(Error::Dimension(format!(
            "channel has {} transmit antennas, selection matrix {} rows, analog vector {}",
            h.n_t(),
            c.n_rows(),
            p.a.len()
        )));
    }
    Ok(())
}

/// Effective gain `G_m = H · diag(a) · C_m · D_m` of the `m`-th AGC.
pub fn effective_gain(h: &ChannelMatrix, p: &HybridPrecoder, c: &SelectionMatrix, m: usize) -> Result<CMatrix> {
    check_dims(h, p, c)?;
    let n_s = c.n_cols();
    if p.lambda.len() < (m + 1) * n_s {
        return Err(Error::Dimension(format!(
            "lambda has no block for AGC {} (length {})",
            m + 1,
            p.lambda.len()
        )));
    }
    for (i, &l) in p.lambda_block(m, n_s).iter().enumerate() {
        if !(l >= 0.0) {
            return Err(Error::PowerAllocation {
                index: m * n_s + i + 1,
                value: l,
                expected: ">= 0",
            });
        }
    }
    let mut g = analog_gain(h, &p.a, c);
    let d = p.digital_diagonal(m, n_s);
    for (col, &di) in d.iter().enumerate() {
        g.column_mut(col).scale_mut(di);
    }
    Ok(g)
}

/// Receive covariance `Σ_n = σ²I + (ρ/N_S) G_n G_nᴴ` of the `n`-th AGC.
pub fn covariance(
    h: &ChannelMatrix,
    p: &HybridPrecoder,
    table: &AgcTable,
    n: usize,
    cfg: &SystemConfig,
) -> Result<CMatrix> {
    cfg.validate()?;
    if n >= table.m() {
        return Err(Error::Dimension(format!("AGC index {} outside 1..={}", n + 1, table.m())));
    }
    if h.n_r() != cfg.n_r {
        return Err(Error::Dimension(format!("channel has {} receive antennas, config {}", h.n_r(), cfg.n_r)));
    }
    let g = effective_gain(h, p, &table.selection(n, cfg.n_k), n)?;
    Ok(covariance_from_gain(&g, cfg))
}

pub(crate) fn covariance_from_gain(g: &CMatrix, cfg: &SystemConfig) -> CMatrix {
    let mut s = g * g.adjoint() * Complex64::new(cfg.rho / cfg.n_s as f64, 0.0);
    for i in 0..s.nrows() {
        s[(i, i)] += cfg.sigma2;
    }
    // exact Hermitian symmetry
    for i in 0..s.nrows() {
        s[(i, i)].im = 0.0;
        for j in 0..i {
            let v = s[(i, j)];
            s[(j, i)] = v.conj();
        }
    }
    s
}
