//! Choice of the `(n_k, n_m)` split of the transmit array.

use rayon::prelude::*;

use super::alternating::{two_step, TwoStepOutcome};
use super::OptimizerSettings;
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::system::{enumerate_agcs, SystemConfig};

/// Ensemble result for one candidate split.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionScore {
    pub n_k: usize,
    pub n_m: usize,
    pub agc_count: usize,
    /// Final `R_LB` of the optimized precoder, per channel.
    pub per_channel: Vec<f64>,
    pub mean_r_lb: f64,
    pub non_converged: usize,
    /// Every optimizer run kept a non-decreasing outer `R_LB` sequence.
    pub monotone: bool,
    /// Optimizer output per channel, in channel order.
    pub runs: Vec<TwoStepOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSelection {
    pub selected: (usize, usize),
    /// Candidates in increasing `n_m`.
    pub scores: Vec<PartitionScore>,
}

impl PartitionSelection {
    pub fn selected_score(&self) -> &PartitionScore {
        self.scores
            .iter()
            .find(|s| (s.n_k, s.n_m) == self.selected)
            .expect("selected pair is one of the candidates")
    }
}

/// All `(n_k, n_m)` with `n_k·n_m = n_t` and `n_m ≥ n_rf`, by increasing `n_m`.
pub fn candidate_partitions(n_t: usize, n_rf: usize) -> Vec<(usize, usize)> {
    (1..=n_t)
        .filter(|n_m| n_t % n_m == 0 && *n_m >= n_rf)
        .map(|n_m| (n_t / n_m, n_m))
        .collect()
}

/// Picks the split maximizing the ensemble-average optimized `R_LB`.
///
/// `base` supplies `n_t`, `n_r`, `n_rf` and the SNR. Channels are processed
/// in parallel; ties within `1e-12` go to the larger `n_m`.
pub fn select_partition(
    base: &SystemConfig,
    channels: &[ChannelMatrix],
    settings: &OptimizerSettings,
) -> Result<PartitionSelection> {
    if channels.is_empty() {
        return Err(Error::InvalidConfig("partition search needs at least one channel".into()));
    }
    let candidates = candidate_partitions(base.n_t, base.n_rf);
    if candidates.is_empty() {
        return Err(Error::NoPartition { n_t: base.n_t, n_rf: base.n_rf });
    }

    let mut scores = Vec::with_capacity(candidates.len());
    for &(n_k, n_m) in &candidates {
        let cfg = base.with_partition(n_k, n_m)?;
        let table = enumerate_agcs(n_m, cfg.n_rf)?;
        let runs: Vec<TwoStepOutcome> = channels
            .par_iter()
            .map(|h| two_step(h, &table, &cfg, settings))
            .collect::<Result<_>>()?;
        let per_channel: Vec<f64> = runs.iter().map(|r| r.trace.final_r_lb).collect();
        scores.push(PartitionScore {
            n_k,
            n_m,
            agc_count: table.m(),
            mean_r_lb: per_channel.iter().sum::<f64>() / per_channel.len() as f64,
            per_channel,
            non_converged: runs.iter().filter(|r| !r.converged).count(),
            monotone: runs.iter().all(|r| r.trace.is_monotone(1e-9)),
            runs,
        });
    }

    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.mean_r_lb >= scores[best].mean_r_lb - 1e-12 {
            best = i;
        }
    }
    Ok(PartitionSelection {
        selected: (scores[best].n_k, scores[best].n_m),
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::random_channel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn candidates_respect_rf_chain_count() {
        assert_eq!(candidate_partitions(8, 2), vec![(4, 2), (2, 4), (1, 8)]);
        assert_eq!(candidate_partitions(15, 3), vec![(5, 3), (3, 5), (1, 15)]);
        assert_eq!(candidate_partitions(7, 1), vec![(7, 1), (1, 7)]);
        assert!(candidate_partitions(5, 6).is_empty());
    }

    #[test]
    fn errors_without_candidates_or_channels() {
        let cfg = SystemConfig::new(2, 1, 3, 3, 1.0, 1.0).unwrap();
        assert!(select_partition(&cfg, &[], &OptimizerSettings::default()).is_err());
        let cfg = SystemConfig { n_rf: 4, n_s: 4, ..cfg };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_channel(&SystemConfig::new(2, 1, 3, 3, 1.0, 1.0).unwrap(), &mut rng);
        assert!(matches!(
            select_partition(&cfg, &[h], &OptimizerSettings::default()),
            Err(Error::NoPartition { n_t: 3, n_rf: 4 })
        ));
    }

    #[test]
    fn selection_is_the_argmax() {
        let cfg = SystemConfig::new(4, 2, 2, 1, 1.0, 1.0).unwrap().with_snr_db(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let channels: Vec<_> = (0..3).map(|_| random_channel(&cfg, &mut rng)).collect();
        let sel = select_partition(&cfg, &channels, &OptimizerSettings::default()).unwrap();
        assert_eq!(sel.scores.len(), 3);
        let best = sel.scores.iter().map(|s| s.mean_r_lb).fold(f64::MIN, f64::max);
        let chosen = sel.scores.iter().find(|s| (s.n_k, s.n_m) == sel.selected).unwrap();
        assert_eq!(chosen.mean_r_lb, best);
        assert!(sel.scores.iter().all(|s| s.monotone));
    }
}
