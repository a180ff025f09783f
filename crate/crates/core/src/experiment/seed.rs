//! Per-stream seed derivation.
//!
//! `derive_seed(master, index, tag)` evaluates the splitmix64 finalizer at
//! `base(master, tag) + index·φ`, where `φ` is the odd golden-ratio
//! increment and `base` itself is a finalized mix of the master seed and
//! the tag. Both the affine step (odd multiplier) and the finalizer are
//! bijections of `u64`, so for a fixed `(master, tag)` distinct indices
//! never collide, and realization `i` is the same in every mode and run.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Purpose tags separating the random streams of an experiment.
pub mod tags {
    /// Channel realizations; shared by every mode.
    pub const CHANNEL: u64 = 1;
    /// Random precoders and perturbations in gradient checks.
    pub const INSTANCE: u64 = 2;
    /// Monte-Carlo draws; combine with [`monte_carlo`] for a per-point tag.
    pub const MONTE_CARLO: u64 = 3;

    /// Tag for the Monte-Carlo stream of one (SNR index, scheme) point.
    pub fn monte_carlo(snr_index: usize, scheme: usize) -> u64 {
        MONTE_CARLO | (snr_index as u64) << 16 | (scheme as u64) << 8
    }
}

pub fn derive_seed(master_seed: u64, index: u64, tag: u64) -> u64 {
    let base = mix(master_seed ^ mix(tag.wrapping_add(GOLDEN)));
    mix(base.wrapping_add(index.wrapping_mul(GOLDEN)))
}
