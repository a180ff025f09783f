//! Generalized spatial modulation (GenSM) aided mmWave MIMO with
//! sub-connected hybrid precoding.
//!
//! The crate covers the whole link-level pipeline:
//!
//! * [`system`]: dimensioning, antenna-group combinations (AGCs), selection
//!   matrices and the hybrid precoder representation;
//! * [`channel`]: clustered Saleh-Valenzuela channel generation;
//! * [`metrics`]: the closed-form SE lower bound, a Monte-Carlo estimate of
//!   the true mutual information and the waterfilling capacity;
//! * [`optimizer`]: the alternating digital/analog barrier gradient ascent
//!   and the antenna-partition search;
//! * [`experiment`]: config files, seeded ensembles and CSV output.

pub mod channel;
pub mod error;
pub mod experiment;
pub mod instances;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod system;

pub use channel::{array_response, sample_channel, ChannelMatrix, ChannelParams};
pub use error::{Error, Result};
pub use metrics::{
    constant_gap, se_lower_bound, se_monte_carlo, waterfilling_capacity, McEstimate, SeReport,
};
pub use optimizer::{
    grad_a, grad_lambda, optimize_analog, optimize_digital, project_to_feasible_analog, select_partition,
    two_step, OptimizationTrace, OptimizerSettings,
};
pub use system::{
    covariance, effective_gain, enumerate_agcs, selection_matrix, AgcTable, HybridPrecoder, SelectionMatrix,
    SystemConfig,
};
