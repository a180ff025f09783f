//! Batch experiments over seeded channel ensembles.
//!
//! Realization `i` is drawn from a generator seeded with
//! `derive_seed(master_seed, i, tags::CHANNEL)`, so it is the same in every
//! mode. Channels are processed in parallel and rows are collected in
//! (SNR, channel) order, which keeps the output independent of the thread
//! count.

mod config;
mod gradcheck;
mod output;
mod seed;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{ExperimentConfig, Mode};
pub use gradcheck::{gradient_errors, ANALOG_STEP, LAMBDA_STEP};
pub use output::{
    columns, num, render_csv, strip_timestamp, write_csv, ResultTable, GRADCHECK_COLUMNS, PARTITION_COLUMNS,
    SE_COLUMNS, TIMESTAMP_PREFIX,
};
pub use seed::{derive_seed, tags};

use crate::channel::{sample_channel, ChannelMatrix};
use crate::error::{Error, Result};
use crate::instances::random_precoder;
use crate::metrics::SeReport;
use crate::optimizer::{select_partition, two_step, TwoStepOutcome};
use crate::system::{enumerate_agcs, HybridPrecoder, SystemConfig};

/// Scheme labels used in the `scheme` column.
pub const NON_OPTIMIZED: &str = "non-optimized";
pub const OPTIMIZED: &str = "optimized";

/// Largest tolerated share of optimizer runs that hit an iteration cap.
pub const MAX_NON_CONVERGED_RATE: f64 = 0.5;
/// Largest tolerated gradient error in `gradcheck` mode.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub mode: Mode,
    pub table: ResultTable,
    /// Per-SNR ensemble means, formatted for a terminal.
    pub summary: String,
    pub optimizer_runs: usize,
    pub non_converged: usize,
    /// Optimizer runs whose outer `R_LB` sequence decreased somewhere.
    pub non_monotone: usize,
    /// Largest gradient error (`gradcheck` only).
    pub max_gradient_error: Option<f64>,
}

impl ExperimentReport {
    pub fn non_convergence_rate(&self) -> f64 {
        if self.optimizer_runs == 0 {
            0.0
        } else {
            self.non_converged as f64 / self.optimizer_runs as f64
        }
    }

    /// Flags a numerically failed experiment: too many unconverged
    /// optimizer runs or a gradient check above tolerance.
    pub fn check(&self) -> Result<()> {
        if self.non_convergence_rate() > MAX_NON_CONVERGED_RATE {
            return Err(Error::Numerical(format!(
                "{} of {} optimizer runs did not converge",
                self.non_converged, self.optimizer_runs
            )));
        }
        if let Some(e) = self.max_gradient_error {
            if !(e < GRADCHECK_TOLERANCE) {
                return Err(Error::Numerical(format!(
                    "gradient check failed: relative error {e:e} >= {GRADCHECK_TOLERANCE:e}"
                )));
            }
        }
        Ok(())
    }
}

/// Channel realization `index` of an experiment.
pub fn channel_realization(cfg: &ExperimentConfig, index: usize) -> ChannelMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, index as u64, tags::CHANNEL));
    sample_channel(&cfg.channel, &cfg.system, &mut rng)
}

pub fn channel_ensemble(cfg: &ExperimentConfig) -> Vec<ChannelMatrix> {
    (0..cfg.n_channels)
        .into_par_iter()
        .map(|i| channel_realization(cfg, i))
        .collect()
}

fn mc_rng(cfg: &ExperimentConfig, channel: usize, snr_index: usize, scheme: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.master_seed,
        channel as u64,
        tags::monte_carlo(snr_index, scheme),
    ))
}

fn flag(b: bool) -> String {
    b.to_string()
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

fn se_row(snr: f64, i: usize, scheme: &str, link: &SystemConfig, r: &SeReport, run: Option<&TwoStepOutcome>) -> Vec<String> {
    vec![
        num(snr),
        i.to_string(),
        scheme.to_string(),
        link.n_k.to_string(),
        link.n_m.to_string(),
        num(r.r_lb),
        num(r.r_shifted),
        num(r.r_mc),
        num(r.r_mc_stderr),
        num(r.c_wf),
        run.map(|o| flag(o.converged)).unwrap_or_default(),
        run.map(|o| flag(o.trace.is_monotone(1e-9))).unwrap_or_default(),
    ]
}

/// Runs the configured mode. Numerical trouble that still produced a full
/// table is reported through [`ExperimentReport::check`], not as an error.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let channels = channel_ensemble(cfg);
    match cfg.mode {
        Mode::BoundTightness => run_bound_tightness(cfg, &channels),
        Mode::Optimize => run_optimize(cfg, &channels),
        Mode::Sweep => run_sweep(cfg, &channels),
        Mode::PartitionSelect => run_partition_select(cfg, &channels),
        Mode::GradCheck => run_gradcheck(cfg, &channels),
    }
}

fn report(cfg: &ExperimentConfig, table: ResultTable, summary: String) -> ExperimentReport {
    ExperimentReport {
        mode: cfg.mode,
        table,
        summary,
        optimizer_runs: 0,
        non_converged: 0,
        non_monotone: 0,
        max_gradient_error: None,
    }
}

fn run_bound_tightness(cfg: &ExperimentConfig, channels: &[ChannelMatrix]) -> Result<ExperimentReport> {
    let table_agc = enumerate_agcs(cfg.system.n_m, cfg.system.n_rf)?;
    let mut table = ResultTable::new(SE_COLUMNS);
    let mut summary = format!(
        "{:>8} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "snr_db", "r_lb", "r_shifted", "r_mc", "|diff|", "c_wf"
    );
    for (s, &snr) in cfg.snr_grid_db.iter().enumerate() {
        let link = cfg.system.with_snr_db(snr);
        let p = HybridPrecoder::uniform(&link, table_agc.m());
        let reports: Vec<SeReport> = channels
            .par_iter()
            .enumerate()
            .map(|(i, h)| SeReport::evaluate(h, &p, &table_agc, &link, cfg.n_mc_samples, &mut mc_rng(cfg, i, s, 0)))
            .collect::<Result<_>>()?;
        for (i, r) in reports.iter().enumerate() {
            table.push(se_row(snr, i, NON_OPTIMIZED, &link, r, None));
        }
        let shifted = mean(reports.iter().map(|r| r.r_shifted));
        let mc = mean(reports.iter().map(|r| r.r_mc));
        let _ = writeln!(
            summary,
            "{snr:>8.2} {:>10.4} {shifted:>10.4} {mc:>10.4} {:>10.4} {:>10.4}",
            mean(reports.iter().map(|r| r.r_lb)),
            (shifted - mc).abs(),
            mean(reports.iter().map(|r| r.c_wf)),
        );
    }
    Ok(report(cfg, table, summary))
}

fn run_optimize(cfg: &ExperimentConfig, channels: &[ChannelMatrix]) -> Result<ExperimentReport> {
    let agc = enumerate_agcs(cfg.system.n_m, cfg.system.n_rf)?;
    let mut table = ResultTable::new(SE_COLUMNS);
    let mut summary = format!(
        "{:>8} {:>14} {:>14} {:>10} {:>10} {:>14}\n",
        "snr_db", "non-opt r_mc", "opt r_mc", "opt r_lb", "c_wf", "unconverged"
    );
    let (mut runs, mut non_converged, mut non_monotone) = (0, 0, 0);
    for (s, &snr) in cfg.snr_grid_db.iter().enumerate() {
        let link = cfg.system.with_snr_db(snr);
        let uniform = HybridPrecoder::uniform(&link, agc.m());
        let results: Vec<(SeReport, SeReport, TwoStepOutcome)> = channels
            .par_iter()
            .enumerate()
            .map(|(i, h)| {
                let out = two_step(h, &agc, &link, &cfg.optimizer)?;
                let base = SeReport::evaluate(h, &uniform, &agc, &link, cfg.n_mc_samples, &mut mc_rng(cfg, i, s, 0))?;
                let opt = SeReport::evaluate(h, &out.precoder, &agc, &link, cfg.n_mc_samples, &mut mc_rng(cfg, i, s, 1))?;
                Ok((base, opt, out))
            })
            .collect::<Result<_>>()?;
        let mut unconverged_here = 0;
        for (i, (base, opt, out)) in results.iter().enumerate() {
            table.push(se_row(snr, i, NON_OPTIMIZED, &link, base, None));
            table.push(se_row(snr, i, OPTIMIZED, &link, opt, Some(out)));
            runs += 1;
            unconverged_here += usize::from(!out.converged);
            non_monotone += usize::from(!out.trace.is_monotone(1e-9));
        }
        non_converged += unconverged_here;
        let _ = writeln!(
            summary,
            "{snr:>8.2} {:>14.4} {:>14.4} {:>10.4} {:>10.4} {:>14}",
            mean(results.iter().map(|r| r.0.r_mc)),
            mean(results.iter().map(|r| r.1.r_mc)),
            mean(results.iter().map(|r| r.1.r_lb)),
            mean(results.iter().map(|r| r.0.c_wf)),
            unconverged_here,
        );
    }
    Ok(ExperimentReport {
        optimizer_runs: runs,
        non_converged,
        non_monotone,
        ..report(cfg, table, summary)
    })
}

fn run_sweep(cfg: &ExperimentConfig, channels: &[ChannelMatrix]) -> Result<ExperimentReport> {
    let mut table = ResultTable::new(SE_COLUMNS);
    let mut summary = format!(
        "{:>8} {:>9} {:>14} {:>14} {:>14}\n",
        "snr_db", "(nk,nm)", "optimized", "non-optimized", "waterfilling"
    );
    let (mut runs, mut non_converged, mut non_monotone) = (0, 0, 0);
    for (s, &snr) in cfg.snr_grid_db.iter().enumerate() {
        let base = cfg.system.with_snr_db(snr);
        let selection = select_partition(&base, channels, &cfg.optimizer)?;
        for score in &selection.scores {
            runs += score.runs.len();
            non_converged += score.non_converged;
            non_monotone += score.runs.iter().filter(|r| !r.trace.is_monotone(1e-9)).count();
        }
        let chosen = selection.selected_score();
        let link = base.with_partition(chosen.n_k, chosen.n_m)?;
        let agc = enumerate_agcs(link.n_m, link.n_rf)?;
        let uniform = HybridPrecoder::uniform(&link, agc.m());
        let results: Vec<(SeReport, SeReport)> = channels
            .par_iter()
            .zip(chosen.runs.par_iter())
            .enumerate()
            .map(|(i, (h, out))| {
                let plain = SeReport::evaluate(h, &uniform, &agc, &link, cfg.n_mc_samples, &mut mc_rng(cfg, i, s, 0))?;
                let opt = SeReport::evaluate(h, &out.precoder, &agc, &link, cfg.n_mc_samples, &mut mc_rng(cfg, i, s, 1))?;
                Ok((plain, opt))
            })
            .collect::<Result<_>>()?;
        for (i, ((plain, opt), out)) in results.iter().zip(&chosen.runs).enumerate() {
            table.push(se_row(snr, i, NON_OPTIMIZED, &link, plain, None));
            table.push(se_row(snr, i, OPTIMIZED, &link, opt, Some(out)));
        }
        let _ = writeln!(
            summary,
            "{snr:>8.2} {:>9} {:>14.4} {:>14.4} {:>14.4}",
            format!("({},{})", link.n_k, link.n_m),
            mean(results.iter().map(|r| r.1.r_mc)),
            mean(results.iter().map(|r| r.0.r_mc)),
            mean(results.iter().map(|r| r.0.c_wf)),
        );
    }
    Ok(ExperimentReport {
        optimizer_runs: runs,
        non_converged,
        non_monotone,
        ..report(cfg, table, summary)
    })
}

fn run_partition_select(cfg: &ExperimentConfig, channels: &[ChannelMatrix]) -> Result<ExperimentReport> {
    let mut table = ResultTable::new(PARTITION_COLUMNS);
    let mut summary = String::new();
    let (mut runs, mut non_converged, mut non_monotone) = (0, 0, 0);
    for &snr in &cfg.snr_grid_db {
        let base = cfg.system.with_snr_db(snr);
        let selection = select_partition(&base, channels, &cfg.optimizer)?;
        let _ = write!(summary, "{snr:>8.2} dB:");
        for score in &selection.scores {
            let selected = (score.n_k, score.n_m) == selection.selected;
            for (i, out) in score.runs.iter().enumerate() {
                table.push(vec![
                    num(snr),
                    i.to_string(),
                    OPTIMIZED.to_string(),
                    score.n_k.to_string(),
                    score.n_m.to_string(),
                    num(out.trace.final_r_lb),
                    flag(out.converged),
                    flag(out.trace.is_monotone(1e-9)),
                    flag(selected),
                ]);
            }
            runs += score.runs.len();
            non_converged += score.non_converged;
            non_monotone += score.runs.iter().filter(|r| !r.trace.is_monotone(1e-9)).count();
            let mark = if selected { "*" } else { " " };
            let _ = write!(summary, "  ({},{}){mark} {:>9.4}", score.n_k, score.n_m, score.mean_r_lb);
        }
        summary.push('\n');
    }
    Ok(ExperimentReport {
        optimizer_runs: runs,
        non_converged,
        non_monotone,
        ..report(cfg, table, summary)
    })
}

fn run_gradcheck(cfg: &ExperimentConfig, channels: &[ChannelMatrix]) -> Result<ExperimentReport> {
    let agc = enumerate_agcs(cfg.system.n_m, cfg.system.n_rf)?;
    let mut table = ResultTable::new(GRADCHECK_COLUMNS);
    let mut summary = format!("{:>8} {:>16} {:>16}\n", "snr_db", "max err (λ)", "max err (a)");
    let mut worst = 0.0f64;
    for (s, &snr) in cfg.snr_grid_db.iter().enumerate() {
        let link = cfg.system.with_snr_db(snr);
        let errors: Vec<(f64, f64)> = channels
            .par_iter()
            .enumerate()
            .map(|(i, h)| {
                let seed = derive_seed(cfg.master_seed, i as u64, tags::INSTANCE ^ (s as u64) << 16);
                let p = random_precoder(&link, agc.m(), &mut ChaCha8Rng::seed_from_u64(seed));
                gradient_errors(h, &p, &agc, &link)
            })
            .collect::<Result<_>>()?;
        for (i, (el, ea)) in errors.iter().enumerate() {
            table.push(vec![
                num(snr),
                i.to_string(),
                link.n_k.to_string(),
                link.n_m.to_string(),
                num(*el),
                num(*ea),
            ]);
        }
        let max_l = errors.iter().map(|e| e.0).fold(0.0, f64::max);
        let max_a = errors.iter().map(|e| e.1).fold(0.0, f64::max);
        worst = worst.max(max_l).max(max_a);
        let _ = writeln!(summary, "{snr:>8.2} {max_l:>16.3e} {max_a:>16.3e}");
    }
    Ok(ExperimentReport {
        max_gradient_error: Some(worst),
        ..report(cfg, table, summary)
    })
}
