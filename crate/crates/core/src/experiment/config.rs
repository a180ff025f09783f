//! Experiment config files.
//!
//! One `key = value` pair per line. Link, channel and optimizer parameters
//! carry a `system.`, `channel.` or `optimizer.` prefix; everything after
//! `#` is a comment. Lists are comma separated and may be wrapped in
//! brackets. Unknown or repeated keys are errors.
//!
//! ```text
//! mode = bound-tightness
//! master_seed = 7
//! n_channels = 50
//! snr_grid_db = [-10, -5, 0, 5, 10]
//! system.n_r = 8
//! system.n_k = 2
//! system.n_m = 4
//! system.n_rf = 2
//! channel.angle_spread_deg = 7.5
//! optimizer.max_outer = 30
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::metrics::{DEFAULT_MC_SAMPLES, MIN_MC_SAMPLES};
use crate::optimizer::OptimizerSettings;
use crate::system::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Lower bound, shifted bound and Monte-Carlo SE of the non-optimized
    /// precoder.
    BoundTightness,
    /// Optimized versus non-optimized precoder at the configured partition.
    Optimize,
    /// Per-SNR partition selection, then optimized, non-optimized and
    /// waterfilling SE at the selected partition.
    Sweep,
    /// Optimized `R_LB` of every candidate partition.
    PartitionSelect,
    /// Finite-difference check of both gradients.
    GradCheck,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::BoundTightness,
        Mode::Optimize,
        Mode::Sweep,
        Mode::PartitionSelect,
        Mode::GradCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::BoundTightness => "bound-tightness",
            Mode::Optimize => "optimize",
            Mode::Sweep => "sweep",
            Mode::PartitionSelect => "partition-select",
            Mode::GradCheck => "gradcheck",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown mode `{s}`")))
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Link dimensions; `rho` is overwritten at every SNR point.
    pub system: SystemConfig,
    pub channel: ChannelParams,
    pub optimizer: OptimizerSettings,
    pub snr_grid_db: Vec<f64>,
    pub n_channels: usize,
    pub n_mc_samples: usize,
    pub master_seed: u64,
    pub mode: Mode,
    pub output_path: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemConfig::reference(-10.0),
            channel: ChannelParams::default(),
            optimizer: OptimizerSettings::default(),
            snr_grid_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            n_channels: 1000,
            n_mc_samples: DEFAULT_MC_SAMPLES,
            master_seed: 0,
            mode: Mode::BoundTightness,
            output_path: PathBuf::from("results.csv"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.channel.validate()?;
        self.optimizer.validate()?;
        if self.snr_grid_db.is_empty() {
            return Err(Error::InvalidConfig("snr_grid_db must not be empty".into()));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig("snr_grid_db entries must be finite".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("snr_grid_db must be strictly increasing".into()));
        }
        if self.n_channels == 0 {
            return Err(Error::InvalidConfig("n_channels must be at least 1".into()));
        }
        let needs_mc = matches!(self.mode, Mode::BoundTightness | Mode::Optimize | Mode::Sweep);
        if needs_mc && self.n_mc_samples < MIN_MC_SAMPLES {
            return Err(Error::InvalidConfig(format!(
                "n_mc_samples = {} is below the minimum of {MIN_MC_SAMPLES}",
                self.n_mc_samples
            )));
        }
        Ok(())
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    /// Canonical `key = value` listing of every setting; parses back to `self`.
    pub fn render(&self) -> String {
        let s = &self.system;
        let c = &self.channel;
        let o = &self.optimizer;
        let grid: Vec<String> = self.snr_grid_db.iter().map(|x| x.to_string()).collect();
        let lines = [
            format!("mode = {}", self.mode),
            format!("master_seed = {}", self.master_seed),
            format!("n_channels = {}", self.n_channels),
            format!("n_mc_samples = {}", self.n_mc_samples),
            format!("snr_grid_db = [{}]", grid.join(", ")),
            format!("output_path = {}", self.output_path.display()),
            format!("system.n_t = {}", s.n_t),
            format!("system.n_r = {}", s.n_r),
            format!("system.n_k = {}", s.n_k),
            format!("system.n_m = {}", s.n_m),
            format!("system.n_rf = {}", s.n_rf),
            format!("system.n_s = {}", s.n_s),
            format!("system.sigma2 = {}", s.sigma2),
            format!("channel.n_cl = {}", c.n_cl),
            format!("channel.n_ray = {}", c.n_ray),
            format!("channel.angle_spread = {}", c.angle_spread),
            format!("channel.element_spacing = {}", c.element_spacing),
            format!("optimizer.t_b = {}", o.t_b),
            format!("optimizer.p_norm = {}", o.p_norm),
            format!("optimizer.step_init = {}", o.step_init),
            format!("optimizer.backtrack_ratio = {}", o.backtrack_ratio),
            format!("optimizer.armijo_c = {}", o.armijo_c),
            format!("optimizer.grad_tol = {}", o.grad_tol),
            format!("optimizer.max_inner = {}", o.max_inner),
            format!("optimizer.max_outer = {}", o.max_outer),
            format!("optimizer.outer_tol = {}", o.outer_tol),
        ];
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut n_t = None;
        let mut seen = HashSet::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| Error::ConfigParse { line: line_no, msg };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(err(format!("missing value for `{key}`")));
            }
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }

            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>().map_err(|_| err(format!("`{key}`: cannot parse `{v}` as a number")))
            };
            let int = |v: &str| -> Result<u64> {
                v.parse::<u64>()
                    .map_err(|_| err(format!("`{key}`: cannot parse `{v}` as a non-negative integer")))
            };
            let count = |v: &str| -> Result<usize> { int(v).map(|n| n as usize) };

            match key {
                "mode" => cfg.mode = value.parse().map_err(|e: Error| err(e.to_string()))?,
                "master_seed" => cfg.master_seed = int(value)?,
                "n_channels" => cfg.n_channels = count(value)?,
                "n_mc_samples" => cfg.n_mc_samples = count(value)?,
                "output_path" => cfg.output_path = PathBuf::from(value),
                "snr_grid_db" => {
                    let inner = value.trim_start_matches('[').trim_end_matches(']');
                    cfg.snr_grid_db = inner
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(num)
                        .collect::<Result<_>>()?;
                }
                "system.n_t" => n_t = Some(count(value)?),
                "system.n_r" => cfg.system.n_r = count(value)?,
                "system.n_k" => cfg.system.n_k = count(value)?,
                "system.n_m" => cfg.system.n_m = count(value)?,
                "system.n_rf" => cfg.system.n_rf = count(value)?,
                "system.n_s" => cfg.system.n_s = count(value)?,
                "system.sigma2" => cfg.system.sigma2 = num(value)?,
                "channel.n_cl" => cfg.channel.n_cl = count(value)?,
                "channel.n_ray" => cfg.channel.n_ray = count(value)?,
                "channel.angle_spread" => cfg.channel.angle_spread = num(value)?,
                "channel.angle_spread_deg" => cfg.channel.angle_spread = num(value)?.to_radians(),
                "channel.element_spacing" => cfg.channel.element_spacing = num(value)?,
                "optimizer.t_b" => cfg.optimizer.t_b = num(value)?,
                "optimizer.p_norm" => cfg.optimizer.p_norm = num(value)?,
                "optimizer.step_init" => cfg.optimizer.step_init = num(value)?,
                "optimizer.backtrack_ratio" => cfg.optimizer.backtrack_ratio = num(value)?,
                "optimizer.armijo_c" => cfg.optimizer.armijo_c = num(value)?,
                "optimizer.grad_tol" => cfg.optimizer.grad_tol = num(value)?,
                "optimizer.max_inner" => cfg.optimizer.max_inner = count(value)?,
                "optimizer.max_outer" => cfg.optimizer.max_outer = count(value)?,
                "optimizer.outer_tol" => cfg.optimizer.outer_tol = num(value)?,
                "system.rho" => return Err(err("`system.rho` is set from snr_grid_db".into())),
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        if seen.contains("channel.angle_spread") && seen.contains("channel.angle_spread_deg") {
            return Err(Error::InvalidConfig(
                "give only one of channel.angle_spread and channel.angle_spread_deg".into(),
            ));
        }

        // n_s follows n_rf unless set explicitly (validation then checks it).
        if !seen.contains("system.n_s") {
            cfg.system.n_s = cfg.system.n_rf;
        }
        let product = cfg.system.n_k * cfg.system.n_m;
        match n_t {
            Some(n) if n != product => {
                return Err(Error::InvalidConfig(format!(
                    "system.n_t = {n} but n_k * n_m = {product}"
                )))
            }
            _ => cfg.system.n_t = product,
        }
        cfg.system = cfg.system.with_snr_db(cfg.snr_grid_db.first().copied().unwrap_or(0.0));
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: ExperimentConfig = "# nothing\n\n".parse().unwrap();
        let d = ExperimentConfig::default();
        assert_eq!(cfg.system.n_t, 8);
        assert_eq!(cfg.n_channels, 1000);
        assert_eq!(cfg.n_mc_samples, 20000);
        assert_eq!(cfg.optimizer, d.optimizer);
        assert_eq!(cfg.mode, Mode::BoundTightness);
    }

    #[test]
    fn parses_sections_lists_and_comments() {
        let text = "mode = sweep  # Fig-3 style\n\
                    snr_grid_db = 0, 5, 10\n\
                    n_channels = 50\n\
                    master_seed = 99\n\
                    system.n_r = 6\n\
                    system.n_t = 8\n\
                    channel.angle_spread_deg = 10\n\
                    optimizer.max_outer = 4\n";
        let cfg: ExperimentConfig = text.parse().unwrap();
        assert_eq!(cfg.mode, Mode::Sweep);
        assert_eq!(cfg.snr_grid_db, vec![0.0, 5.0, 10.0]);
        assert_eq!(cfg.system.n_r, 6);
        assert_eq!(cfg.master_seed, 99);
        assert!((cfg.channel.angle_spread - 10f64.to_radians()).abs() < 1e-15);
        assert_eq!(cfg.optimizer.max_outer, 4);
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.mode = Mode::PartitionSelect;
        cfg.snr_grid_db = vec![-12.5, 0.1, 3.0];
        cfg.channel.angle_spread = 0.1234567890123;
        cfg.optimizer.outer_tol = 2.5e-4;
        cfg.system = SystemConfig::new(6, 4, 2, 2, 1.0, 0.5).unwrap().with_snr_db(-12.5);
        let back: ExperimentConfig = cfg.render().parse().unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = "n_channels = 3\nsystem.bogus = 1\n".parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 2, .. }));
        let e = "n_channels = 3\nn_channels = 4\n".parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 2, .. }));
        let e = "no equals sign".parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 1, .. }));
        let e = "n_channels = -1".parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 1, .. }));
        let e = "mode = fastest".parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 1, .. }));
    }

    #[test]
    fn rejects_invalid_settings() {
        for text in [
            "snr_grid_db = []",
            "snr_grid_db = 0, 0",
            "snr_grid_db = 5, 0",
            "n_channels = 0",
            "n_mc_samples = 10",
            "system.n_t = 9",
            "system.n_rf = 5",
            "system.n_s = 3",
            "optimizer.p_norm = 7",
            "channel.n_cl = 0",
            "system.rho = 2",
        ] {
            assert!(text.parse::<ExperimentConfig>().is_err(), "{text}");
        }
        assert!("mode = gradcheck\nn_mc_samples = 10".parse::<ExperimentConfig>().is_ok());
    }

    #[test]
    fn every_mode_name_parses() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
    }
}
