//! Result tables and their CSV form.
//!
//! Column sets are fixed per mode:
//!
//! | mode | columns |
//! |------|---------|
//! | `bound-tightness`, `optimize`, `sweep` | [`SE_COLUMNS`] |
//! | `partition-select` | [`PARTITION_COLUMNS`] |
//! | `gradcheck` | [`GRADCHECK_COLUMNS`] |
//!
//! Real numbers are written in shortest round-trip scientific notation,
//! flags as `true`/`false`, and not-applicable cells are left empty. The
//! file starts with `#` comment lines holding the resolved config; the only
//! line that differs between identical runs is the `generated_unix_time`
//! stamp.

use std::io::Write;
use std::path::Path;

use super::config::{ExperimentConfig, Mode};
use crate::error::{Error, Result};

pub const SE_COLUMNS: &[&str] = &[
    "snr_db",
    "channel_index",
    "scheme",
    "n_k",
    "n_m",
    "r_lb",
    "r_shifted",
    "r_mc",
    "r_mc_stderr",
    "c_wf",
    "converged",
    "monotone",
];

pub const PARTITION_COLUMNS: &[&str] = &[
    "snr_db",
    "channel_index",
    "scheme",
    "n_k",
    "n_m",
    "r_lb",
    "converged",
    "monotone",
    "selected",
];

pub const GRADCHECK_COLUMNS: &[&str] = &["snr_db", "channel_index", "n_k", "n_m", "grad_lambda_rel_err", "grad_a_rel_err"];

/// Prefix of the timestamp comment line.
pub const TIMESTAMP_PREFIX: &str = "# generated_unix_time = ";

pub fn columns(mode: Mode) -> &'static [&'static str] {
    match mode {
        Mode::BoundTightness | Mode::Optimize | Mode::Sweep => SE_COLUMNS,
        Mode::PartitionSelect => PARTITION_COLUMNS,
        Mode::GradCheck => GRADCHECK_COLUMNS,
    }
}

/// Formats a real number for the CSV body.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        ResultTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Raw cells of one column.
    pub fn cells(&self, name: &str) -> Result<Vec<&str>> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| Error::InvalidConfig(format!("no column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }

    /// Numeric cells of one column; empty cells become NaN.
    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        self.cells(name)?
            .into_iter()
            .map(|c| {
                if c.is_empty() {
                    Ok(f64::NAN)
                } else {
                    c.parse::<f64>()
                        .map_err(|_| Error::NonFinite(format!("column `{name}`: `{c}` is not a number")))
                }
            })
            .collect()
    }

    /// Header line plus data lines.
    pub fn to_csv_body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses a file written by [`write_csv`], skipping comment lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::ResultParse { line: 1, msg: "missing header".into() })?;
        let columns: Vec<String> = header.split(',').map(String::from).collect();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let row: Vec<String> = line.split(',').map(String::from).collect();
            if row.len() != columns.len() {
                return Err(Error::ResultParse {
                    line: i + 1,
                    msg: format!("{} cells, expected {}", row.len(), columns.len()),
                });
            }
            rows.push(row);
        }
        Ok(ResultTable { columns, rows })
    }
}

/// Full file contents: comment block, header and rows.
pub fn render_csv(cfg: &ExperimentConfig, table: &ResultTable, unix_time: u64) -> String {
    let mut out = String::from("# gensm-sim results\n");
    out.push_str(&format!("{TIMESTAMP_PREFIX}{unix_time}\n"));
    for line in cfg.render().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&table.to_csv_body());
    out
}

/// Drops the timestamp line so two files can be compared byte for byte.
pub fn strip_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(TIMESTAMP_PREFIX))
        .flat_map(|l| [l, "\n"])
        .collect()
}

pub fn write_csv(path: &Path, cfg: &ExperimentConfig, table: &ResultTable) -> Result<()> {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let text = render_csv(cfg, table, now);
    let mut file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
