//! Versioned evaluation reports with JSON and flat CSV forms.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    AsrSnr,
    TimeShift,
    Filtering,
    DefenseAuc,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::AsrSnr, Protocol::TimeShift, Protocol::Filtering, Protocol::DefenseAuc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::AsrSnr => "asr_snr",
            Protocol::TimeShift => "time_shift",
            Protocol::Filtering => "filtering",
            Protocol::DefenseAuc => "defense_auc",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .iter()
            .find(|p| p.as_str() == s)
            .copied()
            .ok_or_else(|| Error::invalid("protocol", format!("unknown protocol `{s}`")))
    }
}

/// One plotted point. `series` names the quantity (`asr`, `auc/quantize`,
/// `benign_accuracy`, ...); `x` is the grid coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub protocol: Protocol,
    pub series: String,
    pub attack_tag: String,
    pub model_tag: String,
    pub x: f64,
    pub metric: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub protocol: Protocol,
    /// Grids, transform names and other settings of the run.
    pub params: BTreeMap<String, serde_json::Value>,
    pub rows: Vec<ReportRow>,
    #[serde(default)]
    pub config_hash: String,
}

impl EvalReport {
    pub fn new(protocol: Protocol) -> Self {
        Self { version: REPORT_VERSION, protocol, params: BTreeMap::new(), rows: Vec::new(), config_hash: String::new() }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(key.to_string(), serde_json::to_value(value).expect("report parameters serialize"));
        self
    }

    pub fn push(&mut self, series: &str, attack_tag: &str, model_tag: &str, x: f64, metric: f64, seed: u64) {
        self.rows.push(ReportRow {
            protocol: self.protocol,
            series: series.to_string(),
            attack_tag: attack_tag.to_string(),
            model_tag: model_tag.to_string(),
            x,
            metric,
            seed,
        });
    }

    /// Append another report's rows; both must be the same protocol.
    pub fn extend(&mut self, other: EvalReport) -> Result<()> {
        if other.protocol != self.protocol {
            return Err(Error::invalid("protocol", format!("cannot merge {} into {}", other.protocol, self.protocol)));
        }
        for (k, v) in other.params {
            self.params.entry(k).or_insert(v);
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    /// `(x, metric)` points of one series, in row order.
    pub fn series(&self, series: &str, attack_tag: &str, model_tag: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.series == series && r.attack_tag == attack_tag && r.model_tag == model_tag)
            .map(|r| (r.x, r.metric))
            .collect()
    }

    pub fn value(&self, series: &str, attack_tag: &str, model_tag: &str, x: f64) -> Option<f64> {
        self.series(series, attack_tag, model_tag).into_iter().find(|p| p.0 == x).map(|p| p.1)
    }

    /// Flat CSV: one row per point, with the config hash in the last column.
    pub fn to_csv(&self) -> Result<String> {
        write_rows_csv(&self.rows, &self.config_hash)
    }
}

/// CSV text for a list of rows, used for single reports and summaries.
pub fn write_rows_csv(rows: &[ReportRow], config_hash: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["protocol", "series", "attack_tag", "model_tag", "x", "metric", "seed", "config_hash"])?;
    for r in rows {
        w.write_record([
            r.protocol.as_str(),
            &r.series,
            &r.attack_tag,
            &r.model_tag,
            &r.x.to_string(),
            &r.metric.to_string(),
            &r.seed.to_string(),
            config_hash,
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Write `<stem>.json` and `<stem>.csv` next to each other.
pub fn write_report(report: &EvalReport, dir: &Path, stem: &str) -> Result<()> {
    write_json(&dir.join(format!("{stem}.json")), report)?;
    crate::io::write_text(&dir.join(format!("{stem}.csv")), &report.to_csv()?)
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let r: EvalReport = read_json(path)?;
    if r.version != REPORT_VERSION {
        return Err(Error::format("version", format!("expected {REPORT_VERSION}, found {}", r.version)));
    }
    Ok(r)
}
