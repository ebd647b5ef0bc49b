use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::stats::Moments;
use crate::error::{Error, Result};

/// One CSV cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Flag(bool),
}

impl Cell {
    pub fn as_f64(self) -> f64 {
        match self {
            Cell::Int(v) => v as f64,
            Cell::Real(v) => v,
            Cell::Flag(b) => f64::from(u8::from(b)),
        }
    }

    /// Reals use 17 significant digits.
    pub fn render(self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format!("{v:.16e}"),
            Cell::Flag(b) => u8::from(b).to_string(),
        }
    }

    fn to_json(self) -> Value {
        match self {
            Cell::Int(v) => Value::from(v),
            Cell::Real(v) => Value::from(v),
            Cell::Flag(b) => Value::from(b),
        }
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.as_f64().total_cmp(&other.as_f64())
    }
}

/// One row of a records file: the group coordinates, the trial index and
/// the measured values (empty when the trial failed).
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub group: Vec<Cell>,
    pub trial: usize,
    pub values: Vec<Cell>,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn ok(group: Vec<Cell>, trial: usize, values: Vec<Cell>) -> Self {
        Self {
            group,
            trial,
            values,
            error: None,
        }
    }

    pub fn failed(group: Vec<Cell>, trial: usize, error: &Error) -> Self {
        Self {
            group,
            trial,
            values: Vec::new(),
            error: Some(error.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordTable {
    pub group_columns: Vec<&'static str>,
    pub value_columns: Vec<&'static str>,
    pub records: Vec<TrialRecord>,
}

impl RecordTable {
    pub fn new(group_columns: Vec<&'static str>, value_columns: Vec<&'static str>) -> Self {
        Self {
            group_columns,
            value_columns,
            records: Vec::new(),
        }
    }

    /// Orders rows by group coordinates, then trial index.
    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| {
            a.group
                .iter()
                .zip(&b.group)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
                .then(a.trial.cmp(&b.trial))
        });
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.value_columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::invalid(format!("no column named {name}")))
    }

    /// Values of `name` over the successful rows.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name)?;
        Ok(self
            .records
            .iter()
            .filter(|r| r.is_ok())
            .map(|r| r.values[idx].as_f64())
            .collect())
    }

    pub fn value(&self, record: &TrialRecord, name: &str) -> Result<Option<f64>> {
        let idx = self.column_index(name)?;
        Ok(record.values.get(idx).map(|c| c.as_f64()))
    }

    pub fn failed_count(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn header(&self) -> Vec<&'static str> {
        let mut h = self.group_columns.clone();
        h.push("trial");
        h.extend(&self.value_columns);
        h.extend(["status", "error"]);
        h
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for r in &self.records {
            let mut row: Vec<String> = r.group.iter().map(|c| c.render()).collect();
            row.push(r.trial.to_string());
            if r.is_ok() {
                row.extend(r.values.iter().map(|c| c.render()));
                row.push("ok".into());
                row.push(String::new());
            } else {
                row.extend(self.value_columns.iter().map(|_| String::new()));
                row.push("failed".into());
                row.push(r.error.clone().unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.into_inner()
            .map_err(|e| Error::invalid(format!("csv buffer: {e}")))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let bytes = self.to_csv_bytes()?;
        write_file(path, &bytes)
    }

    /// Groups successful rows by the leading `key_len` group columns and
    /// summarizes `metric`, plus `extra` columns as secondary moments.
    pub fn summarize(
        &self,
        key_len: usize,
        metric: &str,
        extra: &[&str],
    ) -> Result<Vec<SummaryRow>> {
        let midx = self.column_index(metric)?;
        let eidx: Vec<usize> = extra
            .iter()
            .map(|e| self.column_index(e))
            .collect::<Result<_>>()?;
        let mut groups: Vec<(Vec<Cell>, Vec<&TrialRecord>)> = Vec::new();
        for r in &self.records {
            let key = r.group[..key_len].to_vec();
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, members)) => members.push(r),
                None => groups.push((key, vec![r])),
            }
        }
        groups.sort_by(|a, b| {
            a.0.iter()
                .zip(&b.0)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        });
        let mut rows = Vec::with_capacity(groups.len());
        for (key, members) in groups {
            let ok: Vec<&TrialRecord> = members.iter().copied().filter(|r| r.is_ok()).collect();
            let failed = members.len() - ok.len();
            let key_map: BTreeMap<String, Value> = self.group_columns[..key_len]
                .iter()
                .zip(&key)
                .map(|(name, c)| (name.to_string(), c.to_json()))
                .collect();
            if ok.is_empty() {
                rows.push(SummaryRow {
                    key: key_map,
                    metric: metric.to_string(),
                    mean: None,
                    std: None,
                    stderr: None,
                    count: 0,
                    failed,
                    degenerate: true,
                    also: BTreeMap::new(),
                });
                continue;
            }
            let vals: Vec<f64> = ok.iter().map(|r| r.values[midx].as_f64()).collect();
            let m = Moments::of(&vals)?;
            let mut also = BTreeMap::new();
            for (name, &i) in extra.iter().zip(&eidx) {
                let v: Vec<f64> = ok.iter().map(|r| r.values[i].as_f64()).collect();
                also.insert(name.to_string(), Moments::of(&v)?);
            }
            rows.push(SummaryRow {
                key: key_map,
                metric: metric.to_string(),
                mean: Some(m.mean),
                std: Some(m.std),
                stderr: Some(m.stderr),
                count: m.count,
                failed,
                degenerate: m.is_degenerate(),
                also,
            });
        }
        Ok(rows)
    }
}

/// Statistics of one group. `count` excludes failed trials, which are
/// reported in `failed` and never enter the moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub key: BTreeMap<String, Value>,
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub stderr: Option<f64>,
    pub count: usize,
    pub failed: usize,
    /// Fewer than two successful trials: `std` is 0 by convention.
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub also: BTreeMap<String, Moments>,
}

/// Contents of the summary JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: String,
    pub master_seed: u64,
    pub records: usize,
    pub failed: usize,
    pub rows: Vec<SummaryRow>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fits: BTreeMap<String, f64>,
}

impl RunSummary {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_file(path, text.as_bytes())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}
