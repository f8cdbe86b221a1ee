//! Tables written as CSV with a JSON mirror, plus the event log.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{ModeKind, ModelConfig};
use crate::error::{Error, Result};
use crate::metrics::{signal_bin_left, IndexReport, SIGNAL_BINS};
use crate::scalar::Scalar;
use crate::sim::{self, ClickEvent};

/// Significant digits of every real number written to a table.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Fixed-point rendering with [`SIGNIFICANT_DIGITS`] significant digits;
/// scientific notation for very large or small magnitudes.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    // Rounding can carry into the next power of ten.
    let exp = if format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x.abs()).contains(&format!("e{}", exp + 1)) {
        exp + 1
    } else {
        exp
    };
    let decimals = SIGNIFICANT_DIGITS as i32 - 1 - exp;
    if (0..=20).contains(&decimals) && exp < SIGNIFICANT_DIGITS as i32 {
        format!("{:.*}", decimals as usize, x)
    } else {
        format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Text,
    Real,
    Integer,
}

/// A table of pre-formatted cells with typed columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<(String, ColumnKind)>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[(&str, ColumnKind)]) -> Self {
        Table { columns: columns.iter().map(|&(n, k)| (n.to_string(), k)).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn header(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv { path: path.into(), source: e })?;
        let csv_err = |e| Error::Csv { path: path.into(), source: e };
        w.write_record(self.header()).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, columns: &[(&str, ColumnKind)]) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::Csv { path: path.into(), source: e })?;
        let mut t = Table::new(columns);
        let header = r.headers().map_err(|e| Error::Csv { path: path.into(), source: e })?.clone();
        if header.iter().ne(t.header()) {
            return Err(Error::Argument(format!("{}: unexpected header", path.display())));
        }
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Csv { path: path.into(), source: e })?;
            t.push(rec.iter().map(str::to_string).collect());
        }
        Ok(t)
    }

    /// Array of records; reals and integers become JSON numbers.
    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for ((name, kind), cell) in self.columns.iter().zip(row) {
                    let v = match kind {
                        ColumnKind::Text => Value::String(cell.clone()),
                        ColumnKind::Real => cell
                            .parse::<f64>()
                            .ok()
                            .and_then(serde_json::Number::from_f64)
                            .map(Value::Number)
                            .unwrap_or_else(|| Value::String(cell.clone())),
                        ColumnKind::Integer => cell
                            .parse::<u64>()
                            .map(|n| Value::Number(n.into()))
                            .unwrap_or_else(|_| Value::String(cell.clone())),
                    };
                    obj.insert(name.clone(), v);
                }
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }

    pub fn from_json(value: &Value, columns: &[(&str, ColumnKind)]) -> Result<Self> {
        let mut t = Table::new(columns);
        let rows = value.as_array().ok_or_else(|| Error::Argument("table JSON must be an array".into()))?;
        for row in rows {
            let cells = t
                .columns
                .iter()
                .map(|(name, kind)| {
                    let v = row.get(name).ok_or_else(|| Error::Argument(format!("missing column {name}")))?;
                    Ok(match (kind, v) {
                        (ColumnKind::Real, Value::Number(n)) => format_real(n.as_f64().unwrap_or(f64::NAN)),
                        (_, Value::Number(n)) => n.to_string(),
                        (_, Value::String(s)) => s.clone(),
                        (_, other) => other.to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            t.push(cells);
        }
        Ok(t)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write_pair(&self, dir: &Path, stem: &str) -> Result<()> {
        self.write_csv(&dir.join(format!("{stem}.csv")))?;
        write_json(&dir.join(format!("{stem}.json")), &self.to_json())
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json { path: path.into(), source: e })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Frozen copy of the resolved configuration.
pub fn write_config_echo<F: Scalar>(dir: &Path, cfg: &ModelConfig<F>) -> Result<()> {
    write_json(&dir.join("config.json"), cfg)
}

pub const INDEX_COLUMNS: [(&str, ColumnKind); 8] = [
    ("eta", ColumnKind::Real),
    ("lambda", ColumnKind::Real),
    ("mode", ColumnKind::Text),
    ("index_name", ColumnKind::Text),
    ("mean", ColumnKind::Real),
    ("sd", ColumnKind::Real),
    ("runs", ColumnKind::Integer),
    ("window", ColumnKind::Integer),
];

pub fn sweep_columns() -> Vec<(&'static str, ColumnKind)> {
    let mut c = INDEX_COLUMNS.to_vec();
    c.push(("master_seed", ColumnKind::Integer));
    c.push(("cell_seed", ColumnKind::Integer));
    c
}

pub fn index_table() -> Table {
    Table::new(&INDEX_COLUMNS)
}

pub fn sweep_table() -> Table {
    Table::new(&sweep_columns())
}

/// One row per index of `report`, followed by `extra` cells.
pub fn push_report<F: Scalar>(
    table: &mut Table,
    eta: F,
    lambda: F,
    mode: ModeKind,
    report: &IndexReport<F>,
    extra: &[String],
) {
    for (name, s) in report.rows() {
        let mut row = vec![
            format_real(eta.as_f64()),
            format_real(lambda.as_f64()),
            mode.to_string(),
            name,
            format_real(s.mean.as_f64()),
            format_real(s.sd.as_f64()),
            s.runs.to_string(),
            report.window.to_string(),
        ];
        row.extend_from_slice(extra);
        table.push(row);
    }
}

pub const HISTOGRAM_COLUMNS: [(&str, ColumnKind); 7] = [
    ("mode", ColumnKind::Text),
    ("eta", ColumnKind::Real),
    ("lambda", ColumnKind::Real),
    ("kind", ColumnKind::Text),
    ("bin_left", ColumnKind::Real),
    ("count", ColumnKind::Integer),
    ("frequency", ColumnKind::Real),
];

/// Rows of a binned signal histogram; `frequency` is per window event.
pub fn push_histogram<F: Scalar>(
    table: &mut Table,
    mode: ModeKind,
    eta: F,
    lambda: F,
    kind: &str,
    counts: &[u64],
    events: u64,
) {
    debug_assert_eq!(counts.len(), SIGNAL_BINS);
    for (k, &c) in counts.iter().enumerate() {
        table.push(vec![
            mode.to_string(),
            format_real(eta.as_f64()),
            format_real(lambda.as_f64()),
            kind.to_string(),
            format_real(signal_bin_left(k)),
            c.to_string(),
            format_real(c as f64 / events as f64),
        ]);
    }
}

pub const EVENT_COLUMNS: [&str; 7] = ["run_id", "n", "group", "item_index", "y_m", "highlighted", "rank_seen"];

/// Writes the event log of every run of `cfg`, in run order. Signals are
/// written with round-trip precision so indices can be recomputed exactly.
pub fn write_event_log<F: Scalar>(path: &Path, cfg: &ModelConfig<F>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e| Error::Csv { path: path.into(), source: e };
    w.write_record(EVENT_COLUMNS).map_err(csv_err)?;
    for run in 0..cfg.runs {
        let seed = crate::rng::run_seed(cfg.master_seed, run);
        let mut failed = None;
        sim::run_with(cfg, seed, |e| {
            if failed.is_none() {
                if let Err(err) = w.write_record(event_record(run, e)) {
                    failed = Some(err);
                }
            }
        })
        .map_err(|e| Error::Run { index: run, source: Box::new(e) })?;
        if let Some(err) = failed {
            return Err(csv_err(err));
        }
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

fn event_record<F: Scalar>(run: usize, e: &ClickEvent<F>) -> [String; 7] {
    [
        run.to_string(),
        e.n.to_string(),
        e.group.label().to_string(),
        e.item.to_string(),
        e.y.to_string(),
        u8::from(e.highlighted).to_string(),
        e.rank_seen.to_string(),
    ]
}

/// Reads an event log back, grouped by run.
pub fn read_event_log(path: &Path) -> Result<Vec<Vec<ClickEvent<f64>>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Csv { path: path.into(), source: e })?;
    let mut runs: Vec<Vec<ClickEvent<f64>>> = Vec::new();
    let bad = |what: &str| Error::Argument(format!("{}: bad {what}", path.display()));
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Csv { path: path.into(), source: e })?;
        let field = |i: usize| rec.get(i).ok_or_else(|| bad(EVENT_COLUMNS[i]));
        let run: usize = field(0)?.parse().map_err(|_| bad("run_id"))?;
        let group = match field(2)? {
            "L" => crate::ranking::Group::L,
            "R" => crate::ranking::Group::R,
            _ => return Err(bad("group")),
        };
        let e = ClickEvent {
            n: field(1)?.parse().map_err(|_| bad("n"))?,
            group,
            item: field(3)?.parse().map_err(|_| bad("item_index"))?,
            y: field(4)?.parse().map_err(|_| bad("y_m"))?,
            highlighted: field(5)? == "1",
            rank_seen: field(6)?.parse().map_err(|_| bad("rank_seen"))?,
        };
        if runs.len() <= run {
            runs.resize_with(run + 1, Vec::new);
        }
        runs[run].push(e);
    }
    Ok(runs)
}
