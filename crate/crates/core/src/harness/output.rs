//! CSV and JSON files of a run directory.
//!
//! * `timeseries.csv`: one row per output time.
//! * `snapshot_<t>.csv`: `x, k, kx, energy_density`, undefined slopes empty.
//! * `lagrangian_<t>.csv`: `xi, y, K, V, W, Q`.
//! * `meta.json`: parameters, grid, outcome and run-level diagnostics.
//!
//! Reals are written with 17 significant digits.

use std::fs::File;
use std::path::{Path, PathBuf};

use super::{HarnessError, HarnessResult};
use crate::evolve::DiagnosticsRow;
use crate::model::LagrangianState;
use crate::transform::EulerianField;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const META_FILE: &str = "meta.json";

pub const TIMESERIES_COLUMNS: [&str; 9] = [
    "t", "E_tilde", "E_euler", "res_alg", "res_yxi", "res_Kxi", "minQ", "maxV", "supK2",
];

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Output(format!("{}: {e}", path.display()))
}

fn open_csv(path: &Path) -> HarnessResult<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

/// Label used in per-time file names, e.g. `0002.500000`.
pub fn time_tag(t: f64) -> String {
    format!("{t:011.6}")
}

/// Streaming writer for `timeseries.csv`.
pub struct TimeseriesWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
    with_beta: bool,
}

impl TimeseriesWriter {
    pub fn create(dir: &Path, with_beta: bool) -> HarnessResult<Self> {
        let path = dir.join(TIMESERIES_FILE);
        let mut writer = open_csv(&path)?;
        let mut header: Vec<&str> = TIMESERIES_COLUMNS.to_vec();
        if with_beta {
            header.push("beta_res");
        }
        writer
            .write_record(&header)
            .map_err(|e| csv_err(&path, e))?;
        Ok(Self {
            path,
            writer,
            with_beta,
        })
    }

    pub fn write(&mut self, row: &DiagnosticsRow, beta_res: Option<f64>) -> HarnessResult<()> {
        let mut record: Vec<String> = [
            row.t,
            row.e_tilde,
            row.e_euler,
            row.res_alg,
            row.res_yxi,
            row.res_kxi,
            row.min_q,
            row.max_v,
            row.sup_k2,
        ]
        .iter()
        .map(|&v| fmt_real(v))
        .collect();
        if self.with_beta {
            record.push(beta_res.map(fmt_real).unwrap_or_default());
        }
        self.writer
            .write_record(&record)
            .map_err(|e| csv_err(&self.path, e))
    }

    pub fn finish(mut self) -> HarnessResult<()> {
        self.writer
            .flush()
            .map_err(|e| HarnessError::io(&self.path, e))
    }
}

pub fn write_snapshot(dir: &Path, field: &EulerianField) -> HarnessResult<PathBuf> {
    let path = dir.join(format!("snapshot_{}.csv", time_tag(field.t)));
    let mut w = open_csv(&path)?;
    w.write_record(["x", "k", "kx", "energy_density"])
        .map_err(|e| csv_err(&path, e))?;
    for i in 0..field.x.len() {
        let opt = |v: Option<f64>| v.map(fmt_real).unwrap_or_default();
        w.write_record([
            fmt_real(field.x[i]),
            fmt_real(field.k[i]),
            opt(field.kx[i]),
            opt(field.energy_density[i]),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

pub fn write_lagrangian(dir: &Path, state: &LagrangianState) -> HarnessResult<PathBuf> {
    let path = dir.join(format!("lagrangian_{}.csv", time_tag(state.t)));
    let mut w = open_csv(&path)?;
    w.write_record(["xi", "y", "K", "V", "W", "Q"])
        .map_err(|e| csv_err(&path, e))?;
    for i in 0..state.len() {
        let rec = [
            state.grid.node(i),
            state.y[i],
            state.k[i],
            state.v[i],
            state.w[i],
            state.q[i],
        ];
        w.write_record(rec.iter().map(|&v| fmt_real(v)))
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> HarnessResult<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| HarnessError::Output(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

/// A `timeseries.csv` read back: header names and rows of reals.
#[derive(Debug, Clone)]
pub struct Timeseries {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Timeseries {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_timeseries(path: &Path) -> HarnessResult<Timeseries> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(String::from)
        .collect();
    for required in TIMESERIES_COLUMNS {
        if !columns.iter().any(|c| c == required) {
            return Err(HarnessError::Output(format!(
                "{}: missing column `{required}`",
                path.display()
            )));
        }
    }
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Ok(f64::NAN)
                } else {
                    s.parse::<f64>()
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| {
                HarnessError::Output(format!("{}: row {}: {e}", path.display(), line + 1))
            })?;
        rows.push(row);
    }
    Ok(Timeseries { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LagrangianGrid;

    #[test]
    fn reals_keep_17_digits() {
        let v = std::f64::consts::PI;
        assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        assert_eq!(time_tag(2.5), "0002.500000");
    }

    #[test]
    fn timeseries_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let s = LagrangianState::zero(LagrangianGrid::new(-1.0, 1.0, 9).unwrap(), 0.0);
        let row = DiagnosticsRow::measure(&s).unwrap();
        let mut w = TimeseriesWriter::create(dir.path(), true).unwrap();
        w.write(&row, Some(0.25)).unwrap();
        w.write(&row, None).unwrap();
        w.finish().unwrap();
        let ts = read_timeseries(&dir.path().join(TIMESERIES_FILE)).unwrap();
        assert_eq!(ts.columns.len(), 10);
        assert_eq!(ts.column("beta_res").unwrap()[0], 0.25);
        assert!(ts.column("beta_res").unwrap()[1].is_nan());
        assert_eq!(ts.column("minQ").unwrap(), vec![1.0, 1.0]);
    }
}
