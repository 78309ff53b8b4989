//! CSV ingestion for real data sets.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::DataMatrix;
use crate::rng::stream_rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Affine map of every column onto `[−1, 1]`; `η = 1`.
    #[default]
    MinMax,
    /// Raw values; `η` is the largest magnitude.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub feature_columns: Vec<String>,
    #[serde(default)]
    pub target_column: Option<String>,
    /// Drop rows with missing cells instead of failing.
    #[serde(default = "yes")]
    pub drop_missing: bool,
    /// Drop rows with non-numeric or absent cells instead of failing.
    #[serde(default)]
    pub drop_malformed: bool,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default = "comma")]
    pub delimiter: char,
    #[serde(default = "missing_tokens")]
    pub missing_tokens: Vec<String>,
}

fn yes() -> bool {
    true
}

fn comma() -> char {
    ','
}

fn missing_tokens() -> Vec<String> {
    ["", "?", "NA", "NaN", "nan"].iter().map(|s| s.to_string()).collect()
}

impl DatasetConfig {
    pub fn new(path: impl Into<PathBuf>, features: &[&str], target: Option<&str>) -> Self {
        DatasetConfig {
            path: path.into(),
            feature_columns: features.iter().map(|s| s.to_string()).collect(),
            target_column: target.map(str::to_string),
            drop_missing: true,
            drop_malformed: false,
            normalization: Normalization::MinMax,
            delimiter: ',',
            missing_tokens: missing_tokens(),
        }
    }

    /// Household electric power consumption: six measurements, predicting the
    /// third sub-metering channel. Date and time are ignored.
    pub fn power(path: impl Into<PathBuf>) -> Self {
        let mut cfg = Self::new(
            path,
            &["Global_active_power", "Global_reactive_power", "Voltage", "Global_intensity", "Sub_metering_1", "Sub_metering_2"],
            Some("Sub_metering_3"),
        );
        cfg.delimiter = ';';
        cfg
    }

    /// Road network elevation: longitude and latitude, predicting elevation.
    /// The raw file has no header; prepend `osm_id,longitude,latitude,elevation`.
    pub fn elevation(path: impl Into<PathBuf>) -> Self {
        Self::new(path, &["longitude", "latitude"], Some("elevation"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowDiagnostic {
    /// 1-based line number in the file, header included.
    pub line: u64,
    pub reason: String,
}

/// Per-column affine map applied during ingestion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalizationRecord {
    pub kind: Normalization,
    pub columns: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub data: DataMatrix,
    pub dropped: Vec<RowDiagnostic>,
    pub normalization: NormalizationRecord,
}

enum Cell {
    Value(f64),
    Missing,
    Bad(String),
}

pub fn ingest_csv(cfg: &DatasetConfig) -> Result<Dataset> {
    let delimiter = u8::try_from(cfg.delimiter).map_err(|_| Error::Config(format!("delimiter {:?} is not ASCII", cfg.delimiter)))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(&cfg.path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Config(format!("unknown column {name:?} in {}", cfg.path.display())))
    };
    let mut columns: Vec<String> = cfg.feature_columns.clone();
    if columns.is_empty() {
        return Err(Error::Config("no feature columns selected".into()));
    }
    columns.extend(cfg.target_column.iter().cloned());
    let idx = columns.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let width = idx.len();
    let mut values: Vec<f64> = Vec::new();
    let mut dropped = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) if cfg.drop_malformed => {
                dropped.push(RowDiagnostic { line, reason: e.to_string() });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let cells: Vec<Cell> = idx
            .iter()
            .map(|&j| match record.get(j) {
                None => Cell::Bad(format!("row has {} fields, column {j} missing", record.len())),
                Some(raw) if cfg.missing_tokens.iter().any(|t| t == raw) => Cell::Missing,
                Some(raw) => match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Cell::Value(v),
                    _ => Cell::Bad(format!("non-numeric cell {raw:?}")),
                },
            })
            .collect();
        if let Some(reason) = cells.iter().find_map(|c| if let Cell::Bad(r) = c { Some(r.clone()) } else { None }) {
            if !cfg.drop_malformed {
                return Err(Error::Data(format!("line {line}: {reason}")));
            }
            dropped.push(RowDiagnostic { line, reason });
            continue;
        }
        if cells.iter().any(|c| matches!(c, Cell::Missing)) {
            if !cfg.drop_missing {
                return Err(Error::Data(format!("line {line}: missing value")));
            }
            dropped.push(RowDiagnostic { line, reason: "missing value".into() });
            continue;
        }
        values.extend(cells.into_iter().map(|c| if let Cell::Value(v) = c { v } else { unreachable!() }));
    }
    let n = values.len() / width;
    if n == 0 {
        return Err(Error::Data(format!("{} has no usable rows", cfg.path.display())));
    }
    let mut m = DMatrix::from_row_slice(n, width, &values);
    let mut min = Vec::with_capacity(width);
    let mut max = Vec::with_capacity(width);
    for c in 0..width {
        let col = m.column(c);
        min.push(col.min());
        max.push(col.max());
    }
    let eta = match cfg.normalization {
        Normalization::MinMax => {
            for c in 0..width {
                let (lo, span) = (min[c], max[c] - min[c]);
                for v in m.column_mut(c).iter_mut() {
                    *v = if span > 0.0 { (2.0 * (*v - lo) / span - 1.0).clamp(-1.0, 1.0) } else { 0.0 };
                }
            }
            1.0
        }
        Normalization::None => m.amax().max(f64::MIN_POSITIVE),
    };
    let d = cfg.feature_columns.len();
    let a = m.columns(0, d).into_owned();
    let mut data = DataMatrix::new(a, eta)?;
    if cfg.target_column.is_some() {
        data = data.with_target(m.column(d).into_owned())?;
    }
    Ok(Dataset {
        data,
        dropped,
        normalization: NormalizationRecord { kind: cfg.normalization, columns, min, max },
    })
}

/// Uniform subsample of `n` rows without replacement, in original row order.
pub fn subsample(data: &DataMatrix, n: usize, seed: u64) -> Result<DataMatrix> {
    if n > data.n() {
        return Err(Error::param(format!("cannot take {n} rows from {}", data.n())));
    }
    let mut rng = stream_rng(seed, 0);
    let mut rows = index::sample(&mut rng, data.n(), n).into_vec();
    rows.sort_unstable();
    let a = data.a().select_rows(rows.iter());
    let mut out = DataMatrix::new(a, data.eta())?;
    if let Some(b) = data.target() {
        out = out.with_target(DVector::from_iterator(n, rows.iter().map(|&r| b[r])))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const POWER: &str = "Date;Time;Global_active_power;Global_reactive_power;Voltage;Global_intensity;Sub_metering_1;Sub_metering_2;Sub_metering_3
16/12/2006;17:24:00;4.216;0.418;234.840;18.400;0.000;1.000;17.000
16/12/2006;17:25:00;5.360;0.436;233.630;23.000;0.000;1.000;16.000
21/12/2006;11:23:00;?;?;?;?;?;?;
16/12/2006;17:26:00;5.374;0.498;233.290;23.000;0.000;2.000;17.000
";

    #[test]
    fn power_layout() {
        let f = write(POWER);
        let ds = ingest_csv(&DatasetConfig::power(f.path())).unwrap();
        assert_eq!(ds.data.d(), 6);
        assert_eq!(ds.data.n(), 3);
        assert!(ds.data.target().is_some());
        assert_eq!(ds.dropped.len(), 1);
        assert_eq!(ds.dropped[0].line, 4);
        assert_eq!(ds.data.eta(), 1.0);
        assert!(ds.data.a().amax() <= 1.0);
        // Sub_metering_3 spans 16..17, so 17 maps to 1 and 16 to -1.
        assert_eq!(ds.data.target().unwrap().as_slice(), &[1.0, -1.0, 1.0]);
    }

    #[test]
    fn elevation_layout() {
        let f = write("osm_id,longitude,latitude,elevation\n1,9.35,56.74,17.05\n2,9.36,56.75,17.61\n3,9.37,56.76,\n");
        let ds = ingest_csv(&DatasetConfig::elevation(f.path())).unwrap();
        assert_eq!((ds.data.n(), ds.data.d()), (2, 2));
    }

    #[test]
    fn missing_and_malformed_policies() {
        let f = write("x,y\n1,2\n,\n3,4\n");
        let mut cfg = DatasetConfig::new(f.path(), &["x"], Some("y"));
        assert_eq!(ingest_csv(&cfg).unwrap().data.n(), 2);
        cfg.drop_missing = false;
        assert!(matches!(ingest_csv(&cfg), Err(Error::Data(_))));

        let g = write("x,y\n1,2\nabc,3\n3,4\n");
        let mut cfg = DatasetConfig::new(g.path(), &["x"], Some("y"));
        assert!(matches!(ingest_csv(&cfg), Err(Error::Data(_))));
        cfg.drop_malformed = true;
        let ds = ingest_csv(&cfg).unwrap();
        assert_eq!(ds.data.n(), 2);
        assert!(ds.dropped[0].reason.contains("abc"));
    }

    #[test]
    fn unknown_column_is_config_error() {
        let f = write("x,y\n1,2\n");
        assert!(matches!(ingest_csv(&DatasetConfig::new(f.path(), &["z"], None)), Err(Error::Config(_))));
    }

    #[test]
    fn raw_values_keep_scale() {
        let f = write("x\n-3\n2\n");
        let mut cfg = DatasetConfig::new(f.path(), &["x"], None);
        cfg.normalization = Normalization::None;
        let ds = ingest_csv(&cfg).unwrap();
        assert_eq!(ds.data.eta(), 3.0);
    }

    #[test]
    fn subsample_is_seeded() {
        let f = write("x,y\n1,1\n2,2\n3,3\n4,4\n5,5\n");
        let ds = ingest_csv(&DatasetConfig::new(f.path(), &["x"], Some("y"))).unwrap();
        let s1 = subsample(&ds.data, 3, 7).unwrap();
        let s2 = subsample(&ds.data, 3, 7).unwrap();
        assert_eq!(s1.a(), s2.a());
        assert_eq!(s1.a().column(0), s1.target().unwrap().column(0));
        assert!(subsample(&ds.data, 6, 7).is_err());
    }
}
