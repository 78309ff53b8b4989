//! Ingest a small CSV with a missing value, normalize it and subsample.

use std::io::Write;

use ltm::experiments::{ingest_csv, subsample, DatasetConfig};

pub struct IngestSummary {
    pub rows: usize,
    pub dropped_lines: Vec<u64>,
    pub eta: f64,
    pub sample_rows: usize,
}

pub fn run_example() -> ltm::Result<IngestSummary> {
    let mut file = tempfile::NamedTempFile::new()?;
    writeln!(file, "longitude,latitude,elevation")?;
    for i in 0..40 {
        let x = i as f64;
        if i == 7 {
            writeln!(file, "{},?,{}", 9.0 + x / 100.0, x)?;
        } else {
            writeln!(file, "{},{},{}", 9.0 + x / 100.0, 56.0 + x / 200.0, (x * 0.7).sin() * 20.0)?;
        }
    }
    file.flush()?;

    let cfg = DatasetConfig::new(file.path(), &["longitude", "latitude"], Some("elevation"));
    let ds = ingest_csv(&cfg)?;
    let sample = subsample(&ds.data, 10, 3)?;
    Ok(IngestSummary {
        rows: ds.data.n(),
        dropped_lines: ds.dropped.iter().map(|r| r.line).collect(),
        eta: ds.data.eta(),
        sample_rows: sample.n(),
    })
}

#[allow(dead_code)]
fn main() -> ltm::Result<()> {
    let r = run_example()?;
    println!("kept {} rows, dropped lines {:?}, eta = {}", r.rows, r.dropped_lines, r.eta);
    println!("subsample has {} rows", r.sample_rows);
    Ok(())
}
