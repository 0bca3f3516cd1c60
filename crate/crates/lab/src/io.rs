//! CSV and JSON output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::LabError;

/// Write `rows` as CSV with a header. An empty slice still writes the header
/// taken from `header`.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), LabError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, LabError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(LabError::from)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), LabError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, LabError> {
    Ok(serde_json::from_reader(File::open(path)?)?)
}

pub const TRAJECTORY_HEADER: [&str; 10] =
    ["t", "l2_v", "h1_v", "l2_w", "h1_w", "c", "gamma", "cdot", "gammadot", "event"];

pub const SPECTRUM_HEADER: [&str; 6] =
    ["a", "c", "re_lambda", "im_lambda", "is_discrete_flag", "boundary_mass"];

pub const SUMMARY_HEADER: [&str; 8] = [
    "a",
    "c",
    "gap",
    "gap_raw",
    "gap_reference",
    "kernel_count",
    "artifact_count",
    "max_curve_distance",
];

pub const SKIPPED_HEADER: [&str; 3] = ["a", "c", "reason"];
