//! Run artifacts: trajectory table, report, plot series and manifest.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graph::NetworkTopology;
use crate::report::ContainmentReport;
use crate::sim::TrajectoryRecord;

/// Series written by [`write_series`], besides one `spread_<c>.dat` per
/// coordinate.
pub const SERIES_FILES: [&str; 3] = ["hull_volume.dat", "max_hull_distance.dat", "min_margin.dat"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario_id: String,
    pub config_hash: String,
    pub outputs: Vec<String>,
    pub exit_status: i32,
    pub status: String,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> io::Result<()> {
        write_json(path, self)
    }
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// One row per recorded step: `t`, every agent's coordinates, then the margin
/// of every initial edge. Columns are named `q<id>_<L|F>_<coord>` and
/// `b_<from>_<to>`.
pub fn write_trajectory_csv(
    path: &Path,
    record: &TrajectoryRecord,
    topology: &NetworkTopology,
) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let dim = record.states.first().map_or(0, |s| s.dim());
    let mut header = vec!["t".to_string()];
    for (i, role) in topology.roles().iter().enumerate() {
        for c in 1..=dim {
            header.push(format!("q{}_{}_{c}", i + 1, role.tag()));
        }
    }
    for (a, b) in &record.edges {
        header.push(format!("b_{a}_{b}"));
    }
    w.write_record(&header).map_err(csv_err)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for ((t, s), margins) in record.times.iter().zip(&record.states).zip(&record.margins) {
        row.clear();
        row.push(t.to_string());
        row.extend(s.as_flat().iter().map(f64::to_string));
        row.extend(margins.iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()
}

pub fn write_report_json(path: &Path, report: &ContainmentReport) -> io::Result<()> {
    write_json(path, report)
}

fn write_two_column(
    path: &Path,
    name: &str,
    times: &[f64],
    values: impl Iterator<Item = f64>,
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# t {name}")?;
    for (t, v) in times.iter().zip(values) {
        writeln!(w, "{t} {v}")?;
    }
    w.flush()
}

/// Two-column `t value` files, one per metric. Returns the paths written.
pub fn write_series(
    dir: &Path,
    record: &TrajectoryRecord,
    report: &ContainmentReport,
) -> io::Result<Vec<PathBuf>> {
    let t = &record.times;
    let mut written = Vec::new();
    let mut emit = |file: String, name: &str, values: Vec<f64>| -> io::Result<()> {
        let path = dir.join(file);
        write_two_column(&path, name, t, values.into_iter())?;
        written.push(path);
        Ok(())
    };
    if !report.hull_volume_series.is_empty() {
        emit(
            SERIES_FILES[0].into(),
            "hull_volume",
            report.hull_volume_series.clone(),
        )?;
    }
    emit(
        SERIES_FILES[1].into(),
        "max_hull_distance",
        report.max_hull_distance_series.clone(),
    )?;
    emit(
        SERIES_FILES[2].into(),
        "min_margin",
        record.min_margin.clone(),
    )?;
    let dim = report.spread_series.first().map_or(0, Vec::len);
    for c in 0..dim {
        emit(
            format!("spread_{}.dat", c + 1),
            &format!("spread_{}", c + 1),
            report.spread_series.iter().map(|s| s[c]).collect(),
        )?;
    }
    Ok(written)
}
