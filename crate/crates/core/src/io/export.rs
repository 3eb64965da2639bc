//! Plot-ready CSV exports and the JSON report, written atomically.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::ingest::{write_measurements_csv, MeasurementSet};
use super::run::{FitRow, ResultBundle};
use crate::diagnostics::FisherReport;
use crate::error::{Error, Result};

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EiProfileRow {
    pub x_left: f64,
    pub x_right: f64,
    pub ei_mean: f64,
    pub lo75: f64,
    pub hi75: f64,
    pub lo95: f64,
    pub hi95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherCurveRow {
    pub sensor: String,
    pub x_mid: f64,
    pub info: f64,
}

pub fn ei_profile_rows(b: &ResultBundle) -> Vec<EiProfileRow> {
    (0..b.x_left.len())
        .map(|j| EiProfileRow {
            x_left: b.x_left[j],
            x_right: b.x_right[j],
            ei_mean: b.band.mean[j],
            lo75: b.band.lo_inner[j],
            hi75: b.band.hi_inner[j],
            lo95: b.band.lo_outer[j],
            hi95: b.band.hi_outer[j],
        })
        .collect()
}

/// Long-format informativeness curves; `names` label the sensors in order.
pub fn fisher_curve_rows(report: &FisherReport, names: &[String]) -> Vec<FisherCurveRow> {
    report
        .curves
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            let name = names.get(i).cloned().unwrap_or_else(|| format!("sensor{i}"));
            c.iter().zip(&report.x_mid).map(move |(v, x)| FisherCurveRow {
                sensor: name.clone(),
                x_mid: *x,
                info: *v,
            })
        })
        .collect()
}

/// Channel names in the order of the fit series.
pub fn channel_names(b: &ResultBundle) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in &b.fit {
        if !names.contains(&r.channel) {
            names.push(r.channel.clone());
        }
    }
    names
}

/// Paths written by [`export_results`].
#[derive(Debug, Clone)]
pub struct ExportPaths {
    pub ei_profile: PathBuf,
    pub fit: PathBuf,
    pub fisher_curves: PathBuf,
    pub report: PathBuf,
}

pub fn export_results(bundle: &ResultBundle, dir: &Path) -> Result<ExportPaths> {
    std::fs::create_dir_all(dir)?;
    let paths = ExportPaths {
        ei_profile: dir.join("ei_profile.csv"),
        fit: dir.join("fit.csv"),
        fisher_curves: dir.join("fisher_curves.csv"),
        report: dir.join("report.json"),
    };
    write_csv(&paths.ei_profile, &ei_profile_rows(bundle))?;
    write_csv(&paths.fit, &bundle.fit)?;
    write_csv(&paths.fisher_curves, &fisher_curve_rows(&bundle.fisher, &channel_names(bundle)))?;
    write_json(&paths.report, bundle)?;
    Ok(paths)
}

pub fn read_ei_profile(path: &Path) -> Result<Vec<EiProfileRow>> {
    read_csv(path)
}

pub fn read_fit(path: &Path) -> Result<Vec<FitRow>> {
    read_csv(path)
}

pub fn read_fisher_curves(path: &Path) -> Result<Vec<FisherCurveRow>> {
    read_csv(path)
}

pub fn read_report(path: &Path) -> Result<ResultBundle> {
    read_json(path)
}

pub fn write_measurements(path: &Path, set: &MeasurementSet) -> Result<()> {
    let mut buf = Vec::new();
    write_measurements_csv(&mut buf, set)?;
    write_atomic(path, &buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn csv_floats_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rows.csv");
        let rows: Vec<FisherCurveRow> = (0..50)
            .map(|i| FisherCurveRow {
                sensor: format!("S{i}"),
                x_mid: (i as f64).sqrt() / 3.0,
                info: (i as f64 * 0.37).exp() * 1e-17,
            })
            .collect();
        write_csv(&p, &rows).unwrap();
        assert_eq!(read_csv::<FisherCurveRow>(&p).unwrap(), rows);
        let q = dir.path().join("v.json");
        let v: Vec<f64> = rows.iter().map(|r| r.info).collect();
        write_json(&q, &v).unwrap();
        assert_eq!(read_json::<Vec<f64>>(&q).unwrap(), v);
    }
}
