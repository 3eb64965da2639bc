//! Tilt trace ingestion: raw crossing CSVs to rotation influence lines on the
//! configured sweep grid.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::{ChannelGroup, CrossingSpec, IngestSection, RunConfig};
use crate::beam::mm_per_m_to_rad;
use crate::error::{Error, Result};

/// One channel of one crossing.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltTrace {
    pub channel: String,
    pub time_s: Vec<f64>,
    pub tilt_mm_per_m: Vec<f64>,
}

impl TiltTrace {
    pub fn new(channel: impl Into<String>, time_s: Vec<f64>, tilt_mm_per_m: Vec<f64>) -> Result<Self> {
        let channel = channel.into();
        if time_s.len() != tilt_mm_per_m.len() || time_s.is_empty() {
            return Err(Error::shape(format!("channel '{channel}': time and tilt columns differ or are empty")));
        }
        if time_s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain(format!("channel '{channel}': time must increase strictly")));
        }
        if time_s.iter().chain(&tilt_mm_per_m).any(|v| !v.is_finite()) {
            return Err(Error::domain(format!("channel '{channel}': non-finite sample")));
        }
        Ok(TiltTrace { channel, time_s, tilt_mm_per_m })
    }

    /// Nominal sample rate from the median time step (Hz).
    pub fn sample_rate(&self) -> f64 {
        let mut dt: Vec<f64> = self.time_s.windows(2).map(|w| w[1] - w[0]).collect();
        if dt.is_empty() {
            return 0.0;
        }
        1.0 / median(&mut dt)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    time_s: f64,
    channel: String,
    tilt_mm_per_m: f64,
}

const TRACE_COLUMNS: [&str; 3] = ["time_s", "channel", "tilt_mm_per_m"];

/// Read a `time_s, channel, tilt_mm_per_m` file; channels keep first-seen order.
pub fn read_trace_csv(path: &Path) -> Result<Vec<TiltTrace>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let missing: Vec<&str> = TRACE_COLUMNS.iter().copied().filter(|c| !headers.iter().any(|h| h == *c)).collect();
    if !missing.is_empty() {
        return Err(Error::Validation(vec![format!(
            "{}: missing column(s) {}",
            path.display(),
            missing.join(", ")
        )]));
    }
    let mut order: Vec<String> = Vec::new();
    let mut cols: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for row in rdr.deserialize() {
        let r: TraceRow = row?;
        let e = cols.entry(r.channel.clone()).or_insert_with(|| {
            order.push(r.channel.clone());
            (Vec::new(), Vec::new())
        });
        e.0.push(r.time_s);
        e.1.push(r.tilt_mm_per_m);
    }
    order
        .into_iter()
        .map(|c| {
            let (t, v) = cols.remove(&c).unwrap_or_default();
            TiltTrace::new(c, t, v).map_err(|e| Error::Validation(vec![format!("{}: {e}", path.display())]))
        })
        .collect()
}

pub fn write_trace_csv(path: &Path, traces: &[TiltTrace]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for tr in traces {
        for (t, v) in tr.time_s.iter().zip(&tr.tilt_mm_per_m) {
            w.serialize(TraceRow { time_s: *t, channel: tr.channel.clone(), tilt_mm_per_m: *v })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rotation influence lines per sensor on a common position grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub sensors: Vec<String>,
    pub positions: Vec<f64>,
    /// Rotations (rad), one row per sensor.
    pub rotations: Vec<Vec<f64>>,
    /// Crossings retained in the average.
    pub kept: Vec<usize>,
    /// Crossings discarded by the correlation check.
    pub rejected: Vec<usize>,
    /// Correlation of every crossing with the ensemble median.
    pub correlations: Vec<f64>,
}

impl MeasurementSet {
    /// Single-crossing set from an `R x K` matrix (rad).
    pub fn from_matrix(sensors: Vec<String>, positions: Vec<f64>, m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != sensors.len() || m.ncols() != positions.len() {
            return Err(Error::shape("rotation matrix does not match sensors x positions"));
        }
        Ok(MeasurementSet {
            sensors,
            positions,
            rotations: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
            kept: vec![0],
            rejected: vec![],
            correlations: vec![1.0],
        })
    }

    /// Sensor-major stacked vector.
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.sensors.len() * self.positions.len(),
            self.rotations.iter().flatten().copied(),
        )
    }

    /// Rows reordered to `ids`.
    pub fn select(&self, ids: &[String]) -> Result<DVector<f64>> {
        let mut out = Vec::with_capacity(ids.len() * self.positions.len());
        for id in ids {
            let i = self
                .sensors
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| Error::domain(format!("measurements have no channel '{id}'")))?;
            out.extend_from_slice(&self.rotations[i]);
        }
        Ok(DVector::from_vec(out))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasurementRow {
    channel: String,
    position_m: f64,
    rotation_rad: f64,
}

pub fn write_measurements_csv<W: std::io::Write>(w: W, set: &MeasurementSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    for (id, row) in set.sensors.iter().zip(&set.rotations) {
        for (x, v) in set.positions.iter().zip(row) {
            w.serialize(MeasurementRow { channel: id.clone(), position_m: *x, rotation_rad: *v })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read `channel, position_m, rotation_rad`; every channel must cover the same positions.
pub fn read_measurements_csv(path: &Path) -> Result<MeasurementSet> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut sensors: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<(f64, f64)>> = Vec::new();
    for r in rdr.deserialize() {
        let r: MeasurementRow = r?;
        let i = match sensors.iter().position(|s| *s == r.channel) {
            Some(i) => i,
            None => {
                sensors.push(r.channel.clone());
                rows.push(Vec::new());
                sensors.len() - 1
            }
        };
        rows[i].push((r.position_m, r.rotation_rad));
    }
    if sensors.is_empty() {
        return Err(Error::Validation(vec![format!("{}: no measurements", path.display())]));
    }
    let positions: Vec<f64> = rows[0].iter().map(|p| p.0).collect();
    for (id, r) in sensors.iter().zip(&rows) {
        if r.len() != positions.len() || r.iter().zip(&positions).any(|(a, b)| a.0 != *b) {
            return Err(Error::Validation(vec![format!(
                "{}: channel '{id}' does not share the position grid of '{}'",
                path.display(),
                sensors[0]
            )]));
        }
    }
    Ok(MeasurementSet {
        sensors,
        positions,
        rotations: rows.into_iter().map(|r| r.into_iter().map(|p| p.1).collect()).collect(),
        kept: vec![0],
        rejected: vec![],
        correlations: vec![1.0],
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linear interpolation of `(x, y)` (x ascending) at `at`.
fn interpolate(x: &[f64], y: &[f64], at: f64) -> Option<f64> {
    if x.is_empty() || at < x[0] || at > x[x.len() - 1] {
        return None;
    }
    let i = x.partition_point(|v| *v < at);
    if i < x.len() && x[i] == at {
        return Some(y[i]);
    }
    let (x0, x1, y0, y1) = (x[i - 1], x[i], y[i - 1], y[i]);
    Some(y0 + (y1 - y0) * (at - x0) / (x1 - x0))
}

/// Baseline-corrected tilt of one channel resampled onto `grid` (mm/m).
pub fn resample_trace(trace: &TiltTrace, crossing: &CrossingSpec, spec: &IngestSection, grid: &[f64]) -> Result<Vec<f64>> {
    let t_first = trace.time_s[0];
    let mut head: Vec<f64> = trace
        .time_s
        .iter()
        .zip(&trace.tilt_mm_per_m)
        .filter(|(t, _)| **t - t_first < spec.baseline_s)
        .map(|(_, v)| *v)
        .collect();
    let base = if head.is_empty() { 0.0 } else { median(&mut head) };
    let t0 = crossing.t0.unwrap_or(t_first);
    let [w0, w1] = spec.window;
    let mut pts: Vec<(f64, f64)> = trace
        .time_s
        .iter()
        .zip(&trace.tilt_mm_per_m)
        .map(|(t, v)| (crossing.start_offset + crossing.direction * crossing.speed * (t - t0), v - base))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lo = pts.partition_point(|p| p.0 < w0);
    let hi = pts.partition_point(|p| p.0 <= w1);
    if lo >= hi {
        return Err(Error::Validation(vec![format!(
            "{} channel '{}': no samples inside the window [{w0}, {w1}] m",
            crossing.file.display(),
            trace.channel
        )]));
    }
    // one sample beyond each edge keeps the window ends interpolable
    let keep = lo.saturating_sub(1)..(hi + 1).min(pts.len());
    let (x, y): (Vec<f64>, Vec<f64>) = pts[keep].iter().copied().unzip();
    grid.iter()
        .map(|&g| {
            interpolate(&x, &y, g).ok_or_else(|| {
                Error::Validation(vec![format!(
                    "{} channel '{}': position {g} m is not covered by the retained samples [{}, {}]",
                    crossing.file.display(),
                    trace.channel,
                    x[0],
                    x[x.len() - 1]
                )])
            })
        })
        .collect()
}

/// Zero-lag normalized cross-correlation.
pub fn normalized_xcorr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return if saa == sbb { 1.0 } else { 0.0 };
    }
    sab / (saa * sbb).sqrt()
}

/// Full preprocessing of loaded crossings onto `grid`.
pub fn ingest_crossings(
    crossings: &[(CrossingSpec, Vec<TiltTrace>)],
    sensor_ids: &[String],
    spec: &IngestSection,
    grid: &[f64],
) -> Result<MeasurementSet> {
    if crossings.is_empty() {
        return Err(Error::Validation(vec!["no crossings to ingest".into()]));
    }
    if grid.is_empty() {
        return Err(Error::Validation(vec!["empty position grid".into()]));
    }
    let groups: Vec<ChannelGroup> = sensor_ids
        .iter()
        .map(|id| {
            spec.groups.iter().find(|g| g.sensor == *id).cloned().unwrap_or_else(|| ChannelGroup {
                sensor: id.clone(),
                channels: vec![id.clone()],
            })
        })
        .collect();
    let k = grid.len();
    let mut per_crossing: Vec<Vec<f64>> = Vec::with_capacity(crossings.len());
    for (c, traces) in crossings {
        let mut stacked = Vec::with_capacity(groups.len() * k);
        for g in &groups {
            let mut composite = vec![0.0; k];
            for ch in &g.channels {
                let tr = traces.iter().find(|t| t.channel == *ch).ok_or_else(|| {
                    Error::Validation(vec![format!("{}: channel '{ch}' is missing", c.file.display())])
                })?;
                for (acc, v) in composite.iter_mut().zip(resample_trace(tr, c, spec, grid)?) {
                    *acc += v / g.channels.len() as f64;
                }
            }
            stacked.extend(composite);
        }
        per_crossing.push(stacked);
    }
    let reference: Vec<f64> = (0..per_crossing[0].len())
        .map(|i| median(&mut per_crossing.iter().map(|c| c[i]).collect::<Vec<f64>>()))
        .collect();
    let correlations: Vec<f64> = per_crossing.iter().map(|c| normalized_xcorr(c, &reference)).collect();
    let (kept, rejected): (Vec<usize>, Vec<usize>) =
        (0..per_crossing.len()).partition(|&i| correlations[i] >= spec.xcorr_threshold);
    if kept.is_empty() {
        return Err(Error::Validation(vec![format!(
            "all {} crossings fall below the correlation threshold {}",
            per_crossing.len(),
            spec.xcorr_threshold
        )]));
    }
    let mut mean = vec![0.0; per_crossing[0].len()];
    for &i in &kept {
        for (m, v) in mean.iter_mut().zip(&per_crossing[i]) {
            *m += v / kept.len() as f64;
        }
    }
    Ok(MeasurementSet {
        sensors: sensor_ids.to_vec(),
        positions: grid.to_vec(),
        rotations: mean.chunks(k).map(|r| r.iter().map(|v| mm_per_m_to_rad(*v)).collect()).collect(),
        kept,
        rejected,
        correlations,
    })
}

/// Read the configured crossing files and preprocess them onto the sweep grid.
pub fn ingest_tilt_csv(cfg: &RunConfig) -> Result<MeasurementSet> {
    let spec = cfg
        .ingest
        .as_ref()
        .ok_or_else(|| Error::Validation(vec!["the config has no [ingest] section".into()]))?;
    let crossings = spec
        .crossings
        .iter()
        .map(|c| Ok((c.clone(), read_trace_csv(&cfg.resolve(&c.file))?)))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = cfg.sensors().iter().map(|s| s.id.clone()).collect();
    ingest_crossings(&crossings, &ids, spec, &cfg.positions()?)
}
