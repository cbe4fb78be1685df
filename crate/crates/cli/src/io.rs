//! CSV ingestion and emission.

use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime};
use csv::{ReaderBuilder, StringRecord, Terminator, Writer, WriterBuilder};
use ecplan_core::model::DEFAULT_STEP_HOURS;
use ecplan_core::{FeederGraph, GenerationAsset, GeoPoint, Member, MemberCategory, NodeKind, RepresentativeDay, TimeGrid};
use ndarray::Array2;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: cannot open: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: no data rows")]
    NoDataRows { path: PathBuf },
    #[error("{path}, line {line}: {message}")]
    Malformed { path: PathBuf, line: u64, message: String },
    #[error("{path}, line {line}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { path: PathBuf, line: u64, timestamp: String },
    #[error("{path}, line {line}: non-uniform step ({found_minutes} min after {previous}, expected {expected_minutes} min)")]
    NonUniformStep {
        path: PathBuf,
        line: u64,
        previous: String,
        found_minutes: i64,
        expected_minutes: i64,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

/// A table of per-period values keyed by ISO-8601 timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub columns: Vec<String>,
    pub timestamps: Vec<NaiveDateTime>,
    pub values: Array2<f64>,
    pub grid: TimeGrid,
}

fn open(path: &Path) -> Result<csv::Reader<File>, InputError> {
    let file = File::open(path).map_err(|source| InputError::Open { path: path.to_path_buf(), source })?;
    Ok(ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(file))
}

fn malformed(path: &Path, line: u64, message: impl Into<String>) -> InputError {
    InputError::Malformed { path: path.to_path_buf(), line, message: message.into() }
}

fn record_line(record: &StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn read_records(path: &Path) -> Result<(StringRecord, Vec<StringRecord>), InputError> {
    let mut reader = open(path)?;
    let headers = reader
        .headers()
        .map_err(|e| malformed(path, 1, e.to_string()))?
        .clone();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| malformed(path, i as u64 + 2, e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != headers.len() {
            return Err(malformed(
                path,
                record_line(&rec),
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(InputError::NoDataRows { path: path.to_path_buf() });
    }
    Ok((headers, rows))
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Reads `timestamp,<col_1>,...,<col_k>`; the step is inferred from the
/// timestamps, which must be unique and evenly spaced.
pub fn read_time_series(path: &Path) -> Result<TimeSeries, InputError> {
    let (headers, rows) = read_records(path)?;
    if headers.len() < 2 || headers.get(0) != Some("timestamp") {
        return Err(malformed(path, 1, "header must be 'timestamp,<column>,...'"));
    }
    let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut timestamps = Vec::with_capacity(rows.len());
    let mut values = Array2::zeros((rows.len(), columns.len()));
    let mut seen = std::collections::HashSet::new();
    for (t, rec) in rows.iter().enumerate() {
        let line = record_line(rec);
        let ts = parse_timestamp(&rec[0])
            .ok_or_else(|| malformed(path, line, format!("bad timestamp '{}'", &rec[0])))?;
        if !seen.insert(ts) {
            return Err(InputError::DuplicateTimestamp {
                path: path.to_path_buf(),
                line,
                timestamp: rec[0].to_string(),
            });
        }
        for (n, field) in rec.iter().skip(1).enumerate() {
            values[[t, n]] = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(path, line, format!("bad number '{field}' in column '{}'", columns[n])))?;
        }
        timestamps.push(ts);
    }
    let step_minutes = if timestamps.len() > 1 {
        (timestamps[1] - timestamps[0]).num_minutes()
    } else {
        (DEFAULT_STEP_HOURS * 60.0) as i64
    };
    for (i, w) in timestamps.windows(2).enumerate() {
        let found = (w[1] - w[0]).num_minutes();
        if found != step_minutes || found <= 0 {
            return Err(InputError::NonUniformStep {
                path: path.to_path_buf(),
                line: record_line(&rows[i + 1]),
                previous: rows[i][0].to_string(),
                found_minutes: found,
                expected_minutes: step_minutes,
            });
        }
    }
    let grid = TimeGrid::new(timestamps.len(), step_minutes as f64 / 60.0)
        .map_err(|e| InputError::Invalid { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(TimeSeries { columns, timestamps, values, grid })
}

/// Load matrix `T x N` with member ids from the header.
pub fn load_profiles(path: &Path) -> Result<TimeSeries, InputError> {
    read_time_series(path)
}

/// Single-column series such as a PV profile or project generation.
pub fn load_generation(path: &Path) -> Result<(Vec<f64>, TimeGrid), InputError> {
    let ts = read_time_series(path)?;
    if ts.columns.len() != 1 {
        return Err(malformed(path, 1, "expected a single value column"));
    }
    Ok((ts.values.column(0).to_vec(), ts.grid))
}

fn opt(s: Option<String>) -> Option<String> {
    s.filter(|v| !v.trim().is_empty())
}

fn location(path: &Path, line: u64, lat: Option<f64>, lon: Option<f64>) -> Result<Option<GeoPoint>, InputError> {
    match (lat, lon) {
        (Some(latitude), Some(longitude)) => Ok(Some(GeoPoint { latitude, longitude })),
        (None, None) => Ok(None),
        _ => Err(malformed(path, line, "latitude and longitude must be given together")),
    }
}

#[derive(Deserialize)]
struct MemberRow {
    id: String,
    category: String,
    voting_share: f64,
    latitude: Option<f64>,
    longitude: Option<f64>,
    admin_region: Option<String>,
    connection_point: Option<String>,
    vulnerable: Option<bool>,
}

fn deserialize_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(u64, T)>, InputError> {
    let (headers, rows) = read_records(path)?;
    rows.iter()
        .map(|rec| {
            let line = record_line(rec);
            rec.deserialize(Some(&headers))
                .map(|row| (line, row))
                .map_err(|e| malformed(path, line, e.to_string()))
        })
        .collect()
}

/// `id,category,voting_share,latitude,longitude,admin_region,connection_point,vulnerable`;
/// optional fields may be left empty.
pub fn read_members(path: &Path) -> Result<Vec<Member>, InputError> {
    deserialize_rows::<MemberRow>(path)?
        .into_iter()
        .map(|(line, r)| {
            let category: MemberCategory = r
                .category
                .parse()
                .map_err(|e: ecplan_core::Error| malformed(path, line, e.to_string()))?;
            Ok(Member {
                location: location(path, line, r.latitude, r.longitude)?,
                admin_region: opt(r.admin_region),
                connection_point: opt(r.connection_point),
                vulnerable: r.vulnerable.unwrap_or(false),
                ..Member::new(r.id, category, r.voting_share)
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct AssetRow {
    id: String,
    latitude: Option<f64>,
    longitude: Option<f64>,
    admin_region: Option<String>,
    connection_point: Option<String>,
}

/// `id,latitude,longitude,admin_region,connection_point`.
pub fn read_assets(path: &Path) -> Result<Vec<GenerationAsset>, InputError> {
    deserialize_rows::<AssetRow>(path)?
        .into_iter()
        .map(|(line, r)| {
            Ok(GenerationAsset {
                id: r.id,
                location: location(path, line, r.latitude, r.longitude)?,
                admin_region: opt(r.admin_region),
                connection_point: opt(r.connection_point),
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct EdgeRow {
    child_id: String,
    parent_id: Option<String>,
    node_kind: String,
}

/// Feeder edge list `child_id,parent_id,node_kind`; roots leave the parent
/// empty.
pub fn read_feeder(path: &Path) -> Result<FeederGraph, InputError> {
    let edges = deserialize_rows::<EdgeRow>(path)?
        .into_iter()
        .map(|(line, r)| {
            let kind: NodeKind = r.node_kind.parse().map_err(|e: ecplan_core::Error| malformed(path, line, e.to_string()))?;
            Ok((r.child_id, opt(r.parent_id), kind))
        })
        .collect::<Result<Vec<_>, InputError>>()?;
    FeederGraph::from_edges(edges).map_err(|e| InputError::Invalid { path: path.to_path_buf(), message: e.to_string() })
}

/// Parses a non-negative decimal euro amount with at most two decimals into
/// cents without going through floating point.
pub fn parse_eur_cents(s: &str) -> Option<i64> {
    let s = s.trim();
    let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
    if whole.is_empty() || frac.len() > 2 || !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let whole: i64 = whole.parse().ok()?;
    let frac: i64 = if frac.is_empty() { 0 } else { format!("{frac:0<2}").parse().ok()? };
    whole.checked_mul(100)?.checked_add(frac)
}

/// Investment pool `participant_id,loan_eur`.
pub fn read_pool(path: &Path) -> Result<Vec<(String, i64)>, InputError> {
    let (headers, rows) = read_records(path)?;
    if headers.iter().collect::<Vec<_>>() != ["participant_id", "loan_eur"] {
        return Err(malformed(path, 1, "header must be 'participant_id,loan_eur'"));
    }
    rows.iter()
        .map(|rec| {
            let cents = parse_eur_cents(&rec[1])
                .ok_or_else(|| malformed(path, record_line(rec), format!("bad amount '{}'", &rec[1])))?;
            Ok((rec[0].to_string(), cents))
        })
        .collect()
}

/// Key matrix `period,<member ids>` with 1-based periods. Columns are
/// reordered to `ids`.
pub fn read_key(path: &Path, ids: &[String], periods: usize) -> Result<Array2<f64>, InputError> {
    let (headers, rows) = read_records(path)?;
    if headers.get(0) != Some("period") {
        return Err(malformed(path, 1, "header must be 'period,<member ids>'"));
    }
    let mut index = Vec::with_capacity(ids.len());
    for id in ids {
        let pos = headers
            .iter()
            .skip(1)
            .position(|h| h == id)
            .ok_or_else(|| malformed(path, 1, format!("missing column for member '{id}'")))?;
        index.push(pos + 1);
    }
    if headers.len() != ids.len() + 1 {
        return Err(malformed(path, 1, format!("expected {} member columns", ids.len())));
    }
    if rows.len() != periods {
        return Err(InputError::Invalid {
            path: path.to_path_buf(),
            message: format!("{} periods, expected {periods}", rows.len()),
        });
    }
    let mut key = Array2::zeros((periods, ids.len()));
    for (t, rec) in rows.iter().enumerate() {
        let line = record_line(rec);
        if rec[0].parse::<usize>().ok() != Some(t + 1) {
            return Err(malformed(path, line, format!("expected period {}", t + 1)));
        }
        for (n, &col) in index.iter().enumerate() {
            key[[t, n]] = rec[col]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(path, line, format!("bad number '{}'", &rec[col])))?;
        }
    }
    Ok(key)
}

/// Representative days `day,weight,period,load_kwh,pv_profile`, rows grouped
/// by day and ordered by period.
pub fn read_days(path: &Path, periods: usize) -> Result<Vec<RepresentativeDay>, InputError> {
    #[derive(Deserialize)]
    struct DayRow {
        day: String,
        weight: f64,
        period: usize,
        load_kwh: f64,
        pv_profile: f64,
    }
    let mut days: Vec<(String, RepresentativeDay)> = Vec::new();
    for (line, r) in deserialize_rows::<DayRow>(path)? {
        if days.last().is_none_or(|(name, _)| *name != r.day) {
            if days.iter().any(|(name, _)| *name == r.day) {
                return Err(malformed(path, line, format!("rows of day '{}' are not contiguous", r.day)));
            }
            days.push((
                r.day.clone(),
                RepresentativeDay { aggregate_load: Vec::new(), pv_profile: Vec::new(), weight: r.weight },
            ));
        }
        let day = &mut days.last_mut().expect("pushed above").1;
        if r.period != day.aggregate_load.len() + 1 || r.weight != day.weight {
            return Err(malformed(path, line, format!("day '{}': expected period {} with the day's weight", r.day, day.aggregate_load.len() + 1)));
        }
        day.aggregate_load.push(r.load_kwh);
        day.pv_profile.push(r.pv_profile);
    }
    if let Some((name, d)) = days.iter().find(|(_, d)| d.aggregate_load.len() != periods) {
        return Err(InputError::Invalid {
            path: path.to_path_buf(),
            message: format!("day '{name}' has {} periods, expected {periods}", d.aggregate_load.len()),
        });
    }
    Ok(days.into_iter().map(|(_, d)| d).collect())
}

pub fn csv_writer(path: &Path) -> anyhow::Result<Writer<File>> {
    let file = File::create(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(file))
}
