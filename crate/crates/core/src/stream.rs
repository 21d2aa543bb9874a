//! Uniformly sampled multivariate streams and their CSV representation.
//!
//! A [`Stream`] is the single source that every taskification partitions.
//! Values are stored column-major (one `Vec<f64>` per channel) since every
//! downstream consumer reads one channel over a contiguous step range.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TIME_COLUMN: &str = "id_time";
pub const DEFAULT_TARGET_CHANNEL: &str = "avg_duration";
pub const DEFAULT_GAP_FILL_LIMIT: usize = 6;
pub const SECONDS_PER_DAY: u64 = 86_400;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("malformed row {row}: column `{column}`: {reason}")]
    MalformedRow {
        row: usize,
        column: String,
        reason: String,
    },
    #[error("duplicate timestamp {timestamp}")]
    NonMonotonicTime { timestamp: i64 },
    #[error("irregular step at timestamp {at}: {reason}")]
    IrregularStep { at: i64, reason: String },
    #[error("channel `{channel}`: missing values at step {step} cannot be interpolated ({reason})")]
    UnresolvableMissing {
        channel: String,
        step: usize,
        reason: String,
    },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("invalid stream: {0}")]
    Invalid(String),
}

/// A temporally ordered, uniformly sampled stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    channels: Vec<Vec<f64>>,
    step_duration: u64,
    start_time: i64,
    channel_names: Vec<String>,
    series_id: String,
}

impl Stream {
    /// Builds a stream from per-channel columns.
    pub fn new(
        series_id: impl Into<String>,
        channel_names: Vec<String>,
        channels: Vec<Vec<f64>>,
        step_duration: u64,
        start_time: i64,
    ) -> Result<Self, StreamError> {
        if channels.is_empty() {
            return Err(StreamError::Invalid("stream needs at least one channel".into()));
        }
        if channel_names.len() != channels.len() {
            return Err(StreamError::Invalid(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                channels.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &channel_names {
            if name.is_empty() {
                return Err(StreamError::Invalid("empty channel name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(StreamError::Invalid(format!("duplicate channel name `{name}`")));
            }
        }
        let t_steps = channels[0].len();
        if t_steps < 2 {
            return Err(StreamError::Invalid(format!(
                "stream needs at least 2 steps, got {t_steps}"
            )));
        }
        if channels.iter().any(|c| c.len() != t_steps) {
            return Err(StreamError::Invalid("channels have unequal lengths".into()));
        }
        if step_duration == 0 {
            return Err(StreamError::Invalid("step duration must be positive".into()));
        }
        for (name, col) in channel_names.iter().zip(&channels) {
            if let Some(step) = col.iter().position(|v| !v.is_finite()) {
                return Err(StreamError::Invalid(format!(
                    "channel `{name}` has a non-finite value at step {step}"
                )));
            }
        }
        Ok(Self {
            channels,
            step_duration,
            start_time,
            channel_names,
            series_id: series_id.into(),
        })
    }

    /// Single-channel convenience constructor.
    pub fn univariate(
        series_id: impl Into<String>,
        channel: impl Into<String>,
        values: Vec<f64>,
        step_duration: u64,
    ) -> Result<Self, StreamError> {
        Self::new(series_id, vec![channel.into()], vec![values], step_duration, 0)
    }

    pub fn t_steps(&self) -> usize {
        self.channels[0].len()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn step_duration(&self) -> u64 {
        self.step_duration
    }

    pub fn start_time(&self) -> i64 {
        self.start_time
    }

    pub fn series_id(&self) -> &str {
        &self.series_id
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.channels[idx]
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|n| n == name)
    }

    /// Total covered duration in seconds (`t_steps * step_duration`).
    pub fn duration_seconds(&self) -> u64 {
        self.t_steps() as u64 * self.step_duration
    }

    /// Number of steps in one day, if the step divides a day evenly.
    pub fn steps_per_day(&self) -> Option<usize> {
        SECONDS_PER_DAY.is_multiple_of(self.step_duration)
            .then(|| (SECONDS_PER_DAY / self.step_duration) as usize)
    }

    pub fn timestamp(&self, step: usize) -> i64 {
        self.start_time + (step as u64 * self.step_duration) as i64
    }

    pub fn with_series_id(mut self, series_id: impl Into<String>) -> Self {
        self.series_id = series_id.into();
        self
    }

    /// Divides every channel by its maximum absolute value (channels that are
    /// identically zero are left untouched).
    pub fn max_scaled(&self) -> Stream {
        let channels = self
            .channels
            .iter()
            .map(|col| {
                let peak = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if peak > 0.0 {
                    col.iter().map(|v| v / peak).collect()
                } else {
                    col.clone()
                }
            })
            .collect();
        Stream {
            channels,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSelector {
    /// `avg_duration` when present, otherwise the only channel of a
    /// univariate stream.
    #[default]
    Target,
    Single(String),
    /// Every channel; distances become sliced W1.
    All,
}

impl ChannelSelector {
    /// Channel indices selected on `stream`, in stream order.
    pub fn resolve(&self, stream: &Stream) -> Result<Vec<usize>, StreamError> {
        match self {
            ChannelSelector::Target => match stream.channel_index(DEFAULT_TARGET_CHANNEL) {
                Some(i) => Ok(vec![i]),
                None if stream.n_channels() == 1 => Ok(vec![0]),
                None => Err(StreamError::Invalid(format!(
                    "no '{DEFAULT_TARGET_CHANNEL}' channel among {} channels; select one or use all channels",
                    stream.n_channels()
                ))),
            },
            ChannelSelector::All => Ok((0..stream.n_channels()).collect()),
            ChannelSelector::Single(name) => stream
                .channel_index(name)
                .map(|i| vec![i])
                .ok_or_else(|| StreamError::UnknownChannel(name.clone())),
        }
    }
}

pub fn slice_channel(stream: &Stream, selector: &ChannelSelector) -> Result<Stream, StreamError> {
    let idx = selector.resolve(stream)?;
    Ok(Stream {
        channels: idx.iter().map(|&i| stream.channels[i].clone()).collect(),
        channel_names: idx.iter().map(|&i| stream.channel_names[i].clone()).collect(),
        ..stream.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub series_id: String,
    pub t_steps: usize,
    pub step_duration: u64,
    pub duration_seconds: u64,
    pub start_time: i64,
    pub channels: Vec<ChannelSummary>,
}

/// Per-channel min/max/mean/population std.
pub fn summarize(stream: &Stream) -> StreamSummary {
    let channels = stream
        .channel_names
        .iter()
        .zip(&stream.channels)
        .map(|(name, col)| {
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            ChannelSummary {
                name: name.clone(),
                min: col.iter().copied().fold(f64::INFINITY, f64::min),
                max: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean,
                std: var.sqrt(),
            }
        })
        .collect();
    StreamSummary {
        series_id: stream.series_id.clone(),
        t_steps: stream.t_steps(),
        step_duration: stream.step_duration,
        duration_seconds: stream.duration_seconds(),
        start_time: stream.start_time,
        channels,
    }
}

/// Column layout and gap policy for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub time_column: String,
    /// `None` selects every non-time column.
    pub value_columns: Option<Vec<String>>,
    /// Longest run of missing steps (absent rows or NaN cells) that is
    /// linearly interpolated.
    pub gap_fill_limit: usize,
    /// Overrides the series id (defaults to the file stem).
    pub series_id: Option<String>,
    /// Fixes the step in seconds instead of inferring the modal delta.
    pub step_duration: Option<u64>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            time_column: DEFAULT_TIME_COLUMN.to_string(),
            value_columns: None,
            gap_fill_limit: DEFAULT_GAP_FILL_LIMIT,
            series_id: None,
            step_duration: None,
        }
    }
}

/// Parses an integer epoch-seconds value or an ISO-8601 timestamp (UTC when
/// no offset is given).
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let s = raw.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    const NAIVE: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
    ];
    NAIVE
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|dt| dt.and_utc().timestamp())
}

fn parse_cell(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na") {
        return Some(f64::NAN);
    }
    s.parse::<f64>().ok().filter(|v| !v.is_infinite())
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Stream, StreamError> {
    let file = std::fs::File::open(path)?;
    let default_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".to_string());
    let id = schema.series_id.clone().unwrap_or(default_id);
    read_csv(file, schema, &id)
}

/// Reads a stream from any CSV source. See [`load_csv`].
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema, series_id: &str) -> Result<Stream, StreamError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let time_idx = headers
        .iter()
        .position(|h| h == schema.time_column)
        .ok_or_else(|| StreamError::MissingColumn(schema.time_column.clone()))?;
    let value_cols: Vec<(usize, String)> = match &schema.value_columns {
        Some(names) => names
            .iter()
            .map(|n| {
                headers
                    .iter()
                    .position(|h| h == n)
                    .map(|i| (i, n.clone()))
                    .ok_or_else(|| StreamError::MissingColumn(n.clone()))
            })
            .collect::<Result<_, _>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != time_idx)
            .map(|(i, h)| (i, h.to_string()))
            .collect(),
    };
    if value_cols.is_empty() {
        return Err(StreamError::Invalid("no value columns".into()));
    }

    let mut rows: Vec<(i64, Vec<f64>)> = Vec::new();
    for (row_no, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row_no + 1;
        let cell = |idx: usize| record.get(idx).unwrap_or("");
        let ts = parse_timestamp(cell(time_idx)).ok_or_else(|| StreamError::MalformedRow {
            row,
            column: schema.time_column.clone(),
            reason: format!("unparseable timestamp `{}`", cell(time_idx)),
        })?;
        let values = value_cols
            .iter()
            .map(|(idx, name)| {
                parse_cell(cell(*idx)).ok_or_else(|| StreamError::MalformedRow {
                    row,
                    column: name.clone(),
                    reason: format!("unparseable value `{}`", cell(*idx)),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((ts, values));
    }
    if rows.is_empty() {
        return Err(StreamError::EmptyFile);
    }
    rows.sort_by_key(|(ts, _)| *ts);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(StreamError::NonMonotonicTime { timestamp: w[0].0 });
    }
    if rows.len() < 2 {
        return Err(StreamError::Invalid("need at least 2 rows to infer the step".into()));
    }

    let step = match schema.step_duration {
        Some(0) => return Err(StreamError::Invalid("step duration must be positive".into())),
        Some(s) => s as i64,
        None => modal_delta(&rows),
    };
    let start = rows[0].0;
    let mut grid: Vec<Vec<f64>> = vec![Vec::new(); value_cols.len()];
    let mut prev_ts = start;
    for (i, (ts, values)) in rows.iter().enumerate() {
        if i > 0 {
            let delta = ts - prev_ts;
            if delta % step != 0 {
                return Err(StreamError::IrregularStep {
                    at: *ts,
                    reason: format!("delta {delta}s is not a multiple of the {step}s step"),
                });
            }
            let missing = (delta / step - 1) as usize;
            if missing > schema.gap_fill_limit {
                return Err(StreamError::IrregularStep {
                    at: *ts,
                    reason: format!(
                        "gap of {missing} steps exceeds the fill limit of {}",
                        schema.gap_fill_limit
                    ),
                });
            }
            for col in grid.iter_mut() {
                col.extend(std::iter::repeat_n(f64::NAN, missing));
            }
        }
        for (col, v) in grid.iter_mut().zip(values) {
            col.push(*v);
        }
        prev_ts = *ts;
    }

    for (col, (_, name)) in grid.iter_mut().zip(&value_cols) {
        interpolate_missing(col, schema.gap_fill_limit, name)?;
    }
    let names = value_cols.into_iter().map(|(_, n)| n).collect();
    Stream::new(series_id, names, grid, step as u64, start)
}

/// Most frequent positive inter-row delta; ties resolve to the smallest.
fn modal_delta(rows: &[(i64, Vec<f64>)]) -> i64 {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for w in rows.windows(2) {
        *counts.entry(w[1].0 - w[0].0).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    counts
        .into_iter()
        .find(|(_, c)| *c == best)
        .map(|(d, _)| d)
        .expect("at least one delta")
}

fn interpolate_missing(col: &mut [f64], limit: usize, channel: &str) -> Result<(), StreamError> {
    let n = col.len();
    let mut i = 0;
    while i < n {
        if !col[i].is_nan() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && col[i].is_nan() {
            i += 1;
        }
        let run = i - start;
        if start == 0 || i == n {
            return Err(StreamError::UnresolvableMissing {
                channel: channel.to_string(),
                step: start,
                reason: "leading or trailing missing values".into(),
            });
        }
        if run > limit {
            return Err(StreamError::UnresolvableMissing {
                channel: channel.to_string(),
                step: start,
                reason: format!("run of {run} exceeds the fill limit of {limit}"),
            });
        }
        let left = col[start - 1];
        let right = col[i];
        let span = (run + 1) as f64;
        for (k, slot) in col[start..i].iter_mut().enumerate() {
            let w = (k + 1) as f64 / span;
            *slot = left + (right - left) * w;
        }
    }
    Ok(())
}

/// Writes the stream in the standard layout: `id_time` (epoch seconds)
/// followed by one column per channel.
pub fn write_csv<W: Write>(stream: &Stream, writer: W) -> Result<(), StreamError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![DEFAULT_TIME_COLUMN.to_string()];
    header.extend(stream.channel_names.iter().cloned());
    wtr.write_record(&header)?;
    for t in 0..stream.t_steps() {
        let mut rec = vec![stream.timestamp(t).to_string()];
        rec.extend(stream.channels.iter().map(|c| c[t].to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(stream: &Stream, path: &Path) -> Result<(), StreamError> {
    let file = std::fs::File::create(path)?;
    write_csv(stream, std::io::BufWriter::new(file))
}

/// One corpus entry; `path` is resolved relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub series_id: String,
    pub path: String,
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, StreamError> {
    let text = std::fs::read_to_string(path)?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| StreamError::Invalid(format!("manifest: {e}")))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(entries
        .into_iter()
        .map(|e| {
            let p = Path::new(&e.path);
            let resolved = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
            ManifestEntry {
                series_id: e.series_id,
                path: resolved.to_string_lossy().into_owned(),
            }
        })
        .collect())
}
