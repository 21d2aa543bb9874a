//! Batch diagnostics over single streams or multi-series corpora.
//!
//! Output tree:
//!
//! ```text
//! out/corpus_report.json
//! out/corpus_tables.txt
//! out/bps.csv, out/d_prof.csv
//! out/{series_id}/matrix_{label}.csv
//! out/{series_id}/profiles.json
//! out/{series_id}/bps.json
//! out/{series_id}/heatmap_{label}.svg          (emit_svg)
//! out/{series_id}/absdiff_{a}_{b}.svg          (emit_svg)
//! ```

pub mod svg;
pub mod table;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::distance::{abs_difference, matrix_mse, pairwise_from_distributions, task_distributions, upsample_matrix, DistanceMatrix};
use crate::profiles::{
    self, plasticity_from_distributions, profile_distance, stability_from_distributions, BpsReport,
    ProfileDistanceWeights, ProfilePair, ProfileSettings, COMPONENT_READING, DEFAULT_L_MIN,
};
use crate::stats::{fmt_sig, mean_std, MeanStd};
use crate::stream::{load_csv, load_manifest, ChannelSelector, CsvSchema, ManifestEntry, Stream};
use crate::taskify::{self, fixed_length, PerturbationSpec, Taskification, DEFAULT_N_SAMPLES};
use crate::Error;

pub use svg::emit_heatmap;

/// Environment variable bounding the worker pool size.
pub const THREADS_ENV: &str = "TASKDIAG_THREADS";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {err}", path.display())]
    Io { path: PathBuf, err: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("report is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Diagnostics(#[from] Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |err| ReportError::Io {
        path: path.to_path_buf(),
        err,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    File(PathBuf),
    Manifest(PathBuf),
}

fn default_windows() -> Vec<usize> {
    vec![9, 30, 44]
}
fn default_delta_days() -> usize {
    1
}
fn default_n_perturb() -> usize {
    DEFAULT_N_SAMPLES
}
fn default_weight() -> f64 {
    0.5
}
fn default_l_min() -> usize {
    DEFAULT_L_MIN
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Configuration of a batch run; loadable from JSON with defaults for
/// everything except `input`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: InputSource,
    #[serde(default)]
    pub channel: ChannelSelector,
    #[serde(default = "default_windows")]
    pub windows_days: Vec<usize>,
    /// Explicit taskifications analyzed alongside the fixed windows.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub taskifications: Vec<Taskification>,
    #[serde(default)]
    pub shift_days: Option<i64>,
    #[serde(default = "default_delta_days")]
    pub delta_days: usize,
    #[serde(default = "default_n_perturb")]
    pub n_perturb: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_weight")]
    pub alpha: f64,
    #[serde(default = "default_weight")]
    pub beta: f64,
    #[serde(default = "default_l_min")]
    pub l_min: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit_svg: bool,
    #[serde(default)]
    pub max_scale: bool,
    /// Common resolution for matrix comparisons; defaults to the largest
    /// task count among the windows.
    #[serde(default)]
    pub upsample_dim: Option<usize>,
    #[serde(default)]
    pub csv: CsvSchema,
}

impl RunConfig {
    pub fn new(input: InputSource, output_dir: PathBuf) -> Self {
        Self {
            input,
            channel: ChannelSelector::Target,
            windows_days: default_windows(),
            taskifications: Vec::new(),
            shift_days: None,
            delta_days: default_delta_days(),
            n_perturb: default_n_perturb(),
            seed: 0,
            alpha: 0.5,
            beta: 0.5,
            l_min: DEFAULT_L_MIN,
            output_dir,
            emit_svg: false,
            max_scale: false,
            upsample_dim: None,
            csv: CsvSchema::default(),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn settings(&self) -> ProfileSettings {
        ProfileSettings {
            selector: self.channel.clone(),
            weights: ProfileDistanceWeights {
                alpha: self.alpha,
                beta: self.beta,
            },
            l_min: self.l_min,
        }
    }

    pub fn check(&self) -> Result<(), ReportError> {
        if self.windows_days.is_empty() && self.taskifications.is_empty() {
            return Err(ReportError::Config("at least one window or taskification is required".into()));
        }
        if self.windows_days.contains(&0) {
            return Err(ReportError::Config("window lengths must be positive".into()));
        }
        let mut sorted = self.windows_days.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.windows_days.len() {
            return Err(ReportError::Config("window lengths must be distinct".into()));
        }
        let mut labels: Vec<String> = self.windows_days.iter().map(|d| format!("{d}d")).collect();
        labels.extend(self.taskifications.iter().map(|t| t.label.clone()));
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(ReportError::Config("taskification labels must be distinct".into()));
        }
        if self.delta_days == 0 || self.n_perturb == 0 {
            return Err(ReportError::Config("delta_days and n_perturb must be positive".into()));
        }
        self.settings()
            .check()
            .map_err(|e| ReportError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("output_dir");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn entries(&self) -> Result<Vec<ManifestEntry>, ReportError> {
        match &self.input {
            InputSource::File(path) => {
                let id = self.csv.series_id.clone().unwrap_or_else(|| {
                    path.file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "series".into())
                });
                Ok(vec![ManifestEntry {
                    series_id: id,
                    path: path.to_string_lossy().into_owned(),
                }])
            }
            InputSource::Manifest(path) => {
                let entries = load_manifest(path).map_err(|e| ReportError::Diagnostics(e.into()))?;
                if entries.is_empty() {
                    return Err(ReportError::Config("manifest lists no series".into()));
                }
                Ok(entries)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedResult {
    pub label: String,
    pub shift_days: i64,
    pub bps: BpsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_days: Option<usize>,
    pub n_tasks: usize,
    pub bps: BpsReport,
    pub shifted: Option<ShiftedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub a: String,
    pub b: String,
    pub d_pl: f64,
    pub d_st: f64,
    pub d_prof: f64,
    pub matrix_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub series_id: String,
    pub t_steps: usize,
    pub step_duration: u64,
    pub windows: Vec<WindowResult>,
    pub pairs: Vec<PairResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFailure {
    pub series_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAggregate {
    pub label: String,
    pub plasticity: MeanStd,
    pub stability: MeanStd,
    pub bps: MeanStd,
    pub shifted: Option<ShiftedAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedAggregate {
    pub label: String,
    pub plasticity: MeanStd,
    pub stability: MeanStd,
    pub bps: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAggregate {
    pub a: String,
    pub b: String,
    pub d_prof: MeanStd,
    pub matrix_mse: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_series: usize,
    pub windows: Vec<WindowAggregate>,
    pub pairs: Vec<PairAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub delta_days: usize,
    pub n_perturb: usize,
    pub alpha: f64,
    pub beta: f64,
    pub l_min: usize,
    pub component_reading: String,
    pub aggregation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub metadata: RunMetadata,
    pub series: Vec<SeriesReport>,
    pub failures: Vec<SeriesFailure>,
    pub aggregate: Aggregate,
}

const AGGREGATION: &str =
    "per-series BPS and D_prof computed first; mean and sample std (n-1) taken across successful series";

impl CorpusReport {
    /// Recomputes the aggregate block from the embedded per-series values.
    pub fn recompute_aggregate(&self) -> Aggregate {
        aggregate(&self.series)
    }

    pub fn verify(&self) -> Result<(), ReportError> {
        if self.recompute_aggregate() != self.aggregate {
            return Err(ReportError::Inconsistent(
                "aggregate statistics differ from the per-series values".into(),
            ));
        }
        for s in &self.series {
            for w in &s.windows {
                let reports = std::iter::once(&w.bps).chain(w.shifted.as_ref().map(|x| &x.bps));
                for r in reports {
                    if !r.is_consistent(1e-12) {
                        return Err(ReportError::Inconsistent(format!(
                            "{}/{}: BPS summary does not match its samples",
                            s.series_id, r.label
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Loads a report and checks its self-consistency.
    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let report: Self = serde_json::from_str(&text)?;
        report.verify()?;
        Ok(report)
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn tables(&self) -> String {
        let agg = &self.aggregate;
        let mut out = format!("series: {} ok, {} failed\n", agg.n_series, self.failures.len());
        if agg.windows.is_empty() {
            return out;
        }
        out.push('\n');
        let cols: Vec<(String, [MeanStd; 3])> = agg
            .windows
            .iter()
            .map(|w| (w.label.clone(), [w.plasticity, w.stability, w.bps]))
            .collect();
        out.push_str(&table::bps_table(&cols));
        let shifted: Vec<(String, [MeanStd; 3])> = agg
            .windows
            .iter()
            .filter_map(|w| w.shifted.as_ref())
            .map(|s| (s.label.clone(), [s.plasticity, s.stability, s.bps]))
            .collect();
        if !shifted.is_empty() {
            out.push('\n');
            out.push_str(&table::bps_table(&shifted));
        }
        if !agg.pairs.is_empty() {
            let labels: Vec<String> = agg.windows.iter().map(|w| w.label.clone()).collect();
            let find = |i: usize, j: usize| {
                agg.pairs.iter().find(|p| {
                    (p.a == labels[i] && p.b == labels[j]) || (p.a == labels[j] && p.b == labels[i])
                })
            };
            out.push_str("\nD_prof\n");
            out.push_str(&table::pair_table(&labels, |i, j| {
                find(i, j).map(|p| table::mean_pm_std(&p.d_prof)).unwrap_or_default()
            }));
            out.push_str("\nMatrix MSE (upsampled)\n");
            out.push_str(&table::pair_table(&labels, |i, j| {
                find(i, j).map(|p| table::mean_pm_std(&p.matrix_mse)).unwrap_or_default()
            }));
        }
        out
    }
}

fn triple(reports: &[&BpsReport]) -> (MeanStd, MeanStd, MeanStd) {
    let col = |f: fn(&BpsReport) -> f64| mean_std(&reports.iter().map(|r| f(r)).collect::<Vec<_>>());
    (
        col(|r| r.plasticity_mean),
        col(|r| r.stability_mean),
        col(|r| r.bps_mean),
    )
}

fn aggregate(series: &[SeriesReport]) -> Aggregate {
    let Some(first) = series.first() else {
        return Aggregate {
            n_series: 0,
            windows: Vec::new(),
            pairs: Vec::new(),
        };
    };
    let windows = first
        .windows
        .iter()
        .enumerate()
        .map(|(w, head)| {
            let reports: Vec<&BpsReport> = series.iter().map(|s| &s.windows[w].bps).collect();
            let (plasticity, stability, bps) = triple(&reports);
            let shifted = head.shifted.as_ref().map(|sh| {
                let reports: Vec<&BpsReport> = series
                    .iter()
                    .filter_map(|s| s.windows[w].shifted.as_ref().map(|x| &x.bps))
                    .collect();
                let (plasticity, stability, bps) = triple(&reports);
                ShiftedAggregate {
                    label: sh.label.clone(),
                    plasticity,
                    stability,
                    bps,
                }
            });
            WindowAggregate {
                label: head.label.clone(),
                plasticity,
                stability,
                bps,
                shifted,
            }
        })
        .collect();
    let pairs = first
        .pairs
        .iter()
        .enumerate()
        .map(|(p, head)| PairAggregate {
            a: head.a.clone(),
            b: head.b.clone(),
            d_prof: mean_std(&series.iter().map(|s| s.pairs[p].d_prof).collect::<Vec<_>>()),
            matrix_mse: mean_std(&series.iter().map(|s| s.pairs[p].matrix_mse).collect::<Vec<_>>()),
        })
        .collect();
    Aggregate {
        n_series: series.len(),
        windows,
        pairs,
    }
}

/// Everything computed for one series, including the artifacts that are
/// written next to the corpus report.
#[derive(Debug, Clone)]
pub struct SeriesAnalysis {
    pub report: SeriesReport,
    pub matrices: Vec<(String, DistanceMatrix)>,
    pub profiles: BTreeMap<String, ProfilePair>,
    pub diffs: Vec<(String, String, DistanceMatrix)>,
}

/// Runs every per-window diagnostic on one stream.
pub fn analyze_stream(stream: &Stream, config: &RunConfig) -> Result<SeriesAnalysis, Error> {
    let stream = if config.max_scale { stream.max_scaled() } else { stream.clone() };
    let settings = config.settings();
    settings.check()?;
    let spd = taskify::steps_per_day(&stream)?;
    let min_task_len = spd;
    let spec = PerturbationSpec::new(config.delta_days * spd, config.n_perturb, config.seed)?;

    let mut windows = Vec::new();
    let mut matrices = Vec::new();
    let mut profiles = BTreeMap::new();
    let mut splits = Vec::new();
    for &days in &config.windows_days {
        splits.push((fixed_length(&stream, days, min_task_len)?, Some(days)));
    }
    for tk in &config.taskifications {
        if tk.steps_per_day != spd {
            return Err(taskify::TaskifyError::Invalid(format!(
                "taskification {} assumes {} steps per day, stream has {spd}",
                tk.label, tk.steps_per_day
            ))
            .into());
        }
        tk.validate(stream.t_steps(), min_task_len)?;
        splits.push((tk.clone(), None));
    }
    for (tk, days) in splits {
        let dists = task_distributions(&stream, &tk, &settings.selector)?;
        let matrix = pairwise_from_distributions(&dists)?;
        let pair = ProfilePair {
            plasticity: plasticity_from_distributions(&dists)?,
            stability: stability_from_distributions(&dists, settings.l_min)?,
        };
        let bps = profiles::bps(&stream, &tk, &spec, &settings, min_task_len)?;
        let shifted = match config.shift_days {
            Some(d) if d != 0 => {
                let moved = taskify::shift(&tk, d, min_task_len)?;
                let bps = profiles::bps(&stream, &moved, &spec, &settings, min_task_len)?;
                Some(ShiftedResult {
                    label: moved.label.clone(),
                    shift_days: d,
                    bps,
                })
            }
            _ => None,
        };
        windows.push(WindowResult {
            label: tk.label.clone(),
            window_days: days,
            n_tasks: tk.n_tasks(),
            bps,
            shifted,
        });
        matrices.push((tk.label.clone(), matrix));
        profiles.insert(tk.label.clone(), pair);
    }

    let common_dim = config
        .upsample_dim
        .unwrap_or_else(|| matrices.iter().map(|(_, m)| m.dims()).max().unwrap_or(1));
    let upsampled = matrices
        .iter()
        .map(|(_, m)| upsample_matrix(m, common_dim))
        .collect::<Result<Vec<_>, _>>()?;
    let mut pairs = Vec::new();
    let mut diffs = Vec::new();
    for i in 0..windows.len() {
        for j in (i + 1)..windows.len() {
            let (a, b) = (&windows[i].label, &windows[j].label);
            let dist = profile_distance(&profiles[a], &profiles[b], &settings.weights)?;
            pairs.push(PairResult {
                a: a.clone(),
                b: b.clone(),
                d_pl: dist.d_pl,
                d_st: dist.d_st,
                d_prof: dist.d_prof,
                matrix_mse: matrix_mse(&upsampled[i], &upsampled[j])?,
            });
            diffs.push((a.clone(), b.clone(), abs_difference(&upsampled[i], &upsampled[j])?));
        }
    }

    Ok(SeriesAnalysis {
        report: SeriesReport {
            series_id: stream.series_id().to_string(),
            t_steps: stream.t_steps(),
            step_duration: stream.step_duration(),
            windows,
            pairs,
        },
        matrices,
        profiles,
        diffs,
    })
}

/// Worker count requested through `TASKDIAG_THREADS`, if any.
pub fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

/// Loads and analyzes every series; failures are collected per series.
pub fn compute_corpus(config: &RunConfig) -> Result<(CorpusReport, Vec<SeriesAnalysis>), ReportError> {
    config.check()?;
    let entries = config.entries()?;
    let work = || {
        entries
            .par_iter()
            .map(|entry| {
                let schema = CsvSchema {
                    series_id: Some(entry.series_id.clone()),
                    ..config.csv.clone()
                };
                load_csv(Path::new(&entry.path), &schema)
                    .map_err(Error::from)
                    .and_then(|stream| analyze_stream(&stream, config))
                    .map_err(|e| SeriesFailure {
                        series_id: entry.series_id.clone(),
                        error: format!("{}: {e}", entry.path),
                    })
            })
            .collect::<Vec<_>>()
    };
    let results = match thread_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ReportError::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut analyses = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(a) => analyses.push(a),
            Err(f) => failures.push(f),
        }
    }
    let series: Vec<SeriesReport> = analyses.iter().map(|a| a.report.clone()).collect();
    let aggregate = aggregate(&series);
    let report = CorpusReport {
        metadata: RunMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            seed: config.seed,
            delta_days: config.delta_days,
            n_perturb: config.n_perturb,
            alpha: config.alpha,
            beta: config.beta,
            l_min: config.l_min,
            component_reading: COMPONENT_READING.to_string(),
            aggregation: AGGREGATION.to_string(),
        },
        series,
        failures,
        aggregate,
    };
    Ok((report, analyses))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), ReportError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

fn safe_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Writes the corpus report and per-series artifacts under `config.output_dir`.
pub fn write_outputs(config: &RunConfig, report: &CorpusReport, analyses: &[SeriesAnalysis]) -> Result<(), ReportError> {
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    for a in analyses {
        let dir = out.join(safe_name(&a.report.series_id));
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (label, m) in &a.matrices {
            let mut buf = Vec::new();
            m.write_csv(&mut buf).expect("write to vec");
            write(&dir.join(format!("matrix_{}.csv", safe_name(label))), buf)?;
            if config.emit_svg {
                let title = format!("{} {label}: pairwise task W1", a.report.series_id);
                let path = dir.join(format!("heatmap_{}.svg", safe_name(label)));
                svg::emit_heatmap(m, &title, &path).map_err(io_err(&path))?;
            }
        }
        if config.emit_svg {
            for ((a_label, b_label, diff), pair) in a.diffs.iter().zip(&a.report.pairs) {
                let title = format!(
                    "|{a_label} - {b_label}| upsampled, MSE {}",
                    fmt_sig(pair.matrix_mse, 6)
                );
                let path = dir.join(format!("absdiff_{}_{}.svg", safe_name(a_label), safe_name(b_label)));
                svg::emit_heatmap(diff, &title, &path).map_err(io_err(&path))?;
            }
        }
        write(&dir.join("profiles.json"), serde_json::to_string_pretty(&a.profiles)? + "\n")?;
        let bps: Vec<&BpsReport> = a
            .report
            .windows
            .iter()
            .flat_map(|w| std::iter::once(&w.bps).chain(w.shifted.as_ref().map(|s| &s.bps)))
            .collect();
        write(&dir.join("bps.json"), serde_json::to_string_pretty(&bps)? + "\n")?;
    }

    let mut bps_csv = String::from("series_id,label,plasticity_mean,plasticity_std,stability_mean,stability_std,bps_mean,bps_std,bps_max\n");
    let mut dprof_csv = String::from("series_id,a,b,d_pl,d_st,d_prof,matrix_mse\n");
    for s in &report.series {
        for w in &s.windows {
            for r in std::iter::once(&w.bps).chain(w.shifted.as_ref().map(|x| &x.bps)) {
                let _ = writeln!(
                    bps_csv,
                    "{},{},{},{},{},{},{},{},{}",
                    s.series_id,
                    r.label,
                    r.plasticity_mean,
                    r.plasticity_std,
                    r.stability_mean,
                    r.stability_std,
                    r.bps_mean,
                    r.bps_std,
                    r.bps_max
                );
            }
        }
        for p in &s.pairs {
            let _ = writeln!(
                dprof_csv,
                "{},{},{},{},{},{},{}",
                s.series_id, p.a, p.b, p.d_pl, p.d_st, p.d_prof, p.matrix_mse
            );
        }
    }
    write(&out.join("bps.csv"), bps_csv)?;
    write(&out.join("d_prof.csv"), dprof_csv)?;
    write(&out.join("corpus_tables.txt"), report.tables())?;
    write(&out.join("corpus_report.json"), report.to_json()?)?;
    Ok(())
}

/// Full batch pipeline: compute, then write through a single writer.
pub fn run_diagnostics(config: &RunConfig) -> Result<CorpusReport, ReportError> {
    let (report, analyses) = compute_corpus(config)?;
    write_outputs(config, &report, &analyses)?;
    Ok(report)
}

/// Fixed-length windows with the default one-day minimum task length.
pub fn window_taskification(stream: &Stream, days: usize) -> Result<Taskification, Error> {
    let spd = taskify::steps_per_day(stream)?;
    Ok(fixed_length(stream, days, spd)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_from_json() {
        let cfg: RunConfig = serde_json::from_str(r#"{"input": {"file": "a.csv"}}"#).unwrap();
        assert_eq!(cfg.windows_days, vec![9, 30, 44]);
        assert_eq!(cfg.delta_days, 1);
        assert_eq!(cfg.n_perturb, 64);
        assert_eq!((cfg.alpha, cfg.beta, cfg.l_min), (0.5, 0.5, 2));
        assert!(cfg.check().is_ok());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = RunConfig::new(InputSource::File("x.csv".into()), "out1".into());
        let b = RunConfig {
            output_dir: "out2".into(),
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn config_validation() {
        let base = RunConfig::new(InputSource::File("x.csv".into()), "out".into());
        assert!(RunConfig { windows_days: vec![], ..base.clone() }.check().is_err());
        assert!(RunConfig { windows_days: vec![9, 9], ..base.clone() }.check().is_err());
        assert!(RunConfig { alpha: 0.0, ..base.clone() }.check().is_err());
        assert!(RunConfig { l_min: 1, ..base.clone() }.check().is_err());
    }

    #[test]
    fn safe_names() {
        assert_eq!(safe_name("10.0.0.1"), "10.0.0.1");
        assert_eq!(safe_name("a/b c"), "a_b_c");
    }
}
