use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use taskdiag::cl_metrics::{cross_taskification_std, summarize_matrix, AverageMseMode, ResultsMatrix};
use taskdiag::distance::{pairwise_matrix, upsample_matrix};
use taskdiag::profiles::{self, profile_pair, ProfileDistanceWeights, ProfileSettings};
use taskdiag::report::{self, table, InputSource, RunConfig};
use taskdiag::stats::{fmt_sig, mean_std};
use taskdiag::stream::{load_csv, save_csv, summarize, ChannelSelector, CsvSchema, Stream};
use taskdiag::synthetic::{generate, SynthSpec};
use taskdiag::taskify::{self, PerturbationSpec, Taskification};

#[derive(Parser)]
#[command(name = "taskdiag", version, about = "Taskification diagnostics for time-series streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize a stream CSV.
    Inspect(StreamArgs),
    /// Generate a synthetic stream CSV.
    Synth(SynthArgs),
    /// Build a fixed-length (optionally shifted) taskification.
    Taskify(TaskifyArgs),
    /// Pairwise task-to-task W1 matrix.
    Matrix(MatrixArgs),
    /// Plasticity and stability profiles.
    Profiles(ProfilesArgs),
    /// Profile distance between two taskifications.
    Dprof(DprofArgs),
    /// Boundary-profile sensitivity of one or more taskifications.
    Bps(BpsArgs),
    /// Average MSE, BWT and forgetting from results matrices.
    Clmetrics(ClmetricsArgs),
    /// Batch pipeline over a stream or a manifest of streams.
    Report(ReportArgs),
}

#[derive(Args)]
struct StreamArgs {
    /// Stream CSV file.
    input: PathBuf,
    #[arg(long, default_value = "id_time")]
    time_column: String,
    /// Force the grid step in seconds instead of inferring it.
    #[arg(long)]
    step_duration: Option<u64>,
    /// Longest run of missing steps that is interpolated.
    #[arg(long, default_value_t = 6)]
    gap_fill_limit: usize,
}

impl StreamArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            time_column: self.time_column.clone(),
            gap_fill_limit: self.gap_fill_limit,
            step_duration: self.step_duration,
            ..CsvSchema::default()
        }
    }

    fn load(&self) -> Result<Stream> {
        load_csv(&self.input, &self.schema()).with_context(|| format!("loading {}", self.input.display()))
    }
}

#[derive(Args)]
struct ChannelArgs {
    /// Channel to analyze (default: avg_duration, or the only channel).
    #[arg(long, conflicts_with = "sliced")]
    channel: Option<String>,
    /// Use every channel and average per-channel W1 (sliced W1).
    #[arg(long)]
    sliced: bool,
    /// Divide each channel by its maximum absolute value first.
    #[arg(long)]
    max_scale: bool,
}

impl ChannelArgs {
    fn selector(&self) -> ChannelSelector {
        match (&self.channel, self.sliced) {
            (Some(name), _) => ChannelSelector::Single(name.clone()),
            (None, true) => ChannelSelector::All,
            (None, false) => ChannelSelector::Target,
        }
    }

    fn prepare(&self, stream: Stream) -> Stream {
        if self.max_scale {
            stream.max_scaled()
        } else {
            stream
        }
    }
}

#[derive(Args)]
struct SplitArgs {
    /// Task length in days.
    #[arg(long)]
    window_days: Option<usize>,
    /// Shift every internal boundary by this many days.
    #[arg(long, allow_hyphen_values = true)]
    shift_days: Option<i64>,
    /// Read the taskification from a JSON file instead.
    #[arg(long, conflicts_with_all = ["window_days", "shift_days"])]
    taskification: Option<PathBuf>,
}

impl SplitArgs {
    fn build(&self, stream: &Stream) -> Result<Taskification> {
        let spd = taskify::steps_per_day(stream)?;
        if let Some(path) = &self.taskification {
            return read_taskification(path, stream, spd);
        }
        let Some(days) = self.window_days else {
            bail!("either --window-days or --taskification is required");
        };
        windowed(stream, days, self.shift_days, spd)
    }
}

fn windowed(stream: &Stream, days: usize, shift_days: Option<i64>, spd: usize) -> Result<Taskification> {
    let tk = taskify::fixed_length(stream, days, spd)?;
    Ok(match shift_days {
        Some(d) if d != 0 => taskify::shift(&tk, d, spd)?,
        _ => tk,
    })
}

fn read_taskification(path: &Path, stream: &Stream, spd: usize) -> Result<Taskification> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let tk: Taskification = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    tk.validate(stream.t_steps(), spd)?;
    Ok(tk)
}

#[derive(Args)]
struct WeightArgs {
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Minimum index gap for stability pairs.
    #[arg(long, default_value_t = 2)]
    lmin: usize,
}

fn settings(channel: &ChannelArgs, w: &WeightArgs) -> ProfileSettings {
    ProfileSettings {
        selector: channel.selector(),
        weights: ProfileDistanceWeights {
            alpha: w.alpha,
            beta: w.beta,
        },
        l_min: w.lmin,
    }
}

#[derive(Args)]
struct SynthArgs {
    /// changepoint, transient, periodic, iid_noise or piecewise_regimes.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 600)]
    step_duration: u64,
    /// Generator parameters as key=value; values are parsed as JSON.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    params: Vec<String>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct TaskifyArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[arg(long)]
    window_days: usize,
    #[arg(long, allow_hyphen_values = true)]
    shift_days: Option<i64>,
    /// Minimum task length in days.
    #[arg(long, default_value_t = 1)]
    min_task_days: usize,
    /// Also draw this many boundary perturbations and print them.
    #[arg(long)]
    n_perturb: Option<usize>,
    #[arg(long, default_value_t = 1)]
    delta_days: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Bilinearly upsample to this many tasks before writing.
    #[arg(long)]
    upsample: Option<usize>,
    /// Matrix CSV destination (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct ProfilesArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = 2)]
    lmin: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DprofArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    weights: WeightArgs,
    /// Two window lengths to compare.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    window_days: Option<Vec<usize>>,
    /// Two taskification JSON files to compare.
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with = "window_days")]
    taskification: Option<Vec<PathBuf>>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BpsArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    weights: WeightArgs,
    /// One or more task lengths in days.
    #[arg(long, num_args = 1.., default_values_t = [9, 30, 44])]
    window_days: Vec<usize>,
    #[arg(long, allow_hyphen_values = true)]
    shift_days: Option<i64>,
    #[arg(long, conflicts_with_all = ["shift_days"])]
    taskification: Option<PathBuf>,
    /// Maximum boundary displacement in days.
    #[arg(long, default_value_t = 1)]
    delta_days: usize,
    /// Maximum boundary displacement in steps (overrides --delta-days).
    #[arg(long)]
    delta_steps: Option<usize>,
    #[arg(long, default_value_t = 64)]
    n_perturb: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the full reports as JSON.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ClmetricsArgs {
    /// Results matrix CSV files, one per taskification.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Average MSE over the whole lower triangle instead of the final row.
    #[arg(long)]
    lower_triangle: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single stream CSV.
    #[arg(long, conflicts_with = "manifest")]
    input: Option<PathBuf>,
    /// JSON manifest of {series_id, path} entries.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    channel: Option<String>,
    #[arg(long, conflicts_with = "channel")]
    sliced: bool,
    #[arg(long, num_args = 1..)]
    window_days: Option<Vec<usize>>,
    /// Explicit taskification JSON, reported alongside the windows. Repeatable.
    #[arg(long)]
    taskification: Vec<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    shift_days: Option<i64>,
    #[arg(long)]
    delta_days: Option<usize>,
    #[arg(long)]
    n_perturb: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lmin: Option<usize>,
    #[arg(long)]
    max_scale: bool,
    #[arg(long)]
    emit_svg: bool,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn parse_params(pairs: &[String]) -> Result<Map<String, Value>> {
    let mut map = Map::new();
    for pair in pairs {
        let Some((key, raw)) = pair.split_once('=') else {
            bail!("parameter '{pair}' is not key=value");
        };
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        map.insert(key.trim().to_string(), value);
    }
    Ok(map)
}

fn inspect(args: &StreamArgs) -> Result<()> {
    let summary = summarize(&args.load()?);
    let mut out = format!(
        "series {}: {} steps of {} s starting at {} ({} s)\n",
        summary.series_id, summary.t_steps, summary.step_duration, summary.start_time, summary.duration_seconds
    );
    let rows: Vec<Vec<String>> = summary
        .channels
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                fmt_sig(c.min, 6),
                fmt_sig(c.max, 6),
                fmt_sig(c.mean, 6),
                fmt_sig(c.std, 6),
            ]
        })
        .collect();
    let headers: Vec<String> = ["channel", "min", "max", "mean", "std"].iter().map(|s| s.to_string()).collect();
    out.push_str(&table::render(&headers, &rows));
    write_or_print(None, &out)
}

fn synth(args: &SynthArgs) -> Result<()> {
    let mut spec = Map::new();
    spec.insert("t_steps".into(), args.steps.into());
    spec.insert("seed".into(), args.seed.into());
    spec.insert("step_duration".into(), args.step_duration.into());
    spec.insert("kind".into(), args.kind.clone().into());
    spec.insert("params".into(), Value::Object(parse_params(&args.params)?));
    let spec: SynthSpec = serde_json::from_value(Value::Object(spec)).context("invalid synthetic spec")?;
    let stream = generate(&spec)?;
    save_csv(&stream, &args.output)?;
    eprintln!("wrote {} steps to {}", stream.t_steps(), args.output.display());
    Ok(())
}

fn taskify_cmd(args: &TaskifyArgs) -> Result<()> {
    let stream = args.stream.load()?;
    let spd = taskify::steps_per_day(&stream)?;
    let min = args.min_task_days * spd;
    let mut tk = taskify::fixed_length(&stream, args.window_days, min)?;
    if let Some(d) = args.shift_days.filter(|d| *d != 0) {
        tk = taskify::shift(&tk, d, min)?;
    }
    let json = match args.n_perturb {
        Some(n) => {
            let spec = PerturbationSpec::new(args.delta_days * spd, n, args.seed)?;
            let hood = taskify::sample_neighborhood(&tk, &spec, min)?;
            serde_json::to_string_pretty(&serde_json::json!({
                "taskification": tk,
                "spec": spec,
                "rejected_draws": hood.rejected_draws,
                "neighborhood": hood.samples,
            }))?
        }
        None => serde_json::to_string_pretty(&tk)?,
    };
    write_or_print(args.output.as_deref(), &(json + "\n"))
}

fn matrix(args: &MatrixArgs) -> Result<()> {
    let stream = args.channel.prepare(args.stream.load()?);
    let tk = args.split.build(&stream)?;
    let mut m = pairwise_matrix(&stream, &tk, &args.channel.selector())?;
    if let Some(dim) = args.upsample {
        m = upsample_matrix(&m, dim)?;
    }
    if let Some(svg) = &args.svg {
        let title = format!("{} {}: pairwise task W1", stream.series_id(), tk.label);
        report::emit_heatmap(&m, &title, svg).with_context(|| format!("writing {}", svg.display()))?;
    }
    let mut buf = Vec::new();
    m.write_csv(&mut buf)?;
    write_or_print(args.output.as_deref(), std::str::from_utf8(&buf)?)
}

fn profiles_cmd(args: &ProfilesArgs) -> Result<()> {
    let stream = args.channel.prepare(args.stream.load()?);
    let tk = args.split.build(&stream)?;
    let settings = ProfileSettings {
        selector: args.channel.selector(),
        l_min: args.lmin,
        ..ProfileSettings::default()
    };
    let pair = profile_pair(&stream, &tk, &settings)?;
    write_or_print(args.output.as_deref(), &(serde_json::to_string_pretty(&pair)? + "\n"))
}

fn dprof(args: &DprofArgs) -> Result<()> {
    let stream = args.channel.prepare(args.stream.load()?);
    let spd = taskify::steps_per_day(&stream)?;
    let (a, b) = match (&args.window_days, &args.taskification) {
        (Some(w), _) => (windowed(&stream, w[0], None, spd)?, windowed(&stream, w[1], None, spd)?),
        (None, Some(t)) => (
            read_taskification(&t[0], &stream, spd)?,
            read_taskification(&t[1], &stream, spd)?,
        ),
        (None, None) => bail!("either --window-days A B or --taskification A B is required"),
    };
    let d = profiles::d_prof(&stream, &a, &b, &settings(&args.channel, &args.weights))?;
    let text = if args.json {
        serde_json::to_string_pretty(&d)? + "\n"
    } else {
        format!(
            "{} vs {}: D_pl {}  D_st {}  D_prof {}\n",
            a.label,
            b.label,
            fmt_sig(d.d_pl, 6),
            fmt_sig(d.d_st, 6),
            fmt_sig(d.d_prof, 6)
        )
    };
    write_or_print(None, &text)
}

fn bps_cmd(args: &BpsArgs) -> Result<()> {
    let stream = args.channel.prepare(args.stream.load()?);
    let spd = taskify::steps_per_day(&stream)?;
    let settings = settings(&args.channel, &args.weights);
    let delta = args.delta_steps.unwrap_or(args.delta_days * spd);
    let spec = PerturbationSpec::new(delta, args.n_perturb, args.seed)?;
    let splits = match &args.taskification {
        Some(path) => vec![read_taskification(path, &stream, spd)?],
        None => args
            .window_days
            .iter()
            .map(|&d| windowed(&stream, d, args.shift_days, spd))
            .collect::<Result<Vec<_>>>()?,
    };
    let reports = splits
        .iter()
        .map(|tk| profiles::bps(&stream, tk, &spec, &settings, spd))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<_> = reports.iter().collect();
    write_or_print(None, &table::bps_table(&table::bps_columns(&refs)))?;
    if let Some(path) = &args.output {
        write_or_print(Some(path), &(serde_json::to_string_pretty(&reports)? + "\n"))?;
    }
    Ok(())
}

fn clmetrics(args: &ClmetricsArgs) -> Result<()> {
    let mode = if args.lower_triangle {
        AverageMseMode::LowerTriangle
    } else {
        AverageMseMode::FinalRow
    };
    let summaries = args
        .inputs
        .iter()
        .map(|p| {
            let rm = ResultsMatrix::load(p).with_context(|| format!("loading {}", p.display()))?;
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(summarize_matrix(&name, &rm, mode))
        })
        .collect::<Result<Vec<_>>>()?;
    if args.json {
        return write_or_print(None, &(serde_json::to_string_pretty(&summaries)? + "\n"));
    }
    let mut out = table::metrics_table(&summaries);
    if summaries.len() >= 2 {
        let col = |f: fn(&taskdiag::cl_metrics::MetricsSummary) -> f64| -> Result<String> {
            let v: Vec<f64> = summaries.iter().map(f).collect();
            Ok(format!(
                "{} ± {}",
                fmt_sig(mean_std(&v).mean, 6),
                fmt_sig(cross_taskification_std(&v)?, 6)
            ))
        };
        out.push_str(&format!(
            "\nacross taskifications: avg_mse {}  bwt {}  forgetting {}\n",
            col(|s| s.average_mse)?,
            col(|s| s.bwt)?,
            col(|s| s.forgetting)?
        ));
    }
    write_or_print(None, &out)
}

fn report_config(args: &ReportArgs) -> Result<RunConfig> {
    let input = match (&args.input, &args.manifest) {
        (Some(p), _) => Some(InputSource::File(p.clone())),
        (None, Some(p)) => Some(InputSource::Manifest(p.clone())),
        (None, None) => None,
    };
    let mut cfg = match (&args.config, input.clone()) {
        (Some(path), _) => RunConfig::from_json_file(path)?,
        (None, Some(input)) => RunConfig::new(input, PathBuf::from("out")),
        (None, None) => bail!("--config, --input or --manifest is required"),
    };
    if let Some(input) = input {
        cfg.input = input;
    }
    if let Some(c) = &args.channel {
        cfg.channel = ChannelSelector::Single(c.clone());
    }
    if args.sliced {
        cfg.channel = ChannelSelector::All;
    }
    if let Some(w) = &args.window_days {
        cfg.windows_days = w.clone();
    }
    for path in &args.taskification {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.taskifications
            .push(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?);
    }
    if args.shift_days.is_some() {
        cfg.shift_days = args.shift_days;
    }
    cfg.delta_days = args.delta_days.unwrap_or(cfg.delta_days);
    cfg.n_perturb = args.n_perturb.unwrap_or(cfg.n_perturb);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.alpha = args.alpha.unwrap_or(cfg.alpha);
    cfg.beta = args.beta.unwrap_or(cfg.beta);
    cfg.l_min = args.lmin.unwrap_or(cfg.l_min);
    cfg.max_scale |= args.max_scale;
    cfg.emit_svg |= args.emit_svg;
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn report_cmd(args: &ReportArgs) -> Result<ExitCode> {
    let cfg = report_config(args)?;
    let report = report::run_diagnostics(&cfg)?;
    print!("{}", report.tables());
    for f in &report.failures {
        eprintln!("series {} failed: {}", f.series_id, f.error);
    }
    eprintln!("wrote {}", cfg.output_dir.join("corpus_report.json").display());
    Ok(if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Inspect(a) => inspect(a)?,
        Command::Synth(a) => synth(a)?,
        Command::Taskify(a) => taskify_cmd(a)?,
        Command::Matrix(a) => matrix(a)?,
        Command::Profiles(a) => profiles_cmd(a)?,
        Command::Dprof(a) => dprof(a)?,
        Command::Bps(a) => bps_cmd(a)?,
        Command::Clmetrics(a) => clmetrics(a)?,
        Command::Report(a) => return report_cmd(a),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = report::thread_count() {
        // Ignored if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
