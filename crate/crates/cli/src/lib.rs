//! Subcommands of the `pnm` tool.
//!
//! Exit statuses: 0 success, 1 usage error, 2 I/O error, 3 validation error.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use thiserror::Error;

use pnm_core::io::{
    load_label_mask, save_label_png, write_bins_csv, write_eval_csv, write_preview_png,
    write_series_csv,
};
use pnm_core::{
    compute_pnm_fast, compute_pnm_naive, compute_weights, default_bin_edges, error_rate_bins,
    evaluate_with_weights, evaluate_zigzag_series, fixture, trivial_split_mask, zigzag_mask,
    BorderPolicy, Evaluation, Fixture, Label, LabelMask, PnmConfig, SeriesRow, Transform,
    WeightMap, ZigzagSpec,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("fast and naive kernels disagree on repeat {repeat}")]
    KernelMismatch { repeat: u32 },
    #[error("{context}{source}")]
    Core {
        context: String,
        source: pnm_core::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
            CliError::KernelMismatch { .. } => 3,
            CliError::Core { source, .. } => match source.kind() {
                pnm_core::ErrorKind::Io => 2,
                pnm_core::ErrorKind::Validation => 3,
            },
        }
    }
}

impl From<pnm_core::Error> for CliError {
    fn from(source: pnm_core::Error) -> Self {
        CliError::Core {
            context: String::new(),
            source,
        }
    }
}

fn at(path: &Path) -> impl FnOnce(pnm_core::Error) -> CliError + '_ {
    move |source| CliError::Core {
        context: format!("{}: ", path.display()),
        source,
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "pnm",
    version,
    about = "Pixel null model weights and boundary-aware metrics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the weight map of a ground-truth mask.
    Weights(WeightsArgs),
    /// Score a prediction (or a directory of predictions) with mIoU and PNM IoU.
    Eval(EvalArgs),
    /// Error rate of a prediction grouped by pixel weight.
    Bins(BinsArgs),
    /// Write a synthetic mask.
    Synth(SynthArgs),
    /// Time the naive and sliding-histogram kernels.
    Bench(BenchArgs),
    /// Score the trivial split segmenter on the zigzag series.
    Series(SeriesArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TransformArg {
    Log,
    Linear,
    Reciprocal,
}

impl From<TransformArg> for Transform {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::Log => Transform::Log,
            TransformArg::Linear => Transform::LinearComplement,
            TransformArg::Reciprocal => Transform::Reciprocal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BorderArg {
    Clip,
    Reflect,
}

impl From<BorderArg> for BorderPolicy {
    fn from(b: BorderArg) -> Self {
        match b {
            BorderArg::Clip => BorderPolicy::ClipNormalized,
            BorderArg::Reflect => BorderPolicy::Reflect,
        }
    }
}

fn parse_scale(s: &str) -> Result<u16, String> {
    let d: u16 = s.parse().map_err(|e| format!("{e}"))?;
    if d.is_multiple_of(2) {
        return Err(format!("{d} is not an odd positive integer"));
    }
    Ok(d)
}

/// `--ignore-label` value: a label, or `none` to score every pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IgnoreLabel(pub Option<Label>);

fn parse_ignore(s: &str) -> Result<IgnoreLabel, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(IgnoreLabel(None));
    }
    s.parse()
        .map(|l| IgnoreLabel(Some(l)))
        .map_err(|e| format!("{e}"))
}

/// `WIDTHxHEIGHT`, both positive.
pub fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h: usize = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    if w == 0 || h == 0 {
        return Err("dimensions must be positive".into());
    }
    Ok((w, h))
}

/// Bin edges given on the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct Edges(pub Vec<f64>);

/// Comma-separated ascending weights.
pub fn parse_edges(s: &str) -> Result<Edges, String> {
    let edges = s
        .split(',')
        .map(|e| {
            e.trim()
                .parse::<f64>()
                .map_err(|err| format!("{e:?}: {err}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    pnm_core::metrics::validate_edges(&edges).map_err(|e| e.to_string())?;
    Ok(Edges(edges))
}

#[derive(Clone, Debug, Args)]
pub struct PnmFlags {
    /// Locality scale (odd).
    #[arg(long, default_value_t = pnm_core::DEFAULT_SCALE, value_parser = parse_scale)]
    pub d: u16,
    #[arg(long, value_enum, default_value_t = TransformArg::Log)]
    pub transform: TransformArg,
    #[arg(long, value_enum, default_value_t = BorderArg::Clip)]
    pub border: BorderArg,
    /// Void label excluded from counting and scoring, or `none`.
    #[arg(long, default_value = "255", value_parser = parse_ignore)]
    pub ignore_label: IgnoreLabel,
}

impl Default for PnmFlags {
    fn default() -> Self {
        Self {
            d: pnm_core::DEFAULT_SCALE,
            transform: TransformArg::Log,
            border: BorderArg::Clip,
            ignore_label: IgnoreLabel(Some(pnm_core::DEFAULT_IGNORE_LABEL)),
        }
    }
}

impl PnmFlags {
    pub fn config(&self) -> CliResult<PnmConfig> {
        PnmConfig::new(self.d, self.transform.into(), self.border.into())
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    /// Ground-truth mask (8-bit PNG or raw label file).
    pub gt: PathBuf,
    #[command(flatten)]
    pub flags: PnmFlags,
    /// Weight map file to write.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Optional 8-bit PNG rendering of the weights.
    #[arg(long)]
    pub preview: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction mask, or a directory of them.
    pub pred: PathBuf,
    /// Ground-truth mask, or a directory with matching file names.
    pub gt: PathBuf,
    #[command(flatten)]
    pub flags: PnmFlags,
    /// CSV report; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BinsArgs {
    pub pred: PathBuf,
    pub gt: PathBuf,
    #[command(flatten)]
    pub flags: PnmFlags,
    /// Ascending bin edges; defaults to 1, 1.25, .., 5.
    #[arg(long, value_parser = parse_edges)]
    pub edges: Option<Edges>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Zigzag,
    TrivialSplit,
    Disk,
    TwoSquares,
    Stripe,
    Checkerboard,
    VerticalSplit,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    /// Zigzag series index.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=30))]
    pub n: u32,
    #[arg(long, default_value = "1024x1024", value_parser = parse_size)]
    pub size: (usize, usize),
    #[arg(long, default_value_t = 0)]
    pub class_a: Label,
    #[arg(long, default_value_t = 1)]
    pub class_b: Label,
    /// Disk radius in pixels; a quarter of the shorter side by default.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub small: usize,
    #[arg(long, default_value_t = 31)]
    pub large: usize,
    #[arg(long, default_value_t = 3)]
    pub thickness: usize,
    #[arg(long, default_value_t = 1)]
    pub cell: usize,
    /// PNG file to write.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "2048x1024", value_parser = parse_size)]
    pub size: (usize, usize),
    #[arg(long, default_value_t = 19, value_parser = clap::value_parser!(u16).range(1..))]
    pub classes: u16,
    #[arg(long, default_value_t = pnm_core::DEFAULT_SCALE, value_parser = parse_scale)]
    pub d: u16,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub repeat: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    /// Last series index; images 1..=N are scored.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..=30))]
    pub n: u32,
    #[arg(long, default_value = "1024x1024", value_parser = parse_size)]
    pub size: (usize, usize),
    #[command(flatten)]
    pub flags: PnmFlags,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Weights(args) => cmd_weights(&args).map(|_| ()),
        Command::Eval(args) => cmd_eval(&args),
        Command::Bins(args) => cmd_bins(&args).map(|_| ()),
        Command::Synth(args) => cmd_synth(&args).map(|_| ()),
        Command::Bench(args) => {
            let report = cmd_bench(&args)?;
            print!("{report}");
            Ok(())
        }
        Command::Series(args) => cmd_series(&args).map(|_| ()),
    }
}

fn load_mask(path: &Path, flags: &PnmFlags) -> CliResult<LabelMask> {
    load_label_mask(path, flags.ignore_label.0).map_err(at(path))
}

/// Writes to `path` through a temporary sibling and renames on success, so a
/// failed run leaves no partial artifact behind.
fn write_atomically(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> pnm_core::Result<()>,
) -> CliResult<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let file = File::create(&tmp).map_err(io_at(&tmp))?;
    let mut sink = BufWriter::new(file);
    let result = write(&mut sink).and_then(|_| Ok(sink.flush()?));
    drop(sink);
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(at(path)(e));
    }
    fs::rename(&tmp, path).map_err(io_at(path))
}

fn emit(
    output: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> pnm_core::Result<()>,
) -> CliResult<()> {
    match output {
        Some(path) => write_atomically(path, |sink| write(sink)),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(CliError::from)
        }
    }
}

pub fn cmd_weights(args: &WeightsArgs) -> CliResult<WeightMap> {
    let config = args.flags.config()?;
    let gt = load_mask(&args.gt, &args.flags)?;
    let weights = compute_weights(&gt, &config)?;
    write_atomically(&args.output, |sink| {
        pnm_core::io::write_weight_map(&weights, sink)
    })?;
    if let Some(preview) = &args.preview {
        write_atomically(preview, |sink| write_preview_png(&weights, sink))?;
    }
    Ok(weights)
}

/// Scores one prediction. Weights come from the ground truth only.
pub fn evaluate_files(pred: &Path, gt: &Path, flags: &PnmFlags) -> CliResult<Evaluation> {
    let config = flags.config()?;
    let gt_mask = load_mask(gt, flags)?;
    let pred_mask = load_mask(pred, flags)?;
    let weights = compute_weights(&gt_mask, &config).map_err(at(gt))?;
    evaluate_with_weights(&pred_mask, &gt_mask, &weights).map_err(at(pred))
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    if args.pred.is_dir() && args.gt.is_dir() {
        return cmd_eval_dir(args);
    }
    let eval = evaluate_files(&args.pred, &args.gt, &args.flags)?;
    emit(args.output.as_deref(), |sink| write_eval_csv(&eval, sink))?;
    let summary = format!(
        "miou={:.6} pnm_iou={:.6}",
        eval.miou.mean, eval.pnm_iou.mean
    );
    if args.output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

/// Per-file scores of a directory evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct FileScore {
    pub name: String,
    pub miou: f64,
    pub pnm_iou: f64,
}

/// Pairs files by name, scores them in parallel and returns rows in sorted
/// name order.
pub fn evaluate_dirs(pred: &Path, gt: &Path, flags: &PnmFlags) -> CliResult<Vec<FileScore>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(gt).map_err(io_at(gt))? {
        let entry = entry.map_err(io_at(gt))?;
        if entry.file_type().map_err(io_at(gt))?.is_file() {
            names.push(entry.file_name());
        }
    }
    names.sort();
    names
        .par_iter()
        .map(|name| {
            let eval = evaluate_files(&pred.join(name), &gt.join(name), flags)?;
            Ok(FileScore {
                name: name.to_string_lossy().into_owned(),
                miou: eval.miou.mean,
                pnm_iou: eval.pnm_iou.mean,
            })
        })
        .collect()
}

fn cmd_eval_dir(args: &EvalArgs) -> CliResult<()> {
    let rows = evaluate_dirs(&args.pred, &args.gt, &args.flags)?;
    emit(args.output.as_deref(), |sink| {
        writeln!(sink, "file,miou,pnm_iou")?;
        for row in &rows {
            writeln!(sink, "{},{:.6},{:.6}", row.name, row.miou, row.pnm_iou)?;
        }
        Ok(())
    })?;
    let n = rows.len().max(1) as f64;
    let summary = format!(
        "files={} mean_miou={:.6} mean_pnm_iou={:.6}",
        rows.len(),
        rows.iter().map(|r| r.miou).sum::<f64>() / n,
        rows.iter().map(|r| r.pnm_iou).sum::<f64>() / n
    );
    if args.output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

pub fn cmd_bins(args: &BinsArgs) -> CliResult<pnm_core::BinReport> {
    let config = args.flags.config()?;
    let gt = load_mask(&args.gt, &args.flags)?;
    let pred = load_mask(&args.pred, &args.flags)?;
    let weights = compute_weights(&gt, &config).map_err(at(&args.gt))?;
    let edges = args
        .edges
        .as_ref()
        .map_or_else(default_bin_edges, |e| e.0.clone());
    let report = error_rate_bins(&pred, &gt, &weights, &edges).map_err(at(&args.pred))?;
    emit(args.output.as_deref(), |sink| write_bins_csv(&report, sink))?;
    Ok(report)
}

pub fn synth_mask(args: &SynthArgs) -> CliResult<LabelMask> {
    let (w, h) = args.size;
    let mask = match args.kind {
        SynthKind::Zigzag => {
            let spec = ZigzagSpec::new(args.n, w, h)?.with_classes(args.class_a, args.class_b);
            zigzag_mask(&spec)?
        }
        SynthKind::TrivialSplit => trivial_split_mask(w, h, args.class_a, args.class_b)?,
        SynthKind::Disk => {
            let radius = args.radius.unwrap_or(w.min(h) as f64 / 4.0);
            fixture(Fixture::Disk { radius }, w, h)?
        }
        SynthKind::TwoSquares => fixture(
            Fixture::TwoSquares {
                small: args.small,
                large: args.large,
            },
            w,
            h,
        )?,
        SynthKind::Stripe => fixture(
            Fixture::Stripe {
                thickness: args.thickness,
            },
            w,
            h,
        )?,
        SynthKind::Checkerboard => fixture(Fixture::Checkerboard { cell: args.cell }, w, h)?,
        SynthKind::VerticalSplit => fixture(Fixture::VerticalSplit, w, h)?,
    };
    Ok(mask)
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<LabelMask> {
    let mask = synth_mask(args)?;
    write_atomically(&args.output, |sink| {
        pnm_core::io::write_label_png(&mask, sink)
    })?;
    Ok(mask)
}

/// Timings of one `bench` run.
#[derive(Clone, Debug)]
pub struct BenchReport {
    pub size: (usize, usize),
    pub classes: u16,
    pub d: u16,
    pub naive: Vec<Duration>,
    pub fast: Vec<Duration>,
}

fn mean_ms(times: &[Duration]) -> f64 {
    times.iter().map(|t| t.as_secs_f64() * 1e3).sum::<f64>() / times.len().max(1) as f64
}

impl BenchReport {
    pub fn naive_ms(&self) -> f64 {
        mean_ms(&self.naive)
    }

    pub fn fast_ms(&self) -> f64 {
        mean_ms(&self.fast)
    }

    pub fn speedup(&self) -> f64 {
        self.naive_ms() / self.fast_ms().max(1e-9)
    }
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "size={}x{} classes={} d={} repeat={}",
            self.size.0,
            self.size.1,
            self.classes,
            self.d,
            self.fast.len()
        )?;
        writeln!(f, "identical=true")?;
        writeln!(f, "naive_ms_per_image={:.3}", self.naive_ms())?;
        writeln!(f, "fast_ms_per_image={:.3}", self.fast_ms())?;
        writeln!(f, "speedup={:.1}", self.speedup())
    }
}

/// Random blocky mask: rectangles of random classes over a random background.
pub fn bench_mask(width: usize, height: usize, classes: u16, seed: u64) -> LabelMask {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut labels = vec![rng.gen_range(0..classes); width * height];
    let blocks = (width * height / 2048).max(4);
    for _ in 0..blocks {
        let bw = rng.gen_range(1..=width.min(96));
        let bh = rng.gen_range(1..=height.min(96));
        let x0 = rng.gen_range(0..=width - bw);
        let y0 = rng.gen_range(0..=height - bh);
        let class = rng.gen_range(0..classes);
        for y in y0..y0 + bh {
            labels[y * width + x0..y * width + x0 + bw].fill(class);
        }
    }
    LabelMask::new(width, height, labels, None).expect("dimensions are consistent")
}

/// Times both kernels on a random mask and checks that their counts agree.
/// The report is only produced when they do.
pub fn cmd_bench(args: &BenchArgs) -> CliResult<BenchReport> {
    let config = PnmConfig::with_scale(args.d).map_err(|e| CliError::Usage(e.to_string()))?;
    let (w, h) = args.size;
    let mut report = BenchReport {
        size: args.size,
        classes: args.classes,
        d: args.d,
        naive: Vec::new(),
        fast: Vec::new(),
    };
    for r in 0..args.repeat {
        let mask = bench_mask(w, h, args.classes, args.seed.wrapping_add(r as u64));
        let start = Instant::now();
        let naive = compute_pnm_naive(&mask, &config)?;
        report.naive.push(start.elapsed());
        let start = Instant::now();
        let fast = compute_pnm_fast(&mask, &config)?;
        report.fast.push(start.elapsed());
        if naive.counts() != fast.counts() {
            return Err(CliError::KernelMismatch { repeat: r });
        }
    }
    Ok(report)
}

pub fn cmd_series(args: &SeriesArgs) -> CliResult<Vec<SeriesRow>> {
    let config = args.flags.config()?;
    let (w, h) = args.size;
    let rows = evaluate_zigzag_series(1..=args.n, w, h, &config)?;
    emit(args.output.as_deref(), |sink| write_series_csv(&rows, sink))?;
    Ok(rows)
}

/// Convenience for scripts and tests: writes a mask as an 8-bit PNG.
pub fn save_mask(mask: &LabelMask, path: &Path) -> CliResult<()> {
    save_label_png(mask, path).map_err(at(path))
}
