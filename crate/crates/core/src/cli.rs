//! Batch command-line front end.
//!
//! Exit codes: 0 success, 1 validation or domain failure, 2 I/O or usage
//! failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::anchors::{
    encode_box, fg_bg_ratio, generate_anchors, match_anchors, AnchorConfig, AnchorLevel, MatchLabel,
};
use crate::config::Defaults;
use crate::dataset::{
    augment, dataset_stats, parse_predictions, parse_via, rescale, serialize_via, validate_via, AnnotatedDataset,
    AugmentConfig, ClassCounts,
};
use crate::error::Error;
use crate::geometry::{rasterize_polygon, GridDims};
use crate::losses::gradcheck::{check_all, focal_cce_gap, TOLERANCE};
use crate::metrics::{build_report, IouKind, ReportFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "anatomask", version, about = "Anatomy segmentation geometry, losses and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a VIA ground-truth file and list every problem found.
    Validate {
        #[command(flatten)]
        gt: GtArgs,
    },
    /// Count annotated regions per class.
    Stats {
        #[command(flatten)]
        gt: GtArgs,
        #[arg(long, value_enum, default_value = "md")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Write a flipped/blurred augmented copy of a dataset.
    Augment(AugmentArgs),
    /// Dump generated anchors, and with --gt their labels and targets.
    Anchors(AnchorArgs),
    /// Compare analytic loss gradients with central finite differences.
    Losscheck {
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct GtArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    class_key: Option<String>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    gt: GtArgs,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "md")]
    format: ReportFormat,
    #[arg(long, value_enum)]
    iou_kind: Option<IouKind>,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[command(flatten)]
    gt: GtArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    copies: Option<usize>,
    #[arg(long)]
    flip_prob: Option<f64>,
    #[arg(long)]
    sigma_min: Option<f64>,
    #[arg(long)]
    sigma_max: Option<f64>,
    /// Rescale every image to the default target size first.
    #[arg(long)]
    rescale: bool,
}

#[derive(Debug, Args)]
struct AnchorArgs {
    #[arg(long, default_value_t = 1024)]
    width: usize,
    #[arg(long, default_value_t = 1024)]
    height: usize,
    /// Per-level strides; pairs with --scales (one scale per level).
    #[arg(long, value_delimiter = ',')]
    strides: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long)]
    clip: bool,
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    class_key: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Io(String),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Parse `args` (program name first) and run the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let defaults = Defaults::builtin();
    let result = match cli.command {
        Command::Validate { gt } => cmd_validate(&gt, &defaults, stdout),
        Command::Stats { gt, format, out } => cmd_stats(&gt, format, out.as_deref(), &defaults, stdout),
        Command::Evaluate(args) => cmd_evaluate(&args, &defaults, stdout, stderr),
        Command::Augment(args) => cmd_augment(&args, &defaults, stdout),
        Command::Anchors(args) => cmd_anchors(&args, &defaults, stdout),
        Command::Losscheck { gamma, samples, seed } => {
            cmd_losscheck(gamma.unwrap_or(defaults.losses.focal_gamma), samples, seed, stdout)
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Io(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_IO
        }
        Err(Failure::Invalid(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_INVALID
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> CmdResult {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Io(format!("stdout: {e}")))
}

fn class_key<'a>(arg: &'a Option<String>, defaults: &'a Defaults) -> &'a str {
    arg.as_deref().unwrap_or(&defaults.evaluation.class_key)
}

fn load_gt(gt: &GtArgs, defaults: &Defaults) -> Result<AnnotatedDataset, Failure> {
    Ok(parse_via(&read(&gt.gt)?, class_key(&gt.class_key, defaults))?)
}

fn cmd_validate(gt: &GtArgs, defaults: &Defaults, stdout: &mut dyn Write) -> CmdResult {
    let doc = read(&gt.gt)?;
    let errors = validate_via(&doc, class_key(&gt.class_key, defaults));
    let mut text = String::new();
    for e in &errors {
        text.push_str(&format!("error: {e}\n"));
    }
    let noun = if errors.len() == 1 { "error" } else { "errors" };
    text.push_str(&format!("{} {noun}\n", errors.len()));
    emit(stdout, &text)?;
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invalid(format!("{} validation {noun} in {}", errors.len(), gt.gt.display())))
    }
}

fn render_counts(counts: &ClassCounts, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(counts).expect("counts serialize");
            s.push('\n');
            s
        }
        ReportFormat::Csv => format!(
            "images,thorax,abdomen,wing,leg\n{},{},{},{},{}\n",
            counts.images, counts.thorax, counts.abdomen, counts.wing, counts.leg
        ),
        ReportFormat::Md => {
            let mut s = String::from("| Anatomy | Instances |\n|---|---|\n");
            for class in crate::dataset::AnatomyClass::ALL {
                s.push_str(&format!("| {} | {} |\n", class.title(), counts.get(class)));
            }
            s.push_str(&format!("\nImages: {}\n", counts.images));
            s
        }
    }
}

fn cmd_stats(
    gt: &GtArgs,
    format: ReportFormat,
    out: Option<&Path>,
    defaults: &Defaults,
    stdout: &mut dyn Write,
) -> CmdResult {
    let ds = load_gt(gt, defaults)?;
    let text = render_counts(&dataset_stats(&ds), format);
    match out {
        Some(path) => write_file(path, &text),
        None => emit(stdout, &text),
    }
}

fn cmd_evaluate(args: &EvaluateArgs, defaults: &Defaults, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let ds = load_gt(&args.gt, defaults)?;
    let dets = parse_predictions(&read(&args.pred)?)?;
    let thresholds = args
        .thresholds
        .clone()
        .unwrap_or_else(|| defaults.evaluation.thresholds.clone());
    let kind = args.iou_kind.unwrap_or(defaults.evaluation.iou_kind);
    let report = build_report(&ds, &dets, &thresholds, kind)?;

    let mut summary = String::new();
    for (t, m) in report.thresholds.iter().zip(&report.map) {
        summary.push_str(&format!("mAP@{t:.2} ({}): {m:.4}\n", kind.as_str()));
    }
    let rendered = report.render(args.format);
    match &args.out {
        Some(path) => {
            write_file(path, &rendered)?;
            emit(stdout, &summary)
        }
        None => {
            emit(stdout, &rendered)?;
            stderr
                .write_all(summary.as_bytes())
                .map_err(|e| Failure::Io(format!("stderr: {e}")))
        }
    }
}

fn cmd_augment(args: &AugmentArgs, defaults: &Defaults, stdout: &mut dyn Write) -> CmdResult {
    let key = class_key(&args.gt.class_key, defaults);
    let mut ds = load_gt(&args.gt, defaults)?;
    if args.rescale {
        let target = defaults.rescale_target()?;
        let images = ds
            .images()
            .iter()
            .map(|img| rescale(img, target))
            .collect::<Result<Vec<_>, _>>()?;
        ds = AnnotatedDataset::new(images)?;
    }
    let base = defaults.augment();
    let cfg = AugmentConfig {
        copies: args.copies.unwrap_or(base.copies),
        flip_prob: args.flip_prob.unwrap_or(base.flip_prob),
        sigma_range: (
            args.sigma_min.unwrap_or(base.sigma_range.0),
            args.sigma_max.unwrap_or(base.sigma_range.1),
        ),
    };
    let augmented = augment(&ds, args.seed, &cfg)?;
    write_file(&args.out, &serialize_via(&augmented, key))?;
    emit(
        stdout,
        &format!(
            "wrote {} images ({} source) to {}\n",
            augmented.len(),
            ds.len(),
            args.out.display()
        ),
    )
}

fn anchor_config(args: &AnchorArgs, defaults: &Defaults) -> Result<AnchorConfig, Failure> {
    let mut cfg = defaults.anchors.clone();
    match (&args.strides, &args.scales) {
        (None, None) => {}
        (Some(strides), Some(scales)) if strides.len() == scales.len() => {
            cfg.levels = strides
                .iter()
                .zip(scales)
                .map(|(&stride, &scale)| AnchorLevel {
                    stride,
                    scales: vec![scale],
                })
                .collect();
        }
        _ => {
            return Err(Failure::Invalid(
                "--strides and --scales must be given together with one scale per stride".into(),
            ))
        }
    }
    if let Some(ratios) = &args.ratios {
        cfg.ratios = ratios.clone();
    }
    cfg.clip |= args.clip;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct PositiveAnchor {
    anchor: usize,
    gt: usize,
    class: crate::dataset::AnatomyClass,
    target: crate::anchors::RegressionTarget,
    foreground: usize,
    background: usize,
}

fn cmd_anchors(args: &AnchorArgs, defaults: &Defaults, stdout: &mut dyn Write) -> CmdResult {
    let cfg = anchor_config(args, defaults)?;
    let thresholds = defaults.match_thresholds();
    let doc = match &args.gt {
        None => {
            let dims = GridDims::new(args.width, args.height)?;
            let anchors = generate_anchors(&cfg, dims)?;
            json!({
                "config": cfg,
                "width": dims.width,
                "height": dims.height,
                "anchor_count": anchors.len(),
                "anchors": anchors,
            })
        }
        Some(path) => {
            let key = class_key(&args.class_key, defaults);
            let ds = parse_via(&read(path)?, key)?;
            let mut images: Vec<_> = ds.images().iter().collect();
            images.sort_by(|a, b| a.id.cmp(&b.id));
            let mut entries = Vec::with_capacity(images.len());
            for img in images {
                let anchors = generate_anchors(&cfg, img.dims)?;
                let boxes = img
                    .regions
                    .iter()
                    .map(|r| r.polygon.bounding_box())
                    .collect::<Result<Vec<_>, _>>()?;
                let labels = match_anchors(&anchors, &boxes, thresholds)?;
                let masks: Vec<_> = img
                    .regions
                    .iter()
                    .map(|r| rasterize_polygon(&r.polygon, img.dims))
                    .collect();
                let mut positives = Vec::new();
                for (i, label) in labels.iter().enumerate() {
                    if let MatchLabel::Positive(g) = *label {
                        // Anchors hanging entirely off the image have no pixels to count.
                        let Ok(balance) = fg_bg_ratio(&anchors[i], &masks[g]) else {
                            continue;
                        };
                        positives.push(PositiveAnchor {
                            anchor: i,
                            gt: g,
                            class: img.regions[g].class,
                            target: encode_box(&anchors[i], &boxes[g]),
                            foreground: balance.foreground,
                            background: balance.background,
                        });
                    }
                }
                let count = |f: fn(&MatchLabel) -> bool| labels.iter().filter(|l| f(l)).count();
                entries.push(json!({
                    "image_id": img.id,
                    "width": img.dims.width,
                    "height": img.dims.height,
                    "anchor_count": anchors.len(),
                    "positive": count(|l| matches!(l, MatchLabel::Positive(_))),
                    "negative": count(|l| matches!(l, MatchLabel::Negative)),
                    "ignore": count(|l| matches!(l, MatchLabel::Ignore)),
                    "anchors": anchors,
                    "labels": labels,
                    "positives": positives,
                }));
            }
            json!({
                "config": cfg,
                "match_thresholds": thresholds,
                "images": entries,
            })
        }
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("anchor dump serializes");
    text.push('\n');
    match &args.out {
        Some(path) => write_file(path, &text),
        None => emit(stdout, &text),
    }
}

fn cmd_losscheck(gamma: f64, samples: usize, seed: u64, stdout: &mut dyn Write) -> CmdResult {
    if samples == 0 {
        return Err(Failure::Invalid("--samples must be at least 1".into()));
    }
    let checks = check_all(&[gamma], samples, seed)?;
    let mut text = format!("gradient check: {samples} samples per kernel, seed {seed}, tolerance {TOLERANCE:e}\n");
    for c in &checks {
        let status = if c.passed() { "ok" } else { "FAIL" };
        text.push_str(&format!("{:<24} max_rel_error {:.3e}  {status}\n", c.kernel, c.max_rel_error));
    }
    if gamma == 0.0 {
        let gap = focal_cce_gap(gamma, samples, seed)?;
        text.push_str(&format!("focal == cce at gamma 0: max |focal - cce| = {gap:e}\n"));
    }
    emit(stdout, &text)?;
    match checks
        .iter()
        .filter(|c| !c.passed())
        .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    {
        None => Ok(()),
        Some(worst) => Err(Failure::Invalid(format!(
            "gradient check failed; worst {} with relative error {:e} at {:?}",
            worst.kernel, worst.max_rel_error, worst.worst_at
        ))),
    }
}
