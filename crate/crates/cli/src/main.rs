//! `detbench`: dataset conversion, evaluation, collection planning and report
//! rendering from one binary.

mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use detbench::annotate::darknet::write_yolo_labels;
use detbench::annotate::{parse_detections, validate_manifest, write_coco, write_manifest};
use detbench::boxmath::ImageDims;
use detbench::collectplan::{
    generate_plan, plan_to_manifest, Intrinsics, IntrinsicsPolicy, PlanParams, SceneSpec,
    DEFAULT_NADIR_CUTOFF_DEG, SAMPLE_SCENE_JSON,
};
use detbench::metrics::{evaluate, stratified_evaluate, ApMode, EvalConfig, EvalError};
use detbench::recipe::TrainingRecipe;
use detbench::report::{render_csv, render_markdown, render_svg, ReportDocument};

use io::{ensure_distinct, load_dataset, read_text, sniff_format, verbose, violation, write_atomic, Failure, Format};

#[derive(Parser)]
#[command(name = "detbench", version, about = "Detection dataset and evaluation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ApModeArg {
    All,
    #[value(name = "101")]
    Interp101,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Md,
    Csv,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Convert annotations between darknet, COCO and native manifests.
    Convert {
        #[arg(long, value_enum)]
        from: Format,
        #[arg(long, value_enum)]
        to: Format,
        /// Input file, or dataset root for darknet (`images/` and `labels/`, or one flat directory).
        #[arg(long = "in")]
        input: PathBuf,
        /// Output file, or label directory for darknet.
        #[arg(long)]
        out: PathBuf,
        /// Class list, one name per line. Defaults to `classes.txt` next to darknet labels.
        #[arg(long)]
        classes: Option<PathBuf>,
        /// Write the output even when the input breaks validation rules.
        #[arg(long)]
        force: bool,
    },
    /// Score detections against ground truth.
    Evaluate {
        /// Ground truth: native manifest, COCO file or darknet dataset root.
        #[arg(long)]
        gt: PathBuf,
        /// Detections, one JSON record per line.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// JSON object mapping stratum names to image id lists.
        #[arg(long)]
        strata: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        ap_mode: ApModeArg,
        /// Report document (JSON).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        md: Option<PathBuf>,
    },
    /// Plan a half-dome image collection around a vessel scene.
    Plan {
        /// Scene file; the bundled four-component destroyer when omitted.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        poses: usize,
        #[arg(long, default_value_t = 400.0)]
        radius: f64,
        #[arg(long = "min-elev", default_value_t = 10.0)]
        min_elev: f64,
        #[arg(long = "nadir-cutoff", default_value_t = DEFAULT_NADIR_CUTOFF_DEG)]
        nadir_cutoff: f64,
        /// Jitter the spiral with this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 640)]
        width: u32,
        #[arg(long, default_value_t = 640)]
        height: u32,
        /// Focal length in pixels; chosen from the scene size when omitted.
        #[arg(long)]
        focal: Option<f64>,
        /// Directory receiving plan.json, manifest.json and strata.json.
        #[arg(long, required_unless_present = "print_sample_scene")]
        out: Option<PathBuf>,
        /// Print the bundled sample scene and exit.
        #[arg(long)]
        print_sample_scene: bool,
    },
    /// Write the detector training recipe.
    Recipe {
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a report document as markdown, CSV or SVG.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: ReportFormat,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Convert {
            from,
            to,
            input,
            out,
            classes,
            force,
        } => convert(from, to, &input, &out, classes.as_deref(), force),
        Command::Evaluate {
            gt,
            pred,
            iou,
            strata,
            ap_mode,
            out,
            csv,
            md,
        } => {
            let ap_mode = match ap_mode {
                ApModeArg::All => ApMode::AllPoints,
                ApModeArg::Interp101 => ApMode::Interp101,
            };
            cmd_evaluate(&gt, &pred, iou, strata.as_deref(), ap_mode, &out, csv.as_deref(), md.as_deref())
        }
        Command::Plan {
            print_sample_scene: true,
            ..
        } => {
            print!("{SAMPLE_SCENE_JSON}");
            Ok(())
        }
        Command::Plan {
            scene,
            poses,
            radius,
            min_elev,
            nadir_cutoff,
            seed,
            width,
            height,
            focal,
            out,
            ..
        } => {
            let dims = ImageDims::new(width, height)?;
            let intrinsics = match focal {
                Some(f) => IntrinsicsPolicy::Explicit(Intrinsics::new(f, dims)?),
                None => IntrinsicsPolicy::Auto { dims },
            };
            let params = PlanParams {
                poses,
                radius,
                min_elevation_deg: min_elev,
                nadir_cutoff_deg: nadir_cutoff,
                jitter_seed: seed,
                intrinsics,
            };
            plan(scene.as_deref(), &params, &out.expect("required by clap"))
        }
        Command::Recipe { out } => {
            write_atomic(&out, &TrainingRecipe::default().to_json())?;
            Ok(())
        }
        Command::Report { input, format, out } => {
            ensure_distinct(&[("in", &input), ("out", &out)])?;
            let doc = ReportDocument::from_json(&read_text(&input)?)
                .with_context(|| format!("parsing {}", input.display()))?;
            let text = match format {
                ReportFormat::Md => render_markdown(&doc),
                ReportFormat::Csv => render_csv(&doc),
                ReportFormat::Svg => render_svg(&doc),
            };
            write_atomic(&out, &text)?;
            Ok(())
        }
    }
}

fn convert(
    from: Format,
    to: Format,
    input: &Path,
    out: &Path,
    classes: Option<&Path>,
    force: bool,
) -> Result<(), Failure> {
    ensure_distinct(&[("in", input), ("out", out)])?;
    let manifest = load_dataset(from, input, classes)?;
    let problems = validate_manifest(&manifest);
    for p in &problems {
        eprintln!("violation: {p}");
    }
    if !problems.is_empty() && !force {
        return Err(violation(anyhow!(
            "{} validation problem(s); nothing written (use --force to write anyway)",
            problems.len()
        )));
    }
    match to {
        Format::Darknet => write_yolo_labels(&manifest, out).map_err(|e| violation(e.into()))?,
        Format::Coco => write_atomic(out, &write_coco(&manifest))?,
        Format::Native => write_atomic(out, &write_manifest(&manifest))?,
    }
    println!(
        "converted {} images, {} boxes, {} classes",
        manifest.images.len(),
        manifest.box_count(),
        manifest.classes.len()
    );
    Ok(())
}

fn eval_failure(e: EvalError) -> Failure {
    if e.is_stratum_violation() {
        violation(e.into())
    } else {
        e.into()
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    gt: &Path,
    pred: &Path,
    iou: f64,
    strata: Option<&Path>,
    ap_mode: ApMode,
    out: &Path,
    csv: Option<&Path>,
    md: Option<&Path>,
) -> Result<(), Failure> {
    let mut paths = vec![("gt", gt), ("pred", pred), ("out", out)];
    paths.extend(strata.map(|p| ("strata", p)));
    paths.extend(csv.map(|p| ("csv", p)));
    paths.extend(md.map(|p| ("md", p)));
    ensure_distinct(&paths)?;

    let started = Instant::now();
    let manifest = load_dataset(sniff_format(gt)?, gt, None)?;
    let dets = parse_detections(&read_text(pred)?).with_context(|| format!("parsing {}", pred.display()))?;
    let cfg = EvalConfig {
        ap_mode,
        ..EvalConfig::with_threshold(iou)?
    };
    if verbose() {
        eprintln!(
            "loaded {} images, {} boxes, {} detections in {:.2?}",
            manifest.images.len(),
            manifest.box_count(),
            dets.len(),
            started.elapsed()
        );
    }
    let doc = match strata {
        None => ReportDocument::Single(evaluate(&manifest, &dets, &cfg).map_err(eval_failure)?),
        Some(path) => {
            let map: BTreeMap<String, BTreeSet<String>> = serde_json::from_str(&read_text(path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            ReportDocument::Stratified(stratified_evaluate(&manifest, &dets, &map, &cfg).map_err(eval_failure)?)
        }
    };
    write_atomic(out, &doc.to_json())?;
    if let Some(p) = csv {
        write_atomic(p, &render_csv(&doc))?;
    }
    if let Some(p) = md {
        write_atomic(p, &render_markdown(&doc))?;
    }
    print_summary(&doc);
    if verbose() {
        eprintln!("evaluated in {:.2?}", started.elapsed());
    }
    Ok(())
}

fn print_summary(doc: &ReportDocument) {
    println!(
        "{:<12} {:>7} {:>7} {:>7} {:>8} {:>10} {:>8}",
        "stratum", "images", "gt", "dets", "mAP", "precision", "recall"
    );
    for (name, r) in doc.strata() {
        let map = if r.empty { "n/a".to_owned() } else { format!("{:.4}", r.map) };
        println!(
            "{:<12} {:>7} {:>7} {:>7} {:>8} {:>10.4} {:>8.4}",
            name, r.counts.images, r.counts.ground_truths, r.counts.detections, map, r.pooled.precision, r.pooled.recall
        );
    }
}

fn plan(scene: Option<&Path>, params: &PlanParams, out: &Path) -> Result<(), Failure> {
    let scene = match scene {
        Some(p) => SceneSpec::from_json(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => SceneSpec::sample(),
    };
    let plan = generate_plan(&scene, params)?;
    let (manifest, strata) = plan_to_manifest(&plan)?;
    let mut plan_json = serde_json::to_string_pretty(&plan).context("serializing plan")?;
    plan_json.push('\n');
    let mut strata_json = serde_json::to_string_pretty(&strata).context("serializing strata")?;
    strata_json.push('\n');
    write_atomic(&out.join("plan.json"), &plan_json)?;
    write_atomic(&out.join("manifest.json"), &write_manifest(&manifest))?;
    write_atomic(&out.join("strata.json"), &strata_json)?;
    let sizes: Vec<String> = plan
        .stratum_sizes()
        .iter()
        .map(|(s, n)| format!("{} {n}", s.as_str()))
        .collect();
    println!(
        "planned {} poses ({}), {} boxes, focal {:.2} px",
        plan.poses.len(),
        sizes.join(", "),
        manifest.box_count(),
        plan.intrinsics.focal_px
    );
    Ok(())
}
