//! The `sticker-forge` command line.
//!
//! [`run`] parses arguments, dispatches a subcommand and maps failures to
//! exit codes: 0 success, 1 domain errors (no feasible region, unreadable
//! signs, backend failures), 2 usage errors.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sticker_forge_core::imaging::{merge_masks, save_mask_png};
use sticker_forge_core::report::{write_report, RunSummary};
use sticker_forge_core::signs::{ingest, ingest_dir, write_synthetic, ClassSpec, SignSet, SyntheticConfig};
use sticker_forge_core::victim::{save_weights, train, BackendSpec, BuiltinClassifier, Classifier, CnnArchitecture, TrainConfig};
use sticker_forge_core::AttackConfig;

pub const WORKERS_ENV: &str = "STICKER_FORGE_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "sticker-forge", version, about = "Universal black/white sticker attacks on sign classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a procedural sign dataset (PNG + polygon sidecars).
    GenSynthetic(GenSyntheticArgs),
    /// Train the built-in CNN on a directory of annotated signs.
    Train(TrainArgs),
    /// Classify images with a backend.
    Predict(PredictArgs),
    /// Intersect the sign masks of annotated images.
    MaskMerge(MaskMergeArgs),
    /// Search universal sticker placements and write a run directory.
    Attack(AttackArgs),
    /// Re-render tables (and optionally images) from a summary.json.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Images per class, train and test together.
    #[arg(long, default_value_t = 120)]
    pub count: usize,
    /// Images per class held out under `test/`.
    #[arg(long, default_value_t = 20)]
    pub test_count: usize,
    /// Comma-separated class keys; all presets by default.
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<String>,
    #[arg(long, default_value_t = 256)]
    pub image_size: u32,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of training PNGs with sidecars.
    #[arg(long)]
    pub data: PathBuf,
    /// Output weight file.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional held-out directory to report accuracy on.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub backend: String,
    /// Annotated images are canonicalized first; others are classified as is.
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MaskMergeArgs {
    /// Annotated images, or directories of them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Where to write the merged mask as a grayscale PNG.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub backend: Option<String>,
    /// Directory of annotated sign images.
    #[arg(long)]
    pub signs: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub stride: Option<u32>,
    /// Accepted for interface symmetry; the search itself is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Draw a cross at the anchor in annotated images.
    #[arg(long)]
    pub overlay: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A summary.json, or a run directory containing one.
    #[arg(long)]
    pub summary: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Sign directory; when given, annotated images are regenerated.
    #[arg(long)]
    pub signs: Option<PathBuf>,
    #[arg(long)]
    pub overlay: bool,
}

/// A problem with how the tool was invoked rather than with the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenSynthetic(a) => gen_synthetic(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::MaskMerge(a) => mask_merge(a),
        Command::Attack(a) => attack(a),
        Command::Report(a) => report(a),
    }
}

fn gen_synthetic(a: GenSyntheticArgs) -> Result<()> {
    let classes = if a.classes.is_empty() {
        ClassSpec::all_presets()
    } else {
        a.classes
            .iter()
            .map(|k| ClassSpec::preset(k).map_err(|e| usage(e.to_string())))
            .collect::<Result<Vec<_>>>()?
    };
    let cfg = SyntheticConfig {
        test_per_class: a.test_count,
        image_size: a.image_size,
        ..SyntheticConfig::new(classes, a.count, a.seed)
    };
    write_synthetic(&cfg, &a.out)?;
    println!(
        "wrote {} images per class ({} test) for {} classes to {}",
        cfg.count_per_class,
        cfg.test_per_class,
        cfg.classes.len(),
        a.out.display()
    );
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let set = ingest_dir(&a.data)?;
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: a.learning_rate.unwrap_or(defaults.learning_rate),
        epochs: a.epochs.unwrap_or(defaults.epochs),
        batch_size: a.batch_size.unwrap_or(defaults.batch_size),
        seed: a.seed,
    };
    let arch = CnnArchitecture::lisa_default(set.class_names.len());
    let (bundle, rep) = train(&set.labeled_images(), &arch, set.class_names.clone(), &cfg)?;
    save_weights(&bundle, &a.out)?;
    println!("trained on {} images, train accuracy {:.2}%", set.len(), 100.0 * rep.train_accuracy);
    if let Some(dir) = &a.test {
        let test = ingest_dir(dir)?;
        let model = BuiltinClassifier::new(bundle)?;
        println!("test accuracy {:.2}%", 100.0 * label_accuracy(&model, &test)?);
    }
    println!("weights written to {}", a.out.display());
    Ok(())
}

/// Fraction of signs whose predicted class name equals the annotation.
pub fn label_accuracy<C: Classifier + ?Sized>(model: &C, set: &SignSet) -> Result<f64> {
    let mut correct = 0;
    for rec in &set.records {
        if model.predict(&rec.image)?.label_name == rec.true_label {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len().max(1) as f64)
}

fn parse_backend(spec: &str) -> Result<BackendSpec> {
    spec.parse().map_err(|e: sticker_forge_core::VictimError| usage(e.to_string()))
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = parse_backend(&a.backend)?.open(1, None)?;
    for path in &a.images {
        let img = if sticker_forge_core::imaging::sidecar_path(path).is_file() {
            ingest(std::slice::from_ref(path))?.records.remove(0).image
        } else {
            sticker_forge_core::imaging::load_png(path)?
        };
        let v = model.predict(&img)?;
        println!("{}\t{}\t{:.2}", path.display(), v.label_name, v.confidence_pct);
    }
    Ok(())
}

fn collect_signs(inputs: &[PathBuf]) -> Result<SignSet> {
    if let [dir] = inputs {
        if dir.is_dir() {
            return Ok(ingest_dir(dir)?);
        }
    }
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            files.extend(ingest_dir(p)?.records);
        } else {
            files.extend(ingest(std::slice::from_ref(p))?.records);
        }
    }
    Ok(SignSet::from_records(files)?)
}

fn mask_merge(a: MaskMergeArgs) -> Result<()> {
    let set = collect_signs(&a.inputs)?;
    let merged = merge_masks(&set.masks())?;
    if let Some(out) = &a.out {
        save_mask_png(&merged, out)?;
    }
    match merged.bounding_box() {
        Some(b) => println!(
            "merged {} masks: {:.2}% of frame, bounding box x={} y={} w={} h={}",
            set.len(),
            100.0 * merged.true_fraction(),
            b.x,
            b.y,
            b.width,
            b.height
        ),
        None => bail!("no feasible region: the {} masks have no common pixel", set.len()),
    }
    Ok(())
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Merges flags over the configuration file; flags win.
pub fn resolve_attack(a: &AttackArgs) -> Result<(AttackConfig, BackendSpec, PathBuf, PathBuf, usize)> {
    let mut cfg = match &a.config {
        Some(p) => AttackConfig::load(p).map_err(|e| usage(e.to_string()))?,
        None => AttackConfig::default(),
    };
    if let Some(s) = a.stride {
        cfg.stride_pct = s;
    }
    if let Some(b) = &a.backend {
        cfg.backend = Some(b.clone());
    }
    cfg.overlay |= a.overlay;
    let backend = parse_backend(cfg.backend.as_deref().ok_or_else(|| usage("no backend given (--backend or config)"))?)?;
    let signs = a
        .signs
        .clone()
        .or_else(|| cfg.signs.clone())
        .ok_or_else(|| usage("no sign directory given (--signs or config)"))?;
    let out = a
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| usage("no output directory given (--out or config)"))?;
    let workers = a.workers.or(cfg.workers).unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(usage("worker count must be at least 1"));
    }
    for pattern in cfg.resolved_patterns().map_err(|e| usage(e.to_string()))? {
        cfg.search_config(pattern, workers).validate().map_err(|e| usage(e.to_string()))?;
    }
    cfg.signs = Some(signs.clone());
    Ok((cfg, backend, signs, out, workers))
}

fn attack(a: AttackArgs) -> Result<()> {
    let (cfg, backend, signs_dir, out, workers) = resolve_attack(&a)?;
    let signs = ingest_dir(&signs_dir)?;
    let model = backend.open(workers, None).with_context(|| format!("opening backend {backend}"))?;
    let summary = RunSummary::collect(&signs, &cfg, model.as_ref(), workers)?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_report(&summary, Some(&signs), &out, cfg.overlay)?;
    for p in &summary.patterns {
        let (h, w) = p.best.placement.size();
        println!(
            "{}: best {h}x{w}% at ({}, {}) objective {:.2}, {}/{} signs flipped",
            p.pattern.display_name(),
            p.best.placement.anchor.x_pct,
            p.best.placement.anchor.y_pct,
            p.best.objective,
            p.best.flipped_count(),
            signs.len()
        );
    }
    println!("summary written to {}", out.join("summary.json").display());
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let path = if a.summary.is_dir() {
        a.summary.join("summary.json")
    } else {
        a.summary.clone()
    };
    let summary = RunSummary::load(&path)?;
    let signs = a.signs.as_deref().map(ingest_dir).transpose()?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let written = write_report(&summary, signs.as_ref(), &a.out, a.overlay)?;
    println!("wrote {} files to {}", written.len(), a.out.display());
    Ok(())
}

/// Loads a run directory's summary, for tools that post-process runs.
pub fn load_summary(dir: &Path) -> Result<RunSummary> {
    Ok(RunSummary::load(&dir.join("summary.json"))?)
}
