//! The `probe` command-line tool.
//!
//! Exit codes: 0 success, 2 bad flags or arguments, 3 unreadable or malformed
//! input files (including incompatible models), 4 numeric failures.
//! Diagnostics and a one-line-per-stage log go to standard error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::apcr::{self, apcr_histogram, apcr_matrix, histogram_csv, ApcrMatrix, ApcrVariant};
use crate::controlset::{
    intersection_ratio, optimize_class2class, optimize_weights, sequential_controlling_set,
    threshold_controlling_set, OptimizerConfig, Penalty, Selection,
};
use crate::error::{ProbeError, Result};
use crate::latent::{sample_latents, ConceptId, ControllingSet, Sign};
use crate::manipulate::{
    extreme_impulse, frames_report, manipulate_with_set, render_montage, translate,
    DEFAULT_IMPULSE,
};
use crate::models::{
    load_model, make_synthetic_generator, sample_class_latents, Classifier, Generator, Image,
    NetworkModel, SyntheticClassifier, SyntheticGenerator, SyntheticSpec,
};

#[derive(Debug, Parser)]
#[command(name = "probe", version, about = "Latent-space correlation analysis for generators")]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep every latent dim and write the APCR table.
    Apcr(ApcrArgs),
    /// Optimize intervention weights for one class.
    Optimize(OptimizeArgs),
    /// Optimize a class-to-class weight vector and apply it.
    Translate(TranslateArgs),
    /// Steer generations along a controlling set.
    Manipulate(ManipulateArgs),
    /// Apply large single-dimension impulses.
    Impulse(ImpulseArgs),
    /// Intersection ratio of two controlling-set files.
    Ir(IrArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Generator weights (LPWF).
    #[arg(long, required_unless_present = "synth")]
    pub gen: Option<PathBuf>,

    /// Classifier weights (LPWF).
    #[arg(long, required_unless_present = "synth")]
    pub clf: Option<PathBuf>,

    /// Synthetic testbed spec (JSON) instead of model files.
    #[arg(long, conflicts_with_all = ["gen", "clf"])]
    pub synth: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Endpoint,
    TotalVariation,
}

impl From<VariantArg> for ApcrVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Endpoint => ApcrVariant::Endpoint,
            VariantArg::TotalVariation => ApcrVariant::TotalVariation,
        }
    }
}

#[derive(Debug, Args)]
pub struct ApcrArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long, default_value_t = apcr::DEFAULT_DELTA)]
    pub delta: f64,
    /// Steps per direction (m).
    #[arg(long, default_value_t = apcr::DEFAULT_STEPS)]
    pub steps: usize,
    /// Number of base latents averaged; 1 analyzes a single base.
    #[arg(long, default_value_t = apcr::DEFAULT_BASES)]
    pub bases: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = VariantArg::Endpoint)]
    pub variant: VariantArg,
    /// APCR table (CSV).
    #[arg(long)]
    pub out: PathBuf,
    /// APCR table with metadata (JSON).
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Histogram of one class's scores (CSV); needs --class.
    #[arg(long, requires = "class")]
    pub hist: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long)]
    pub class: Option<usize>,
    /// Directory for per-class sequential controlling sets (seq_class<j>.json).
    #[arg(long)]
    pub sets_dir: Option<PathBuf>,
    #[arg(long, default_value_t = crate::controlset::DEFAULT_TOP_K)]
    pub topk: usize,
}

#[derive(Debug, Args)]
pub struct OptimizerArgs {
    #[arg(long, default_value_t = 3.0)]
    pub xi: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub fd_step: f64,
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    /// Base latents per objective evaluation.
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    /// Penalize the squared norm instead of the norm.
    #[arg(long)]
    pub squared: bool,
    /// Independent starts; the lowest final objective wins.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl OptimizerArgs {
    fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            xi: self.xi,
            lambda: self.lambda,
            iterations: self.iters,
            step_size: self.step,
            fd_step: self.fd_step,
            // bases come from `seed`, the initial weights from the next seed
            seed: self.seed.wrapping_add(1),
            init_scale: self.init_scale,
            batch: self.batch,
            penalty: if self.squared { Penalty::SquaredL2 } else { Penalty::L2 },
            restarts: self.restarts,
        }
    }
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub class: usize,
    #[command(flatten)]
    pub opt: OptimizerArgs,
    #[arg(long, default_value_t = crate::controlset::DEFAULT_TOP_K)]
    pub topk: usize,
    /// Keep dims with |w| above this instead of the top k.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Optimization result (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Controlling set (JSON).
    #[arg(long)]
    pub set: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub from: usize,
    #[arg(long)]
    pub to: usize,
    #[command(flatten)]
    pub opt: OptimizerArgs,
    /// Latents per class shown in the montage and used to report flip rates.
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
    /// Give up finding class-conditional latents after this many draws.
    #[arg(long, default_value_t = 200_000)]
    pub max_draws: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub montage: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ManipulateArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    /// Controlling set (JSON).
    #[arg(long)]
    pub set: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    pub strength: f64,
    #[arg(long, default_value_t = 8)]
    pub steps: usize,
    /// Number of base latents (one montage row each).
    #[arg(long, default_value_t = 4)]
    pub bases: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub montage: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImpulseArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = DEFAULT_IMPULSE)]
    pub mag: f64,
    #[arg(long, default_value_t = 8)]
    pub bases: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Rows: positive impulse, base, negative impulse.
    #[arg(long)]
    pub montage: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IrArgs {
    pub a: PathBuf,
    pub b: PathBuf,
}

enum Models {
    Network(NetworkModel, NetworkModel),
    Synthetic(SyntheticGenerator, SyntheticClassifier),
}

impl Models {
    fn load(args: &ModelArgs) -> Result<Self> {
        if let Some(spec_path) = &args.synth {
            let spec: SyntheticSpec = serde_json::from_str(&std::fs::read_to_string(spec_path)?)?;
            let (g, c) = make_synthetic_generator(&spec)?;
            return Ok(Models::Synthetic(g, c));
        }
        let (Some(gen), Some(clf)) = (&args.gen, &args.clf) else {
            return Err(ProbeError::invalid("--gen and --clf are required without --synth"));
        };
        let g = load_model(gen)?;
        let c = load_model(clf)?;
        crate::models::check_pair(&g, &c)?;
        Ok(Models::Network(g, c))
    }

    fn pair(&self) -> (&dyn Generator, &dyn Classifier) {
        match self {
            Models::Network(g, c) => (g, c),
            Models::Synthetic(g, c) => (g, c),
        }
    }
}

fn log(msg: impl AsRef<str>) {
    eprintln!("probe: {}", msg.as_ref());
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn concept(index: usize, clf: &dyn Classifier) -> Result<ConceptId> {
    ConceptId::new(index, clf.num_classes())
        .map_err(|_| ProbeError::invalid(format!("class {index} outside 0..{}", clf.num_classes())))
}

fn cmd_apcr(args: &ApcrArgs) -> Result<()> {
    let models = Models::load(&args.models)?;
    let (gen, clf) = models.pair();
    let bases = sample_latents(gen.latent_width(), args.bases, args.seed)?;
    log(format!(
        "apcr: {} dims x {} classes, {} bases, delta {}, m {}",
        gen.latent_width(),
        clf.num_classes(),
        bases.len(),
        args.delta,
        args.steps
    ));
    let matrix = apcr_matrix(gen, clf, &bases, args.delta, args.steps, args.variant.into())?;
    std::fs::write(&args.out, matrix.to_csv())?;
    log(format!("apcr: wrote {}", args.out.display()));
    if let Some(path) = &args.json {
        write_json(path, &matrix)?;
    }
    if let (Some(path), Some(class)) = (&args.hist, args.class) {
        let hist = apcr_histogram(&matrix, concept(class, clf)?, args.bins)?;
        std::fs::write(path, histogram_csv(&hist))?;
        log(format!("apcr: wrote histogram {}", path.display()));
    }
    if let Some(dir) = &args.sets_dir {
        write_sequential_sets(&matrix, dir, args.topk)?;
        log(format!("apcr: wrote sequential top-{} sets to {}", args.topk, dir.display()));
    }
    Ok(())
}

fn write_sequential_sets(matrix: &ApcrMatrix, dir: &Path, k: usize) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for j in 0..matrix.num_classes() {
        let set = sequential_controlling_set(matrix, ConceptId::new(j, matrix.num_classes())?, k)?;
        write_json(&dir.join(format!("seq_class{j}.json")), &set)?;
    }
    Ok(())
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<()> {
    let models = Models::load(&args.models)?;
    let (gen, clf) = models.pair();
    let target = concept(args.class, clf)?;
    let cfg = args.opt.config();
    let bases = sample_latents(gen.latent_width(), cfg.batch, args.opt.seed)?;
    log(format!(
        "optimize: class {target}, {} iterations, batch {}",
        cfg.iterations, cfg.batch
    ));
    let result = optimize_weights(gen, clf, &bases, target, &cfg)?;
    log(format!(
        "optimize: objective {:.6} -> {:.6}, |dS| {:.6}",
        result.initial_objective,
        result.final_objective(),
        result.delta_s[0]
    ));
    write_json(&args.out, &result)?;
    if let Some(path) = &args.set {
        let mode = match args.threshold {
            Some(t) => Selection::AbsThreshold(t),
            None => Selection::TopK(args.topk),
        };
        write_json(path, &threshold_controlling_set(&result, target, mode)?)?;
        log(format!("optimize: wrote set {}", path.display()));
    }
    Ok(())
}

fn cmd_translate(args: &TranslateArgs) -> Result<()> {
    let models = Models::load(&args.models)?;
    let (gen, clf) = models.pair();
    let j = concept(args.from, clf)?;
    let k = concept(args.to, clf)?;
    let cfg = args.opt.config();
    let count = cfg.batch.max(args.samples);
    let bases_j = sample_class_latents(gen, clf, j, count, args.opt.seed, args.max_draws)?;
    let bases_k = sample_class_latents(gen, clf, k, count, args.opt.seed ^ 0x9e37_79b9, args.max_draws)?;
    log(format!("translate: optimizing {j} <-> {k}, {} iterations", cfg.iterations));
    let result = optimize_class2class(
        gen,
        clf,
        &bases_j[..cfg.batch],
        &bases_k[..cfg.batch],
        j,
        k,
        &cfg,
    )?;
    write_json(&args.out, &result)?;

    let mut grid: Vec<Vec<Image>> = vec![Vec::new(); 4];
    let mut flips = [0usize; 2];
    for (row, (bases, sign, goal)) in [(&bases_j, Sign::Positive, k), (&bases_k, Sign::Negative, j)]
        .into_iter()
        .enumerate()
    {
        for z in &bases[..args.samples] {
            let (img, probs) = translate(gen, clf, z, &result.w, cfg.xi, sign)?;
            flips[row] += usize::from(probs.argmax() == goal);
            grid[2 * row].push(gen.generate(z)?);
            grid[2 * row + 1].push(img);
        }
    }
    log(format!(
        "translate: {j}->{k} flipped {}/{n}, {k}->{j} flipped {}/{n}",
        flips[0],
        flips[1],
        n = args.samples
    ));
    if let Some(path) = &args.montage {
        render_montage(&grid, path)?;
    }
    Ok(())
}

fn cmd_manipulate(args: &ManipulateArgs) -> Result<()> {
    let models = Models::load(&args.models)?;
    let (gen, clf) = models.pair();
    let set = ControllingSet::load(&args.set)?;
    let bases = sample_latents(gen.latent_width(), args.bases, args.seed)?;
    log(format!(
        "manipulate: class {} with {} dims, strength {}, {} steps",
        set.concept(),
        set.len(),
        args.strength,
        args.steps
    ));
    let mut grid = Vec::with_capacity(bases.len());
    let mut report = Vec::with_capacity(bases.len());
    for z in &bases {
        let frames = manipulate_with_set(gen, clf, z, &set, args.strength, args.steps)?;
        report.push(frames_report(&frames));
        grid.push(frames.into_iter().map(|f| f.image).collect());
    }
    if let Some(path) = &args.montage {
        render_montage(&grid, path)?;
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct ImpulseRecord {
    base_class: usize,
    positive_class: usize,
    negative_class: usize,
}

fn cmd_impulse(args: &ImpulseArgs) -> Result<()> {
    let models = Models::load(&args.models)?;
    let (gen, clf) = models.pair();
    let bases = sample_latents(gen.latent_width(), args.bases, args.seed)?;
    log(format!("impulse: dim {} magnitude {}", args.dim, args.mag));
    let mut grid: Vec<Vec<Image>> = vec![Vec::new(); 3];
    let mut report = Vec::with_capacity(bases.len());
    for z in &bases {
        let base_img = gen.generate(z)?;
        let base_class = clf.classify(&base_img)?.argmax();
        let (pos, pos_class) = extreme_impulse(gen, clf, z, args.dim, args.mag, Sign::Positive)?;
        let (neg, neg_class) = extreme_impulse(gen, clf, z, args.dim, args.mag, Sign::Negative)?;
        grid[0].push(pos);
        grid[1].push(base_img);
        grid[2].push(neg);
        report.push(ImpulseRecord {
            base_class: base_class.index(),
            positive_class: pos_class.index(),
            negative_class: neg_class.index(),
        });
    }
    if let Some(path) = &args.montage {
        render_montage(&grid, path)?;
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    Ok(())
}

fn cmd_ir(args: &IrArgs) -> Result<f64> {
    let a = ControllingSet::load(&args.a)?;
    let b = ControllingSet::load(&args.b)?;
    intersection_ratio(&a, &b)
}

/// Exit code for a library error.
pub fn exit_code(err: &ProbeError) -> i32 {
    match err {
        ProbeError::InvalidArgument(_) | ProbeError::InvalidSize(_) | ProbeError::Index { .. } => 2,
        ProbeError::Format { .. }
        | ProbeError::Validation(_)
        | ProbeError::Spec(_)
        | ProbeError::Shape { .. }
        | ProbeError::Io(_)
        | ProbeError::Json(_) => 3,
        ProbeError::Numeric { .. } => 4,
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Apcr(a) => cmd_apcr(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Translate(a) => cmd_translate(a),
        Command::Manipulate(a) => cmd_manipulate(a),
        Command::Impulse(a) => cmd_impulse(a),
        Command::Ir(a) => {
            println!("{:.4}", cmd_ir(a)?);
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.threads {
        Some(0) => Err(ProbeError::invalid("--threads must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ProbeError::invalid(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(&cli))),
        None => dispatch(&cli),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("probe: error: {e}");
            exit_code(&e)
        }
    }
}
