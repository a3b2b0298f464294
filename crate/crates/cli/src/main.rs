use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use spikerad::augment::AugmentParams;
use spikerad::complexity::ComplexityReport;
use spikerad::eval::{self, ConfusionMatrix, RunStats};
use spikerad::models::{train, Model, ModelKind, ModelSpec, TrainSettings};
use spikerad::pruning::{self, FinetuneConfig, PruneSchedule};
use spikerad::radar_dsp::{load_dataset, save_dataset, RdSequence};
use spikerad::scene_sim::{build_dataset, DatasetSpec};

/// Radar gesture pipeline: data synthesis, training, evaluation, pruning
/// and complexity profiling.
#[derive(Parser, Debug)]
#[command(name = "spikerad", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesise a balanced dataset of raw recordings.
    GenData(GenDataArgs),
    /// Convert raw recordings into range-Doppler map sequences.
    Preprocess(PreprocessArgs),
    /// Train a model and write its checkpoint.
    Train(TrainArgs),
    /// Accuracy, macro F1 and confusion matrix of one or more checkpoints.
    Eval(EvalArgs),
    /// Gradual magnitude pruning with fine-tuning; writes the sparsity curve.
    Prune(PruneArgs),
    /// FLOPs, effective FLOPs and memory footprint.
    Profile(ProfileArgs),
    /// Accuracy of an SNN checkpoint on growing sequence prefixes.
    LatencyCurve(LatencyArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 50)]
    per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Additive noise standard deviation of the beat signal.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    /// Directory with raw recordings and a manifest.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// `key = value` settings file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kind: Option<ModelKind>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Per-epoch loss/accuracy csv.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Repeat to aggregate several runs (mean and std).
    #[arg(long, required = true)]
    checkpoint: Vec<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Confusion matrix of the first checkpoint.
    #[arg(long)]
    confusion: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PruneArgs {
    /// Repeat to aggregate the curve over several trained models.
    #[arg(long, required = true)]
    checkpoint: Vec<PathBuf>,
    /// Fine-tuning data.
    #[arg(long)]
    data: PathBuf,
    /// Accuracy is measured here.
    #[arg(long)]
    eval_data: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    s_initial: f64,
    #[arg(long, default_value_t = 0.8)]
    s_final: f64,
    #[arg(long, default_value_t = 5)]
    steps: usize,
    #[arg(long, default_value_t = 20)]
    finetune_iters: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_augment: bool,
    #[arg(long)]
    out: PathBuf,
    /// Writes `level_KK.spkw` checkpoints of the first model here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Inputs for effective FLOPs.
    #[arg(long)]
    data: PathBuf,
    /// Use at most this many sequences (the first ones of the manifest).
    #[arg(long, default_value_t = 20)]
    max_inputs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LatencyArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn load_data(dir: &Path) -> anyhow::Result<Vec<RdSequence>> {
    let data = load_dataset(dir).with_context(|| format!("loading dataset {}", dir.display()))?;
    info!("loaded {} sequences from {}", data.len(), dir.display());
    Ok(data)
}

fn load_model(path: &Path) -> anyhow::Result<Model> {
    Model::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn gen_data(a: GenDataArgs) -> anyhow::Result<()> {
    let mut spec = DatasetSpec::new(a.classes, a.per_class);
    if let Some(n) = a.noise {
        spec.noise_sigma = n;
    }
    info!(
        "gen-data: classes = {}, per_class = {}, seed = {}, noise = {}, out = {}",
        spec.n_classes,
        spec.n_per_class,
        a.seed,
        spec.noise_sigma,
        a.out.display()
    );
    let m = build_dataset(&spec, a.seed, &a.out)?;
    info!("wrote {} recordings", m.entries.len());
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> anyhow::Result<()> {
    info!("preprocess: data = {}, out = {}", a.data.display(), a.out.display());
    let seqs = load_data(&a.data)?;
    save_dataset(&a.out, &seqs)?;
    info!("wrote {} sequences", seqs.len());
    Ok(())
}

fn run_train(a: TrainArgs) -> anyhow::Result<()> {
    let mut s = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            TrainSettings::parse(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => TrainSettings::new(ModelKind::Snn, 0),
    };
    if let Some(k) = a.kind {
        s.kind = k;
    }
    if let Some(seed) = a.seed {
        s.train.seed = seed;
    }
    if let Some(e) = a.epochs {
        s.train.epochs = e;
    }
    let data = load_data(&a.data)?;
    if s.n_classes == 0 {
        s.n_classes = data.iter().map(|d| d.label + 1).max().unwrap_or(0);
    }
    s.train.validate()?;
    info!("train: resolved config\n{}", s.to_text().trim_end());
    let (model, history) = train(ModelSpec::new(s.kind, s.n_classes), &data, &s.train)?;
    info!(
        "best epoch {} with validation accuracy {:.4}",
        history.best_epoch + 1,
        history.best_val_accuracy
    );
    model.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    info!("wrote {}", a.out.display());
    if let Some(h) = &a.history {
        write(h, &history.to_text())?;
    }
    Ok(())
}

fn run_eval(a: EvalArgs) -> anyhow::Result<()> {
    info!(
        "eval: checkpoints = {:?}, data = {}, out = {}",
        a.checkpoint,
        a.data.display(),
        a.out.display()
    );
    let data = load_data(&a.data)?;
    let mut stats = RunStats {
        seeds: Vec::new(),
        accuracy: Vec::new(),
        macro_f1: Vec::new(),
    };
    let mut first: Option<ConfusionMatrix> = None;
    for (i, p) in a.checkpoint.iter().enumerate() {
        let cm = eval::confusion(&load_model(p)?, &data)?;
        info!("{}: accuracy {:.4}", p.display(), eval::accuracy(&cm));
        stats.push(i as u64, &cm);
        first.get_or_insert(cm);
    }
    write(&a.out, &stats.to_text())?;
    if let (Some(path), Some(cm)) = (&a.confusion, first) {
        write(path, &cm.to_text())?;
    }
    Ok(())
}

fn run_prune(a: PruneArgs) -> anyhow::Result<()> {
    let schedule = PruneSchedule {
        s_initial: a.s_initial,
        s_final: a.s_final,
        n_steps: a.steps,
        finetune_iters: a.finetune_iters,
    };
    schedule.validate()?;
    let cfg = FinetuneConfig {
        batch: a.batch,
        lr: a.lr,
        seed: a.seed,
        augment: (!a.no_augment).then(AugmentParams::default),
    };
    info!("prune: schedule = {schedule:?}, finetune = {cfg:?}, checkpoints = {:?}", a.checkpoint);
    let train_data = load_data(&a.data)?;
    let eval_data = load_data(&a.eval_data)?;
    let mut runs = Vec::new();
    for p in &a.checkpoint {
        let levels = pruning::prune_and_finetune(&load_model(p)?, &train_data, &eval_data, &schedule, &cfg)?;
        if let Some(v) = levels.iter().find(|l| l.mask_violations > 0) {
            bail!("masked weights became non-zero at event {}", v.event);
        }
        if runs.is_empty() {
            if let Some(dir) = &a.out_dir {
                fs::create_dir_all(dir)?;
                for l in &levels {
                    l.model.save(&dir.join(format!("level_{:02}.spkw", l.event)))?;
                }
            }
        }
        runs.push(levels);
    }
    write(&a.out, &pruning::curve_to_text(&pruning::aggregate_curve(&runs)?))
}

fn run_profile(a: ProfileArgs) -> anyhow::Result<()> {
    info!(
        "profile: checkpoint = {}, data = {}, max_inputs = {}",
        a.checkpoint.display(),
        a.data.display(),
        a.max_inputs
    );
    let model = load_model(&a.checkpoint)?;
    let mut data = load_data(&a.data)?;
    data.truncate(a.max_inputs.max(1));
    let report = ComplexityReport::build(&model, &data)?;
    write(&a.out, &report.to_text())
}

fn run_latency(a: LatencyArgs) -> anyhow::Result<()> {
    info!("latency-curve: checkpoint = {}, data = {}", a.checkpoint.display(), a.data.display());
    let model = load_model(&a.checkpoint)?;
    let data = load_data(&a.data)?;
    write(&a.out, &eval::curve_to_text(&eval::latency_curve(&model, &data)?))
}

/// Exit code and short kind tag of a failure.
fn classify(e: &anyhow::Error) -> (u8, &'static str) {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<spikerad::Error>() {
            return match err {
                spikerad::Error::Io(_) => (1, "io"),
                spikerad::Error::Format { .. } => (1, "format"),
                spikerad::Error::Config(_) | spikerad::Error::InvalidArgument(_) => (2, "config"),
                _ => (1, "runtime"),
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return (1, "io");
        }
    }
    (1, "runtime")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Command::GenData(a) => gen_data(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Prune(a) => run_prune(a),
        Command::Profile(a) => run_profile(a),
        Command::LatencyCurve(a) => run_latency(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = classify(&e);
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error kind={kind} message={msg}");
            ExitCode::from(code)
        }
    }
}
