//! `meshmlp`: preprocess, train, eval, predict and info over mesh datasets.
//!
//! JSON results go to stdout and human-readable logs to stderr. Exit codes
//! are 0 on success, 1 on user error and 2 on internal error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use meshmlp::geometry::{validate, ValidationReport};
use meshmlp::mesh::{parse_mesh, subset_training_set, write_labeled_mesh, MeshFormat};
use meshmlp::model::{ModelError, NetworkConfig};
use meshmlp::pipeline::{
    load_model, load_split, predict_sample, save_model, train_samples, Sample,
};
use meshmlp::{DatasetManifest, FeatureToggles, NormKind, PipelineError, Split, Task, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "meshmlp", version, about = "Residual-MLP mesh classification and segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute and cache per-vertex features for every manifest entry.
    Preprocess(PreprocessArgs),
    /// Train a network and write its checkpoint and a JSONL log.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a manifest split and print metrics.
    Eval(EvalArgs),
    /// Print per-mesh predictions, optionally writing labeled meshes.
    Predict(PredictArgs),
    /// Print mesh or manifest statistics.
    Info(InfoArgs),
}

fn parse_features(s: &str) -> Result<FeatureToggles, String> {
    s.parse().map_err(|e: PipelineError| e.to_string())
}

fn parse_norm(s: &str) -> Result<NormKind, String> {
    NormKind::parse(s).ok_or_else(|| format!("expected one of ln, bn, gn, in, grn; got '{s}'"))
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        _ => Err(format!("expected train or test; got '{s}'")),
    }
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    cache: PathBuf,
    #[arg(long, value_parser = parse_features, default_value = "xyz,normal,dihedral,hks")]
    features: FeatureToggles,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output checkpoint; its network config is written to `<checkpoint>.json`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Read-only feature cache produced by `preprocess`.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Training log (JSON lines); defaults to `<checkpoint>.log.jsonl`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON training config; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_features)]
    features: Option<FeatureToggles>,
    #[arg(long, value_parser = parse_norm)]
    norm: Option<NormKind>,
    /// Keep ceil(N / divisor) training meshes.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    subset_divisor: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    /// Meshes per optimizer step.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    accum: Option<u64>,
    #[arg(long)]
    eval_every: Option<usize>,
    /// Divide every network width by this factor (1 keeps the full network).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), default_value_t = 1)]
    width_divisor: u64,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, value_parser = parse_split, default_value = "test")]
    split: Split,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Mesh files to label (repeatable).
    #[arg(long, required_unless_present = "manifest")]
    mesh: Vec<PathBuf>,
    /// Predict every entry of the test split instead.
    #[arg(long, conflicts_with = "mesh")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Directory for labeled OBJ files (segmentation only).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct InfoArgs {
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// A failed command: exit code 1 for user errors, 2 for internal ones.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn internal(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

/// Errors from reading inputs are the user's; numeric and solver failures
/// are ours.
impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::NonFiniteLoss { .. } | PipelineError::Tensor(_) | PipelineError::Spectral(_) => 2,
            PipelineError::Model(ModelError::Tensor(_)) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<Value, Failure>;

fn load_manifest(path: &Path) -> Result<DatasetManifest, Failure> {
    DatasetManifest::load(path).map_err(|e| usage(format!("--manifest: {e}")))
}

fn require_dir_for(flag: &str, path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(usage(format!("{flag}: directory {} does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

fn require_existing_dir(flag: &str, path: &Path) -> Result<(), Failure> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(usage(format!("{flag}: {} is not a directory", path.display())))
    }
}

fn preprocess(a: PreprocessArgs) -> CmdResult {
    let manifest = load_manifest(&a.manifest)?;
    let report = meshmlp::pipeline::precompute_features(&manifest, a.features, &a.cache, None)?;
    log::info!(
        "{} computed, {} reused, {} failed",
        report.computed,
        report.reused,
        report.failed.len()
    );
    Ok(json!({
        "computed": report.computed,
        "reused": report.reused,
        "failed": report.failed,
        "total": report.total(),
    }))
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig, Failure> {
    let mut c = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| usage(format!("--config: {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("--config: {}: {e}", p.display())))?
        }
        None => TrainConfig::default(),
    };
    if let Some(f) = a.features {
        c.features = f;
    }
    if let Some(n) = a.norm {
        c.norm = n;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(e) = a.epochs {
        c.epochs = e as usize;
    }
    if let Some(lr) = a.lr {
        c.lr = lr;
    }
    if let Some(b) = a.accum {
        c.accumulation = b as usize;
    }
    if let Some(e) = a.eval_every {
        c.eval_every = e;
    }
    c.validate().map_err(|e| usage(e.to_string()))?;
    Ok(c)
}

fn train(a: TrainArgs) -> CmdResult {
    let config = train_config(&a)?;
    let mut manifest = load_manifest(&a.manifest)?;
    manifest.require_train_and_test().map_err(|e| usage(format!("--manifest: {e}")))?;
    if let Some(c) = &a.cache {
        require_existing_dir("--cache", c)?;
    }
    require_dir_for("--checkpoint", &a.checkpoint)?;
    let log_path = a.out.clone().unwrap_or_else(|| {
        let mut s = a.checkpoint.as_os_str().to_owned();
        s.push(".log.jsonl");
        PathBuf::from(s)
    });
    require_dir_for("--out", &log_path)?;
    let k = manifest.num_classes as usize;
    let base = match a.width_divisor {
        1 => NetworkConfig::new(manifest.task, k),
        d => NetworkConfig::scaled_down(manifest.task, k, d as usize),
    };
    let net_config = meshmlp::pipeline::network_config_for(&manifest, &config, Some(base))
        .map_err(|e| usage(format!("--width-divisor: {e}")))?;
    if let Some(d) = a.subset_divisor {
        manifest = subset_training_set(&manifest, d as usize, config.seed);
    }

    let train_set = load_split(&manifest, Split::Train, config.features, a.cache.as_deref())?;
    let test_set = load_split(&manifest, Split::Test, config.features, a.cache.as_deref())?;
    log::info!("training on {} meshes, testing on {}", train_set.len(), test_set.len());
    let network = meshmlp::model::Network::new(net_config, config.seed).map_err(|e| usage(e.to_string()))?;
    log::info!("{} trainable parameters", network.trainable_count());

    let file = File::create(&log_path).map_err(|e| internal(format!("{}: {e}", log_path.display())))?;
    let mut log_file = BufWriter::new(file);
    let mut write_error = None;
    let outcome = train_samples(network, &train_set, &test_set, &config, |r| {
        log::info!("epoch {} loss {:.5}", r.epoch, r.train_loss);
        let line = serde_json::to_string(r).expect("record serializes");
        if let Err(e) = writeln!(log_file, "{line}").and_then(|_| log_file.flush()) {
            write_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_error {
        return Err(internal(format!("{}: {e}", log_path.display())));
    }
    save_model(&outcome.network, config.features, &a.checkpoint).map_err(|e| internal(e.to_string()))?;
    let last = outcome.log.last().expect("at least one epoch");
    Ok(json!({
        "checkpoint": a.checkpoint,
        "log": log_path,
        "train_size": train_set.len(),
        "test_size": test_set.len(),
        "epochs": last.epoch,
        "final": last,
    }))
}

fn eval(a: EvalArgs) -> CmdResult {
    let manifest = load_manifest(&a.manifest)?;
    let (mut net, features) = load_model(&a.checkpoint)?;
    check_task(&manifest, net.config())?;
    let samples = load_split(&manifest, a.split, features, a.cache.as_deref())?;
    if samples.is_empty() {
        return Err(usage("--manifest: the requested split is empty"));
    }
    let metrics = meshmlp::pipeline::evaluate(&mut net, &samples)?;
    Ok(serde_json::to_value(metrics).expect("metrics serialize"))
}

fn check_task(manifest: &DatasetManifest, net: &NetworkConfig) -> Result<(), Failure> {
    if manifest.task != net.task || manifest.num_classes as usize != net.num_classes {
        return Err(usage(format!(
            "--checkpoint: trained for {:?} with {} classes, manifest is {:?} with {}",
            net.task, net.num_classes, manifest.task, manifest.num_classes
        )));
    }
    Ok(())
}

fn predict(a: PredictArgs) -> CmdResult {
    let (mut net, features) = load_model(&a.checkpoint)?;
    let task = net.config().task;
    if let Some(out) = &a.out {
        if task != Task::Segmentation {
            return Err(usage("--out: labeled meshes are only written for segmentation checkpoints"));
        }
        require_existing_dir("--out", out)?;
    }
    let inputs: Vec<(PathBuf, Sample)> = match &a.manifest {
        Some(m) => {
            let manifest = load_manifest(m)?;
            check_task(&manifest, net.config())?;
            let paths = manifest.split(Split::Test).map(|e| e.mesh.clone());
            let samples = load_split(&manifest, Split::Test, features, a.cache.as_deref())?;
            paths.zip(samples).collect()
        }
        None => a
            .mesh
            .iter()
            .map(|p| {
                let mesh = parse_mesh(p, MeshFormat::Auto).map_err(|e| usage(format!("--mesh: {e}")))?;
                Ok((p.clone(), Sample::unlabeled(p.display().to_string(), &mesh, features)?))
            })
            .collect::<Result<_, Failure>>()?,
    };
    let mut results = Vec::new();
    for (path, sample) in &inputs {
        let prediction = predict_sample(&mut net, sample)?;
        let mut entry = json!({ "mesh": path, "prediction": prediction });
        if let (Some(out), meshmlp::pipeline::Prediction::Faces(labels)) = (&a.out, &prediction) {
            let mesh = parse_mesh(path, MeshFormat::Auto).map_err(|e| usage(e.to_string()))?;
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let target = out.join(format!("{stem}.obj"));
            write_labeled_mesh(&mesh, labels, &target).map_err(|e| internal(e.to_string()))?;
            entry["labeled_mesh"] = json!(target);
        }
        results.push(entry);
    }
    Ok(json!({ "predictions": results }))
}

fn mesh_info(path: &Path) -> Result<ValidationReport, Failure> {
    let mesh = parse_mesh(path, MeshFormat::Auto).map_err(|e| usage(e.to_string()))?;
    Ok(validate(&mesh))
}

fn info(a: InfoArgs) -> CmdResult {
    if let Some(m) = &a.mesh {
        return Ok(serde_json::to_value(mesh_info(m)?).expect("report serializes"));
    }
    let path = a.manifest.as_deref().expect("clap requires one of --mesh, --manifest");
    let manifest = load_manifest(path)?;
    let mut per_class = vec![0usize; manifest.num_classes as usize];
    for e in manifest.split(Split::Train) {
        if let Some(c) = e.class {
            if let Some(slot) = per_class.get_mut(c as usize) {
                *slot += 1;
            }
        }
    }
    let (mut non_manifold, mut open, mut multi_component, mut unreadable) = (0, 0, 0, Vec::new());
    let (mut vertices, mut faces) = (Vec::new(), Vec::new());
    for e in &manifest.entries {
        match mesh_info(&e.mesh) {
            Ok(r) => {
                non_manifold += usize::from(!r.is_manifold);
                open += usize::from(!r.is_watertight);
                multi_component += usize::from(r.components > 1);
                vertices.push(r.vertex_count);
                faces.push(r.face_count);
            }
            Err(f) => unreadable.push(json!({ "mesh": e.mesh, "error": f.message })),
        }
    }
    let range = |v: &[usize]| json!({ "min": v.iter().min(), "max": v.iter().max() });
    Ok(json!({
        "task": manifest.task,
        "num_classes": manifest.num_classes,
        "train": manifest.count(Split::Train),
        "test": manifest.count(Split::Test),
        "train_per_class": if manifest.task == Task::Classification { json!(per_class) } else { Value::Null },
        "vertices": range(&vertices),
        "faces": range(&faces),
        "non_manifold_meshes": non_manifold,
        "open_meshes": open,
        "multi_component_meshes": multi_component,
        "unreadable": unreadable,
    }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Info(a) => info(a),
    };
    match result {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
