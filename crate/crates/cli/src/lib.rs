//! Command implementations for the `emopool` binary.

pub mod config;

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use emopool::aggregate::build_video_descriptor;
use emopool::ensemble::{
    load_predictions, load_scores, load_weights, parse_weights, predict, render_predictions,
    render_scores, render_weights, run_ensemble, ScoreMode, WeightsKind,
};
use emopool::eval::{evaluate, render_report};
use emopool::ingest::{load_descriptors, load_manifest, write_descriptors, Manifest};
use emopool::svm::{cross_validate_c, fit_stream_model, LinearSvmModel};
use emopool::synth::{generate_dataset, SynthConfig};
use emopool::{EmotionLabel, Split, StreamData, VideoDescriptor};

pub use config::PipelineConfig;

/// Block name used for streams that arrive as one vector per video.
pub const VECTOR_BLOCK: &str = "raw";

#[derive(Debug, Parser)]
#[command(
    name = "emopool",
    version,
    about = "Video-level emotion classification from per-frame features"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with a manifest.
    Synth(SynthArgs),
    /// Pool per-frame features into one descriptor table per stream.
    Aggregate(AggregateArgs),
    /// Pick C by stratified k-fold cross-validation.
    Cv(CvArgs),
    /// Fit normalization and one-vs-rest SVMs for one stream.
    Train(TrainArgs),
    /// Score descriptors with a trained model.
    Predict(PredictArgs),
    /// Combine per-stream scores and predict labels.
    Ensemble(EnsembleArgs),
    /// Turn class counts into class weights.
    Weigh(WeighArgs),
    /// Compare predictions with manifest labels.
    Evaluate(EvaluateArgs),
}

/// Comma-separated split names, e.g. `train,val`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitList(pub Vec<Split>);

impl FromStr for SplitList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut splits = Vec::new();
        for part in s.split(',').map(str::trim) {
            let split: Split = part.parse().map_err(|e: emopool::Error| e.to_string())?;
            if !splits.contains(&split) {
                splits.push(split);
            }
        }
        Ok(SplitList(splits))
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator config (JSON); defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; receives manifest.jsonl and one folder per stream.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Pipeline config (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; receives `<stream>.csv` per stream.
    #[arg(long)]
    pub out: PathBuf,
    /// Splits to aggregate (default: all).
    #[arg(long)]
    pub splits: Option<SplitList>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DescriptorArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory written by `aggregate`.
    #[arg(long)]
    pub descriptors: PathBuf,
    /// Stream to use; may be omitted when the directory holds one table.
    #[arg(long)]
    pub stream: Option<String>,
    #[arg(long)]
    pub splits: Option<SplitList>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DescriptorArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Optional JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DescriptorArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's C.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DescriptorArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Score table to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write argmax predictions here.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Raw,
    Softmax,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightsKindArg {
    Counts,
    Weights,
}

impl From<WeightsKindArg> for WeightsKind {
    fn from(k: WeightsKindArg) -> Self {
        match k {
            WeightsKindArg::Counts => WeightsKind::Counts,
            WeightsKindArg::Weights => WeightsKind::Weights,
        }
    }
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Score table from `predict`; repeat once per stream.
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's score mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Class weights or counts file, applied after combining.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "counts")]
    pub weights_kind: WeightsKindArg,
    /// Predictions file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the combined (and weighted) scores here.
    #[arg(long)]
    pub scores_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WeighArgs {
    /// Seven comma-separated class counts in canonical order.
    #[arg(
        long,
        conflicts_with = "counts_file",
        required_unless_present = "counts_file"
    )]
    pub counts: Option<String>,
    #[arg(long)]
    pub counts_file: Option<PathBuf>,
    /// Weights file to write; printed to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// Runs one command; human-readable output goes to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Aggregate(a) => cmd_aggregate(&a, out),
        Command::Cv(a) => cmd_cv(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Ensemble(a) => cmd_ensemble(&a, out),
        Command::Weigh(a) => cmd_weigh(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    load_manifest(path).with_context(|| format!("loading manifest {}", path.display()))
}

fn split_names(splits: &[Split]) -> String {
    splits
        .iter()
        .map(|s| s.as_str())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg: SynthConfig = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let manifest = generate_dataset(&cfg, &args.out)?;
    writeln!(
        out,
        "wrote {} videos to {}",
        manifest.entries.len(),
        args.out.display()
    )?;
    Ok(())
}

pub fn cmd_aggregate(args: &AggregateArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = PipelineConfig::load(args.config.as_deref(), args.seed)?;
    let manifest = read_manifest(&args.manifest)?;
    let splits = args
        .splits
        .clone()
        .map_or_else(|| Split::ALL.to_vec(), |s| s.0);
    let entries: Vec<_> = manifest.entries_in(&splits).collect();
    if entries.is_empty() {
        bail!(
            "no videos in {} for splits {}",
            args.manifest.display(),
            split_names(&splits)
        );
    }
    let streams = cfg.select_streams(&manifest.stream_names())?;

    let samples = entries
        .par_iter()
        .map(|e| {
            manifest
                .load_sample(e)
                .with_context(|| format!("video {}", e.id))
        })
        .collect::<Result<Vec<_>>>()?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for stream in &streams {
        let agg = cfg.aggregation_for(stream);
        let descriptors = samples
            .par_iter()
            .map(|s| {
                let data = s
                    .streams
                    .get(stream)
                    .ok_or_else(|| anyhow!("video {} has no stream {stream}", s.video_id))?;
                let d = match data {
                    StreamData::Frames(seq) => build_video_descriptor(seq, agg),
                    StreamData::Vector(v) => VideoDescriptor::new(
                        &s.video_id,
                        v.clone(),
                        vec![(VECTOR_BLOCK.to_string(), v.len())],
                    ),
                };
                d.with_context(|| format!("video {}", s.video_id))
            })
            .collect::<Result<Vec<_>>>()?;
        let dim = descriptors[0].dim();
        if let Some(bad) = descriptors.iter().find(|d| d.dim() != dim) {
            bail!(
                "stream {stream}: video {} has {} columns, expected {dim}",
                bad.video_id,
                bad.dim()
            );
        }
        let path = args.out.join(format!("{stream}.csv"));
        write_descriptors(&path, &descriptors)?;
        writeln!(out, "{stream}: {} videos, D={dim}", descriptors.len())?;
    }
    Ok(())
}

/// Descriptor rows of the selected splits, in manifest order.
struct StreamRows {
    stream: String,
    ids: Vec<String>,
    x: Vec<Vec<f64>>,
    labels: Vec<Option<EmotionLabel>>,
    descriptors: Vec<VideoDescriptor>,
}

impl StreamRows {
    fn required_labels(&self) -> Result<Vec<EmotionLabel>> {
        self.labels
            .iter()
            .zip(&self.ids)
            .map(|(l, id)| l.ok_or_else(|| anyhow!("video {id} has no label")))
            .collect()
    }
}

fn pick_stream(data: &DescriptorArgs) -> Result<String> {
    if let Some(s) = &data.stream {
        return Ok(s.clone());
    }
    let mut names: Vec<String> = fs::read_dir(&data.descriptors)
        .with_context(|| format!("listing {}", data.descriptors.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    names.sort();
    match names.as_slice() {
        [one] => Ok(one.clone()),
        [] => bail!("no descriptor tables in {}", data.descriptors.display()),
        _ => bail!(
            "several streams in {} ({}); pass --stream",
            data.descriptors.display(),
            names.join(", ")
        ),
    }
}

fn load_rows(data: &DescriptorArgs, default_splits: &[Split]) -> Result<(StreamRows, Vec<Split>)> {
    let manifest = read_manifest(&data.manifest)?;
    let splits = data
        .splits
        .clone()
        .map_or_else(|| default_splits.to_vec(), |s| s.0);
    let stream = pick_stream(data)?;
    let path = data.descriptors.join(format!("{stream}.csv"));
    let mut table: HashMap<String, VideoDescriptor> = load_descriptors(&path)
        .with_context(|| format!("loading {}", path.display()))?
        .into_iter()
        .map(|d| (d.video_id.clone(), d))
        .collect();
    let mut rows = StreamRows {
        stream,
        ids: vec![],
        x: vec![],
        labels: vec![],
        descriptors: vec![],
    };
    for e in manifest.entries_in(&splits) {
        let d = table
            .remove(&e.id)
            .ok_or_else(|| anyhow!("no descriptor for video {} in {}", e.id, path.display()))?;
        rows.ids.push(e.id.clone());
        rows.x.push(d.features.clone());
        rows.labels.push(e.label);
        rows.descriptors.push(d);
    }
    if rows.ids.is_empty() {
        bail!("no videos for splits {}", split_names(&splits));
    }
    Ok((rows, splits))
}

pub fn cmd_cv(args: &CvArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = PipelineConfig::load(args.config.as_deref(), args.seed)?;
    let (rows, splits) = load_rows(&args.data, &[Split::Train])?;
    let labels = rows.required_labels()?;
    let report = cross_validate_c(
        &rows.ids,
        &rows.x,
        &labels,
        cfg.normalization,
        &cfg.svm,
        &cfg.cv,
    )?;
    writeln!(
        out,
        "{}: {}-fold CV on {} videos ({})",
        rows.stream,
        report.folds,
        rows.ids.len(),
        split_names(&splits)
    )?;
    for r in &report.rows {
        writeln!(out, "C={:<12} mean_accuracy={:.4}", r.c, r.mean_accuracy)?;
    }
    writeln!(out, "best C {}", report.best_c)?;
    if let Some(path) = &args.out {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write_file(path, &json)?;
    }
    Ok(())
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = PipelineConfig::load(args.config.as_deref(), args.seed)?;
    let svm = match args.c {
        Some(c) => cfg.svm.with_c(c),
        None => cfg.svm,
    };
    let (rows, splits) = load_rows(&args.data, &[Split::Train])?;
    let labels = rows.required_labels()?;
    let model = fit_stream_model(&rows.x, &labels, cfg.normalization, &svm)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    model.save(&args.out)?;
    writeln!(
        out,
        "{}: trained on {} videos ({}), D={}, C={}",
        rows.stream,
        rows.ids.len(),
        split_names(&splits),
        model.input_dim(),
        svm.c
    )?;
    Ok(())
}

pub fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let model = LinearSvmModel::load(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let (rows, splits) = load_rows(&args.data, &[Split::Val])?;
    let scores = model.score_descriptors(&rows.descriptors)?;
    write_file(&args.out, &render_scores(&scores))?;
    if let Some(p) = &args.predictions {
        write_file(
            p,
            &render_predictions(scores.video_ids(), &predict(&scores)),
        )?;
    }
    writeln!(
        out,
        "{}: scored {} videos ({})",
        rows.stream,
        scores.len(),
        split_names(&splits)
    )?;
    Ok(())
}

pub fn cmd_ensemble(args: &EnsembleArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = PipelineConfig::load(args.config.as_deref(), None)?;
    let mut ens = cfg.ensemble;
    if let Some(m) = args.mode {
        ens.score_mode = match m {
            ModeArg::Raw => ScoreMode::Raw,
            ModeArg::Softmax => ScoreMode::Softmax,
        };
    }
    if let Some(p) = &args.weights {
        ens.class_weights = Some(load_weights(p, args.weights_kind.into())?);
    }
    let streams = args
        .scores
        .iter()
        .map(|p| load_scores(p).with_context(|| format!("loading scores {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let (scores, labels) = run_ensemble(&streams, &ens)?;
    write_file(&args.out, &render_predictions(scores.video_ids(), &labels))?;
    if let Some(p) = &args.scores_out {
        write_file(p, &render_scores(&scores))?;
    }
    writeln!(
        out,
        "combined {} streams over {} videos",
        streams.len(),
        scores.len()
    )?;
    Ok(())
}

pub fn cmd_weigh(args: &WeighArgs, out: &mut dyn Write) -> Result<()> {
    let weights = match (&args.counts, &args.counts_file) {
        (Some(text), _) => parse_weights(text, WeightsKind::Counts)?,
        (None, Some(p)) => load_weights(p, WeightsKind::Counts)?,
        (None, None) => bail!("pass --counts or --counts-file"),
    };
    let text = render_weights(&weights);
    match &args.out {
        Some(p) => write_file(p, &text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let manifest = read_manifest(&args.manifest)?;
    let preds = load_predictions(&args.predictions)?;
    let truth: HashMap<&str, Option<EmotionLabel>> = manifest
        .entries
        .iter()
        .map(|e| (e.id.as_str(), e.label))
        .collect();
    let mut p = Vec::with_capacity(preds.len());
    let mut t = Vec::with_capacity(preds.len());
    for (id, label) in &preds {
        let truth = truth
            .get(id.as_str())
            .ok_or_else(|| anyhow!("video {id} is not in the manifest"))?
            .ok_or_else(|| anyhow!("video {id} has no label in the manifest"))?;
        p.push(*label);
        t.push(truth);
    }
    let report = evaluate(&p, &t)?;
    out.write_all(render_report(&report).as_bytes())?;
    if let Some(path) = &args.json {
        write_file(path, &report.to_json())?;
    }
    Ok(())
}
