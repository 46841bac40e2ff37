//! Command-line front end.
//!
//! Every subcommand is a thin wrapper over a library function in this module
//! so the same code paths can be driven from tests.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{align_dataset_with_groups, clustered_groups};
use crate::classify::eval::{contingency, hungarian};
use crate::classify::{cluster_accuracy, evaluate, kmedoids_with_config, KMedoidsConfig, MdmModel, SvmModel, SvmParams};
use crate::dataset::LabeledManifoldSet;
use crate::embedding::{tsne, EmbeddingConfig};
use crate::error::{Error, Result};
use crate::format::{
    load_point_store, read_csv_trial, read_manifest, read_trial, resolve, save_point_store, save_trial_store, Manifest,
};
use crate::linalg::Matrix;
use crate::manifold::{distance_matrix, frechet_mean};
use crate::signal::{trial_to_point, CovarianceConfig, Normalization};
use crate::synth::{self, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "spd-emg", version, about = "Riemannian sEMG gesture analysis on Cholesky space", args_override_self = true)]
pub struct Cli {
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a trial manifest into a point store.
    Ingest(IngestArgs),
    /// Generate a synthetic point store (or raw trials).
    Synth(SynthArgs),
    /// Train and evaluate a classifier per subject; writes a JSON report.
    Run(RunArgs),
    /// Align every subject onto a reference subject.
    Align(AlignArgs),
    /// 2-D t-SNE of geodesic distances; writes CSV.
    Embed(EmbedArgs),
    /// Pairwise distances between per-subject Fréchet means; writes CSV.
    CentroidDistances(StoreOut),
    /// Convert per-trial CSV files (one row per channel) into a trial manifest.
    ConvertCsv(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub dataset_preset: u8,
    /// Override the preset's shrinkage weight.
    #[arg(long)]
    pub shrinkage: Option<f64>,
    /// Output store directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 12)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 5)]
    pub subjects: usize,
    #[arg(long, default_value_t = 36)]
    pub trials_per_class: usize,
    #[arg(long, default_value_t = 5.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dispersion: f64,
    #[arg(long, default_value_t = 0.0)]
    pub subject_offset: f64,
    /// Write raw trials with this many samples instead of points.
    #[arg(long)]
    pub raw_samples: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mdm,
    Svm,
    Kmedoids,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[value(name = "repetition")]
    ByRepetition,
    #[value(name = "kfold")]
    KFold,
    #[value(name = "session")]
    BySession,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Supplies defaults for γ and the split.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub dataset_preset: Option<u8>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "C", default_value_t = 1.0)]
    pub c: f64,
    /// Clusters per subject (default: the subject's gesture count).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub restarts: usize,
    #[arg(long, value_enum)]
    pub split: Option<SplitMode>,
    #[arg(long, value_delimiter = ',')]
    pub train_reps: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub test_reps: Option<Vec<u32>>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Evaluate all subjects as one pool instead of within each subject.
    #[arg(long)]
    pub pooled: bool,
    /// Report path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelsMode {
    Truth,
    Clustered,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Default: the smallest subject id.
    #[arg(long)]
    pub reference_subject: Option<u32>,
    #[arg(long, value_enum, default_value = "truth")]
    pub labels: LabelsMode,
    #[arg(long, default_value_t = 0)]
    pub restarts: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ColorBy {
    Label,
    Subject,
    Repetition,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Embed a single subject.
    #[arg(long)]
    pub subject: Option<u32>,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 200.0)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 12.0)]
    pub early_exaggeration: f64,
    /// Adds a `group` column.
    #[arg(long, value_enum)]
    pub color_by: Option<ColorBy>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StoreOut {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// CSV with header `file,label,subject,repetition`; files relative to it.
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, default_value = "converted")]
    pub name: String,
    #[arg(long, default_value_t = 0.0)]
    pub sampling_rate: f64,
    #[arg(long, value_delimiter = ',')]
    pub gesture_names: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

/// How each subject's trials are divided into training and test sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_repetitions: Vec<u32>,
    pub test_repetitions: Vec<u32>,
    pub folds: usize,
    pub per_subject: bool,
}

impl SplitSpec {
    pub fn by_repetition(train: Vec<u32>, test: Vec<u32>) -> Self {
        Self {
            mode: SplitMode::ByRepetition,
            train_repetitions: train,
            test_repetitions: test,
            folds: 0,
            per_subject: true,
        }
    }

    pub fn kfold(folds: usize) -> Self {
        Self {
            mode: SplitMode::KFold,
            train_repetitions: Vec::new(),
            test_repetitions: Vec::new(),
            folds,
            per_subject: true,
        }
    }

    /// Sessions are stored in the repetition field.
    pub fn by_session(train: Vec<u32>, test: Vec<u32>) -> Self {
        Self {
            mode: SplitMode::BySession,
            ..Self::by_repetition(train, test)
        }
    }

    /// Protocol of a dataset recipe: 1 → repetitions {1,3,4,6}/{2,5},
    /// 2 → 5-fold, 3 → sessions {1,2,3}/{4,5,6}.
    pub fn preset(dataset: u8) -> Result<Self> {
        match dataset {
            1 => Ok(Self::by_repetition(vec![1, 3, 4, 6], vec![2, 5])),
            2 => Ok(Self::kfold(5)),
            3 => Ok(Self::by_session(vec![1, 2, 3], vec![4, 5, 6])),
            other => Err(Error::InvalidConfig(format!("unknown dataset preset {other}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            SplitMode::KFold => {
                if self.folds < 2 {
                    return Err(Error::InvalidSplit("k-fold needs at least 2 folds".into()));
                }
            }
            SplitMode::ByRepetition | SplitMode::BySession => {
                if self.train_repetitions.is_empty() || self.test_repetitions.is_empty() {
                    return Err(Error::InvalidSplit("train and test repetition sets must be nonempty".into()));
                }
                if let Some(r) = self.train_repetitions.iter().find(|r| self.test_repetitions.contains(r)) {
                    return Err(Error::InvalidSplit(format!("repetition {r} is in both train and test")));
                }
            }
        }
        Ok(())
    }

    /// `(train, test)` index lists into `set`, one pair per fold.
    pub fn partition(&self, set: &LabeledManifoldSet, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        self.validate()?;
        match self.mode {
            SplitMode::ByRepetition | SplitMode::BySession => {
                let present: BTreeSet<u32> = set.repetitions().iter().copied().collect();
                for r in self.train_repetitions.iter().chain(&self.test_repetitions) {
                    if !present.contains(r) {
                        return Err(Error::InvalidSplit(format!("repetition {r} is absent")));
                    }
                }
                let train = set.indices_where(|i| self.train_repetitions.contains(&set.repetitions()[i]));
                let test = set.indices_where(|i| self.test_repetitions.contains(&set.repetitions()[i]));
                Ok(vec![(train, test)])
            }
            SplitMode::KFold => {
                let k = self.folds;
                if set.len() < k {
                    return Err(Error::InvalidSplit(format!("{} points cannot fill {k} folds", set.len())));
                }
                // stratified: each class is shuffled and dealt round-robin,
                // continuing the rotation across classes
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut fold_of = vec![0usize; set.len()];
                let mut next = 0usize;
                for label in set.distinct_labels() {
                    let mut idx = set.indices_where(|i| set.labels()[i] == label);
                    idx.shuffle(&mut rng);
                    for i in idx {
                        fold_of[i] = next % k;
                        next += 1;
                    }
                }
                Ok((0..k)
                    .map(|f| {
                        let test: Vec<usize> = (0..set.len()).filter(|&i| fold_of[i] == f).collect();
                        let train: Vec<usize> = (0..set.len()).filter(|&i| fold_of[i] != f).collect();
                        (train, test)
                    })
                    .collect())
            }
        }
    }
}

/// Effective configuration of a run, echoed into its report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_preset: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    /// Absent for k-medoids, which clusters every trial.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    pub per_subject: bool,
    pub seed: u64,
}

impl RunConfig {
    pub fn mdm(split: SplitSpec) -> Self {
        Self {
            method: Method::Mdm,
            dataset_preset: None,
            gamma: None,
            c: None,
            k: None,
            restarts: None,
            per_subject: split.per_subject,
            split: Some(split),
            seed: 42,
        }
    }

    pub fn svm(split: SplitSpec, gamma: f64, c: f64) -> Self {
        Self {
            method: Method::Svm,
            gamma: Some(gamma),
            c: Some(c),
            ..Self::mdm(split)
        }
    }

    pub fn kmedoids(k: Option<usize>, restarts: usize) -> Self {
        Self {
            method: Method::Kmedoids,
            dataset_preset: None,
            gamma: None,
            c: None,
            k,
            restarts: Some(restarts),
            split: None,
            per_subject: true,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectReport {
    /// `None` for a pooled run.
    pub subject: Option<u32>,
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Column ids of `confusion` (and row ids, except for k-medoids).
    pub labels: Vec<u32>,
    /// Truth × prediction counts; for k-medoids, cluster × truth counts.
    pub confusion: Vec<Vec<usize>>,
    /// k-medoids only: the gesture each cluster was matched to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_labels: Option<Vec<Option<u32>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub per_subject: Vec<SubjectReport>,
    pub mean: f64,
    /// Population standard deviation of the per-subject accuracies.
    pub std: f64,
    pub wall_clock_seconds: f64,
}

fn subject_seed(seed: u64, subject: Option<u32>) -> u64 {
    seed.wrapping_add(subject.map_or(0, u64::from))
}

fn evaluate_supervised(set: &LabeledManifoldSet, subject: Option<u32>, cfg: &RunConfig) -> Result<SubjectReport> {
    let split = cfg
        .split
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("supervised methods need a split".into()))?;
    let folds = split.partition(set, subject_seed(cfg.seed, subject))?;
    let (mut predictions, mut truth) = (Vec::new(), Vec::new());
    let mut n_train = 0;
    for (train_idx, test_idx) in folds {
        if train_idx.is_empty() || test_idx.is_empty() {
            return Err(Error::InvalidSplit("a fold has no training or no test trials".into()));
        }
        let train = set.subset(&train_idx);
        let test = set.subset(&test_idx);
        let predicted = match cfg.method {
            Method::Mdm => MdmModel::train(&train)?.predict_all(test.points())?,
            Method::Svm => {
                let params = SvmParams::new(cfg.gamma.unwrap_or(1.0), cfg.c.unwrap_or(1.0));
                SvmModel::train(&train, &params)?.predict_all(test.points())?
            }
            Method::Kmedoids => unreachable!("handled by evaluate_clustering"),
        };
        n_train += train.len();
        predictions.extend(predicted);
        truth.extend_from_slice(test.labels());
    }
    let eval = evaluate(&predictions, &truth)?;
    Ok(SubjectReport {
        subject,
        accuracy: eval.accuracy,
        n_train,
        n_test: truth.len(),
        labels: eval.labels,
        confusion: eval.confusion,
        cluster_labels: None,
    })
}

/// One-to-one cluster → label matching that maximises agreement;
/// `None` for clusters left over when there are more clusters than labels.
fn match_clusters(table: &[Vec<usize>], labels: &[u32]) -> Vec<Option<u32>> {
    let size = table.len().max(labels.len());
    let mut cost = vec![vec![0.0; size]; size];
    for (i, row) in table.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            cost[i][j] = -(n as f64);
        }
    }
    let assignment = hungarian(&cost);
    (0..table.len()).map(|i| labels.get(assignment[i]).copied()).collect()
}

fn evaluate_clustering(set: &LabeledManifoldSet, subject: Option<u32>, cfg: &RunConfig) -> Result<SubjectReport> {
    let k = cfg.k.unwrap_or(set.distinct_labels().len());
    let kcfg = KMedoidsConfig {
        k,
        restarts: cfg.restarts.unwrap_or(0),
        seed: subject_seed(cfg.seed, subject),
    };
    let result = kmedoids_with_config(set.points(), &kcfg)?;
    let accuracy = cluster_accuracy(&result, set.labels())?;
    let (table, labels) = contingency(&result.assignments, k, set.labels());
    let cluster_labels = match_clusters(&table, &labels);
    Ok(SubjectReport {
        subject,
        accuracy,
        n_train: 0,
        n_test: set.len(),
        labels,
        confusion: table,
        cluster_labels: Some(cluster_labels),
    })
}

/// Evaluates `cfg` on `set`, within each subject unless `cfg.per_subject` is false.
pub fn run_experiment(set: &LabeledManifoldSet, cfg: &RunConfig) -> Result<RunReport> {
    let start = Instant::now();
    if set.is_empty() {
        return Err(Error::EmptyInput);
    }
    let groups: Vec<(Option<u32>, LabeledManifoldSet)> = if cfg.per_subject {
        set.distinct_subjects()
            .into_iter()
            .map(|s| (Some(s), set.subject_subset(s)))
            .collect()
    } else {
        vec![(None, set.clone())]
    };
    let per_subject = groups
        .par_iter()
        .map(|(subject, data)| {
            let report = match cfg.method {
                Method::Kmedoids => evaluate_clustering(data, *subject, cfg),
                Method::Mdm | Method::Svm => evaluate_supervised(data, *subject, cfg),
            };
            report.map_err(|e| match subject {
                Some(s) => e.with_context(format!("subject {s}")),
                None => e,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_subject.len() as f64;
    let mean = per_subject.iter().map(|r| r.accuracy).sum::<f64>() / n;
    let std = (per_subject.iter().map(|r| (r.accuracy - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RunReport {
        config: cfg.clone(),
        per_subject,
        mean,
        std,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

fn run_config(args: &RunArgs, seed: u64) -> Result<RunConfig> {
    let preset_split = args.dataset_preset.map(SplitSpec::preset).transpose()?;
    let mut split = match (args.split, preset_split) {
        (Some(SplitMode::KFold), _) => SplitSpec::kfold(5),
        (Some(SplitMode::BySession), _) => SplitSpec::by_session(vec![1, 2, 3], vec![4, 5, 6]),
        (Some(SplitMode::ByRepetition), _) | (None, None) => SplitSpec::by_repetition(vec![1, 3, 4, 6], vec![2, 5]),
        (None, Some(preset)) => preset,
    };
    if let Some(train) = &args.train_reps {
        split.train_repetitions = train.clone();
    }
    if let Some(test) = &args.test_reps {
        split.test_repetitions = test.clone();
    }
    if let Some(folds) = args.folds {
        split.folds = folds;
    }
    split.per_subject = !args.pooled;
    split.validate()?;
    let preset_gamma = match args.dataset_preset {
        Some(1) => 8.0,
        Some(2) => 0.1,
        _ => 1.0,
    };
    let mut cfg = match args.method {
        Method::Mdm => RunConfig::mdm(split),
        Method::Svm => RunConfig::svm(split, args.gamma.unwrap_or(preset_gamma), args.c),
        Method::Kmedoids => RunConfig::kmedoids(args.k, args.restarts),
    };
    cfg.per_subject = !args.pooled;
    cfg.dataset_preset = args.dataset_preset;
    cfg.seed = seed;
    Ok(cfg)
}

/// Converts every trial listed in `manifest_path`; errors name the trial file.
pub fn ingest(manifest_path: &Path, cfg: &CovarianceConfig) -> Result<(Manifest, LabeledManifoldSet)> {
    let manifest = read_manifest(manifest_path)?;
    if manifest.trials.is_empty() {
        return Err(Error::format(manifest_path, "manifest lists no trial files"));
    }
    let items = manifest
        .trials
        .par_iter()
        .map(|entry| {
            let path = resolve(manifest_path, entry);
            read_trial(&path)
                .and_then(|t| trial_to_point(&t, cfg))
                .map_err(|e| match e {
                    e @ (Error::Io { .. } | Error::Format { .. }) => e,
                    e => e.with_context(path.display().to_string()),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, LabeledManifoldSet::from_trial_points(items)?))
}

/// Per-subject Fréchet means and their pairwise geodesic distances.
pub fn centroid_distances(set: &LabeledManifoldSet) -> Result<(Vec<u32>, Matrix)> {
    let subjects = set.distinct_subjects();
    let means = subjects
        .iter()
        .map(|&s| frechet_mean(set.subject_subset(s).points()))
        .collect::<Result<Vec<_>>>()?;
    Ok((subjects, distance_matrix(&means)?))
}

/// One embedded point: its index in the input store and its metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedRow {
    pub point_index: usize,
    pub x: f64,
    pub y: f64,
    pub label: u32,
    pub subject: u32,
    pub group: Option<u32>,
}

pub fn embed_store(
    set: &LabeledManifoldSet,
    subject: Option<u32>,
    cfg: &EmbeddingConfig,
    color_by: Option<ColorBy>,
) -> Result<Vec<EmbeddedRow>> {
    let idx = match subject {
        Some(s) => set.indices_where(|i| set.subjects()[i] == s),
        None => (0..set.len()).collect(),
    };
    if idx.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sub = set.subset(&idx);
    cfg.validate(sub.len())?;
    let y = tsne(&distance_matrix(sub.points())?, cfg)?;
    Ok(idx
        .iter()
        .enumerate()
        .map(|(r, &i)| EmbeddedRow {
            point_index: i,
            x: y[(r, 0)],
            y: y[(r, 1)],
            label: set.labels()[i],
            subject: set.subjects()[i],
            group: color_by.map(|c| match c {
                ColorBy::Label => set.labels()[i],
                ColorBy::Subject => set.subjects()[i],
                ColorBy::Repetition => set.repetitions()[i],
            }),
        })
        .collect())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            Box::new(File::create(p).map_err(|e| Error::io(p, e))?)
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn out_name(path: Option<&Path>) -> PathBuf {
    path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf)
}

fn csv_error(path: Option<&Path>, e: csv::Error) -> Error {
    Error::format(out_name(path), e.to_string())
}

pub fn write_embedding_csv(rows: &[EmbeddedRow], path: Option<&Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(output(path)?);
    let with_group = rows.first().is_some_and(|r| r.group.is_some());
    let mut header = vec!["point_index", "x", "y", "label", "subject"];
    if with_group {
        header.push("group");
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        let mut rec = vec![
            r.point_index.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.label.to_string(),
            r.subject.to_string(),
        ];
        if let Some(g) = r.group {
            rec.push(g.to_string());
        }
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(out_name(path), e))
}

pub fn write_distance_csv(ids: &[u32], d: &Matrix, path: Option<&Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(output(path)?);
    let header: Vec<String> = std::iter::once("subject".to_string())
        .chain(ids.iter().map(u32::to_string))
        .collect();
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (i, id) in ids.iter().enumerate() {
        let rec: Vec<String> = std::iter::once(id.to_string())
            .chain((0..ids.len()).map(|j| d[(i, j)].to_string()))
            .collect();
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(out_name(path), e))
}

#[derive(Debug, Deserialize)]
struct IndexRow {
    file: String,
    label: u32,
    subject: u32,
    repetition: u32,
}

pub fn convert_csv(args: &ConvertArgs) -> Result<PathBuf> {
    let mut reader = csv::Reader::from_path(&args.index).map_err(|e| Error::format(&args.index, e.to_string()))?;
    let mut trials = Vec::new();
    for row in reader.deserialize::<IndexRow>() {
        let row = row.map_err(|e| Error::format(&args.index, e.to_string()))?;
        let path = resolve(&args.index, &row.file);
        trials.push(read_csv_trial(&path, row.label, row.subject, row.repetition)?);
    }
    if trials.is_empty() {
        return Err(Error::format(&args.index, "index lists no trials"));
    }
    let mut meta = Manifest::new(args.name.clone(), args.sampling_rate);
    meta.gesture_names = args.gesture_names.clone();
    save_trial_store(&meta, &trials, &args.out)
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = output(path)?;
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    writeln!(w, "{text}").map_err(|e| Error::io(out_name(path), e))
}

fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Ingest(a) => {
            let mut cfg = CovarianceConfig::preset(a.dataset_preset)?;
            if let Some(w) = a.shrinkage {
                cfg = CovarianceConfig::new(w, Normalization::ZScore)?;
            }
            let (manifest, set) = ingest(&a.manifest, &cfg)?;
            let path = save_point_store(&a.out, &manifest, &set)?;
            eprintln!("wrote {} points to {}", set.len(), path.display());
        }
        Command::Synth(a) => {
            let cfg = SynthConfig {
                dim: a.dim,
                classes: a.classes,
                subjects: a.subjects,
                trials_per_class: a.trials_per_class,
                class_separation: a.separation,
                dispersion: a.dispersion,
                subject_offset: a.subject_offset,
                seed,
            };
            let set = synth::generate(&cfg)?;
            let path = match a.raw_samples {
                Some(samples) => {
                    if samples < 2 {
                        return Err(Error::InvalidConfig("raw trials need at least 2 samples".into()));
                    }
                    let trials = synth::synthesize_trials(&set, samples, seed)?;
                    let mut meta = Manifest::new("synthetic", 0.0);
                    meta.gesture_names = (0..cfg.classes).map(|m| format!("gesture-{m}")).collect();
                    save_trial_store(&meta, &trials, &a.out)?
                }
                None => synth::save(&cfg, &set, &a.out)?,
            };
            eprintln!("wrote {} items to {}", set.len(), path.display());
        }
        Command::Run(a) => {
            let cfg = run_config(&a, seed)?;
            let (_, set) = load_point_store(&a.store)?;
            let report = run_experiment(&set, &cfg)?;
            write_json(&report, a.out.as_deref())?;
        }
        Command::Align(a) => {
            let (manifest, set) = load_point_store(&a.store)?;
            let reference = match a.reference_subject {
                Some(r) => r,
                None => *set.distinct_subjects().first().ok_or(Error::EmptyInput)?,
            };
            let groups = match a.labels {
                LabelsMode::Truth => set.labels().to_vec(),
                LabelsMode::Clustered => {
                    let kcfg = KMedoidsConfig {
                        k: 0,
                        restarts: a.restarts,
                        seed,
                    };
                    clustered_groups(&set, reference, &kcfg)?
                }
            };
            let aligned = align_dataset_with_groups(&set, &groups, reference)?;
            let path = save_point_store(&a.out, &manifest, &aligned)?;
            eprintln!("aligned {} points onto subject {reference}: {}", set.len(), path.display());
        }
        Command::Embed(a) => {
            let (_, set) = load_point_store(&a.store)?;
            let cfg = EmbeddingConfig {
                perplexity: a.perplexity,
                iterations: a.iterations,
                learning_rate: a.learning_rate,
                seed,
                early_exaggeration: a.early_exaggeration,
            };
            let rows = embed_store(&set, a.subject, &cfg, a.color_by)?;
            write_embedding_csv(&rows, a.out.as_deref())?;
        }
        Command::CentroidDistances(a) => {
            let (_, set) = load_point_store(&a.store)?;
            let (ids, d) = centroid_distances(&set)?;
            write_distance_csv(&ids, &d, a.out.as_deref())?;
        }
        Command::ConvertCsv(a) => {
            let path = convert_csv(&a)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// Runs a parsed command line inside a pool of `cli.threads` workers.
pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::CholeskyPoint;

    fn reps_set() -> LabeledManifoldSet {
        let mut set = LabeledManifoldSet::default();
        for label in 0..2 {
            for rep in 1..=6 {
                let p = CholeskyPoint::from_diagonal(&[1.0 + label as f64, 1.0 + 0.01 * rep as f64]).unwrap();
                set.push(p, label, 0, rep).unwrap();
            }
        }
        set
    }

    #[test]
    fn repetition_split_partitions_four_two() {
        let set = reps_set();
        let folds = SplitSpec::preset(1).unwrap().partition(&set, 0).unwrap();
        assert_eq!(folds.len(), 1);
        let (train, test) = &folds[0];
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 4);
        assert!(train.iter().all(|i| !test.contains(i)));
        assert!(test.iter().all(|&i| [2, 5].contains(&set.repetitions()[i])));
    }

    #[test]
    fn split_validation() {
        let set = reps_set();
        let overlap = SplitSpec::by_repetition(vec![1, 2], vec![2]);
        assert!(matches!(overlap.partition(&set, 0), Err(Error::InvalidSplit(_))));
        let absent = SplitSpec::by_repetition(vec![1], vec![9]);
        assert!(matches!(absent.partition(&set, 0), Err(Error::InvalidSplit(_))));
        assert!(matches!(SplitSpec::kfold(1).validate(), Err(Error::InvalidSplit(_))));
        assert!(matches!(SplitSpec::kfold(13).partition(&set, 0), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn kfold_is_a_stratified_partition() {
        let set = reps_set();
        let folds = SplitSpec::kfold(3).partition(&set, 7).unwrap();
        let mut seen = vec![0; set.len()];
        for (train, test) in &folds {
            assert_eq!(train.len() + test.len(), set.len());
            assert_eq!(test.len(), 4);
            for label in 0..2 {
                assert_eq!(test.iter().filter(|&&i| set.labels()[i] == label).count(), 2);
            }
            test.iter().for_each(|&i| seen[i] += 1);
        }
        assert!(seen.iter().all(|&n| n == 1));
        assert_eq!(folds, SplitSpec::kfold(3).partition(&set, 7).unwrap());
    }

    #[test]
    fn cluster_matching_leaves_extra_clusters_unmatched() {
        let m = match_clusters(&[vec![0, 5], vec![4, 1], vec![1, 0]], &[3, 8]);
        assert_eq!(m, vec![Some(8), Some(3), None]);
    }

    #[test]
    fn mdm_run_on_separable_set() {
        let report = run_experiment(&reps_set(), &RunConfig::mdm(SplitSpec::preset(1).unwrap())).unwrap();
        assert_eq!(report.per_subject.len(), 1);
        assert_eq!(report.mean, 1.0);
        assert_eq!(report.std, 0.0);
        assert_eq!(report.per_subject[0].confusion, vec![vec![2, 0], vec![0, 2]]);
    }
}
