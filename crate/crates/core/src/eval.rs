//! Stratified k-fold cross-validation and the per-distance accuracy sweep.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelConfig, SensorTrace};
use crate::dataset::{feature_rows, generate_traces, to_dataset, DatasetError, FeatureRow, GeneratorConfig};
use crate::dsp::DspConfig;
use crate::features::FEATURE_COUNT;
use crate::ml::{train, Classifier, Dataset, MlError, ModelKind, TrainConfig, CLASS_COUNT};
use crate::seed::{derive_seed, rng_from_seed};
use crate::waveform::BreathingClass;

pub const REPORT_FORMAT: &str = "breathsim-report-v1";
pub const DEFAULT_K: usize = 10;
pub const DEFAULT_PER_CLASS: usize = 100;
pub const DEFAULT_DISTANCES: [f64; 3] = [0.5, 1.0, 1.5];

const STREAM_PLAN: u64 = 0x21;
const STREAM_FOLD_MODEL: u64 = 0x22;
const STREAM_CV: u64 = 0x23;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("k must be >= 2, got {0}")]
    InvalidK(usize),
    #[error("class {class_id} too small: {count} rows, fewer than k = {k}")]
    ClassTooSmall { class_id: usize, count: usize, k: usize },
    #[error("no distances given")]
    NoDistances,
    #[error("distance must be finite and > 0, got {0}")]
    InvalidDistance(f64),
    #[error("distance {0} m listed twice")]
    DuplicateDistance(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold index of each row.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Rows of each class are shuffled and dealt round-robin to the folds. The
/// dealing position carries over from one class to the next so fold sizes
/// stay balanced overall, not only per class.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidK(k));
    }
    if labels.is_empty() {
        return Err(MlError::EmptyDataset.into());
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &label) in labels.iter().enumerate() {
        by_class.entry(label).or_default().push(i);
    }
    if let Some((&class_id, rows)) = by_class.iter().find(|(_, rows)| rows.len() < k) {
        return Err(EvalError::ClassTooSmall {
            class_id,
            count: rows.len(),
            k,
        });
    }

    let mut assignments = vec![0; labels.len()];
    let mut offset = 0;
    for (&class, rows) in &by_class {
        let mut rows = rows.clone();
        rows.shuffle(&mut rng_from_seed(derive_seed(seed, &[class as u64])));
        for (j, &row) in rows.iter().enumerate() {
            assignments[row] = (offset + j) % k;
        }
        offset = (offset + rows.len()) % k;
    }
    Ok(FoldPlan { k, assignments, seed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub fold_accuracies: Vec<f64>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: [[u64; CLASS_COUNT]; CLASS_COUNT],
    pub mean_accuracy: f64,
}

pub fn confusion_trace(confusion: &[[u64; CLASS_COUNT]; CLASS_COUNT]) -> u64 {
    (0..CLASS_COUNT).map(|i| confusion[i][i]).sum()
}

/// Folds are trained in parallel, each with a model seed derived from
/// `seed`, the fold index and `config.seed`.
pub fn cross_validate(
    dataset: &Dataset,
    kind: ModelKind,
    config: &TrainConfig,
    k: usize,
    seed: u64,
) -> Result<CvResult, EvalError> {
    let plan = stratified_kfold(dataset.labels(), k, derive_seed(seed, &[STREAM_PLAN]))?;
    let folds = (0..k)
        .into_par_iter()
        .map(|fold| -> Result<_, EvalError> {
            let train_set = dataset.subset(&plan.train_rows(fold))?;
            let fold_config = config.with_seed(derive_seed(seed, &[STREAM_FOLD_MODEL, fold as u64, config.seed]));
            let model = train(&train_set, kind, &fold_config)?;
            let mut confusion = [[0u64; CLASS_COUNT]; CLASS_COUNT];
            for row in plan.test_rows(fold) {
                let predicted = model.predict(dataset.row(row))?.class;
                confusion[dataset.label(row)][predicted] += 1;
            }
            Ok(confusion)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut pooled = [[0u64; CLASS_COUNT]; CLASS_COUNT];
    let mut fold_accuracies = Vec::with_capacity(k);
    for confusion in &folds {
        let total: u64 = confusion.iter().flatten().sum();
        fold_accuracies.push(confusion_trace(confusion) as f64 / total as f64);
        for (p, c) in pooled.iter_mut().flatten().zip(confusion.iter().flatten()) {
            *p += c;
        }
    }
    Ok(CvResult {
        fold_accuracies,
        mean_accuracy: confusion_trace(&pooled) as f64 / dataset.len() as f64,
        confusion: pooled,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRow {
    pub distance_m: f64,
    pub model_kind: ModelKind,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub confusion: [[u64; CLASS_COUNT]; CLASS_COUNT],
}

impl EvalRow {
    pub fn from_cv(distance_m: f64, model_kind: ModelKind, cv: CvResult) -> Self {
        Self {
            distance_m,
            model_kind,
            fold_accuracies: cv.fold_accuracies,
            mean_accuracy: cv.mean_accuracy,
            confusion: cv.confusion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub format: String,
    pub k: usize,
    pub seed: u64,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn new(k: usize, seed: u64, rows: Vec<EvalRow>) -> Self {
        Self {
            format: REPORT_FORMAT.into(),
            k,
            seed,
            rows,
        }
    }

    pub fn accuracy(&self, distance_m: f64, kind: ModelKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.distance_m == distance_m && r.model_kind == kind)
            .map(|r| r.mean_accuracy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let report: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if report.format != REPORT_FORMAT {
            return Err(format!("unknown report format {:?}", report.format));
        }
        Ok(report)
    }
}

/// Parameters of a distance sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub distances: Vec<f64>,
    pub per_class: usize,
    pub k: usize,
    pub channel: ChannelConfig,
    pub generator: GeneratorConfig,
    pub dsp: DspConfig,
    pub tree: TrainConfig,
    pub forest: TrainConfig,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            distances: DEFAULT_DISTANCES.to_vec(),
            per_class: DEFAULT_PER_CLASS,
            k: DEFAULT_K,
            channel: ChannelConfig::default(),
            generator: GeneratorConfig::default(),
            dsp: DspConfig::default(),
            tree: TrainConfig::tree(),
            forest: TrainConfig::forest(),
            seed: 0,
        }
    }
}

/// Distances must be non-empty, positive, finite and distinct.
pub fn validate_distances(distances: &[f64]) -> Result<(), EvalError> {
    if distances.is_empty() {
        return Err(EvalError::NoDistances);
    }
    if let Some(&d) = distances.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(EvalError::InvalidDistance(d));
    }
    for (i, d) in distances.iter().enumerate() {
        if distances[..i].contains(d) {
            return Err(EvalError::DuplicateDistance(*d));
        }
    }
    Ok(())
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        validate_distances(&self.distances)?;
        if self.k < 2 {
            return Err(EvalError::InvalidK(self.k));
        }
        if self.per_class < self.k {
            return Err(EvalError::ClassTooSmall {
                class_id: 0,
                count: self.per_class,
                k: self.k,
            });
        }
        let config = |e: &dyn std::fmt::Display| EvalError::InvalidConfig(e.to_string());
        self.channel.validate().map_err(|e| config(&e))?;
        self.generator.validate().map_err(|e| config(&e))?;
        self.dsp.validate(self.generator.sample_rate).map_err(|e| config(&e))?;
        self.tree.validate(FEATURE_COUNT).map_err(|e| config(&e))?;
        self.forest.validate(FEATURE_COUNT).map_err(|e| config(&e))?;
        Ok(())
    }
}

/// Intermediate products and results for one distance.
#[derive(Debug, Clone)]
pub struct DistanceRun {
    pub distance_m: f64,
    pub traces: Vec<SensorTrace>,
    pub features: Vec<FeatureRow>,
    /// DT then RF.
    pub rows: Vec<EvalRow>,
}

/// Cross-validates each of `kinds` on an existing feature table, using
/// `config.tree` or `config.forest` and a fold seed derived from `config.seed`.
pub fn evaluate_features(
    features: &[FeatureRow],
    distance_m: f64,
    config: &SweepConfig,
    kinds: &[ModelKind],
) -> Result<Vec<EvalRow>, EvalError> {
    let dataset = to_dataset(features)?;
    let cv_seed = derive_seed(config.seed, &[STREAM_CV]);
    kinds
        .iter()
        .map(|&kind| {
            let train_config = match kind {
                ModelKind::Tree => &config.tree,
                ModelKind::Forest => &config.forest,
            };
            let cv = cross_validate(&dataset, kind, train_config, config.k, cv_seed)?;
            Ok(EvalRow::from_cv(distance_m, kind, cv))
        })
        .collect()
}

pub fn run_distance(config: &SweepConfig, distance_m: f64) -> Result<DistanceRun, EvalError> {
    let traces = generate_traces(
        &BreathingClass::ALL,
        config.per_class,
        distance_m,
        &config.channel,
        &config.generator,
        config.seed,
    )?;
    let features = feature_rows(&traces, &config.dsp)?;
    let rows = evaluate_features(&features, distance_m, config, &[ModelKind::Tree, ModelKind::Forest])?;
    Ok(DistanceRun {
        distance_m,
        traces,
        features,
        rows,
    })
}

/// Generates, featurizes and cross-validates at each distance in turn.
pub fn distance_sweep(config: &SweepConfig) -> Result<EvalReport, EvalError> {
    config.validate()?;
    let mut rows = Vec::with_capacity(config.distances.len() * 2);
    for &d in &config.distances {
        rows.extend(run_distance(config, d)?.rows);
    }
    Ok(EvalReport::new(config.k, config.seed, rows))
}

/// `0.5` → `0.5m`, `1.0` → `1m`.
pub fn distance_label(d: f64) -> String {
    format!("{d}m")
}

pub fn percent(accuracy: f64) -> String {
    format!("{:.1}%", accuracy * 100.0)
}

/// Accuracy grid: one row per model kind, one column per distance.
pub fn render_report(report: &EvalReport) -> String {
    let mut distances: Vec<f64> = Vec::new();
    for r in &report.rows {
        if !distances.contains(&r.distance_m) {
            distances.push(r.distance_m);
        }
    }
    let mut kinds: Vec<ModelKind> = report.rows.iter().map(|r| r.model_kind).collect();
    kinds.sort();
    kinds.dedup();

    let mut table = vec![std::iter::once("Model".to_string())
        .chain(distances.iter().map(|&d| distance_label(d)))
        .collect::<Vec<_>>()];
    for kind in kinds {
        let mut line = vec![kind.label().to_string()];
        for &d in &distances {
            line.push(report.accuracy(d, kind).map_or("-".into(), percent));
        }
        table.push(line);
    }

    let width = table.iter().flatten().map(String::len).max().unwrap_or(0);
    let mut out = String::new();
    for line in table {
        let cells: Vec<String> = line.iter().map(|c| format!("{c:<width$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Per-distance accuracy table for external plotting.
pub fn plot_csv(report: &EvalReport) -> String {
    let mut out = String::from("distance_m,model,mean_accuracy,min_fold_accuracy,max_fold_accuracy\n");
    for r in &report.rows {
        let min = r.fold_accuracies.iter().copied().fold(f64::INFINITY, f64::min);
        let max = r.fold_accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.distance_m,
            r.model_kind.label(),
            r.mean_accuracy,
            min,
            max
        ));
    }
    out
}
