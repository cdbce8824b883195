//! Classification metrics, cross-validation, the per-sample latency harness,
//! and the F1-per-millisecond performance ratio.

use std::time::Instant;

use serde_json::json;

use crate::dataset::{stratified_folds, Dataset};
use crate::error::Error;
use crate::models::{Model, ModelSpec};
use crate::Result;

/// Row-is-truth, column-is-prediction count matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// Build over the union of observed classes, in first-appearance order
    /// (scanning truth, then prediction, pair by pair).
    pub fn from_pairs(truth: &[String], predicted: &[String]) -> Result<Self> {
        if truth.is_empty() || truth.len() != predicted.len() {
            return Err(Error::contract(
                "confusion matrix needs equal-length non-empty label sequences",
            ));
        }
        let mut classes: Vec<String> = Vec::new();
        for label in truth.iter().chain(predicted.iter()) {
            if !classes.contains(label) {
                classes.push(label.clone());
            }
        }
        Self::with_classes(classes, truth, predicted)
    }

    /// Build against a fixed class catalog; labels outside it are an error.
    pub fn with_classes(
        classes: Vec<String>,
        truth: &[String],
        predicted: &[String],
    ) -> Result<Self> {
        if truth.is_empty() || truth.len() != predicted.len() {
            return Err(Error::contract(
                "confusion matrix needs equal-length non-empty label sequences",
            ));
        }
        let index = |label: &String| {
            classes
                .iter()
                .position(|c| c == label)
                .ok_or_else(|| Error::contract(format!("label '{label}' not in class catalog")))
        };
        let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
        for (t, p) in truth.iter().zip(predicted) {
            counts[index(t)?][index(p)?] += 1;
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// True-class support per class (row sums).
    pub fn supports(&self) -> Vec<u64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }
}

/// Precision/recall/F1 for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Per-class metrics plus the two F1 aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub per_class: Vec<ClassMetrics>,
    /// Per-class F1 averaged with true-class support weights.
    pub weighted_f1: f64,
    /// Unweighted mean of per-class F1.
    pub macro_f1: f64,
}

/// Compute precision, recall and F1 per class; 0/0 cases are defined as 0.
pub fn prf1(matrix: &ConfusionMatrix) -> Result<Metrics> {
    let n = matrix.classes.len();
    if n == 0 || matrix.total() == 0 {
        return Err(Error::contract("metrics of an empty confusion matrix"));
    }
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let mut per_class = Vec::with_capacity(n);
    let supports = matrix.supports();
    for (i, &support) in supports.iter().enumerate() {
        let tp = matrix.counts[i][i];
        let fp: u64 = (0..n)
            .filter(|&r| r != i)
            .map(|r| matrix.counts[r][i])
            .sum();
        let fn_: u64 = (0..n)
            .filter(|&c| c != i)
            .map(|c| matrix.counts[i][c])
            .sum();
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            class: matrix.classes[i].clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    let scored: Vec<(f64, u64)> = per_class.iter().map(|c| (c.f1, c.support)).collect();
    let (weighted_f1, macro_f1) = aggregate_f1(&scored);
    Ok(Metrics {
        per_class,
        weighted_f1,
        macro_f1,
    })
}

/// Aggregate per-class (F1, support) pairs into weighted and macro F1.
pub fn aggregate_f1(per_class: &[(f64, u64)]) -> (f64, f64) {
    let total: u64 = per_class.iter().map(|(_, s)| s).sum();
    let weighted = per_class
        .iter()
        .map(|&(f1, s)| f1 * s as f64 / total as f64)
        .sum();
    let macro_f1 = per_class.iter().map(|(f1, _)| f1).sum::<f64>() / per_class.len() as f64;
    (weighted, macro_f1)
}

/// Single-threaded per-sample classification timing.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    /// total_seconds / (measured_passes * samples)
    pub seconds_per_sample: f64,
    pub total_seconds: f64,
    pub measured_passes: usize,
    pub samples: usize,
}

/// Wall-clock the classification of every sample, one at a time, on the
/// calling thread. `warmup_passes` full passes run first and are discarded;
/// the timer is monotonic; a checksum over the predictions is consumed so the
/// work cannot be optimized away. Training time and feature extraction are
/// outside the measured region by construction.
pub fn benchmark_latency(
    model: &Model,
    samples: &[Vec<f64>],
    warmup_passes: usize,
    measured_passes: usize,
) -> Result<LatencyReport> {
    if samples.is_empty() {
        return Err(Error::param("benchmark needs a non-empty test set"));
    }
    if measured_passes == 0 {
        return Err(Error::param("benchmark needs at least one measured pass"));
    }
    let width = model.schema().len();
    for (i, s) in samples.iter().enumerate() {
        if s.len() != width {
            return Err(Error::contract(format!(
                "benchmark sample {i} has {} values, model expects {width}",
                s.len()
            )));
        }
    }

    let mut checksum = 0usize;
    for _ in 0..warmup_passes {
        for s in samples {
            checksum = checksum.wrapping_add(model.predict_idx(s));
        }
    }
    let start = Instant::now();
    for _ in 0..measured_passes {
        for s in samples {
            checksum = checksum.wrapping_add(model.predict_idx(s));
        }
    }
    let total_seconds = start.elapsed().as_secs_f64();
    std::hint::black_box(checksum);

    Ok(LatencyReport {
        seconds_per_sample: total_seconds / (measured_passes * samples.len()) as f64,
        total_seconds,
        measured_passes,
        samples: samples.len(),
    })
}

/// F1 per millisecond of classification time.
pub fn performance_ratio(f1: f64, seconds_per_sample: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f1) {
        return Err(Error::contract(format!("F1 {f1} outside [0, 1]")));
    }
    if seconds_per_sample <= 0.0 {
        return Err(Error::contract(
            "performance ratio needs a positive per-sample time",
        ));
    }
    Ok(f1 / (seconds_per_sample * 1000.0))
}

/// Everything reported for one (model, feature subset) evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub subset: Option<String>,
    pub features: Vec<String>,
    pub seed: u64,
    pub folds: usize,
    pub weighted_f1: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub latency: Option<LatencyReport>,
}

impl EvalReport {
    /// Overall performance ratio (weighted F1 per ms), when benchmarked.
    pub fn performance_ms(&self) -> Option<f64> {
        self.latency
            .as_ref()
            .map(|l| self.weighted_f1 / (l.seconds_per_sample * 1000.0))
    }

    /// Per-class performance ratios, when benchmarked.
    pub fn class_performance_ms(&self) -> Option<Vec<(String, f64)>> {
        let latency = self.latency.as_ref()?;
        Some(
            self.per_class
                .iter()
                .map(|c| {
                    (
                        c.class.clone(),
                        c.f1 / (latency.seconds_per_sample * 1000.0),
                    )
                })
                .collect(),
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        let per_class: Vec<serde_json::Value> = self
            .per_class
            .iter()
            .map(|c| {
                let perf = self
                    .latency
                    .as_ref()
                    .map(|l| c.f1 / (l.seconds_per_sample * 1000.0));
                json!({
                    "class": c.class,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "support": c.support,
                    "performance_per_ms": perf,
                })
            })
            .collect();
        json!({
            "tool_version": crate::VERSION,
            "model": self.model,
            "subset": self.subset,
            "features": self.features,
            "seed": self.seed,
            "folds": self.folds,
            "weighted_f1": self.weighted_f1,
            "macro_f1": self.macro_f1,
            "per_class": per_class,
            "confusion": {
                "classes": self.confusion.classes,
                "counts": self.confusion.counts,
            },
            "latency_seconds_per_sample": self.latency.as_ref().map(|l| l.seconds_per_sample),
            "performance_per_ms": self.performance_ms(),
        })
    }

    /// Flat per-class CSV: `class,f1,recall,precision,performance`.
    pub fn to_table_csv(&self) -> String {
        let mut out = String::from("class,f1,recall,precision,performance\n");
        for c in &self.per_class {
            let perf = self
                .latency
                .as_ref()
                .map(|l| format!("{}", c.f1 / (l.seconds_per_sample * 1000.0)))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.class, c.f1, c.recall, c.precision, perf
            ));
        }
        out
    }
}

/// Stratified k-fold cross-validation with pooled out-of-fold predictions.
///
/// Each fold's model trains on the other folds with the given seed; the
/// pooled predictions fill one confusion matrix over the dataset's class
/// catalog, so every sample is predicted exactly once.
pub fn cross_validate(
    dataset: &Dataset,
    spec: &ModelSpec,
    k_folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    let folds = stratified_folds(dataset, k_folds, seed)?;
    let mut truth = vec![String::new(); dataset.len()];
    let mut predicted = vec![String::new(); dataset.len()];
    for fold in 0..k_folds {
        let train_ix = folds.train_indices(fold);
        let test_ix = folds.test_indices(fold);
        if train_ix.is_empty() {
            return Err(Error::contract(format!(
                "fold {fold} leaves an empty training set"
            )));
        }
        let train = dataset.subset(&train_ix);
        let model = spec.train(&train, seed)?;
        for i in test_ix {
            let sample = &dataset.samples()[i];
            truth[i] = sample.label.clone();
            predicted[i] = model.predict(&sample.values)?.to_string();
        }
    }
    let confusion = ConfusionMatrix::with_classes(dataset.classes().to_vec(), &truth, &predicted)?;
    let metrics = prf1(&confusion)?;
    Ok(EvalReport {
        model: spec.describe(),
        subset: None,
        features: dataset.schema().to_vec(),
        seed,
        folds: k_folds,
        weighted_f1: metrics.weighted_f1,
        macro_f1: metrics.macro_f1,
        per_class: metrics.per_class,
        confusion,
        latency: None,
    })
}

/// The built-in feature subsets, by name.
pub fn builtin_subsets() -> Vec<(&'static str, Vec<&'static str>)> {
    vec![
        ("five", vec!["dPort", "nPackets", "nBytes", "vLen", "mLen"]),
        (
            "six",
            vec!["dPort", "nPackets", "nBytes", "vLen", "mLen", "mTime"],
        ),
        (
            "seven",
            vec![
                "dPort", "nPackets", "nBytes", "vLen", "mLen", "mTime", "vTime",
            ],
        ),
        ("all", crate::features::FEATURE_NAMES.to_vec()),
    ]
}

/// Look up a built-in subset by name.
pub fn subset_features(name: &str) -> Option<Vec<String>> {
    builtin_subsets()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, features)| features.into_iter().map(str::to_string).collect())
}

/// Evaluate each (subset, model) pair: cross-validated metrics plus latency
/// from a model trained on `1 - holdout_fraction` of the data and timed on
/// the held-out rest.
pub fn evaluate_subsets(
    dataset: &Dataset,
    subsets: &[(String, Vec<String>)],
    specs: &[ModelSpec],
    k_folds: usize,
    seed: u64,
    holdout_fraction: f64,
) -> Result<Vec<EvalReport>> {
    if !(0.0..1.0).contains(&holdout_fraction) || holdout_fraction == 0.0 {
        return Err(Error::param("holdout fraction must be in (0, 1)"));
    }
    let holdout_folds = ((1.0 / holdout_fraction).round() as usize).max(2);
    let mut reports = Vec::new();
    for (name, features) in subsets {
        let projected = dataset.project(features)?;
        for spec in specs {
            let mut report = cross_validate(&projected, spec, k_folds, seed)?;
            report.subset = Some(name.clone());

            let split = stratified_folds(&projected, holdout_folds, seed)?;
            let train = projected.subset(&split.train_indices(0));
            let test: Vec<Vec<f64>> = split
                .test_indices(0)
                .iter()
                .map(|&i| projected.samples()[i].values.clone())
                .collect();
            let model = spec.train(&train, seed)?;
            report.latency = Some(benchmark_latency(&model, &test, 3, 10)?);
            reports.push(report);
        }
    }
    Ok(reports)
}
