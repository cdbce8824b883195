//! Feature-importance scoring and ranked-prefix F1 curves.
//!
//! Two filter methods rank the features: Gini Importance (mean decrease in
//! impurity over a seeded forest) and Information Gain (label-entropy drop
//! after equal-frequency discretization of the feature). Entropy is in bits.

use crate::dataset::Dataset;
use crate::error::Error;
use crate::eval;
use crate::models::{train_forest_detailed, ForestParams, ModelSpec};
use crate::Result;

/// Per-class sample counts; probabilities are count/total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts(pub Vec<usize>);

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Self {
        let mut seen: Vec<(&str, usize)> = Vec::new();
        for label in labels {
            match seen.iter_mut().find(|(l, _)| *l == label) {
                Some((_, n)) => *n += 1,
                None => seen.push((label, 1)),
            }
        }
        ClassCounts(seen.into_iter().map(|(_, n)| n).collect())
    }
}

/// Gini impurity: sum of p(i)(1 - p(i)) over the classes present.
pub fn gini_impurity(counts: &ClassCounts) -> Result<f64> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::contract("gini impurity of an empty subset"));
    }
    let n = total as f64;
    Ok(counts
        .0
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * (1.0 - p)
        })
        .sum())
}

/// Size-weighted mean impurity of a partition: sum over subsets of
/// (n_j / N) * gini(subset). Empty subsets contribute nothing.
pub fn weighted_impurity(subsets: &[ClassCounts]) -> Result<f64> {
    let total: usize = subsets.iter().map(ClassCounts::total).sum();
    if total == 0 {
        return Err(Error::contract(
            "weighted impurity of an all-empty partition",
        ));
    }
    let mut acc = 0.0;
    for subset in subsets {
        let n = subset.total();
        if n == 0 {
            continue;
        }
        acc += (n as f64 / total as f64) * gini_impurity(subset)?;
    }
    Ok(acc)
}

/// Label entropy in bits, with 0 log 0 := 0.
pub fn entropy(counts: &ClassCounts) -> Result<f64> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::contract("entropy of an empty subset"));
    }
    let n = total as f64;
    Ok(counts
        .0
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum())
}

/// Equal-frequency discretization into at most `bins` bins.
///
/// Boundaries sit at the sorted values `v[n*b/bins]` for b in 1..bins, with
/// duplicate boundaries merged; a value's bin is the number of boundaries
/// strictly below it. Deterministic, and duplicates of one value always share
/// a bin.
pub fn discretize_equal_frequency(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut boundaries: Vec<f64> = (1..bins).map(|b| sorted[n * b / bins]).collect();
    boundaries.dedup_by(|a, b| a.total_cmp(b).is_eq());
    values
        .iter()
        .map(|v| {
            boundaries
                .iter()
                .take_while(|b| b.total_cmp(v).is_lt())
                .count()
        })
        .collect()
}

/// Information gain of one feature for the class label, in bits, clamped at
/// zero: H(labels) - H(labels | binned feature).
pub fn information_gain(dataset: &Dataset, feature: &str, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::param("bins must be >= 2"));
    }
    if dataset.is_empty() {
        return Err(Error::contract("information gain of an empty dataset"));
    }
    let col = dataset
        .schema()
        .iter()
        .position(|f| f == feature)
        .ok_or_else(|| Error::UnknownFeature(feature.to_string()))?;
    let values: Vec<f64> = dataset.samples().iter().map(|s| s.values[col]).collect();
    let binned = discretize_equal_frequency(&values, bins);
    let n_bins = binned.iter().max().map_or(1, |&b| b + 1);

    let n_classes = dataset.classes().len();
    let labels: Vec<usize> = dataset
        .samples()
        .iter()
        .map(|s| dataset.class_index(&s.label).unwrap())
        .collect();

    let total = ClassCounts({
        let mut c = vec![0usize; n_classes];
        for &l in &labels {
            c[l] += 1;
        }
        c
    });
    let h_labels = entropy(&total)?;

    let mut per_bin = vec![vec![0usize; n_classes]; n_bins];
    for (&bin, &label) in binned.iter().zip(&labels) {
        per_bin[bin][label] += 1;
    }
    let n = labels.len() as f64;
    let mut conditional = 0.0;
    for bin_counts in per_bin {
        let counts = ClassCounts(bin_counts);
        let weight = counts.total() as f64 / n;
        if weight > 0.0 {
            conditional += weight * entropy(&counts)?;
        }
    }
    Ok((h_labels - conditional).max(0.0))
}

/// Which importance method produced a score set or ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMethod {
    GiniImportance,
    InformationGain,
}

impl RankMethod {
    pub fn id(self) -> &'static str {
        match self {
            RankMethod::GiniImportance => "gi",
            RankMethod::InformationGain => "ig",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gi" => Ok(RankMethod::GiniImportance),
            "ig" => Ok(RankMethod::InformationGain),
            other => Err(Error::param(format!("unknown ranking method '{other}'"))),
        }
    }
}

/// Per-feature importance scores, in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceScores {
    pub method: RankMethod,
    pub scores: Vec<(String, f64)>,
}

/// Features ordered most important first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    pub method: RankMethod,
    pub features: Vec<String>,
}

/// Scoring knobs: forest shape for Gini Importance, bin count for
/// Information Gain.
#[derive(Debug, Clone)]
pub struct RankParams {
    pub bins: usize,
    pub forest: ForestParams,
}

impl Default for RankParams {
    fn default() -> Self {
        RankParams {
            bins: 10,
            forest: ForestParams::default(),
        }
    }
}

/// Mean decrease in impurity over a seeded forest, normalized to sum 1.
///
/// Per tree, every split adds (node size / root size) x its impurity
/// decrease to the split feature; the per-feature sums are averaged across
/// trees and the final vector is normalized.
pub fn gini_importance(
    dataset: &Dataset,
    forest_params: &ForestParams,
    seed: u64,
) -> Result<ImportanceScores> {
    if dataset.is_empty() {
        return Err(Error::contract("cannot score an empty dataset"));
    }
    if dataset.classes().len() < 2 {
        return Err(Error::contract(
            "gini importance needs at least two classes (no splits exist)",
        ));
    }
    let (_, detail) = train_forest_detailed(dataset, forest_params, seed)?;
    let d = dataset.schema().len();
    let m = detail.tree_tallies.len() as f64;
    let mut mean = vec![0.0; d];
    for tally in &detail.tree_tallies {
        for (slot, value) in mean.iter_mut().zip(tally) {
            *slot += value / m;
        }
    }
    let total: f64 = mean.iter().sum();
    if total <= 0.0 {
        return Err(Error::contract(
            "no split reduced impurity; importance is undefined",
        ));
    }
    let scores = dataset
        .schema()
        .iter()
        .zip(&mean)
        .map(|(name, v)| (name.clone(), v / total))
        .collect();
    Ok(ImportanceScores {
        method: RankMethod::GiniImportance,
        scores,
    })
}

/// Information gain of every feature, in schema order.
pub fn information_gain_scores(dataset: &Dataset, bins: usize) -> Result<ImportanceScores> {
    let scores = dataset
        .schema()
        .iter()
        .map(|name| information_gain(dataset, name, bins).map(|v| (name.clone(), v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ImportanceScores {
        method: RankMethod::InformationGain,
        scores,
    })
}

/// Score every feature with `method` and sort descending; tied scores keep
/// schema order.
pub fn rank_features(
    dataset: &Dataset,
    method: RankMethod,
    params: &RankParams,
    seed: u64,
) -> Result<FeatureRanking> {
    let scores = match method {
        RankMethod::GiniImportance => gini_importance(dataset, &params.forest, seed)?,
        RankMethod::InformationGain => information_gain_scores(dataset, params.bins)?,
    };
    Ok(ranking_from_scores(&scores))
}

/// Order features by descending score; stable, so ties keep schema order.
pub fn ranking_from_scores(scores: &ImportanceScores) -> FeatureRanking {
    let mut order: Vec<usize> = (0..scores.scores.len()).collect();
    order.sort_by(|&a, &b| scores.scores[b].1.total_cmp(&scores.scores[a].1));
    FeatureRanking {
        method: scores.method,
        features: order
            .into_iter()
            .map(|i| scores.scores[i].0.clone())
            .collect(),
    }
}

/// One point of an F1-versus-feature-count curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub n: usize,
    pub feature_added: String,
    pub weighted_f1: f64,
}

/// Weighted F1 of a model on the top-n ranked features, for every n.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCurve {
    pub method: RankMethod,
    pub model: String,
    pub points: Vec<CurvePoint>,
}

/// Cross-validated weighted F1 for each ranked prefix of the schema.
///
/// The fold assignment depends only on labels and the seed, so every prefix
/// is evaluated on identical folds (a paired comparison), and the final point
/// equals a direct full-feature cross-validation with the same seed.
pub fn feature_curve(
    dataset: &Dataset,
    ranking: &FeatureRanking,
    model_spec: &ModelSpec,
    k_folds: usize,
    seed: u64,
) -> Result<FeatureCurve> {
    let mut sorted_ranked: Vec<&String> = ranking.features.iter().collect();
    sorted_ranked.sort();
    let mut sorted_schema: Vec<&String> = dataset.schema().iter().collect();
    sorted_schema.sort();
    if sorted_ranked != sorted_schema {
        return Err(Error::param(
            "ranking must cover exactly the dataset schema",
        ));
    }
    let mut points = Vec::with_capacity(ranking.features.len());
    for n in 1..=ranking.features.len() {
        let projected = dataset.project(&ranking.features[..n])?;
        let report = eval::cross_validate(&projected, model_spec, k_folds, seed)?;
        points.push(CurvePoint {
            n,
            feature_added: ranking.features[n - 1].clone(),
            weighted_f1: report.weighted_f1,
        });
    }
    Ok(FeatureCurve {
        method: ranking.method,
        model: model_spec.describe(),
        points,
    })
}
