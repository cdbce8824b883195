//! Python bindings: capture ingestion, datasets, ranking, the three
//! classifiers, cross-validation and the latency harness.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use botsift::capture::{self, AssembleConfig, LabelPolicy};
use botsift::dataset;
use botsift::error::Error;
use botsift::eval;
use botsift::models::{self, FeatureSubsample, ForestParams, ModelSpec, TreeParams};
use botsift::ranking;

fn to_py_err(e: Error) -> PyErr {
    match &e {
        Error::Io(_) | Error::FileIo { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Parse a JSON string into Python objects via the stdlib json module.
fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (text,))?.unbind())
}

/// A labeled dataset with a named feature schema.
#[pyclass(name = "Dataset", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: dataset::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Read a `label,<features...>` CSV.
    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: dataset::Dataset::read_csv(path).map_err(to_py_err)?,
        })
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        self.inner.write_csv(path).map_err(to_py_err)
    }

    #[getter]
    fn schema(&self) -> Vec<String> {
        self.inner.schema().to_vec()
    }

    #[getter]
    fn classes(&self) -> Vec<String> {
        self.inner.classes().to_vec()
    }

    fn class_counts<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let dict = PyDict::new(py);
        for (class, count) in self.inner.class_counts() {
            dict.set_item(class, count)?;
        }
        Ok(dict)
    }

    /// Keep at most `cap` samples per class (seeded sampling).
    fn quasi_balance(&self, cap: usize, seed: u64) -> PyResult<Self> {
        Ok(PyDataset {
            inner: self.inner.quasi_balance(cap, seed).map_err(to_py_err)?,
        })
    }

    /// Reorder columns to the given feature subset.
    fn project(&self, features: Vec<String>) -> PyResult<Self> {
        Ok(PyDataset {
            inner: self.inner.project(&features).map_err(to_py_err)?,
        })
    }

    fn row(&self, index: usize) -> PyResult<(Vec<f64>, String)> {
        let sample = self
            .inner
            .samples()
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("row {index} out of range")))?;
        Ok((sample.values.clone(), sample.label.clone()))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} samples, {} features, {} classes)",
            self.inner.len(),
            self.inner.schema().len(),
            self.inner.classes().len()
        )
    }
}

/// A trained classifier (decision tree, random forest or k-NN).
#[pyclass(name = "Model")]
struct PyModel {
    inner: models::Model,
    seed: u64,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    #[getter]
    fn schema(&self) -> Vec<String> {
        self.inner.schema().to_vec()
    }

    #[getter]
    fn classes(&self) -> Vec<String> {
        self.inner.classes().to_vec()
    }

    fn predict(&self, values: Vec<f64>) -> PyResult<String> {
        Ok(self.inner.predict(&values).map_err(to_py_err)?.to_string())
    }

    fn save(&self, path: &str) -> PyResult<()> {
        models::save_model(&self.inner, self.seed, path).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={})", self.inner.kind())
    }
}

fn build_spec(
    model: &str,
    m: usize,
    k: usize,
    depth: Option<usize>,
    min_split: usize,
) -> PyResult<ModelSpec> {
    let tree = TreeParams {
        max_depth: depth,
        min_samples_split: min_split,
    };
    match model {
        "dt" => Ok(ModelSpec::DecisionTree(tree)),
        "rf" => Ok(ModelSpec::RandomForest(ForestParams {
            m,
            bootstrap: true,
            feature_subsample: FeatureSubsample::Sqrt,
            tree,
        })),
        "knn" => Ok(ModelSpec::Knn { k }),
        other => Err(PyValueError::new_err(format!(
            "unknown model '{other}' (expected dt, rf or knn)"
        ))),
    }
}

/// Read capture files, assemble TCP flows, label them and extract features.
#[pyfunction]
#[pyo3(signature = (captures, labels_path, default_label=None, min_packets=2,
                    idle_timeout=300.0, terminate_on_rst=true))]
fn extract_dataset(
    captures: Vec<String>,
    labels_path: &str,
    default_label: Option<String>,
    min_packets: usize,
    idle_timeout: f64,
    terminate_on_rst: bool,
) -> PyResult<PyDataset> {
    let rules_text = std::fs::read_to_string(labels_path)
        .map_err(|e| PyIOError::new_err(format!("{labels_path}: {e}")))?;
    let rules = capture::parse_label_rules(&rules_text).map_err(to_py_err)?;
    let policy = match default_label {
        Some(label) => LabelPolicy::Default(label),
        None => LabelPolicy::Drop,
    };
    let config = AssembleConfig {
        idle_timeout,
        terminate_on_rst,
    };
    let mut labeled = Vec::new();
    for path in &captures {
        let packets = capture::read_capture(path).map_err(to_py_err)?;
        let flows = capture::assemble_flows(&packets, &config);
        labeled.extend(capture::label_flows(flows, &rules, &policy).map_err(to_py_err)?);
    }
    Ok(PyDataset {
        inner: dataset::Dataset::from_labeled_flows(&labeled, min_packets).map_err(to_py_err)?,
    })
}

/// The canonical 11-feature schema.
#[pyfunction]
fn feature_schema() -> Vec<String> {
    botsift::features::feature_schema()
}

/// A built-in feature subset by name (five, six, seven, all).
#[pyfunction]
fn subset_features(name: &str) -> PyResult<Vec<String>> {
    eval::subset_features(name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown subset '{name}'")))
}

/// Rank features by `gi` or `ig`; returns (feature, score) pairs, most
/// important first.
#[pyfunction]
#[pyo3(signature = (dataset, method, bins=10, m=10, seed=0))]
fn rank_features(
    dataset: &PyDataset,
    method: &str,
    bins: usize,
    m: usize,
    seed: u64,
) -> PyResult<Vec<(String, f64)>> {
    let method = ranking::RankMethod::parse(method).map_err(to_py_err)?;
    let scores = match method {
        ranking::RankMethod::GiniImportance => {
            let params = ForestParams {
                m,
                ..Default::default()
            };
            ranking::gini_importance(&dataset.inner, &params, seed).map_err(to_py_err)?
        }
        ranking::RankMethod::InformationGain => {
            ranking::information_gain_scores(&dataset.inner, bins).map_err(to_py_err)?
        }
    };
    let order = ranking::ranking_from_scores(&scores);
    Ok(order
        .features
        .iter()
        .map(|f| {
            let score = scores
                .scores
                .iter()
                .find(|(name, _)| name == f)
                .map(|(_, s)| *s)
                .unwrap_or(0.0);
            (f.clone(), score)
        })
        .collect())
}

/// Train a classifier.
#[pyfunction]
#[pyo3(signature = (dataset, model, m=10, k=1, depth=None, min_split=2, seed=0))]
fn train(
    dataset: &PyDataset,
    model: &str,
    m: usize,
    k: usize,
    depth: Option<usize>,
    min_split: usize,
    seed: u64,
) -> PyResult<PyModel> {
    let spec = build_spec(model, m, k, depth, min_split)?;
    Ok(PyModel {
        inner: spec.train(&dataset.inner, seed).map_err(to_py_err)?,
        seed,
    })
}

/// Load a model saved by `Model.save`.
#[pyfunction]
fn load_model(path: &str) -> PyResult<PyModel> {
    Ok(PyModel {
        inner: models::load_model(path).map_err(to_py_err)?,
        seed: 0,
    })
}

/// Weighted F1 for every ranked feature prefix (n = 1..all), as a list of
/// {n, feature_added, f1} dicts. Fold assignment is shared across prefixes.
#[pyfunction]
#[pyo3(signature = (dataset, method, model, folds=10, seed=0, bins=10,
                    m=10, k=1, depth=None, min_split=2))]
#[allow(clippy::too_many_arguments)]
fn feature_curve(
    py: Python<'_>,
    dataset: &PyDataset,
    method: &str,
    model: &str,
    folds: usize,
    seed: u64,
    bins: usize,
    m: usize,
    k: usize,
    depth: Option<usize>,
    min_split: usize,
) -> PyResult<Py<PyAny>> {
    let method = ranking::RankMethod::parse(method).map_err(to_py_err)?;
    let spec = build_spec(model, m, k, depth, min_split)?;
    let params = ranking::RankParams {
        bins,
        forest: ForestParams {
            m,
            ..Default::default()
        },
    };
    let order = ranking::rank_features(&dataset.inner, method, &params, seed).map_err(to_py_err)?;
    let curve =
        ranking::feature_curve(&dataset.inner, &order, &spec, folds, seed).map_err(to_py_err)?;
    let points: Vec<serde_json::Value> = curve
        .points
        .iter()
        .map(|p| {
            serde_json::json!({
                "n": p.n,
                "feature_added": p.feature_added,
                "f1": p.weighted_f1,
            })
        })
        .collect();
    json_to_py(py, &serde_json::Value::Array(points).to_string())
}

/// Stratified k-fold cross-validation; returns the evaluation report as a
/// dict.
#[pyfunction]
#[pyo3(signature = (dataset, model, folds=10, seed=0, m=10, k=1, depth=None, min_split=2))]
#[allow(clippy::too_many_arguments)]
fn cross_validate(
    py: Python<'_>,
    dataset: &PyDataset,
    model: &str,
    folds: usize,
    seed: u64,
    m: usize,
    k: usize,
    depth: Option<usize>,
    min_split: usize,
) -> PyResult<Py<PyAny>> {
    let spec = build_spec(model, m, k, depth, min_split)?;
    let report = eval::cross_validate(&dataset.inner, &spec, folds, seed).map_err(to_py_err)?;
    json_to_py(py, &report.to_json().to_string())
}

/// Cross-validated metrics plus holdout latency for one subset and model;
/// returns the full report as a dict.
#[pyfunction]
#[pyo3(signature = (dataset, model, subset="all", folds=10, seed=0, holdout=0.1,
                    m=10, k=1, depth=None, min_split=2))]
#[allow(clippy::too_many_arguments)]
fn evaluate(
    py: Python<'_>,
    dataset: &PyDataset,
    model: &str,
    subset: &str,
    folds: usize,
    seed: u64,
    holdout: f64,
    m: usize,
    k: usize,
    depth: Option<usize>,
    min_split: usize,
) -> PyResult<Py<PyAny>> {
    let spec = build_spec(model, m, k, depth, min_split)?;
    let features = eval::subset_features(subset)
        .ok_or_else(|| PyValueError::new_err(format!("unknown subset '{subset}'")))?;
    let reports = eval::evaluate_subsets(
        &dataset.inner,
        &[(subset.to_string(), features)],
        std::slice::from_ref(&spec),
        folds,
        seed,
        holdout,
    )
    .map_err(to_py_err)?;
    json_to_py(py, &reports[0].to_json().to_string())
}

/// Mean seconds per classified sample, single-threaded.
#[pyfunction]
#[pyo3(signature = (model, dataset, warmup=3, passes=10))]
fn benchmark_latency(
    model: &PyModel,
    dataset: &PyDataset,
    warmup: usize,
    passes: usize,
) -> PyResult<f64> {
    let projected = dataset
        .inner
        .project(model.inner.schema())
        .map_err(to_py_err)?;
    let samples: Vec<Vec<f64>> = projected
        .samples()
        .iter()
        .map(|s| s.values.clone())
        .collect();
    let report =
        eval::benchmark_latency(&model.inner, &samples, warmup, passes).map_err(to_py_err)?;
    Ok(report.seconds_per_sample)
}

/// F1 per millisecond of classification time.
#[pyfunction]
fn performance_ratio(f1: f64, seconds_per_sample: f64) -> PyResult<f64> {
    eval::performance_ratio(f1, seconds_per_sample).map_err(to_py_err)
}

/// Gini impurity of per-class counts.
#[pyfunction]
fn gini_impurity(counts: Vec<usize>) -> PyResult<f64> {
    ranking::gini_impurity(&ranking::ClassCounts(counts)).map_err(to_py_err)
}

/// Entropy (bits) of per-class counts.
#[pyfunction]
fn entropy(counts: Vec<usize>) -> PyResult<f64> {
    ranking::entropy(&ranking::ClassCounts(counts)).map_err(to_py_err)
}

/// Information gain of one feature for the labels, in bits.
#[pyfunction]
#[pyo3(signature = (dataset, feature, bins=10))]
fn information_gain(dataset: &PyDataset, feature: &str, bins: usize) -> PyResult<f64> {
    ranking::information_gain(&dataset.inner, feature, bins).map_err(to_py_err)
}

#[pymodule]
fn botsift_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(extract_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(feature_schema, m)?)?;
    m.add_function(wrap_pyfunction!(subset_features, m)?)?;
    m.add_function(wrap_pyfunction!(rank_features, m)?)?;
    m.add_function(wrap_pyfunction!(feature_curve, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(load_model, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark_latency, m)?)?;
    m.add_function(wrap_pyfunction!(performance_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(gini_impurity, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(information_gain, m)?)?;
    m.add("__version__", botsift::VERSION)?;
    Ok(())
}
