//! The three classifiers and their on-disk JSON format.
//!
//! Model files are versioned (`"version": 1`). Trees are stored as nested
//! nodes `{"f": idx, "t": threshold, "l": ..., "r": ...}` with leaves
//! `{"leaf": label, "counts": {label: n, ...}}`; k-NN files embed the
//! training matrix. Trees of any depth round-trip: writing and node
//! rebuilding use explicit stacks, and parsing runs without serde_json's
//! recursion limit on a large-stack thread.

mod forest;
mod knn;
mod tree;

pub use forest::{
    train_forest, train_forest_detailed, FeatureSubsample, ForestModel, ForestParams,
    ForestTrainDetail,
};
pub use knn::{build_knn, KnnModel};
pub use tree::{train_tree, train_tree_tracked, Node, TreeModel, TreeParams};

use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::dataset::Dataset;
use crate::error::Error;
use crate::Result;

const FORMAT_VERSION: u64 = 1;

/// What to train; the CLI and evaluation drivers speak in these.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    Knn { k: usize },
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::DecisionTree(_) => "dt",
            ModelSpec::RandomForest(_) => "rf",
            ModelSpec::Knn { .. } => "knn",
        }
    }

    /// Short identifier such as `dt`, `rf(m=10)`, `knn(k=1)`.
    pub fn describe(&self) -> String {
        match self {
            ModelSpec::DecisionTree(_) => "dt".to_string(),
            ModelSpec::RandomForest(p) => format!("rf(m={})", p.m),
            ModelSpec::Knn { k } => format!("knn(k={k})"),
        }
    }

    pub fn train(&self, dataset: &Dataset, seed: u64) -> Result<Model> {
        match self {
            ModelSpec::DecisionTree(params) => Ok(Model::Tree(tree::train_tree(dataset, params)?)),
            ModelSpec::RandomForest(params) => {
                Ok(Model::Forest(forest::train_forest(dataset, params, seed)?))
            }
            ModelSpec::Knn { k } => Ok(Model::Knn(knn::build_knn(dataset, *k)?)),
        }
    }
}

/// Any trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Tree(TreeModel),
    Forest(ForestModel),
    Knn(KnnModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Tree(_) => "dt",
            Model::Forest(_) => "rf",
            Model::Knn(_) => "knn",
        }
    }

    pub fn schema(&self) -> &[String] {
        match self {
            Model::Tree(m) => &m.schema,
            Model::Forest(m) => &m.schema,
            Model::Knn(m) => &m.schema,
        }
    }

    pub fn classes(&self) -> &[String] {
        match self {
            Model::Tree(m) => &m.classes,
            Model::Forest(m) => &m.classes,
            Model::Knn(m) => &m.classes,
        }
    }

    pub fn predict(&self, sample: &[f64]) -> Result<&str> {
        match self {
            Model::Tree(m) => m.predict(sample),
            Model::Forest(m) => m.predict(sample),
            Model::Knn(m) => m.predict(sample),
        }
    }

    /// Class-index prediction on a length-checked sample; the single-sample
    /// hot path used by evaluation and the latency harness.
    pub fn predict_idx(&self, sample: &[f64]) -> usize {
        match self {
            Model::Tree(m) => m.predict_idx(sample),
            Model::Forest(m) => m.predict_idx(sample),
            Model::Knn(m) => m.predict_idx(sample),
        }
    }
}

/// Serialize a model to its JSON file format.
pub fn model_to_json(model: &Model, seed: u64) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str("{\"version\":1,\"kind\":\"");
    out.push_str(model.kind());
    out.push_str("\",\"tool_version\":");
    push_json_str(&mut out, crate::VERSION);
    out.push_str(&format!(",\"seed\":{seed},\"schema\":"));
    push_str_array(&mut out, model.schema());
    out.push_str(",\"classes\":");
    push_str_array(&mut out, model.classes());
    match model {
        Model::Tree(m) => {
            out.push_str(",\"params\":");
            push_tree_params(&mut out, &m.params);
            out.push_str(",\"tree\":");
            push_nodes(&mut out, &m.nodes, &m.classes);
        }
        Model::Forest(m) => {
            out.push_str(&format!(
                ",\"params\":{{\"m\":{},\"bootstrap\":{},\"feature_subsample\":{},",
                m.params.m,
                m.params.bootstrap,
                match m.params.feature_subsample {
                    FeatureSubsample::Sqrt => "\"sqrt\"".to_string(),
                    FeatureSubsample::All => "\"all\"".to_string(),
                    FeatureSubsample::Count(k) => k.to_string(),
                }
            ));
            push_tree_params_fields(&mut out, &m.params.tree);
            out.push_str(&format!("}},\"forest_seed\":{},\"trees\":[", m.seed));
            for (i, nodes) in m.trees.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                push_nodes(&mut out, nodes, &m.classes);
            }
            out.push(']');
        }
        Model::Knn(m) => {
            out.push_str(&format!(",\"params\":{{\"k\":{}}}", m.k));
            out.push_str(",\"training\":{\"points\":[");
            for (i, p) in m.points.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('[');
                for (j, v) in p.iter().enumerate() {
                    if j > 0 {
                        out.push(',');
                    }
                    push_f64(&mut out, *v);
                }
                out.push(']');
            }
            out.push_str("],\"labels\":[");
            for (i, l) in m.labels.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&l.to_string());
            }
            out.push_str("]}");
        }
    }
    out.push('}');
    out
}

fn push_tree_params(out: &mut String, params: &TreeParams) {
    out.push('{');
    push_tree_params_fields(out, params);
    out.push('}');
}

fn push_tree_params_fields(out: &mut String, params: &TreeParams) {
    match params.max_depth {
        Some(d) => out.push_str(&format!("\"max_depth\":{d},")),
        None => out.push_str("\"max_depth\":null,"),
    }
    out.push_str(&format!(
        "\"min_samples_split\":{}",
        params.min_samples_split
    ));
}

fn push_json_str(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn push_str_array(out: &mut String, items: &[String]) {
    out.push('[');
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_json_str(out, item);
    }
    out.push(']');
}

fn push_f64(out: &mut String, v: f64) {
    // Shortest round-trip decimal; always a valid JSON number for finite v.
    debug_assert!(v.is_finite());
    out.push_str(&format!("{v}"));
}

/// Nested `{f,t,l,r}` node emission with an explicit stack.
fn push_nodes(out: &mut String, nodes: &[Node], classes: &[String]) {
    enum Step {
        Node(usize),
        Text(&'static str),
    }
    let mut stack = vec![Step::Node(0)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Text(t) => out.push_str(t),
            Step::Node(i) => match &nodes[i] {
                Node::Leaf { class, counts } => {
                    out.push_str("{\"leaf\":");
                    push_json_str(out, &classes[*class]);
                    out.push_str(",\"counts\":{");
                    let mut first = true;
                    for (ci, &count) in counts.iter().enumerate() {
                        if count == 0 {
                            continue;
                        }
                        if !first {
                            out.push(',');
                        }
                        first = false;
                        push_json_str(out, &classes[ci]);
                        out.push_str(&format!(":{count}"));
                    }
                    out.push_str("}}");
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.push_str(&format!("{{\"f\":{feature},\"t\":"));
                    push_f64(out, *threshold);
                    out.push_str(",\"l\":");
                    stack.push(Step::Text("}"));
                    stack.push(Step::Node(*right));
                    stack.push(Step::Text(",\"r\":"));
                    stack.push(Step::Node(*left));
                }
            },
        }
    }
}

/// Save a model to `path` as JSON.
pub fn save_model(model: &Model, seed: u64, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), model_to_json(model, seed)).map_err(|e| Error::FileIo {
        path: path.as_ref().display().to_string(),
        source: e,
    })
}

/// Load a model saved by [`save_model`].
pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::FileIo {
        path: path.as_ref().display().to_string(),
        source: e,
    })?;
    model_from_json(&text).map_err(|e| match e {
        Error::Model(msg) => Error::Model(format!("{}: {msg}", path.as_ref().display())),
        other => other,
    })
}

/// Parse the model JSON format.
pub fn model_from_json(text: &str) -> Result<Model> {
    let value = parse_deep_json(text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Model("top level is not an object".into()))?;

    let version = obj
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Model("missing version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::Model(format!(
            "unsupported model format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Model("missing kind".into()))?;
    let schema = str_vec(obj.get("schema"), "schema")?;
    let classes = str_vec(obj.get("classes"), "classes")?;
    if classes.is_empty() {
        return Err(Error::Model("empty class list".into()));
    }
    let params = obj
        .get("params")
        .and_then(Value::as_object)
        .ok_or_else(|| Error::Model("missing params".into()))?;

    match kind {
        "dt" => {
            let tree = obj
                .get("tree")
                .ok_or_else(|| Error::Model("missing tree".into()))?;
            Ok(Model::Tree(TreeModel {
                nodes: nodes_from_value(tree, &schema, &classes)?,
                params: tree_params_from(params)?,
                schema,
                classes,
            }))
        }
        "rf" => {
            let m = params
                .get("m")
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::Model("missing params.m".into()))?
                as usize;
            let bootstrap = params
                .get("bootstrap")
                .and_then(Value::as_bool)
                .ok_or_else(|| Error::Model("missing params.bootstrap".into()))?;
            let feature_subsample = match params.get("feature_subsample") {
                Some(Value::String(s)) if s == "sqrt" => FeatureSubsample::Sqrt,
                Some(Value::String(s)) if s == "all" => FeatureSubsample::All,
                Some(v) => FeatureSubsample::Count(
                    v.as_u64()
                        .ok_or_else(|| Error::Model("bad feature_subsample".into()))?
                        as usize,
                ),
                None => return Err(Error::Model("missing params.feature_subsample".into())),
            };
            let seed = obj.get("forest_seed").and_then(Value::as_u64).unwrap_or(0);
            let trees_value = obj
                .get("trees")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Model("missing trees".into()))?;
            if trees_value.len() != m {
                return Err(Error::Model(format!(
                    "params.m is {m} but file holds {} trees",
                    trees_value.len()
                )));
            }
            let trees = trees_value
                .iter()
                .map(|t| nodes_from_value(t, &schema, &classes))
                .collect::<Result<Vec<_>>>()?;
            Ok(Model::Forest(ForestModel {
                params: ForestParams {
                    m,
                    bootstrap,
                    feature_subsample,
                    tree: tree_params_from(params)?,
                },
                seed,
                schema,
                classes,
                trees,
            }))
        }
        "knn" => {
            let k = params
                .get("k")
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::Model("missing params.k".into()))?
                as usize;
            let training = obj
                .get("training")
                .and_then(Value::as_object)
                .ok_or_else(|| Error::Model("missing training".into()))?;
            let points_value = training
                .get("points")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Model("missing training.points".into()))?;
            let mut points = Vec::with_capacity(points_value.len());
            for row in points_value {
                let row = row
                    .as_array()
                    .ok_or_else(|| Error::Model("training point is not an array".into()))?;
                let mut values = Vec::with_capacity(row.len());
                for v in row {
                    values.push(
                        v.as_f64()
                            .ok_or_else(|| Error::Model("non-numeric training value".into()))?,
                    );
                }
                if values.len() != schema.len() {
                    return Err(Error::Model("training point width mismatch".into()));
                }
                points.push(values);
            }
            let labels_value = training
                .get("labels")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Model("missing training.labels".into()))?;
            let labels = labels_value
                .iter()
                .map(|v| {
                    v.as_u64()
                        .map(|l| l as usize)
                        .filter(|&l| l < classes.len())
                        .ok_or_else(|| Error::Model("bad training label index".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            if labels.len() != points.len() {
                return Err(Error::Model(
                    "training labels/points length mismatch".into(),
                ));
            }
            if k < 1 || k > points.len() {
                return Err(Error::Model(format!("k={k} out of range")));
            }
            Ok(Model::Knn(KnnModel {
                k,
                schema,
                classes,
                points,
                labels,
            }))
        }
        other => Err(Error::Model(format!("unknown model kind '{other}'"))),
    }
}

/// Deep model files exceed serde_json's default recursion limit, so parse
/// with the limit off inside a thread with a large stack.
fn parse_deep_json(text: &str) -> Result<Value> {
    let owned = text.to_string();
    let handle = std::thread::Builder::new()
        .stack_size(256 << 20)
        .spawn(move || -> std::result::Result<Value, serde_json::Error> {
            let mut de = serde_json::Deserializer::from_str(&owned);
            de.disable_recursion_limit();
            Value::deserialize(&mut de)
        })
        .map_err(Error::Io)?;
    handle
        .join()
        .map_err(|_| Error::Model("model parse thread panicked".into()))?
        .map_err(|e| Error::Model(format!("invalid JSON: {e}")))
}

fn tree_params_from(params: &serde_json::Map<String, Value>) -> Result<TreeParams> {
    let max_depth = match params.get("max_depth") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| Error::Model("bad max_depth".into()))? as usize,
        ),
    };
    let min_samples_split = params
        .get("min_samples_split")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Model("missing min_samples_split".into()))?
        as usize;
    Ok(TreeParams {
        max_depth,
        min_samples_split,
    })
}

fn str_vec(value: Option<&Value>, what: &str) -> Result<Vec<String>> {
    value
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Model(format!("missing {what}")))?
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::Model(format!("{what} entries must be strings")))
        })
        .collect()
}

/// Rebuild a node arena from nested JSON, without recursion.
fn nodes_from_value(root: &Value, schema: &[String], classes: &[String]) -> Result<Vec<Node>> {
    let mut nodes = vec![Node::Leaf {
        class: 0,
        counts: Vec::new(),
    }];
    let mut stack: Vec<(&Value, usize)> = vec![(root, 0)];
    while let Some((value, slot)) = stack.pop() {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Model("tree node is not an object".into()))?;
        if let Some(leaf) = obj.get("leaf") {
            let label = leaf
                .as_str()
                .ok_or_else(|| Error::Model("leaf label must be a string".into()))?;
            let class = classes
                .iter()
                .position(|c| c == label)
                .ok_or_else(|| Error::Model(format!("leaf label '{label}' not in classes")))?;
            let mut counts = vec![0usize; classes.len()];
            let count_map = obj
                .get("counts")
                .and_then(Value::as_object)
                .ok_or_else(|| Error::Model("leaf missing counts".into()))?;
            for (name, count) in count_map {
                let ci = classes
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::Model(format!("count label '{name}' not in classes")))?;
                counts[ci] = count
                    .as_u64()
                    .ok_or_else(|| Error::Model("counts must be integers".into()))?
                    as usize;
            }
            if counts.iter().all(|&c| c == 0) {
                return Err(Error::Model("leaf has empty counts".into()));
            }
            nodes[slot] = Node::Leaf { class, counts };
        } else {
            let feature = obj
                .get("f")
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::Model("split node missing f".into()))?
                as usize;
            if feature >= schema.len() {
                return Err(Error::Model(format!(
                    "split feature index {feature} out of range"
                )));
            }
            let threshold = obj
                .get("t")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::Model("split node missing t".into()))?;
            let left_value = obj
                .get("l")
                .ok_or_else(|| Error::Model("split node missing l".into()))?;
            let right_value = obj
                .get("r")
                .ok_or_else(|| Error::Model("split node missing r".into()))?;
            let left = nodes.len();
            nodes.push(Node::Leaf {
                class: 0,
                counts: Vec::new(),
            });
            let right = nodes.len();
            nodes.push(Node::Leaf {
                class: 0,
                counts: Vec::new(),
            });
            nodes[slot] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
            stack.push((right_value, right));
            stack.push((left_value, left));
        }
    }
    Ok(nodes)
}
