//! Labeled-sample container: CSV persistence, quasi-balanced construction,
//! feature projection, and stratified fold splitting.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::capture::TcpFlow;
use crate::error::Error;
use crate::features::{extract_features, feature_schema};
use crate::Result;

/// One labeled feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub values: Vec<f64>,
    pub label: String,
}

/// A labeled dataset with a named column schema.
///
/// `classes` always holds the distinct labels actually present, in
/// first-appearance order; that order is the tie-breaking order for
/// classifiers trained on the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<String>,
    samples: Vec<LabeledSample>,
    classes: Vec<String>,
}

impl Dataset {
    pub fn new(schema: Vec<String>, samples: Vec<LabeledSample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.values.len() != schema.len() {
                return Err(Error::contract(format!(
                    "sample {i} has {} values, schema has {} columns",
                    s.values.len(),
                    schema.len()
                )));
            }
            if s.label.is_empty() {
                return Err(Error::contract(format!("sample {i} has an empty label")));
            }
        }
        let classes = distinct_in_order(samples.iter().map(|s| s.label.as_str()));
        Ok(Dataset {
            schema,
            samples,
            classes,
        })
    }

    /// Build the full-schema dataset from labeled flows, dropping flows with
    /// fewer than `min_packets` packets.
    pub fn from_labeled_flows(labeled: &[(TcpFlow, String)], min_packets: usize) -> Result<Self> {
        let mut samples = Vec::new();
        for (flow, label) in labeled {
            if flow.packets.len() < min_packets {
                continue;
            }
            samples.push(LabeledSample {
                values: extract_features(flow)?.to_row().to_vec(),
                label: label.clone(),
            });
        }
        Dataset::new(feature_schema(), samples)
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    /// Per-class sample counts, in class order.
    pub fn class_counts(&self) -> Vec<(String, usize)> {
        let mut counts: Vec<(String, usize)> =
            self.classes.iter().map(|c| (c.clone(), 0)).collect();
        let index: HashMap<&str, usize> = self
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        for s in &self.samples {
            counts[index[s.label.as_str()]].1 += 1;
        }
        counts
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let samples: Vec<LabeledSample> =
            indices.iter().map(|&i| self.samples[i].clone()).collect();
        let classes = distinct_in_order(samples.iter().map(|s| s.label.as_str()));
        Dataset {
            schema: self.schema.clone(),
            samples,
            classes,
        }
    }

    /// Keep at most `cap` samples per class, selected by seeded uniform
    /// sampling without replacement; classes at or below the cap keep all
    /// their samples. Surviving rows stay in dataset order.
    pub fn quasi_balance(&self, cap: usize, seed: u64) -> Result<Dataset> {
        if cap < 1 {
            return Err(Error::param("cap must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = vec![false; self.samples.len()];
        for class in &self.classes {
            let mut indices: Vec<usize> = self
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| &s.label == class)
                .map(|(i, _)| i)
                .collect();
            if indices.len() > cap {
                indices.shuffle(&mut rng);
                indices.truncate(cap);
            }
            for i in indices {
                keep[i] = true;
            }
        }
        let kept: Vec<usize> = (0..self.samples.len()).filter(|&i| keep[i]).collect();
        Ok(self.subset(&kept))
    }

    /// Reorder columns to `subset` order, dropping the rest.
    pub fn project<S: AsRef<str>>(&self, subset: &[S]) -> Result<Dataset> {
        if subset.is_empty() {
            return Err(Error::param("feature subset must be non-empty"));
        }
        let mut indices = Vec::with_capacity(subset.len());
        let mut seen = Vec::new();
        for name in subset {
            let name = name.as_ref();
            if seen.contains(&name) {
                return Err(Error::param(format!(
                    "duplicate feature '{name}' in subset"
                )));
            }
            seen.push(name);
            let idx = self
                .schema
                .iter()
                .position(|f| f == name)
                .ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
            indices.push(idx);
        }
        let samples = self
            .samples
            .iter()
            .map(|s| LabeledSample {
                values: indices.iter().map(|&i| s.values[i]).collect(),
                label: s.label.clone(),
            })
            .collect();
        Ok(Dataset {
            schema: seen.iter().map(|s| s.to_string()).collect(),
            samples,
            classes: self.classes.clone(),
        })
    }

    /// Write `label,<schema...>` CSV. Floats use shortest round-trip decimal
    /// form, so write-then-read reproduces values bit-exactly.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref()).map_err(|e| Error::FileIo {
            path: path.as_ref().display().to_string(),
            source: e,
        })?;
        let mut w = BufWriter::new(file);
        self.write_csv_to(&mut w)
    }

    pub fn write_csv_to(&self, w: &mut impl Write) -> Result<()> {
        write!(w, "label")?;
        for name in &self.schema {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for s in &self.samples {
            // labels are restricted to [A-Za-z0-9_-]+ so no quoting is needed
            if !s
                .label
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
            {
                return Err(Error::contract(format!(
                    "label '{}' contains characters outside [A-Za-z0-9_-]",
                    s.label
                )));
            }
            write!(w, "{}", s.label)?;
            for v in &s.values {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a `label,<features...>` CSV written by [`Dataset::write_csv`].
    /// Lines starting with `#` are ignored.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
        let file = File::open(path.as_ref()).map_err(|e| Error::FileIo {
            path: path.as_ref().display().to_string(),
            source: e,
        })?;
        Self::read_csv_from(BufReader::new(file))
    }

    pub fn read_csv_from(reader: impl BufRead) -> Result<Dataset> {
        let mut schema: Option<Vec<String>> = None;
        let mut samples = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::CsvParse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            match &schema {
                None => {
                    if fields.first() != Some(&"label") {
                        return Err(Error::CsvParse {
                            line: line_no,
                            message: "header must start with 'label'".to_string(),
                        });
                    }
                    if fields.len() < 2 {
                        return Err(Error::CsvParse {
                            line: line_no,
                            message: "header names no feature columns".to_string(),
                        });
                    }
                    schema = Some(fields[1..].iter().map(|s| s.to_string()).collect());
                }
                Some(schema) => {
                    if fields.len() != schema.len() + 1 {
                        return Err(Error::CsvParse {
                            line: line_no,
                            message: format!(
                                "expected {} fields, found {}",
                                schema.len() + 1,
                                fields.len()
                            ),
                        });
                    }
                    let label = fields[0].to_string();
                    if label.is_empty() {
                        return Err(Error::CsvParse {
                            line: line_no,
                            message: "empty label".to_string(),
                        });
                    }
                    let mut values = Vec::with_capacity(schema.len());
                    for (col, cell) in fields[1..].iter().enumerate() {
                        let v: f64 = cell.parse().map_err(|_| Error::CsvParse {
                            line: line_no,
                            message: format!(
                                "non-numeric value '{cell}' in column '{}'",
                                schema[col]
                            ),
                        })?;
                        if !v.is_finite() {
                            return Err(Error::CsvParse {
                                line: line_no,
                                message: format!("non-finite value in column '{}'", schema[col]),
                            });
                        }
                        values.push(v);
                    }
                    samples.push(LabeledSample { values, label });
                }
            }
        }
        let schema = schema.ok_or_else(|| Error::CsvParse {
            line: 0,
            message: "missing header row".to_string(),
        })?;
        Dataset::new(schema, samples)
    }
}

/// Fold assignment for stratified k-fold cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldAssignment {
    pub k: usize,
    /// Fold index in `[0, k)` per sample.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }
}

/// Assign every sample to one of `k` folds, stratified by class: per class,
/// indices are shuffled (seeded) then dealt round-robin, so per-class fold
/// sizes differ by at most one.
///
/// Only labels and the seed matter, so projecting a dataset to a feature
/// subset leaves its fold assignment unchanged.
pub fn stratified_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::param("fold count must be >= 2"));
    }
    if dataset.is_empty() {
        return Err(Error::param("cannot fold an empty dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; dataset.len()];
    for class in dataset.classes() {
        let mut indices: Vec<usize> = dataset
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, s)| &s.label == class)
            .map(|(i, _)| i)
            .collect();
        indices.shuffle(&mut rng);
        for (pos, idx) in indices.into_iter().enumerate() {
            fold_of[idx] = pos % k;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}

fn distinct_in_order<'a>(labels: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = Vec::new();
    for label in labels {
        if !seen.iter().any(|s| s == label) {
            seen.push(label.to_string());
        }
    }
    seen
}
