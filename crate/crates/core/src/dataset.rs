//! Weighted instance model shared by all modules: schema, weights, binary
//! Low/High discretization, and dataset file I/O.
//!
//! Datasets are immutable after construction; every transformation returns a
//! new dataset. Discrete features are encoded as `0.0` (Low) and `1.0`
//! (High); a dataset whose every feature value is 0 or 1 is treated as
//! already discretized.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::span::TimeSpan;

pub const LOW: f64 = 0.0;
pub const HIGH: f64 = 1.0;

/// Ordered signal names plus the class column name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub signals: Vec<String>,
    pub class_name: String,
}

impl Schema {
    pub fn new(signals: Vec<String>, class_name: impl Into<String>) -> Self {
        Schema {
            signals,
            class_name: class_name.into(),
        }
    }

    pub fn arity(&self) -> usize {
        self.signals.len()
    }
}

/// One training/test row: feature values, binary class label, positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRow {
    pub features: Vec<f64>,
    pub label: u8,
    pub weight: f64,
}

impl InstanceRow {
    pub fn new(features: Vec<f64>, label: u8, weight: f64) -> Self {
        InstanceRow {
            features,
            label,
            weight,
        }
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Generated {
        attack_type: String,
        t_x: TimeSpan,
        t_g: TimeSpan,
    },
    Synthetic,
}

/// Ordered collection of weighted rows with a schema and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDataset {
    pub schema: Schema,
    pub rows: Vec<InstanceRow>,
    pub provenance: Provenance,
}

impl WeightedDataset {
    /// Build a dataset, validating row arity, labels, and weights.
    pub fn new(schema: Schema, rows: Vec<InstanceRow>, provenance: Provenance) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Input("dataset has no rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.features.len() != schema.arity() {
                return Err(Error::Input(format!(
                    "row {i} has {} features, schema expects {}",
                    row.features.len(),
                    schema.arity()
                )));
            }
            if row.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("row {i} has a non-finite feature")));
            }
            if row.label > 1 {
                return Err(Error::Input(format!(
                    "row {i} has class label {}, expected 0 or 1",
                    row.label
                )));
            }
            if !row.weight.is_finite() || row.weight <= 0.0 {
                return Err(Error::Input(format!(
                    "row {i} has weight {}, expected a positive real",
                    row.weight
                )));
            }
        }
        Ok(WeightedDataset {
            schema,
            rows,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.rows.iter().map(|r| r.weight).sum()
    }

    /// Row counts per class: `[negatives, positives]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for row in &self.rows {
            counts[row.label as usize] += 1;
        }
        counts
    }

    /// Summed weights per class: `[negatives, positives]`.
    pub fn class_weights(&self) -> [f64; 2] {
        let mut weights = [0.0f64; 2];
        for row in &self.rows {
            weights[row.label as usize] += row.weight;
        }
        weights
    }

    /// The label with fewer rows; ties go to the positive class.
    pub fn minority_label(&self) -> u8 {
        let counts = self.class_counts();
        if counts[0] < counts[1] {
            0
        } else {
            1
        }
    }

    /// Fraction of rows with label 1 (by count, not weight).
    pub fn positive_density(&self) -> f64 {
        self.class_counts()[1] as f64 / self.rows.len() as f64
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<WeightedDataset> {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        WeightedDataset::new(self.schema.clone(), rows, self.provenance.clone())
    }

    /// True when every feature value is already a Low/High code.
    pub fn is_discrete(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.features.iter().all(|&v| v == LOW || v == HIGH))
    }
}

/// Threshold selection rule for [`Discretizer::fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinStrategy {
    /// Threshold at the weighted median of each signal.
    Median,
    /// Threshold maximizing information gain against the class (one split).
    Entropy,
}

/// Per-signal Low/High cut points. A value maps Low iff `value <= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer {
    /// `(signal name, threshold)` in schema order.
    pub cut_points: Vec<(String, f64)>,
}

impl Discretizer {
    /// A discretizer with no cut points, for models trained on data that is
    /// already discrete.
    pub fn identity() -> Self {
        Discretizer { cut_points: vec![] }
    }

    pub fn threshold(&self, signal: &str) -> Option<f64> {
        self.cut_points
            .iter()
            .find(|(name, _)| name == signal)
            .map(|&(_, t)| t)
    }

    /// Fit one threshold per signal on the training data only.
    pub fn fit(train: &WeightedDataset, strategy: BinStrategy) -> Result<Discretizer> {
        if train.is_empty() {
            return Err(Error::Input("cannot fit a discretizer on no rows".into()));
        }
        let mut cut_points = Vec::with_capacity(train.schema.arity());
        for (col, name) in train.schema.signals.iter().enumerate() {
            let threshold = match strategy {
                BinStrategy::Median => weighted_median(train, col),
                BinStrategy::Entropy => entropy_threshold(train, col),
            };
            cut_points.push((name.clone(), threshold));
        }
        Ok(Discretizer { cut_points })
    }

    /// Map every numeric feature to Low/High. Weights and labels are
    /// untouched. Data that is already discrete passes through unchanged.
    pub fn apply(&self, ds: &WeightedDataset) -> Result<WeightedDataset> {
        let names: Vec<&String> = self.cut_points.iter().map(|(n, _)| n).collect();
        if ds.schema.signals.iter().collect::<Vec<_>>() != names {
            return Err(Error::SchemaMismatch(format!(
                "discretizer fitted on {:?}, dataset has {:?}",
                names, ds.schema.signals
            )));
        }
        if ds.is_discrete() {
            return Ok(ds.clone());
        }
        let rows = ds
            .rows
            .iter()
            .map(|row| {
                let features = row
                    .features
                    .iter()
                    .zip(self.cut_points.iter())
                    .map(|(&v, &(_, t))| if v <= t { LOW } else { HIGH })
                    .collect();
                InstanceRow::new(features, row.label, row.weight)
            })
            .collect();
        WeightedDataset::new(ds.schema.clone(), rows, ds.provenance.clone())
    }
}

/// Smallest value whose cumulative weight reaches half the total.
fn weighted_median(ds: &WeightedDataset, col: usize) -> f64 {
    let mut pairs: Vec<(f64, f64)> = ds
        .rows
        .iter()
        .map(|r| (r.features[col], r.weight))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|&(_, w)| w).sum();
    let mut cum = 0.0;
    for &(v, w) in &pairs {
        cum += w;
        if cum >= total / 2.0 {
            return v;
        }
    }
    pairs.last().unwrap().0
}

/// Weighted binary entropy of the class within a row subset.
fn class_entropy(rows: &[(f64, u8, f64)]) -> f64 {
    let total: f64 = rows.iter().map(|&(_, _, w)| w).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let pos: f64 = rows
        .iter()
        .filter(|&&(_, label, _)| label == 1)
        .map(|&(_, _, w)| w)
        .sum();
    let p = pos / total;
    let mut h = 0.0;
    for q in [p, 1.0 - p] {
        if q > 0.0 {
            h -= q * q.log2();
        }
    }
    h
}

/// Single split maximizing weighted information gain against the class.
/// Candidates are midpoints between consecutive distinct values; a constant
/// signal gets its constant as threshold (everything Low).
fn entropy_threshold(ds: &WeightedDataset, col: usize) -> f64 {
    let mut triples: Vec<(f64, u8, f64)> = ds
        .rows
        .iter()
        .map(|r| (r.features[col], r.label, r.weight))
        .collect();
    triples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = triples.iter().map(|&(_, _, w)| w).sum();
    let base = class_entropy(&triples);

    let mut best: Option<(f64, f64)> = None; // (gain, threshold)
    let mut split = 0;
    while split < triples.len() {
        // advance to the end of a run of equal values
        let v = triples[split].0;
        while split < triples.len() && triples[split].0 == v {
            split += 1;
        }
        if split == triples.len() {
            break;
        }
        let threshold = (v + triples[split].0) / 2.0;
        let (left, right) = triples.split_at(split);
        let wl: f64 = left.iter().map(|&(_, _, w)| w).sum();
        let gain = base
            - (wl / total) * class_entropy(left)
            - ((total - wl) / total) * class_entropy(right);
        let better = match best {
            None => true,
            Some((g, t)) => gain > g + 1e-12 || (gain > g - 1e-12 && threshold < t),
        };
        if better {
            best = Some((gain, threshold));
        }
    }
    match best {
        Some((_, t)) => t,
        None => triples[0].0, // constant signal
    }
}

/// Flat key=value sidecar metadata, order-preserving.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Metadata::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        if let Some(entry) = self.entries.iter_mut().find(|(k, _)| *k == key) {
            entry.1 = value;
        } else {
            self.entries.push((key, value));
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Metadata> {
        let text = fs::read_to_string(path)?;
        let mut meta = Metadata::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: "expected key=value".into(),
            })?;
            meta.set(k.trim(), v.trim());
        }
        Ok(meta)
    }
}

/// Sidecar path for a dataset file: the extension is replaced with `meta`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

fn provenance_metadata(ds: &WeightedDataset) -> Metadata {
    let mut meta = Metadata::new();
    match &ds.provenance {
        Provenance::Generated {
            attack_type,
            t_x,
            t_g,
        } => {
            meta.set("attack_type", attack_type);
            meta.set("t_x", t_x);
            meta.set("t_g", t_g);
        }
        Provenance::Synthetic => {
            meta.set("provenance", "synthetic");
        }
    }
    meta.set("rows", ds.len());
    meta.set("positive_rate", ds.positive_density());
    meta
}

/// Write a dataset as CSV (`signal_1,...,signal_n,class,weight`) plus its
/// key=value sidecar. Values are formatted so reading them back is
/// bit-exact.
pub fn write_dataset(ds: &WeightedDataset, path: &Path) -> Result<()> {
    write_dataset_with_metadata(ds, path, Metadata::new())
}

/// Like [`write_dataset`] but with extra sidecar entries appended after the
/// provenance block.
pub fn write_dataset_with_metadata(
    ds: &WeightedDataset,
    path: &Path,
    extra: Metadata,
) -> Result<()> {
    let mut out = String::new();
    for name in &ds.schema.signals {
        out.push_str(name);
        out.push(',');
    }
    out.push_str(&ds.schema.class_name);
    out.push_str(",weight\n");
    for row in &ds.rows {
        for v in &row.features {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{},{}\n", row.label, row.weight));
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;

    let mut meta = provenance_metadata(ds);
    for (k, v) in extra.entries() {
        meta.set(k, v);
    }
    meta.write(&sidecar_path(path))
}

/// Read a dataset written by [`write_dataset`]. The weight column may be
/// absent, in which case every row gets weight 1. Provenance is recovered
/// from the sidecar when one is present.
pub fn read_dataset(path: &Path) -> Result<WeightedDataset> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: display.clone(),
        line,
        msg,
    };

    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty dataset file".into()))?;
    let mut columns: Vec<&str> = header.split(',').collect();
    let has_weight = columns.last() == Some(&"weight");
    if has_weight {
        columns.pop();
    }
    let class_name = columns
        .pop()
        .ok_or_else(|| parse_err(1, "header needs at least a class column".into()))?;
    if columns.is_empty() {
        return Err(parse_err(1, "header has no signal columns".into()));
    }
    let schema = Schema::new(
        columns.iter().map(|s| s.to_string()).collect(),
        class_name.to_string(),
    );
    let want = schema.arity() + 1 + usize::from(has_weight);

    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != want {
            return Err(parse_err(
                lineno,
                format!("expected {want} fields, found {}", fields.len()),
            ));
        }
        let mut features = Vec::with_capacity(schema.arity());
        for (col, raw) in fields[..schema.arity()].iter().enumerate() {
            let v: f64 = raw.parse().map_err(|_| {
                parse_err(
                    lineno,
                    format!("bad value {raw:?} in column {}", schema.signals[col]),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    lineno,
                    format!("non-finite value in column {}", schema.signals[col]),
                ));
            }
            features.push(v);
        }
        let label: u8 = match fields[schema.arity()] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(parse_err(
                    lineno,
                    format!("bad class label {other:?}, expected 0 or 1"),
                ))
            }
        };
        let weight = if has_weight {
            let raw = fields[want - 1];
            let w: f64 = raw
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad weight {raw:?}")))?;
            if !w.is_finite() || w <= 0.0 {
                return Err(parse_err(
                    lineno,
                    format!("weight must be a positive real, found {raw}"),
                ));
            }
            w
        } else {
            1.0
        };
        rows.push(InstanceRow::new(features, label, weight));
    }

    let provenance = read_provenance(&sidecar_path(path));
    WeightedDataset::new(schema, rows, provenance)
}

fn read_provenance(sidecar: &Path) -> Provenance {
    let Ok(meta) = Metadata::read(sidecar) else {
        return Provenance::Synthetic;
    };
    let attack_type = meta.get("attack_type");
    let t_x = meta.get("t_x").and_then(|s| s.parse::<TimeSpan>().ok());
    let t_g = meta.get("t_g").and_then(|s| s.parse::<TimeSpan>().ok());
    match (attack_type, t_x, t_g) {
        (Some(a), Some(t_x), Some(t_g)) => Provenance::Generated {
            attack_type: a.to_string(),
            t_x,
            t_g,
        },
        _ => Provenance::Synthetic,
    }
}

/// Grouped per-signal values for building datasets by hand in tests and in
/// the synth generator.
pub fn dataset_from_columns(
    signals: &[&str],
    columns: &[Vec<f64>],
    labels: &[u8],
    weights: Option<&[f64]>,
) -> Result<WeightedDataset> {
    let schema = Schema::new(signals.iter().map(|s| s.to_string()).collect(), "class");
    let n = labels.len();
    let rows = (0..n)
        .map(|i| {
            InstanceRow::new(
                columns.iter().map(|c| c[i]).collect(),
                labels[i],
                weights.map_or(1.0, |w| w[i]),
            )
        })
        .collect();
    WeightedDataset::new(schema, rows, Provenance::Synthetic)
}
