//! Discrete Bayesian-network classifier over binary Low/High nodes.
//!
//! Nodes are the signals plus one class node; structure is either naive
//! (class is every signal's sole parent) or a K2-scored hill climb that adds
//! signal-to-signal edges on top of the naive skeleton. Inference is exact
//! enumeration, which is instant at the handful of binary nodes this
//! pipeline uses. Values are encoded as 0 (Low / no attack) and 1 (High /
//! attack).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use statrs::function::gamma::ln_gamma;

use crate::dataset::{Discretizer, WeightedDataset, HIGH, LOW};
use crate::error::{Error, Result};

/// How the parent graph is learned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StructureStrategy {
    /// Every signal's sole parent is the class node.
    #[default]
    Naive,
    /// Start from the naive skeleton and greedily add signal-to-signal
    /// edges while the K2 score improves.
    K2HillClimb,
}

/// A fitted network: node list (signals first, class last), parent lists,
/// one CPT per node, and the cut points that discretized the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNetModel {
    pub nodes: Vec<String>,
    pub class_index: usize,
    pub parents: Vec<Vec<usize>>,
    /// `cpts[node][parent_config] = [P(node=0 | config), P(node=1 | config)]`,
    /// where `parent_config` packs parent values as bits in parent-list order.
    pub cpts: Vec<Vec<[f64; 2]>>,
    pub discretizer: Discretizer,
}

/// Per-signal conditional probabilities against the class, with the
/// discriminativeness score `|P(High|attack) - P(High|clear)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalImportance {
    pub signal: String,
    pub p_high_attack: f64,
    pub p_low_attack: f64,
    pub p_high_clear: f64,
    pub p_low_clear: f64,
    pub score: f64,
    /// Whether the signal is connected to the class node in the structure.
    pub class_connected: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CptReport {
    pub signals: Vec<SignalImportance>,
}

impl CptReport {
    /// Signals ordered by descending discriminativeness.
    pub fn ranked(&self) -> Vec<&SignalImportance> {
        let mut refs: Vec<&SignalImportance> = self.signals.iter().collect();
        refs.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.signal.cmp(&b.signal)));
        refs
    }
}

fn bin_of(value: f64) -> Result<usize> {
    if value == LOW {
        Ok(0)
    } else if value == HIGH {
        Ok(1)
    } else {
        Err(Error::Input(format!(
            "feature value {value} is not a Low/High code; discretize the data first"
        )))
    }
}

fn require_both_classes(train: &WeightedDataset) -> Result<()> {
    let counts = train.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass(
            "training data must contain both classes".into(),
        ));
    }
    Ok(())
}

/// Weighted value counts for `node` under each configuration of `parents`.
fn weighted_counts(
    train: &WeightedDataset,
    node: usize,
    parents: &[usize],
    class_index: usize,
) -> Result<Vec<[f64; 2]>> {
    let n_configs = 1usize << parents.len();
    let mut counts = vec![[0.0f64; 2]; n_configs];
    for row in &train.rows {
        let value_of = |i: usize| -> Result<usize> {
            if i == class_index {
                Ok(row.label as usize)
            } else {
                bin_of(row.features[i])
            }
        };
        let mut config = 0usize;
        for (bit, &p) in parents.iter().enumerate() {
            config |= value_of(p)? << bit;
        }
        counts[config][value_of(node)?] += row.weight;
    }
    Ok(counts)
}

/// K2 (Cooper-Herskovits) local score with uniform Dirichlet priors,
/// evaluated on weighted counts.
fn k2_local_score(counts: &[[f64; 2]]) -> f64 {
    counts
        .iter()
        .map(|c| {
            let total = c[0] + c[1];
            ln_gamma(2.0) - ln_gamma(total + 2.0) + ln_gamma(c[0] + 1.0) + ln_gamma(c[1] + 1.0)
        })
        .sum()
}

/// Is `to` reachable from `from` following child-to-parent edges?
fn has_path(parents: &[Vec<usize>], from: usize, to: usize) -> bool {
    let mut stack = vec![from];
    let mut seen = vec![false; parents.len()];
    while let Some(node) = stack.pop() {
        if node == to {
            return true;
        }
        if seen[node] {
            continue;
        }
        seen[node] = true;
        stack.extend(parents[node].iter().copied());
    }
    false
}

pub fn is_acyclic(parents: &[Vec<usize>]) -> bool {
    for node in 0..parents.len() {
        for &p in &parents[node] {
            if has_path(parents, p, node) {
                return false;
            }
        }
    }
    true
}

/// Learn the parent map on discretized training data. Node order is the
/// schema's signals followed by the class node.
pub fn learn_structure(
    train: &WeightedDataset,
    max_parents: usize,
    strategy: StructureStrategy,
) -> Result<Vec<Vec<usize>>> {
    if max_parents < 1 {
        return Err(Error::Config("max_parents must be at least 1".into()));
    }
    if train.is_empty() {
        return Err(Error::Input("cannot learn structure on no rows".into()));
    }
    require_both_classes(train)?;
    let n_signals = train.schema.arity();
    let class_index = n_signals;
    let mut parents: Vec<Vec<usize>> = (0..n_signals).map(|_| vec![class_index]).collect();
    parents.push(Vec::new());

    if strategy == StructureStrategy::Naive {
        return Ok(parents);
    }

    let mut local_scores: Vec<f64> = (0..=n_signals)
        .map(|node| {
            weighted_counts(train, node, &parents[node], class_index).map(|c| k2_local_score(&c))
        })
        .collect::<Result<_>>()?;

    loop {
        let mut best: Option<(f64, usize, usize)> = None; // (gain, child, new parent)
        for child in 0..n_signals {
            if parents[child].len() >= max_parents {
                continue;
            }
            for candidate in 0..n_signals {
                if candidate == child || parents[child].contains(&candidate) {
                    continue;
                }
                // candidate -> child closes a cycle iff candidate already
                // reaches child through its own parents
                if has_path(&parents, candidate, child) {
                    continue;
                }
                let mut trial = parents[child].clone();
                trial.push(candidate);
                let counts = weighted_counts(train, child, &trial, class_index)?;
                let gain = k2_local_score(&counts) - local_scores[child];
                if gain > 0.0 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, child, candidate));
                }
            }
        }
        match best {
            Some((gain, child, parent)) => {
                parents[child].push(parent);
                local_scores[child] += gain;
            }
            None => break,
        }
    }
    debug_assert!(is_acyclic(&parents));
    Ok(parents)
}

/// Estimate every CPT with symmetric Dirichlet smoothing `alpha`:
/// `(weighted count + alpha) / (config total + 2 alpha)`. A configuration
/// with no mass and no smoothing falls back to uniform.
pub fn fit_cpts(
    train: &WeightedDataset,
    parents: Vec<Vec<usize>>,
    alpha: f64,
    discretizer: Discretizer,
) -> Result<BayesNetModel> {
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::Config(format!(
            "smoothing alpha must be non-negative, got {alpha}"
        )));
    }
    require_both_classes(train)?;
    let n_signals = train.schema.arity();
    let class_index = n_signals;
    if parents.len() != n_signals + 1 {
        return Err(Error::Input(format!(
            "parent map covers {} nodes, expected {}",
            parents.len(),
            n_signals + 1
        )));
    }
    if !is_acyclic(&parents) {
        return Err(Error::Input("parent map contains a cycle".into()));
    }

    let mut cpts = Vec::with_capacity(n_signals + 1);
    for (node, node_parents) in parents.iter().enumerate() {
        let counts = weighted_counts(train, node, node_parents, class_index)?;
        let table = counts
            .iter()
            .map(|c| {
                let total = c[0] + c[1] + 2.0 * alpha;
                if total == 0.0 {
                    [0.5, 0.5]
                } else {
                    [(c[0] + alpha) / total, (c[1] + alpha) / total]
                }
            })
            .collect();
        cpts.push(table);
    }

    let mut nodes = train.schema.signals.clone();
    nodes.push(train.schema.class_name.clone());
    Ok(BayesNetModel {
        nodes,
        class_index,
        parents,
        cpts,
        discretizer,
    })
}

impl BayesNetModel {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    /// Every CPT row must sum to 1 within 1e-9 and the graph must be a DAG.
    pub fn validate(&self) -> Result<()> {
        if !is_acyclic(&self.parents) {
            return Err(Error::Input("model parent map contains a cycle".into()));
        }
        for (node, table) in self.cpts.iter().enumerate() {
            if table.len() != 1 << self.parents[node].len() {
                return Err(Error::Input(format!(
                    "CPT for node {} has {} rows, expected {}",
                    self.nodes[node],
                    table.len(),
                    1 << self.parents[node].len()
                )));
            }
            for row in table {
                if (row[0] + row[1] - 1.0).abs() > 1e-9 {
                    return Err(Error::Input(format!(
                        "CPT row for node {} sums to {}",
                        self.nodes[node],
                        row[0] + row[1]
                    )));
                }
            }
        }
        Ok(())
    }

    fn config_of(&self, node: usize, assignment: &[u8]) -> usize {
        self.parents[node]
            .iter()
            .enumerate()
            .fold(0usize, |cfg, (bit, &p)| {
                cfg | ((assignment[p] as usize) << bit)
            })
    }

    /// Chain-rule joint probability of a full assignment (one 0/1 value per
    /// node, in node order).
    pub fn joint_probability(&self, assignment: &[u8]) -> Result<f64> {
        if assignment.len() != self.n_nodes() {
            return Err(Error::Input(format!(
                "assignment covers {} nodes, model has {}",
                assignment.len(),
                self.n_nodes()
            )));
        }
        if assignment.iter().any(|&v| v > 1) {
            return Err(Error::Input("assignment values must be 0 or 1".into()));
        }
        let mut p = 1.0;
        for node in 0..self.n_nodes() {
            let cfg = self.config_of(node, assignment);
            p *= self.cpts[node][cfg][assignment[node] as usize];
        }
        Ok(p)
    }

    /// Exact posterior of `query` given partial evidence, by enumeration
    /// over all completions.
    pub fn posterior(&self, evidence: &[Option<u8>], query: usize) -> Result<[f64; 2]> {
        if evidence.len() != self.n_nodes() {
            return Err(Error::Input(format!(
                "evidence covers {} nodes, model has {}",
                evidence.len(),
                self.n_nodes()
            )));
        }
        if query >= self.n_nodes() {
            return Err(Error::Input(format!("query node {query} out of range")));
        }
        if evidence[query].is_some() {
            return Err(Error::Config("query node must not carry evidence".into()));
        }
        let free: Vec<usize> = (0..self.n_nodes())
            .filter(|&i| i != query && evidence[i].is_none())
            .collect();
        let mut assignment: Vec<u8> = evidence.iter().map(|v| v.unwrap_or(0)).collect();
        let mut totals = [0.0f64; 2];
        for q in 0..2u8 {
            assignment[query] = q;
            for mask in 0..(1usize << free.len()) {
                for (bit, &node) in free.iter().enumerate() {
                    assignment[node] = ((mask >> bit) & 1) as u8;
                }
                totals[q as usize] += self.joint_probability(&assignment)?;
            }
        }
        let z = totals[0] + totals[1];
        if z <= 0.0 {
            return Err(Error::ImpossibleEvidence);
        }
        Ok([totals[0] / z, totals[1] / z])
    }

    /// P(class = 1 | signals) for one row. Numeric rows are discretized with
    /// the model's cut points; rows that are already 0/1 pass through.
    pub fn predict_score(&self, features: &[f64]) -> Result<f64> {
        let n_signals = self.n_nodes() - 1;
        if features.len() != n_signals {
            return Err(Error::Input(format!(
                "row has {} features, model has {} signal nodes",
                features.len(),
                n_signals
            )));
        }
        let discrete = features.iter().all(|&v| v == LOW || v == HIGH);
        let mut evidence = vec![None; self.n_nodes()];
        for (i, &v) in features.iter().enumerate() {
            let bin = if discrete {
                v as u8
            } else {
                let threshold = self.discretizer.threshold(&self.nodes[i]).ok_or_else(|| {
                    Error::Input(format!(
                        "numeric row needs a cut point for signal {}",
                        self.nodes[i]
                    ))
                })?;
                u8::from(v > threshold)
            };
            evidence[i] = Some(bin);
        }
        Ok(self.posterior(&evidence, self.class_index)?[1])
    }

    /// Per-signal conditional behaviour against the class: P(signal | class)
    /// from exact inference, the discriminativeness score, and class
    /// connectivity in the learned structure.
    pub fn importance_report(&self) -> Result<CptReport> {
        let connected = self.class_connectivity();
        let mut signals = Vec::new();
        for (node, &class_connected) in connected.iter().enumerate() {
            if node == self.class_index {
                continue;
            }
            let mut conditionals = [[0.0f64; 2]; 2]; // [class][signal value]
            for class in 0..2u8 {
                let mut evidence = vec![None; self.n_nodes()];
                evidence[self.class_index] = Some(class);
                conditionals[class as usize] = self.posterior(&evidence, node)?;
            }
            signals.push(SignalImportance {
                signal: self.nodes[node].clone(),
                p_high_attack: conditionals[1][1],
                p_low_attack: conditionals[1][0],
                p_high_clear: conditionals[0][1],
                p_low_clear: conditionals[0][0],
                score: (conditionals[1][1] - conditionals[0][1]).abs(),
                class_connected,
            });
        }
        Ok(CptReport { signals })
    }

    /// Undirected reachability from the class node.
    fn class_connectivity(&self) -> Vec<bool> {
        let n = self.n_nodes();
        let mut adjacent: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (child, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                adjacent[child].push(p);
                adjacent[p].push(child);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![self.class_index];
        while let Some(node) = stack.pop() {
            if seen[node] {
                continue;
            }
            seen[node] = true;
            stack.extend(adjacent[node].iter().copied());
        }
        seen
    }

    /// Flat text serialization, human-diffable, round-trip exact. Floats are
    /// written with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::from("bayesnet v1\n");
        let _ = writeln!(out, "nodes {}", self.n_nodes());
        for name in &self.nodes {
            let _ = writeln!(out, "node {name}");
        }
        let _ = writeln!(out, "class {}", self.class_index);
        for (node, ps) in self.parents.iter().enumerate() {
            let mut line = format!("parents {node}");
            for p in ps {
                let _ = write!(line, " {p}");
            }
            let _ = writeln!(out, "{line}");
        }
        for (name, threshold) in &self.discretizer.cut_points {
            let _ = writeln!(out, "cut {name} {threshold:.16e}");
        }
        for (node, table) in self.cpts.iter().enumerate() {
            for (cfg, row) in table.iter().enumerate() {
                let _ = writeln!(out, "cpt {node} {cfg} {:.16e} {:.16e}", row[0], row[1]);
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<BayesNetModel> {
        let bad = |line: usize, msg: &str| Error::Parse {
            path: "<model>".into(),
            line,
            msg: msg.into(),
        };
        let mut lines = text.lines().enumerate();
        let (_, magic) = lines.next().ok_or_else(|| bad(1, "empty model"))?;
        if magic.trim() != "bayesnet v1" {
            return Err(bad(1, "not a bayesnet v1 model"));
        }
        let mut nodes: Vec<String> = Vec::new();
        let mut class_index = None;
        let mut parents: Vec<Vec<usize>> = Vec::new();
        let mut cuts: Vec<(String, f64)> = Vec::new();
        let mut cpts: Vec<Vec<[f64; 2]>> = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() || line == "end" {
                continue;
            }
            let mut tokens = line.split_whitespace();
            match tokens.next() {
                Some("nodes") => {
                    let n: usize = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(lineno, "bad node count"))?;
                    parents = vec![Vec::new(); n];
                    cpts = vec![Vec::new(); n];
                }
                Some("node") => {
                    nodes.push(tokens.collect::<Vec<_>>().join(" "));
                }
                Some("class") => {
                    class_index = tokens.next().and_then(|t| t.parse().ok());
                }
                Some("parents") => {
                    let node: usize = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(lineno, "bad parents line"))?;
                    let ps: Vec<usize> = tokens
                        .map(|t| t.parse().map_err(|_| bad(lineno, "bad parent index")))
                        .collect::<Result<_>>()?;
                    *parents
                        .get_mut(node)
                        .ok_or_else(|| bad(lineno, "parents node out of range"))? = ps;
                }
                Some("cut") => {
                    let name = tokens
                        .next()
                        .ok_or_else(|| bad(lineno, "bad cut line"))?
                        .to_string();
                    let value: f64 = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(lineno, "bad cut value"))?;
                    cuts.push((name, value));
                }
                Some("cpt") => {
                    let node: usize = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(lineno, "bad cpt line"))?;
                    let cfg: usize = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(lineno, "bad cpt config"))?;
                    let p0: f64 = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(lineno, "bad cpt probability"))?;
                    let p1: f64 = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(lineno, "bad cpt probability"))?;
                    let table = cpts
                        .get_mut(node)
                        .ok_or_else(|| bad(lineno, "cpt node out of range"))?;
                    if table.len() != cfg {
                        return Err(bad(lineno, "cpt rows out of order"));
                    }
                    table.push([p0, p1]);
                }
                _ => return Err(bad(lineno, "unknown model line")),
            }
        }
        let class_index =
            class_index.ok_or_else(|| Error::Input("model is missing its class line".into()))?;
        let model = BayesNetModel {
            nodes,
            class_index,
            parents,
            cpts,
            discretizer: Discretizer { cut_points: cuts },
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<BayesNetModel> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}
