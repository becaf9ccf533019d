//! Leakage-safe experimental protocol: repeated stratified cross-validation,
//! filtered training, weighted AUC, significance tests, CFS feature
//! selection, and the full granularity-by-filter sweep.
//!
//! Filters only ever see training folds. Per fold the harness applies the
//! rebalancing filter to the training rows only, fits the discretizer and
//! the network on the filtered train, and scores the untouched test rows
//! through the train-fitted cut points. Every random step draws a seed
//! derived from the plan seed, so a sweep is reproducible end to end
//! regardless of worker count.

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bayes::{self, BayesNetModel, CptReport, StructureStrategy};
use crate::dataset::{BinStrategy, Discretizer, WeightedDataset};
use crate::error::{Error, Result};
use crate::resample::{self, FilterOutput, FilterStats, SmotePPConfig};
use crate::seed;
use crate::span::TimeSpan;
use crate::timeline::{generate_datasets, EventRecord, GranularityPair, SignalConfig};

const SALT_SHUFFLE: u64 = 0x0F;
const SALT_FILTER: u64 = 0xF1;
const SALT_FOLD_PLAN: u64 = 0xCE;
const SALT_CFS: u64 = 0xCF;

/// Cross-validation plan; defaults to 10 repetitions of stratified 10-fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvPlan {
    pub folds: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for CvPlan {
    fn default() -> Self {
        CvPlan {
            folds: 10,
            repetitions: 10,
            seed: 0,
            stratified: true,
        }
    }
}

impl CvPlan {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Test/train size ratio of one fold, for the corrected t-test.
    pub fn test_train_ratio(&self) -> f64 {
        1.0 / (self.folds as f64 - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    /// `reps[repetition][fold]`.
    pub reps: Vec<Vec<FoldSplit>>,
    pub warning: Option<String>,
}

/// Per repetition: a fresh seeded shuffle, then class-wise round-robin
/// dealing across folds (each class continues from where the previous class
/// stopped, so fold sizes stay within one row of each other).
pub fn stratified_folds(ds: &WeightedDataset, plan: &CvPlan) -> Result<FoldPlan> {
    if plan.folds < 2 {
        return Err(Error::Config(
            "cross-validation needs at least 2 folds".into(),
        ));
    }
    if plan.repetitions < 1 {
        return Err(Error::Config(
            "cross-validation needs at least 1 repetition".into(),
        ));
    }
    let n = ds.len();
    if n < plan.folds {
        return Err(Error::Input(format!(
            "{n} rows cannot fill {} folds",
            plan.folds
        )));
    }

    let mut warning = None;
    if plan.stratified {
        let counts = ds.class_counts();
        let smallest = counts[0].min(counts[1]);
        if smallest > 0 && smallest < plan.folds {
            warning = Some(format!(
                "only {smallest} rows of the rarer class for {} folds; stratification is best-effort",
                plan.folds
            ));
        }
    }

    let mut reps = Vec::with_capacity(plan.repetitions);
    for rep in 0..plan.repetitions {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed::derive_path(plan.seed, &[SALT_SHUFFLE, rep as u64]));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);

        let mut fold_of = vec![0usize; n];
        if plan.stratified {
            let mut dealt = 0usize;
            for class in [1u8, 0u8] {
                for &idx in order.iter().filter(|&&i| ds.rows[i].label == class) {
                    fold_of[idx] = dealt % plan.folds;
                    dealt += 1;
                }
            }
        } else {
            for (i, &idx) in order.iter().enumerate() {
                fold_of[idx] = i % plan.folds;
            }
        }

        let mut folds = Vec::with_capacity(plan.folds);
        for f in 0..plan.folds {
            let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            folds.push(FoldSplit { train, test });
        }
        reps.push(folds);
    }
    Ok(FoldPlan { reps, warning })
}

/// Weighted AUC as the normalized Mann-Whitney statistic: over all
/// (positive, negative) pairs, weight-product credit of 1 when the positive
/// outscores the negative and 1/2 on ties. Equals the trapezoidal area
/// under the ROC curve.
pub fn auc(scored: &[(f64, u8, f64)]) -> Result<f64> {
    let mut class_weight = [0.0f64; 2];
    for &(score, label, weight) in scored {
        if !score.is_finite() {
            return Err(Error::Input(format!("non-finite score {score}")));
        }
        if label > 1 {
            return Err(Error::Input(format!("label {label} is not binary")));
        }
        if !weight.is_finite() || weight <= 0.0 {
            return Err(Error::Input(format!("weight {weight} is not positive")));
        }
        class_weight[label as usize] += weight;
    }
    if class_weight[0] == 0.0 || class_weight[1] == 0.0 {
        return Err(Error::SingleClass(
            "AUC needs both positive and negative rows".into(),
        ));
    }

    let mut sorted: Vec<(f64, u8, f64)> = scored.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut numerator = 0.0;
    let mut negative_below = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        let mut tied = [0.0f64; 2];
        while i < sorted.len() && sorted[i].0 == score {
            tied[sorted[i].1 as usize] += sorted[i].2;
            i += 1;
        }
        numerator += tied[1] * (negative_below + 0.5 * tied[0]);
        negative_below += tied[0];
    }
    Ok(numerator / (class_weight[0] * class_weight[1]))
}

/// Paired two-tailed t-test variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompareMethod {
    PairedT,
    /// Variance inflated by `(1/n + test_train_ratio)` to account for the
    /// overlap of cross-validation training sets.
    CorrectedResampledT {
        test_train_ratio: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

fn two_tailed_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// Compare two equal-length paired AUC samples. Zero variance in the
/// differences degenerates to: significant iff the means differ, with p
/// pinned to 0 or 1.
pub fn compare(a: &[f64], b: &[f64], method: CompareMethod) -> Result<Comparison> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Input("cannot compare empty samples".into()));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let variance = if diffs.len() > 1 {
        diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };

    if variance < 1e-24 {
        return Ok(if mean.abs() < 1e-12 {
            Comparison {
                t: 0.0,
                p: 1.0,
                significant: false,
            }
        } else {
            Comparison {
                t: if mean > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                p: 0.0,
                significant: true,
            }
        });
    }

    let scale = match method {
        CompareMethod::PairedT => variance / n,
        CompareMethod::CorrectedResampledT { test_train_ratio } => {
            variance * (1.0 / n + test_train_ratio)
        }
    };
    let t = mean / scale.sqrt();
    let p = two_tailed_p(t, n - 1.0);
    Ok(Comparison {
        t,
        p,
        significant: p < 0.05,
    })
}

/// Classifier knobs used by the harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub structure: StructureStrategy,
    pub max_parents: usize,
    pub alpha: f64,
    pub bin_strategy: BinStrategy,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            structure: StructureStrategy::Naive,
            max_parents: 2,
            alpha: 0.5,
            bin_strategy: BinStrategy::Median,
        }
    }
}

/// A rebalancing filter selection. SMOTE with no explicit percentage picks
/// the percentage that equalizes the class counts on each training fold.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterKind {
    None,
    Smote {
        percent: Option<f64>,
        k: usize,
    },
    SpreadSubsample {
        ratio: f64,
    },
    SmotePP {
        p: f64,
        k2: usize,
        kmeans_max_iter: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub name: String,
    pub kind: FilterKind,
}

impl FilterSpec {
    pub fn none() -> FilterSpec {
        FilterSpec {
            name: "none".into(),
            kind: FilterKind::None,
        }
    }

    pub fn apply(&self, ds: &WeightedDataset, seed: u64) -> Result<FilterOutput> {
        match &self.kind {
            FilterKind::None => Ok(FilterOutput {
                dataset: ds.clone(),
                stats: FilterStats::default(),
            }),
            FilterKind::Smote { percent, k } => {
                let percent = percent.unwrap_or_else(|| {
                    let counts = ds.class_counts();
                    let minority = ds.minority_label() as usize;
                    let (s_min, s_maj) = (counts[minority], counts[1 - minority]);
                    100.0 * (s_maj - s_min) as f64 / s_min as f64
                });
                resample::smote(ds, percent, *k, seed)
            }
            FilterKind::SpreadSubsample { ratio } => resample::spread_subsample(ds, *ratio, seed),
            FilterKind::SmotePP {
                p,
                k2,
                kmeans_max_iter,
            } => resample::smote_pp(
                ds,
                &SmotePPConfig {
                    p: *p,
                    k2: *k2,
                    kmeans_max_iter: *kmeans_max_iter,
                    seed,
                },
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldFailure {
    pub repetition: usize,
    pub fold: usize,
    pub reason: String,
}

/// Fold-level AUCs of one (dataset, filter) evaluation. Failed folds are
/// excluded from `fold_aucs` and listed in `failures`; `fold_ids` names the
/// (repetition, fold) behind each retained AUC so cells can be paired.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub fold_aucs: Vec<f64>,
    pub fold_ids: Vec<(usize, usize)>,
    pub failures: Vec<FoldFailure>,
    pub warning: Option<String>,
}

impl EvalOutcome {
    pub fn mean_auc(&self) -> f64 {
        if self.fold_aucs.is_empty() {
            f64::NAN
        } else {
            self.fold_aucs.iter().sum::<f64>() / self.fold_aucs.len() as f64
        }
    }
}

/// Fit the per-fold pipeline: filter on raw train only, then discretizer
/// and network on the filtered train (the filtered-classifier order: the
/// rebalancing filter runs first and the classifier's discretization sees
/// the rebalanced sample).
fn fit_fold_model(
    train: &WeightedDataset,
    filter: &FilterSpec,
    classifier: &ClassifierConfig,
    filter_seed: u64,
) -> Result<(Discretizer, BayesNetModel)> {
    let filtered = filter.apply(train, filter_seed)?;
    let discretizer = Discretizer::fit(&filtered.dataset, classifier.bin_strategy)?;
    let discrete_train = discretizer.apply(&filtered.dataset)?;
    let parents = bayes::learn_structure(
        &discrete_train,
        classifier.max_parents,
        classifier.structure,
    )?;
    let model = bayes::fit_cpts(
        &discrete_train,
        parents,
        classifier.alpha,
        discretizer.clone(),
    )?;
    Ok((discretizer, model))
}

/// Repeated stratified CV with train-only filtering; scores the raw test
/// rows through the train-fitted cut points and returns per-fold AUCs.
pub fn filtered_evaluate(
    ds: &WeightedDataset,
    filter: &FilterSpec,
    classifier: &ClassifierConfig,
    plan: &CvPlan,
) -> Result<EvalOutcome> {
    let folds = stratified_folds(ds, plan)?;
    let mut outcome = EvalOutcome {
        fold_aucs: Vec::with_capacity(plan.folds * plan.repetitions),
        fold_ids: Vec::with_capacity(plan.folds * plan.repetitions),
        failures: Vec::new(),
        warning: folds.warning,
    };
    for (rep, fold_set) in folds.reps.iter().enumerate() {
        for (fold, split) in fold_set.iter().enumerate() {
            let filter_seed = seed::derive_path(plan.seed, &[SALT_FILTER, rep as u64, fold as u64]);
            match evaluate_fold(ds, split, filter, classifier, filter_seed) {
                Ok(value) => {
                    outcome.fold_aucs.push(value);
                    outcome.fold_ids.push((rep, fold));
                }
                Err(e) => outcome.failures.push(FoldFailure {
                    repetition: rep,
                    fold,
                    reason: e.to_string(),
                }),
            }
        }
    }
    Ok(outcome)
}

fn evaluate_fold(
    ds: &WeightedDataset,
    split: &FoldSplit,
    filter: &FilterSpec,
    classifier: &ClassifierConfig,
    filter_seed: u64,
) -> Result<f64> {
    let train = ds.subset(&split.train)?;
    let (_, model) = fit_fold_model(&train, filter, classifier, filter_seed)?;
    let scored: Vec<(f64, u8, f64)> = split
        .test
        .iter()
        .map(|&i| {
            let row = &ds.rows[i];
            Ok((model.predict_score(&row.features)?, row.label, row.weight))
        })
        .collect::<Result<_>>()?;
    auc(&scored)
}

/// Correlation flavor for CFS merit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationMode {
    /// Entropy-based symmetrical uncertainty on discretized data.
    #[default]
    SymmetricalUncertainty,
    /// Absolute weighted Pearson correlation on numeric data.
    Pearson,
}

/// Pairwise feature and feature-class correlations.
struct CorrelationMatrix {
    class: Vec<f64>,
    feature: Vec<Vec<f64>>,
}

fn weighted_entropy(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum()
}

fn symmetrical_uncertainty(ds: &WeightedDataset, a: Option<usize>, b: Option<usize>) -> f64 {
    // None selects the class column
    let mut counts_a = [0.0f64; 2];
    let mut counts_b = [0.0f64; 2];
    let mut joint = [[0.0f64; 2]; 2];
    for row in &ds.rows {
        let va = a.map_or(row.label as usize, |col| {
            (row.features[col] != 0.0) as usize
        });
        let vb = b.map_or(row.label as usize, |col| {
            (row.features[col] != 0.0) as usize
        });
        counts_a[va] += row.weight;
        counts_b[vb] += row.weight;
        joint[va][vb] += row.weight;
    }
    let ha = weighted_entropy(&counts_a);
    let hb = weighted_entropy(&counts_b);
    let hab = weighted_entropy(&[joint[0][0], joint[0][1], joint[1][0], joint[1][1]]);
    if ha + hb == 0.0 {
        return 0.0;
    }
    2.0 * (ha + hb - hab) / (ha + hb)
}

fn pearson_abs(ds: &WeightedDataset, a: Option<usize>, b: Option<usize>) -> f64 {
    let total: f64 = ds.rows.iter().map(|r| r.weight).sum();
    let value = |row: &crate::dataset::InstanceRow, col: Option<usize>| -> f64 {
        col.map_or(row.label as f64, |c| row.features[c])
    };
    let mean_a: f64 = ds.rows.iter().map(|r| r.weight * value(r, a)).sum::<f64>() / total;
    let mean_b: f64 = ds.rows.iter().map(|r| r.weight * value(r, b)).sum::<f64>() / total;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for row in &ds.rows {
        let da = value(row, a) - mean_a;
        let db = value(row, b) - mean_b;
        cov += row.weight * da * db;
        var_a += row.weight * da * da;
        var_b += row.weight * db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    (cov / (var_a * var_b).sqrt()).abs()
}

impl CorrelationMatrix {
    fn build(ds: &WeightedDataset, mode: CorrelationMode) -> CorrelationMatrix {
        let d = ds.schema.arity();
        let corr = |a: Option<usize>, b: Option<usize>| match mode {
            CorrelationMode::SymmetricalUncertainty => symmetrical_uncertainty(ds, a, b),
            CorrelationMode::Pearson => pearson_abs(ds, a, b),
        };
        let class: Vec<f64> = (0..d).map(|i| corr(Some(i), None)).collect();
        let mut feature = vec![vec![0.0; d]; d];
        #[allow(clippy::needless_range_loop)]
        for i in 0..d {
            for j in (i + 1)..d {
                let r = corr(Some(i), Some(j));
                feature[i][j] = r;
                feature[j][i] = r;
            }
        }
        CorrelationMatrix { class, feature }
    }

    /// CFS merit: `k * mean(class corr) / sqrt(k + k (k-1) mean(pair corr))`.
    fn merit(&self, subset: &[usize]) -> f64 {
        let k = subset.len() as f64;
        if subset.is_empty() {
            return 0.0;
        }
        let r_cf: f64 = subset.iter().map(|&i| self.class[i]).sum::<f64>() / k;
        let mut r_ff = 0.0;
        let mut pairs = 0.0;
        for (idx, &i) in subset.iter().enumerate() {
            for &j in &subset[idx + 1..] {
                r_ff += self.feature[i][j];
                pairs += 1.0;
            }
        }
        if pairs > 0.0 {
            r_ff /= pairs;
        }
        k * r_cf / (k + k * (k - 1.0) * r_ff).sqrt()
    }
}

/// Best-first forward selection over feature subsets with a five-expansion
/// stale limit, maximizing CFS merit.
fn best_first_cfs(matrix: &CorrelationMatrix, d: usize) -> Vec<usize> {
    const STALE_LIMIT: usize = 5;
    let mut open: Vec<(f64, Vec<usize>)> = vec![(0.0, Vec::new())];
    let mut closed: std::collections::BTreeSet<Vec<usize>> = std::collections::BTreeSet::new();
    let mut best: (f64, Vec<usize>) = (0.0, Vec::new());
    let mut stale = 0;

    while let Some(pos) = open
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(&a.1)))
        .map(|(i, _)| i)
    {
        let (_, subset) = open.swap_remove(pos);
        if !closed.insert(subset.clone()) {
            continue;
        }
        let mut improved = false;
        for f in 0..d {
            if subset.contains(&f) {
                continue;
            }
            let mut child = subset.clone();
            child.push(f);
            child.sort_unstable();
            if closed.contains(&child) {
                continue;
            }
            let merit = matrix.merit(&child);
            if merit > best.0 + 1e-12 {
                best = (merit, child.clone());
                improved = true;
            }
            open.push((merit, child));
        }
        if improved {
            stale = 0;
        } else {
            stale += 1;
            if stale >= STALE_LIMIT {
                break;
            }
        }
    }
    best.1
}

/// Per-signal CFS selection counts over the training side of each fold.
/// `plan.repetitions` controls how many splits contribute (the stock report
/// uses one 10-fold split, so counts run 0..folds).
pub fn cfs_select(
    ds: &WeightedDataset,
    plan: &CvPlan,
    mode: CorrelationMode,
) -> Result<Vec<(String, usize)>> {
    let folds = stratified_folds(ds, plan)?;
    let d = ds.schema.arity();
    let mut counts = vec![0usize; d];
    for fold_set in &folds.reps {
        for split in fold_set {
            let train = ds.subset(&split.train)?;
            let prepared = match mode {
                CorrelationMode::SymmetricalUncertainty if !train.is_discrete() => {
                    let disc = Discretizer::fit(&train, BinStrategy::Median)?;
                    disc.apply(&train)?
                }
                _ => train,
            };
            let matrix = CorrelationMatrix::build(&prepared, mode);
            for f in best_first_cfs(&matrix, d) {
                counts[f] += 1;
            }
        }
    }
    Ok(ds.schema.signals.iter().cloned().zip(counts).collect())
}

/// One evaluated cell of the sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub attack: String,
    pub filter: String,
    pub t_x: TimeSpan,
    pub t_g: TimeSpan,
    pub mean_auc: f64,
    pub fold_aucs: Vec<f64>,
    pub fold_ids: Vec<(usize, usize)>,
    pub positive_density: f64,
    pub failed_folds: usize,
    /// First failure reason, when any fold failed.
    pub failure_reason: Option<String>,
    /// Best (t_x, t_g) for this attack type on the unfiltered classifier.
    pub best: bool,
}

/// Paired significance test between two filters on the same cell grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellComparison {
    pub attack: String,
    pub t_x: TimeSpan,
    pub t_g: TimeSpan,
    pub filter_a: String,
    pub filter_b: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

/// CPT importance and CFS counts at an attack type's best granularity.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackImportance {
    pub attack: String,
    pub t_x: TimeSpan,
    pub t_g: TimeSpan,
    pub report: CptReport,
    pub cfs_counts: Vec<(String, usize)>,
    pub cfs_folds: usize,
}

/// Fixed-versus-variable `t_x` second pass for one attack type.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableTxResult {
    pub attack: String,
    pub t_g: TimeSpan,
    pub base_t_x: TimeSpan,
    pub overrides: Vec<(String, TimeSpan)>,
    pub fixed_auc: f64,
    pub variable_auc: f64,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub cells: Vec<CellResult>,
    pub comparisons: Vec<CellComparison>,
    pub importance: Vec<AttackImportance>,
    pub variable_tx: Vec<VariableTxResult>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn best_cell(&self, attack: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.attack == attack && c.best)
    }
}

/// Sweep-wide settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub filters: Vec<FilterSpec>,
    pub classifier: ClassifierConfig,
    pub plan: CvPlan,
    pub compare_method: CompareMethod,
    /// Run the per-signal variable-t_x second pass.
    pub variable_tx: bool,
    /// Repetitions for the CFS selection-count pass (1 = a single split).
    pub cfs_repetitions: usize,
}

fn span_slot(span: TimeSpan) -> u64 {
    ((span.unit() as u64) << 32) | span.count() as u64
}

/// Fold seeds depend on (attack, t_g) only: cells that share them also share
/// fold assignments, which keeps filter and t_x comparisons paired.
fn fold_plan_seed(base: u64, attack_idx: usize, t_g: TimeSpan) -> u64 {
    seed::derive_path(base, &[SALT_FOLD_PLAN, attack_idx as u64, span_slot(t_g)])
}

/// Evaluate the full (attack type x granularity x filter) cross product.
pub fn sweep(
    events: &[EventRecord],
    signal_config: &SignalConfig,
    attack_types: &[String],
    grid: &[GranularityPair],
    gt_start: DateTime<Utc>,
    gt_end: DateTime<Utc>,
    config: &SweepConfig,
) -> Result<EvalReport> {
    if config.filters.is_empty() {
        return Err(Error::Config("sweep needs at least one filter".into()));
    }
    let datasets = generate_datasets(events, signal_config, attack_types, grid, gt_start, gt_end)?;

    struct Job<'a> {
        attack_idx: usize,
        pair: &'a GranularityPair,
        filter: &'a FilterSpec,
        ds: &'a WeightedDataset,
    }
    let mut jobs = Vec::new();
    for (attack_idx, attack) in attack_types.iter().enumerate() {
        for pair in grid {
            let ds = &datasets[&(attack.clone(), pair.clone())];
            for filter in &config.filters {
                jobs.push(Job {
                    attack_idx,
                    pair,
                    filter,
                    ds,
                });
            }
        }
    }

    let evaluated: Vec<(CellResult, Option<String>)> = jobs
        .par_iter()
        .map(|job| {
            let plan = CvPlan {
                seed: fold_plan_seed(config.plan.seed, job.attack_idx, job.pair.t_g),
                ..config.plan
            };
            let outcome = filtered_evaluate(job.ds, job.filter, &config.classifier, &plan)?;
            let cell = CellResult {
                attack: attack_types[job.attack_idx].clone(),
                filter: job.filter.name.clone(),
                t_x: job.pair.t_x,
                t_g: job.pair.t_g,
                mean_auc: outcome.mean_auc(),
                fold_aucs: outcome.fold_aucs,
                fold_ids: outcome.fold_ids,
                positive_density: job.ds.positive_density(),
                failed_folds: outcome.failures.len(),
                failure_reason: outcome.failures.first().map(|f| f.reason.clone()),
                best: false,
            };
            let warning = outcome.warning.map(|w| {
                format!(
                    "{} {} {} {}: {w}",
                    cell.attack, cell.filter, cell.t_x, cell.t_g
                )
            });
            Ok((cell, warning))
        })
        .collect::<Result<_>>()?;

    let mut cells: Vec<CellResult> = Vec::with_capacity(evaluated.len());
    let mut warnings = Vec::new();
    for (cell, warning) in evaluated {
        if let Some(w) = warning {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        cells.push(cell);
    }

    mark_best_cells(&mut cells, attack_types);
    let comparisons = compare_cells(&cells, config.compare_method);
    let importance = importance_pass(&cells, &datasets, config)?;
    let variable_tx = if config.variable_tx {
        variable_tx_pass(
            events,
            signal_config,
            attack_types,
            grid,
            gt_start,
            gt_end,
            &cells,
            &datasets,
            config,
        )?
    } else {
        Vec::new()
    };

    Ok(EvalReport {
        cells,
        comparisons,
        importance,
        variable_tx,
        warnings,
    })
}

/// Flag the best (t_x, t_g) per attack type, judged on the unfiltered
/// classifier when present (falling back to all filters).
fn mark_best_cells(cells: &mut [CellResult], attack_types: &[String]) {
    for attack in attack_types {
        let candidate = |c: &CellResult| c.attack == *attack && !c.mean_auc.is_nan();
        let none_best = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| candidate(c) && c.filter == "none")
            .max_by(|(_, a), (_, b)| a.mean_auc.total_cmp(&b.mean_auc));
        let any_best = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| candidate(c))
            .max_by(|(_, a), (_, b)| a.mean_auc.total_cmp(&b.mean_auc));
        if let Some((idx, _)) = none_best.or(any_best) {
            cells[idx].best = true;
        }
    }
}

/// All filter pairs within each (attack, t_x, t_g) group, paired on the
/// folds both sides completed.
fn compare_cells(cells: &[CellResult], method: CompareMethod) -> Vec<CellComparison> {
    let mut comparisons = Vec::new();
    for (i, a) in cells.iter().enumerate() {
        for b in cells[i + 1..].iter() {
            if a.attack != b.attack || a.t_x != b.t_x || a.t_g != b.t_g {
                continue;
            }
            let (pa, pb) = paired_fold_values(a, b);
            if pa.len() < 2 {
                continue;
            }
            if let Ok(result) = compare(&pa, &pb, method) {
                comparisons.push(CellComparison {
                    attack: a.attack.clone(),
                    t_x: a.t_x,
                    t_g: a.t_g,
                    filter_a: a.filter.clone(),
                    filter_b: b.filter.clone(),
                    mean_a: a.mean_auc,
                    mean_b: b.mean_auc,
                    t: result.t,
                    p: result.p,
                    significant: result.significant,
                });
            }
        }
    }
    comparisons
}

fn paired_fold_values(a: &CellResult, b: &CellResult) -> (Vec<f64>, Vec<f64>) {
    let mut pa = Vec::new();
    let mut pb = Vec::new();
    let mut j = 0;
    for (id, &value) in a.fold_ids.iter().zip(&a.fold_aucs) {
        while j < b.fold_ids.len() && b.fold_ids[j] < *id {
            j += 1;
        }
        if j < b.fold_ids.len() && b.fold_ids[j] == *id {
            pa.push(value);
            pb.push(b.fold_aucs[j]);
        }
    }
    (pa, pb)
}

/// Fit a full-data model (no filter) for importance inspection.
fn full_data_model(ds: &WeightedDataset, classifier: &ClassifierConfig) -> Result<BayesNetModel> {
    let (_, model) = fit_fold_model(ds, &FilterSpec::none(), classifier, 0)?;
    Ok(model)
}

fn importance_pass(
    cells: &[CellResult],
    datasets: &std::collections::BTreeMap<(String, GranularityPair), WeightedDataset>,
    config: &SweepConfig,
) -> Result<Vec<AttackImportance>> {
    let mut out = Vec::new();
    for cell in cells.iter().filter(|c| c.best) {
        let key = datasets
            .keys()
            .find(|(a, p)| *a == cell.attack && p.t_x == cell.t_x && p.t_g == cell.t_g);
        let Some(key) = key else { continue };
        let ds = &datasets[key];
        let model = full_data_model(ds, &config.classifier)?;
        let report = model.importance_report()?;
        let cfs_plan = CvPlan {
            folds: config.plan.folds,
            repetitions: config.cfs_repetitions.max(1),
            seed: seed::derive(config.plan.seed, SALT_CFS),
            stratified: config.plan.stratified,
        };
        let cfs_counts = cfs_select(ds, &cfs_plan, CorrelationMode::SymmetricalUncertainty)?;
        out.push(AttackImportance {
            attack: cell.attack.clone(),
            t_x: cell.t_x,
            t_g: cell.t_g,
            report,
            cfs_counts,
            cfs_folds: cfs_plan.folds * cfs_plan.repetitions,
        });
    }
    Ok(out)
}

/// For each attack type, pick each signal's most discriminative t_x (at the
/// best cell's t_g), regenerate the dataset with those per-signal overrides,
/// and evaluate it against the fixed-t_x baseline on the same folds.
#[allow(clippy::too_many_arguments)]
fn variable_tx_pass(
    events: &[EventRecord],
    signal_config: &SignalConfig,
    attack_types: &[String],
    grid: &[GranularityPair],
    gt_start: DateTime<Utc>,
    gt_end: DateTime<Utc>,
    cells: &[CellResult],
    datasets: &std::collections::BTreeMap<(String, GranularityPair), WeightedDataset>,
    config: &SweepConfig,
) -> Result<Vec<VariableTxResult>> {
    let mut out = Vec::new();
    for (attack_idx, attack) in attack_types.iter().enumerate() {
        let Some(best) = cells
            .iter()
            .find(|c| c.attack == *attack && c.best && c.filter == "none")
        else {
            continue;
        };
        // distinct t_x values sharing the best cell's t_g, in grid order
        let mut tx_values: Vec<TimeSpan> = Vec::new();
        for pair in grid {
            if pair.t_g == best.t_g && !tx_values.contains(&pair.t_x) {
                tx_values.push(pair.t_x);
            }
        }

        // per-signal best t_x by discriminativeness
        let mut best_tx: Vec<(String, TimeSpan, f64)> = Vec::new();
        for &tx in &tx_values {
            let key = (attack.clone(), GranularityPair::new(tx, best.t_g));
            let Some(ds) = datasets.get(&key) else {
                continue;
            };
            let model = full_data_model(ds, &config.classifier)?;
            for signal in model.importance_report()?.signals {
                match best_tx
                    .iter_mut()
                    .find(|(name, _, _)| *name == signal.signal)
                {
                    Some(entry) => {
                        // strict improvement, so the base t_x keeps ties
                        let improves = signal.score > entry.2 + 1e-12
                            || (tx == best.t_x && signal.score > entry.2 - 1e-12);
                        if improves {
                            entry.1 = tx;
                            entry.2 = signal.score;
                        }
                    }
                    None => best_tx.push((signal.signal, tx, signal.score)),
                }
            }
        }

        let overrides: Vec<(String, TimeSpan)> = best_tx
            .iter()
            .filter(|(_, tx, _)| *tx != best.t_x)
            .map(|(name, tx, _)| (name.clone(), *tx))
            .collect();

        let plan = CvPlan {
            seed: fold_plan_seed(config.plan.seed, attack_idx, best.t_g),
            ..config.plan
        };
        let result = if overrides.is_empty() {
            VariableTxResult {
                attack: attack.clone(),
                t_g: best.t_g,
                base_t_x: best.t_x,
                overrides,
                fixed_auc: best.mean_auc,
                variable_auc: best.mean_auc,
                t: 0.0,
                p: 1.0,
                significant: false,
            }
        } else {
            let pair = GranularityPair::new(best.t_x, best.t_g)
                .with_overrides(overrides.iter().cloned().collect());
            let generated = generate_datasets(
                events,
                signal_config,
                std::slice::from_ref(attack),
                std::slice::from_ref(&pair),
                gt_start,
                gt_end,
            )?;
            let ds = &generated[&(attack.clone(), pair)];
            let outcome = filtered_evaluate(ds, &FilterSpec::none(), &config.classifier, &plan)?;
            let variable_cell = CellResult {
                attack: attack.clone(),
                filter: "none".into(),
                t_x: best.t_x,
                t_g: best.t_g,
                mean_auc: outcome.mean_auc(),
                fold_aucs: outcome.fold_aucs,
                fold_ids: outcome.fold_ids,
                positive_density: ds.positive_density(),
                failed_folds: outcome.failures.len(),
                failure_reason: outcome.failures.first().map(|f| f.reason.clone()),
                best: false,
            };
            let (pa, pb) = paired_fold_values(&variable_cell, best);
            let cmp = if pa.len() >= 2 {
                compare(&pa, &pb, config.compare_method)?
            } else {
                Comparison {
                    t: 0.0,
                    p: 1.0,
                    significant: false,
                }
            };
            VariableTxResult {
                attack: attack.clone(),
                t_g: best.t_g,
                base_t_x: best.t_x,
                overrides,
                fixed_auc: best.mean_auc,
                variable_auc: variable_cell.mean_auc,
                t: cmp.t,
                p: cmp.p,
                significant: cmp.significant,
            }
        };
        out.push(result);
    }
    Ok(out)
}
