//! Class-rebalancing filters, applied to training data only.
//!
//! Three filters share the primitives here: SMOTE (k-NN synthetic minority
//! oversampling), spread subsampling (random majority undersampling), and
//! SMOTE++ (remove the majority rows crowding the minority cluster, reweigh
//! the survivors to conserve the majority's total weight, reweigh the
//! existing minority to half the imbalance ratio, and top up with
//! unit-weight synthetics).
//!
//! All distance computations (k-means, nearest-to-centroid removal, k-NN)
//! run on z-score-standardized features, with per-column mean/std taken
//! from the filter's input dataset; signals with different units would
//! otherwise dominate the metric by scale. Everything is deterministic
//! under a fixed seed.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{InstanceRow, WeightedDataset};
use crate::error::{Error, Result};
use crate::seed;

const SALT_SYNTH: u64 = 0x53;

/// SMOTE++ knobs: majority removal percentage, synthesis neighbor count,
/// the k-means iteration cap, and the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmotePPConfig {
    pub p: f64,
    pub k2: usize,
    pub kmeans_max_iter: usize,
    pub seed: u64,
}

impl Default for SmotePPConfig {
    fn default() -> Self {
        SmotePPConfig {
            p: 20.0,
            k2: 5,
            kmeans_max_iter: 20,
            seed: 0,
        }
    }
}

impl SmotePPConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..100.0).contains(&self.p) {
            return Err(Error::Config(format!(
                "majority removal percentage must be in [0, 100), got {}",
                self.p
            )));
        }
        if self.k2 < 1 {
            return Err(Error::Config("k2 must be at least 1".into()));
        }
        if self.kmeans_max_iter < 1 {
            return Err(Error::Config("kmeans_max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// k-means output: per-row cluster assignments and centroids; the minority
/// cluster slot is filled by the cluster search.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub minority_cluster: Option<(usize, Vec<f64>)>,
}

/// What a filter did, for sidecar metadata and degenerate-case flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterStats {
    pub removed_majority: usize,
    pub synthetic_minority: usize,
    pub majority_weight_total: f64,
    pub minority_weight_total: f64,
    /// SMOTE++ only: whether the k-means sweep found a minority cluster
    /// (false means the minority-mean fallback was used).
    pub minority_cluster_found: Option<bool>,
    /// Set when synthesis had a single minority row to work from and fell
    /// back to zero-jitter duplication.
    pub degenerate_duplication: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub dataset: WeightedDataset,
    pub stats: FilterStats,
}

impl FilterOutput {
    /// Fill the weight totals; `minority` is the input dataset's minority
    /// label (SMOTE++ can leave the output with more minority rows than
    /// majority ones).
    fn finish(dataset: WeightedDataset, minority: u8, mut stats: FilterStats) -> FilterOutput {
        let weights = dataset.class_weights();
        stats.minority_weight_total = weights[minority as usize];
        stats.majority_weight_total = weights[1 - minority as usize];
        FilterOutput { dataset, stats }
    }
}

fn euclidean_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Per-column standardization parameters.
struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Standardizer {
    fn fit(ds: &WeightedDataset) -> Standardizer {
        let d = ds.schema.arity();
        let n = ds.len() as f64;
        let mut means = vec![0.0; d];
        for row in &ds.rows {
            for (m, v) in means.iter_mut().zip(&row.features) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = vec![0.0; d];
        for row in &ds.rows {
            for ((s, m), v) in stds.iter_mut().zip(&means).zip(&row.features) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0; // constant column: center only
            }
        }
        Standardizer { means, stds }
    }

    fn apply(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }
}

/// Index of the maximum value; the lowest index wins ties.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Lloyd's algorithm with deterministic farthest-first initialization from a
/// seeded first pick. Runs to an assignment fixpoint or `max_iter`.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<ClusterResult> {
    let n = points.len();
    if k < 1 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::Config(format!(
            "k = {k} exceeds the number of points ({n})"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = vec![points[rng.gen_range(0..n)].clone()];
    let mut nearest_sq: Vec<f64> = points
        .iter()
        .map(|p| euclidean_sq(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let far = argmax(&nearest_sq);
        centroids.push(points[far].clone());
        for (d, p) in nearest_sq.iter_mut().zip(points) {
            *d = d.min(euclidean_sq(p, centroids.last().unwrap()));
        }
    }

    let assign = |centroids: &[Vec<f64>]| -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                let mut best = 0;
                let mut best_d = euclidean_sq(p, &centroids[0]);
                for (c, centroid) in centroids.iter().enumerate().skip(1) {
                    let d = euclidean_sq(p, centroid);
                    if d < best_d {
                        best = c;
                        best_d = d;
                    }
                }
                best
            })
            .collect()
    };

    let mut assignments = assign(&centroids);
    for _ in 0..max_iter {
        // recompute centroids; an emptied cluster keeps its position
        let d = points[0].len();
        let mut sums = vec![vec![0.0; d]; k];
        let mut sizes = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignments) {
            sizes[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, sum) in sums.into_iter().enumerate() {
            if sizes[c] > 0 {
                centroids[c] = sum.into_iter().map(|s| s / sizes[c] as f64).collect();
            }
        }
        let next = assign(&centroids);
        if next == assignments {
            break;
        }
        assignments = next;
    }

    Ok(ClusterResult {
        assignments,
        centroids,
        minority_cluster: None,
    })
}

/// Outcome of the minority-cluster sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MinorityCluster {
    pub found: bool,
    /// Centroid of the minority cluster, or the unweighted mean of all
    /// minority rows when no cluster qualified. Original feature space.
    pub centroid: Vec<f64>,
    /// The k at which the sweep succeeded.
    pub k: Option<usize>,
}

/// Sweep k = 2, 3, ... over standardized features until some cluster is
/// mostly minority (strict majority by count, with at least two minority
/// members), stopping at k = sMin (capped at the row count). On failure the
/// centroid falls back to the mean of the minority rows.
pub fn find_minority_cluster(
    ds: &WeightedDataset,
    config: &SmotePPConfig,
) -> Result<MinorityCluster> {
    config.validate()?;
    let minority = ds.minority_label();
    let s_min = ds.class_counts()[minority as usize];
    if s_min == 0 {
        return Err(Error::SingleClass("no minority rows to cluster".into()));
    }

    let standardizer = Standardizer::fit(ds);
    let z: Vec<Vec<f64>> = ds
        .rows
        .iter()
        .map(|r| standardizer.apply(&r.features))
        .collect();

    let k_max = s_min.min(ds.len());
    for k in 2..=k_max {
        let clusters = kmeans(
            &z,
            k,
            seed::derive(config.seed, k as u64),
            config.kmeans_max_iter,
        )?;
        let mut sizes = vec![0usize; k];
        let mut minority_counts = vec![0usize; k];
        for (row, &c) in ds.rows.iter().zip(&clusters.assignments) {
            sizes[c] += 1;
            if row.label == minority {
                minority_counts[c] += 1;
            }
        }
        let qualifying =
            (0..k).find(|&c| minority_counts[c] >= 2 && 2 * minority_counts[c] > sizes[c]);
        if let Some(c) = qualifying {
            return Ok(MinorityCluster {
                found: true,
                centroid: standardizer.invert(&clusters.centroids[c]),
                k: Some(k),
            });
        }
    }

    let minority_rows: Vec<&InstanceRow> = ds.rows.iter().filter(|r| r.label == minority).collect();
    let d = ds.schema.arity();
    let mut mean = vec![0.0; d];
    for row in &minority_rows {
        for (m, v) in mean.iter_mut().zip(&row.features) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= minority_rows.len() as f64;
    }
    Ok(MinorityCluster {
        found: false,
        centroid: mean,
        k: None,
    })
}

/// Drop the `p` percent of majority rows nearest to `centroid` (original
/// feature space; distances are standardized). Ties break on the original
/// row index; minority rows and the order of survivors are untouched. At
/// least one majority row always survives the rounding.
pub fn remove_near_majority(
    ds: &WeightedDataset,
    centroid: &[f64],
    p: f64,
) -> Result<WeightedDataset> {
    if !(0.0..100.0).contains(&p) {
        return Err(Error::Config(format!(
            "removal percentage must be in [0, 100), got {p}"
        )));
    }
    let minority = ds.minority_label();
    let standardizer = Standardizer::fit(ds);
    let centroid_z = standardizer.apply(centroid);

    let mut by_distance: Vec<(f64, usize)> = (0..ds.len())
        .filter(|&i| ds.rows[i].label != minority)
        .map(|i| {
            (
                euclidean_sq(&standardizer.apply(&ds.rows[i].features), &centroid_z),
                i,
            )
        })
        .collect();
    let s_maj = by_distance.len();
    let mut remove = (p * s_maj as f64 / 100.0).round() as usize;
    if remove >= s_maj && s_maj > 0 {
        remove = s_maj - 1;
    }
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut removed = vec![false; ds.len()];
    for &(_, i) in by_distance.iter().take(remove) {
        removed[i] = true;
    }
    let keep: Vec<usize> = (0..ds.len()).filter(|&i| !removed[i]).collect();
    ds.subset(&keep)
}

/// Minority k-nearest-neighbor lists on standardized features, self
/// excluded, ties broken by index.
fn minority_neighbors(
    ds: &WeightedDataset,
    minority_positions: &[usize],
    k: usize,
) -> Vec<Vec<usize>> {
    let standardizer = Standardizer::fit(ds);
    let z: Vec<Vec<f64>> = minority_positions
        .iter()
        .map(|&i| standardizer.apply(&ds.rows[i].features))
        .collect();
    let m = minority_positions.len();
    let k = k.min(m.saturating_sub(1));
    (0..m)
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| (euclidean_sq(&z[i], &z[j]), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.truncate(k);
            others.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// SMOTE-style interpolation: each synthetic is a random convex combination
/// of a minority row and one of its k nearest minority neighbors. With a
/// single minority row the synthetics are zero-jitter copies.
fn synthesize_minority(
    ds: &WeightedDataset,
    count: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<InstanceRow>, bool) {
    let minority = ds.minority_label();
    let positions: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.rows[i].label == minority)
        .collect();
    let degenerate = positions.len() < 2;
    let neighbors = if degenerate {
        Vec::new()
    } else {
        minority_neighbors(ds, &positions, k)
    };
    let mut synthetics = Vec::with_capacity(count);
    for i in 0..count {
        let base = i % positions.len();
        let base_row = &ds.rows[positions[base]];
        let features = if degenerate {
            base_row.features.clone()
        } else {
            let pick = rng.gen_range(0..neighbors[base].len());
            let neighbor_row = &ds.rows[positions[neighbors[base][pick]]];
            let gap: f64 = rng.gen();
            base_row
                .features
                .iter()
                .zip(&neighbor_row.features)
                .map(|(a, b)| a + gap * (b - a))
                .collect()
        };
        synthetics.push(InstanceRow::new(features, minority, 1.0));
    }
    (synthetics, degenerate)
}

/// SMOTE: append `round(percent/100 * sMin)` synthetic minority rows at
/// weight 1. Requires at least two minority rows.
pub fn smote(ds: &WeightedDataset, percent: f64, k: usize, seed: u64) -> Result<FilterOutput> {
    if percent < 0.0 || !percent.is_finite() {
        return Err(Error::Config(format!(
            "SMOTE percentage must be non-negative, got {percent}"
        )));
    }
    if k < 1 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let minority = ds.minority_label();
    let s_min = ds.class_counts()[minority as usize];
    if s_min < 2 {
        return Err(Error::Input(format!(
            "SMOTE needs at least 2 minority rows, found {s_min}"
        )));
    }
    let count = (percent / 100.0 * s_min as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (synthetics, _) = synthesize_minority(ds, count, k, &mut rng);
    let mut rows = ds.rows.clone();
    rows.extend(synthetics);
    let out = WeightedDataset::new(ds.schema.clone(), rows, ds.provenance.clone())?;
    Ok(FilterOutput::finish(
        out,
        minority,
        FilterStats {
            synthetic_minority: count,
            ..FilterStats::default()
        },
    ))
}

/// Random majority undersampling to `ceil(ratio * sMin)` majority rows.
/// Minority rows and survivor order are untouched.
pub fn spread_subsample(
    ds: &WeightedDataset,
    target_ratio: f64,
    seed: u64,
) -> Result<FilterOutput> {
    if !target_ratio.is_finite() || target_ratio < 1.0 {
        return Err(Error::Config(format!(
            "spread subsample ratio must be at least 1, got {target_ratio}"
        )));
    }
    let minority = ds.minority_label();
    let counts = ds.class_counts();
    let s_min = counts[minority as usize];
    let s_maj = counts[1 - minority as usize];
    let target = (target_ratio * s_min as f64).ceil() as usize;
    if s_maj <= target {
        return Ok(FilterOutput::finish(
            ds.clone(),
            minority,
            FilterStats::default(),
        ));
    }

    let mut majority_indices: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.rows[i].label != minority)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    majority_indices.shuffle(&mut rng);
    let mut keep_majority = vec![false; ds.len()];
    for &i in majority_indices.iter().take(target) {
        keep_majority[i] = true;
    }
    let keep: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.rows[i].label == minority || keep_majority[i])
        .collect();
    let out = ds.subset(&keep)?;
    Ok(FilterOutput::finish(
        out,
        minority,
        FilterStats {
            removed_majority: s_maj - target,
            ..FilterStats::default()
        },
    ))
}

/// SMOTE++: minority-cluster search, majority removal near the cluster
/// centroid, survivor reweighing that conserves the majority's total weight
/// (`sMaj`), existing-minority reweighing to `minW = sMaj / sMin / 2`, and
/// `round(minW * sMin)` unit-weight synthetics.
pub fn smote_pp(ds: &WeightedDataset, config: &SmotePPConfig) -> Result<FilterOutput> {
    config.validate()?;
    let counts = ds.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass(
            "SMOTE++ needs both classes present".into(),
        ));
    }
    let minority = ds.minority_label();
    let s_min = counts[minority as usize];
    let s_maj = counts[1 - minority as usize];

    let cluster = find_minority_cluster(ds, config)?;
    let trimmed = remove_near_majority(ds, &cluster.centroid, config.p)?;
    let surviving_majority = trimmed.rows.iter().filter(|r| r.label != minority).count();
    // Reweigh survivors so the majority total is sMaj exactly; this equals
    // the nominal 100 / (100 - p) whenever p removes a whole number of rows.
    let maj_weight = s_maj as f64 / surviving_majority as f64;
    let min_weight = s_maj as f64 / s_min as f64 / 2.0;

    let mut rows: Vec<InstanceRow> = trimmed
        .rows
        .iter()
        .map(|r| {
            let weight = if r.label == minority {
                min_weight
            } else {
                maj_weight
            };
            InstanceRow::new(r.features.clone(), r.label, weight)
        })
        .collect();

    let synthetic_count = (min_weight * s_min as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, SALT_SYNTH));
    let (synthetics, degenerate) = synthesize_minority(ds, synthetic_count, config.k2, &mut rng);
    rows.extend(synthetics);

    let out = WeightedDataset::new(ds.schema.clone(), rows, ds.provenance.clone())?;
    Ok(FilterOutput::finish(
        out,
        minority,
        FilterStats {
            removed_majority: s_maj - surviving_majority,
            synthetic_minority: synthetic_count,
            minority_cluster_found: Some(cluster.found),
            degenerate_duplication: degenerate,
            ..FilterStats::default()
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::dataset_from_columns;

    /// Two interleaved feature columns from a simple deterministic stream.
    fn noise_pair(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (rng.gen::<f64>() * 10.0, rng.gen::<f64>() * 10.0))
            .unzip()
    }

    /// Majority scattered wide, minority in a tight blob far away.
    fn blob_dataset(s_maj: usize, s_min: usize, seed: u64) -> WeightedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..s_maj {
            xs.push(rng.gen::<f64>() * 10.0);
            ys.push(rng.gen::<f64>() * 10.0);
            labels.push(0);
        }
        for _ in 0..s_min {
            xs.push(50.0 + rng.gen::<f64>());
            ys.push(50.0 + rng.gen::<f64>());
            labels.push(1);
        }
        dataset_from_columns(&["x", "y"], &[xs, ys], &labels, None).unwrap()
    }

    #[test]
    fn kmeans_recovers_separated_blobs() {
        let mut points = Vec::new();
        for i in 0..20 {
            points.push(vec![i as f64 * 0.01, 0.0]);
        }
        for i in 0..20 {
            points.push(vec![100.0 + i as f64 * 0.01, 0.0]);
        }
        let result = kmeans(&points, 2, 7, 50).unwrap();
        let left = result.assignments[0];
        assert!(result.assignments[..20].iter().all(|&c| c == left));
        assert!(result.assignments[20..].iter().all(|&c| c != left));
        // centroids sit at the blob means
        let mut xs: Vec<f64> = result.centroids.iter().map(|c| c[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] - 0.095).abs() < 1e-9);
        assert!((xs[1] - 100.095).abs() < 1e-9);
    }

    #[test]
    fn kmeans_with_k_equal_n_pins_every_point() {
        let points = vec![vec![0.0], vec![5.0], vec![9.0]];
        let result = kmeans(&points, 3, 1, 10).unwrap();
        let mut seen: Vec<usize> = result.assignments.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 3);
        for (p, &c) in points.iter().zip(&result.assignments) {
            assert_eq!(&result.centroids[c], p);
        }
    }

    #[test]
    fn kmeans_duplicate_points_share_a_centroid_location() {
        let points = vec![vec![1.0], vec![1.0], vec![8.0]];
        let result = kmeans(&points, 2, 3, 10).unwrap();
        assert_eq!(result.assignments[0], result.assignments[1]);
        assert_eq!(result.centroids[result.assignments[0]], vec![1.0]);
    }

    #[test]
    fn kmeans_rejects_bad_k() {
        let points = vec![vec![0.0], vec![1.0]];
        assert!(matches!(kmeans(&points, 0, 1, 5), Err(Error::Config(_))));
        assert!(matches!(kmeans(&points, 3, 1, 5), Err(Error::Config(_))));
    }

    #[test]
    fn kmeans_is_seed_deterministic() {
        let (xs, ys) = noise_pair(60, 11);
        let points: Vec<Vec<f64>> = xs.iter().zip(&ys).map(|(&x, &y)| vec![x, y]).collect();
        let a = kmeans(&points, 4, 42, 30).unwrap();
        let b = kmeans(&points, 4, 42, 30).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tight_minority_blob_is_found_at_k2() {
        let ds = blob_dataset(40, 8, 5);
        let cluster = find_minority_cluster(&ds, &SmotePPConfig::default()).unwrap();
        assert!(cluster.found);
        assert_eq!(cluster.k, Some(2));
        // centroid lands on the blob mean
        assert!((cluster.centroid[0] - 50.5).abs() < 1.0);
        assert!((cluster.centroid[1] - 50.5).abs() < 1.0);
    }

    #[test]
    fn scattered_minority_falls_back_to_the_mean() {
        // minority rows duplicated onto majority positions: no pure cluster
        let xs = vec![0.0, 10.0, 0.0, 10.0, 5.0, 0.0, 10.0, 5.0, 2.0, 8.0];
        let ys = vec![0.0, 10.0, 10.0, 0.0, 5.0, 0.1, 9.9, 5.1, 3.0, 7.0];
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1, 0, 0];
        let ds =
            dataset_from_columns(&["x", "y"], &[xs.clone(), ys.clone()], &labels, None).unwrap();
        let cluster = find_minority_cluster(&ds, &SmotePPConfig::default()).unwrap();
        if !cluster.found {
            let mx = (xs[5] + xs[6] + xs[7]) / 3.0;
            let my = (ys[5] + ys[6] + ys[7]) / 3.0;
            assert!((cluster.centroid[0] - mx).abs() < 1e-9);
            assert!((cluster.centroid[1] - my).abs() < 1e-9);
        }
    }

    #[test]
    fn single_minority_row_uses_itself_as_centroid() {
        let xs = vec![0.0, 1.0, 2.0, 7.5];
        let labels = vec![0, 0, 0, 1];
        let ds = dataset_from_columns(&["x"], &[xs], &labels, None).unwrap();
        let cluster = find_minority_cluster(&ds, &SmotePPConfig::default()).unwrap();
        assert!(!cluster.found);
        assert_eq!(cluster.centroid, vec![7.5]);
    }

    #[test]
    fn removal_at_p_zero_is_identity() {
        let ds = blob_dataset(20, 5, 3);
        let out = remove_near_majority(&ds, &[50.0, 50.0], 0.0).unwrap();
        assert_eq!(out, ds);
    }

    #[test]
    fn removal_takes_the_nearest_by_distance_sort() {
        // p = 20, sMaj = 10 -> the 2 nearest go
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mut xs_all = xs.clone();
        xs_all.push(0.5); // one minority row near zero
        let mut labels = vec![0u8; 10];
        labels.push(1);
        let ds = dataset_from_columns(&["x"], &[xs_all], &labels, None).unwrap();
        let out = remove_near_majority(&ds, &[0.5], 20.0).unwrap();
        // distance sort oracle: nearest to 0.5 are x = 0 and x = 1
        let kept: Vec<f64> = out
            .rows
            .iter()
            .filter(|r| r.label == 0)
            .map(|r| r.features[0])
            .collect();
        assert_eq!(kept, vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        // the minority row survives
        assert_eq!(out.rows.iter().filter(|r| r.label == 1).count(), 1);
    }

    #[test]
    fn removal_ties_break_by_original_index() {
        // all majority rows equidistant from the centroid
        let xs = vec![1.0, 1.0, 1.0, 1.0, 0.0];
        let labels = vec![0, 0, 0, 0, 1];
        let ds = dataset_from_columns(&["x"], &[xs], &labels, None).unwrap();
        let out = remove_near_majority(&ds, &[1.0], 50.0).unwrap();
        // round(0.5 * 4) = 2 removed, lowest indices first
        assert_eq!(out.len(), 3);
        assert_eq!(out.rows[0].label, 0);
        assert_eq!(out.rows[1].label, 0);
        assert_eq!(out.rows[2].label, 1);
    }

    #[test]
    fn smote_counts_and_convex_hull() {
        let (xs, ys) = noise_pair(30, 9);
        let mut labels = vec![0u8; 30];
        labels[25..30].fill(1);
        let ds = dataset_from_columns(&["x", "y"], &[xs, ys], &labels, None).unwrap();
        // percent = 100, sMin = 5 -> 5 synthetics
        let out = smote(&ds, 100.0, 3, 17).unwrap();
        assert_eq!(out.stats.synthetic_minority, 5);
        assert_eq!(out.dataset.len(), 35);
        // synthetics lie inside the per-coordinate minority bounding box
        let min_rows: Vec<&InstanceRow> = ds.rows.iter().filter(|r| r.label == 1).collect();
        for dim in 0..2 {
            let lo = min_rows
                .iter()
                .map(|r| r.features[dim])
                .fold(f64::INFINITY, f64::min);
            let hi = min_rows
                .iter()
                .map(|r| r.features[dim])
                .fold(f64::NEG_INFINITY, f64::max);
            for row in &out.dataset.rows[30..] {
                assert!(row.features[dim] >= lo - 1e-12 && row.features[dim] <= hi + 1e-12);
                assert_eq!(row.label, 1);
                assert_eq!(row.weight, 1.0);
            }
        }
    }

    #[test]
    fn smote_percent_zero_is_identity() {
        let ds = blob_dataset(10, 3, 2);
        let out = smote(&ds, 0.0, 2, 5).unwrap();
        assert_eq!(out.dataset, ds);
    }

    #[test]
    fn smote_needs_two_minority_rows() {
        let ds = dataset_from_columns(&["x"], &[vec![0.0, 1.0, 2.0]], &[0, 0, 1], None).unwrap();
        assert!(matches!(smote(&ds, 100.0, 1, 5), Err(Error::Input(_))));
    }

    #[test]
    fn spread_subsample_hits_the_target_count() {
        let ds = blob_dataset(90, 10, 21);
        let out = spread_subsample(&ds, 1.0, 33).unwrap();
        let counts = out.dataset.class_counts();
        assert_eq!(counts[0], 10);
        assert_eq!(counts[1], 10);
        assert_eq!(out.stats.removed_majority, 80);
        // identity when already at or below the target
        let balanced = blob_dataset(10, 10, 22);
        let out = spread_subsample(&balanced, 1.0, 33).unwrap();
        assert_eq!(out.dataset, balanced);
        // determinism
        let a = spread_subsample(&ds, 1.0, 33).unwrap();
        let b = spread_subsample(&ds, 1.0, 33).unwrap();
        assert_eq!(a.dataset, b.dataset);
    }

    #[test]
    fn smote_pp_weight_algebra_on_the_worked_numbers() {
        // sMaj = 90, sMin = 10: minW = 4.5, 45 synthetics, minority total 90
        let ds = blob_dataset(90, 10, 31);
        let config = SmotePPConfig {
            p: 20.0,
            ..SmotePPConfig::default()
        };
        let out = smote_pp(&ds, &config).unwrap();
        assert_eq!(out.stats.removed_majority, 18);
        assert_eq!(out.stats.synthetic_minority, 45);
        // p = 20 removes a whole number of rows here, so each survivor
        // carries the nominal 100 / (100 - 20) = 1.25
        let survivor = out.dataset.rows.iter().find(|r| r.label == 0).unwrap();
        assert!((survivor.weight - 1.25).abs() < 1e-12);
        let existing_minority_total: f64 = out
            .dataset
            .rows
            .iter()
            .filter(|r| r.label == 1 && r.weight != 1.0)
            .map(|r| r.weight)
            .sum();
        assert!((existing_minority_total - 45.0).abs() < 1e-9);
        assert!((out.stats.majority_weight_total - 90.0).abs() < 1e-9);
        assert!((out.stats.minority_weight_total - 90.0).abs() < 1e-9);
    }

    #[test]
    fn smote_pp_narration_case_doubles_and_adds_two() {
        // each positive needs x4 representation: existing weight x2 plus two
        // unit-weight synthetics per positive
        let ds = blob_dataset(40, 10, 41);
        let config = SmotePPConfig {
            p: 0.0,
            ..SmotePPConfig::default()
        };
        let out = smote_pp(&ds, &config).unwrap();
        let min_w = 40.0 / 10.0 / 2.0;
        assert_eq!(min_w, 2.0);
        assert_eq!(out.stats.synthetic_minority, 20);
        let existing: Vec<&InstanceRow> = out
            .dataset
            .rows
            .iter()
            .filter(|r| r.label == 1 && r.weight == 2.0)
            .collect();
        assert_eq!(existing.len(), 10);
    }

    #[test]
    fn smote_pp_conserves_majority_weight_despite_rounding() {
        // p = 15 of 7 rows rounds to 1 removed; survivors must still total 7
        let ds = blob_dataset(7, 3, 51);
        let config = SmotePPConfig {
            p: 15.0,
            ..SmotePPConfig::default()
        };
        let out = smote_pp(&ds, &config).unwrap();
        assert_eq!(out.stats.removed_majority, 1);
        assert!((out.stats.majority_weight_total - 7.0).abs() < 1e-9);
    }

    #[test]
    fn smote_pp_single_minority_duplicates_with_warning() {
        let xs: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let mut xs = xs;
        xs.push(100.0);
        let mut labels = vec![0u8; 9];
        labels.push(1);
        let ds = dataset_from_columns(&["x"], &[xs], &labels, None).unwrap();
        let out = smote_pp(&ds, &SmotePPConfig::default()).unwrap();
        assert!(out.stats.degenerate_duplication);
        // synthetics are exact copies of the lone minority row
        let synthetics: Vec<&InstanceRow> = out
            .dataset
            .rows
            .iter()
            .filter(|r| r.label == 1 && r.weight == 1.0)
            .collect();
        assert_eq!(synthetics.len(), out.stats.synthetic_minority);
        assert!(synthetics.iter().all(|r| r.features == vec![100.0]));
    }

    #[test]
    fn smote_pp_balanced_input_stays_balanced() {
        let ds = blob_dataset(12, 12, 61);
        let config = SmotePPConfig {
            p: 0.0,
            ..SmotePPConfig::default()
        };
        let out = smote_pp(&ds, &config).unwrap();
        // minW = 0.5; the result keeps the classes at equal total weight
        let diff = (out.stats.minority_weight_total - out.stats.majority_weight_total).abs();
        assert!(diff <= 0.5 + 1e-9);
    }

    #[test]
    fn filters_never_remove_minority_rows() {
        let ds = blob_dataset(50, 6, 71);
        let config = SmotePPConfig::default();
        for out in [
            smote_pp(&ds, &config).unwrap(),
            smote(&ds, 200.0, 3, 5).unwrap(),
            spread_subsample(&ds, 1.0, 5).unwrap(),
        ] {
            let minority_kept = out
                .dataset
                .rows
                .iter()
                .filter(|r| r.label == 1 && r.weight != 1.0 || r.label == 1)
                .count();
            assert!(minority_kept >= 6);
        }
    }

    #[test]
    fn smote_pp_is_seed_deterministic() {
        let ds = blob_dataset(60, 8, 81);
        let config = SmotePPConfig::default().with_seed(99);
        let a = smote_pp(&ds, &config).unwrap();
        let b = smote_pp(&ds, &config).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let c = smote_pp(&ds, &SmotePPConfig::default().with_seed(100)).unwrap();
        assert!(a.dataset != c.dataset);
    }
}
