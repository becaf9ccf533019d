//! Property tests for the pipeline invariants: file round-trips, loop
//! arithmetic, rebalancing weight algebra, inference correctness, and fold
//! partitioning.

use chrono::{DateTime, Duration, Utc};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use augur_core::bayes::BayesNetModel;
use augur_core::dataset::{
    read_dataset, write_dataset, Discretizer, InstanceRow, Provenance, Schema, WeightedDataset,
};
use augur_core::eval::{auc, stratified_folds, CvPlan};
use augur_core::resample::{smote, smote_pp, SmotePPConfig};
use augur_core::span::TimeSpan;
use augur_core::timeline::{
    expected_row_count, generate_datasets, EventKind, EventRecord, GranularityPair, SignalConfig,
};

fn at(s: &str) -> DateTime<Utc> {
    DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
}

fn arb_dataset() -> impl Strategy<Value = WeightedDataset> {
    let feature = -1e6f64..1e6f64;
    let weight = 0.001f64..100.0f64;
    let row = (prop::collection::vec(feature, 3), 0u8..2, weight)
        .prop_map(|(features, label, weight)| InstanceRow::new(features, label, weight));
    prop::collection::vec(row, 1..40).prop_map(|rows| {
        WeightedDataset::new(
            Schema::new(vec!["a".into(), "b".into(), "c".into()], "class"),
            rows,
            Provenance::Synthetic,
        )
        .unwrap()
    })
}

proptest! {
    #[test]
    fn dataset_write_read_is_identity(ds in arb_dataset()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        prop_assert_eq!(back.schema, ds.schema);
        prop_assert_eq!(back.rows.len(), ds.rows.len());
        for (a, b) in ds.rows.iter().zip(back.rows.iter()) {
            prop_assert_eq!(a.label, b.label);
            prop_assert_eq!(a.weight.to_bits(), b.weight.to_bits());
            for (x, y) in a.features.iter().zip(b.features.iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn row_count_matches_closed_form(span_hours in 2i64..2000, tg_hours in 1u32..96) {
        let gt_start = at("2016-04-01T00:00:00Z");
        let gt_end = gt_start + Duration::hours(span_hours);
        let t_g = TimeSpan::hours(tg_hours);
        // direct loop oracle
        let mut count = 0i64;
        let mut t = gt_start;
        while t <= t_g.sub_from(gt_end) {
            count += 1;
            t = t_g.add_to(t);
        }
        prop_assert_eq!(Some(count), expected_row_count(gt_start, gt_end, t_g));
    }

    #[test]
    fn smote_pp_weight_algebra(s_maj in 3usize..120, s_min in 2usize..40, p in 0.0f64..90.0, seed in 0u64..1000) {
        prop_assume!(s_min <= s_maj);
        let ds = imbalanced(s_maj, s_min, seed);
        let config = SmotePPConfig { p, seed, ..SmotePPConfig::default() };
        let out = smote_pp(&ds, &config).unwrap();
        // majority weight conservation, exact
        prop_assert!((out.stats.majority_weight_total - s_maj as f64).abs() < 1e-9,
            "majority total {} != {}", out.stats.majority_weight_total, s_maj);
        // minority balance within one rounding slack
        let min_w = s_maj as f64 / s_min as f64 / 2.0;
        prop_assert!((out.stats.minority_weight_total - s_maj as f64).abs() <= min_w + 1e-9);
        // minority rows survive every filter
        let kept_minority = out.dataset.rows.iter().filter(|r| r.label == 1).count();
        prop_assert!(kept_minority >= s_min);
    }

    #[test]
    fn synthetics_stay_in_parent_bounds(s_min in 2usize..20, seed in 0u64..500) {
        let ds = imbalanced(40, s_min, seed);
        let out = smote(&ds, 150.0, 4, seed).unwrap();
        let originals: Vec<&InstanceRow> = ds.rows.iter().filter(|r| r.label == 1).collect();
        for synthetic in &out.dataset.rows[ds.rows.len()..] {
            for dim in 0..synthetic.features.len() {
                let lo = originals.iter().map(|r| r.features[dim]).fold(f64::INFINITY, f64::min);
                let hi = originals.iter().map(|r| r.features[dim]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(synthetic.features[dim] >= lo - 1e-9);
                prop_assert!(synthetic.features[dim] <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn folds_partition_and_balance(n in 20usize..120, rate in 0.05f64..0.5, seed in 0u64..500) {
        let ds = imbalanced_rate(n, rate, seed);
        let plan = CvPlan { folds: 5, repetitions: 2, seed, stratified: true };
        let folds = stratified_folds(&ds, &plan).unwrap();
        for fold_set in &folds.reps {
            let mut seen = vec![false; n];
            for split in fold_set {
                for &i in &split.test {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
                prop_assert_eq!(split.train.len() + split.test.len(), n);
                // stratification within one row per class
                for class in 0..2u8 {
                    let total = ds.rows.iter().filter(|r| r.label == class).count();
                    let in_fold = split.test.iter().filter(|&&i| ds.rows[i].label == class).count();
                    let expected = total as f64 / 5.0;
                    prop_assert!((in_fold as f64 - expected).abs() <= 1.0);
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn posterior_matches_full_joint_enumeration(seed in 0u64..300) {
        let model = random_network(seed);
        let n = model.n_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        // random evidence on a strict subset, query outside it
        let query = rng.gen_range(0..n);
        let evidence: Vec<Option<u8>> = (0..n)
            .map(|i| {
                if i == query || rng.gen::<f64>() < 0.5 {
                    None
                } else {
                    Some(rng.gen_range(0..2) as u8)
                }
            })
            .collect();
        let fast = model.posterior(&evidence, query).unwrap();
        let slow = posterior_by_full_joint(&model, &evidence, query);
        prop_assert!((fast[0] - slow[0]).abs() < 1e-12);
        prop_assert!((fast[1] - slow[1]).abs() < 1e-12);
    }

    #[test]
    fn auc_weight_duplication_equivalence(seed in 0u64..500) {
        // doubling a row's weight must equal listing the row twice
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(4..30);
        let mut weighted = Vec::new();
        let mut duplicated = Vec::new();
        let mut labels = [false, false];
        for _ in 0..n {
            let score = (rng.gen::<f64>() * 4.0).round() / 4.0;
            let label = rng.gen_range(0..2) as u8;
            labels[label as usize] = true;
            if rng.gen::<bool>() {
                weighted.push((score, label, 2.0));
                duplicated.push((score, label, 1.0));
                duplicated.push((score, label, 1.0));
            } else {
                weighted.push((score, label, 1.0));
                duplicated.push((score, label, 1.0));
            }
        }
        prop_assume!(labels[0] && labels[1]);
        let a = auc(&weighted).unwrap();
        let b = auc(&duplicated).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }
}

/// Imbalanced two-cluster dataset with `s_maj` negatives and `s_min`
/// positives.
fn imbalanced(s_maj: usize, s_min: usize, seed: u64) -> WeightedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for _ in 0..s_maj {
        rows.push(InstanceRow::new(
            vec![rng.gen::<f64>() * 4.0, rng.gen::<f64>() * 4.0],
            0,
            1.0,
        ));
    }
    for _ in 0..s_min {
        rows.push(InstanceRow::new(
            vec![3.0 + rng.gen::<f64>() * 4.0, 3.0 + rng.gen::<f64>() * 4.0],
            1,
            1.0,
        ));
    }
    WeightedDataset::new(
        Schema::new(vec!["x".into(), "y".into()], "class"),
        rows,
        Provenance::Synthetic,
    )
    .unwrap()
}

fn imbalanced_rate(n: usize, rate: f64, seed: u64) -> WeightedDataset {
    let positives = ((n as f64 * rate).round() as usize).clamp(1, n - 1);
    imbalanced(n - positives, positives, seed)
}

/// Random DAG over at most 5 binary nodes with CPT entries in (0.05, 0.95).
fn random_network(seed: u64) -> BayesNetModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=5);
    let mut parents: Vec<Vec<usize>> = Vec::new();
    for node in 0..n {
        let mut ps = Vec::new();
        for earlier in 0..node {
            if ps.len() < 3 && rng.gen::<f64>() < 0.45 {
                ps.push(earlier);
            }
        }
        parents.push(ps);
    }
    let cpts: Vec<Vec<[f64; 2]>> = parents
        .iter()
        .map(|ps| {
            (0..(1usize << ps.len()))
                .map(|_| {
                    let p = 0.05 + 0.9 * rng.gen::<f64>();
                    [1.0 - p, p]
                })
                .collect()
        })
        .collect();
    BayesNetModel {
        nodes: (0..n).map(|i| format!("n{i}")).collect(),
        class_index: n - 1,
        parents,
        cpts,
        discretizer: Discretizer::identity(),
    }
}

/// Independent oracle: materialize the full joint table over all 2^n
/// assignments, then marginalize by summation.
fn posterior_by_full_joint(
    model: &BayesNetModel,
    evidence: &[Option<u8>],
    query: usize,
) -> [f64; 2] {
    let n = model.n_nodes();
    let mut totals = [0.0f64; 2];
    for mask in 0..(1usize << n) {
        let assignment: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
        let consistent = evidence
            .iter()
            .enumerate()
            .all(|(i, ev)| ev.is_none_or(|v| assignment[i] == v));
        if !consistent {
            continue;
        }
        // chain-rule product computed independently of joint_probability
        let mut p = 1.0;
        for node in 0..n {
            let mut config = 0usize;
            for (bit, &parent) in model.parents[node].iter().enumerate() {
                config |= (assignment[parent] as usize) << bit;
            }
            p *= model.cpts[node][config][assignment[node] as usize];
        }
        totals[assignment[query] as usize] += p;
    }
    let z = totals[0] + totals[1];
    [totals[0] / z, totals[1] / z]
}

/// Positive density never decreases as t_g coarsens, on an aligned grid.
#[test]
fn positive_density_monotone_in_tg() {
    let gt_start = at("2016-04-01T00:00:00Z");
    let gt_end = at("2016-04-29T00:00:00Z"); // 28 days: divisible by 48h
    let config = SignalConfig::default();
    for seed in 0..25u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut events = Vec::new();
        let mut t = at("2016-03-25T00:00:00Z");
        while t < gt_end {
            events.push(EventRecord {
                timestamp: t,
                stream_id: "twitter-cyber".into(),
                kind: EventKind::Mention,
                value: 1.0,
                tone: None,
                mentions: None,
                articles: None,
                attack_type: None,
            });
            if rng.gen::<f64>() < 0.12 {
                events.push(EventRecord {
                    timestamp: t + Duration::minutes(17),
                    stream_id: "ground-truth".into(),
                    kind: EventKind::Attack,
                    value: 1.0,
                    tone: None,
                    mentions: None,
                    articles: None,
                    attack_type: Some("dos".into()),
                });
            }
            t += Duration::hours(2);
        }
        let grid: Vec<GranularityPair> = [6u32, 12, 24, 48]
            .iter()
            .map(|&h| GranularityPair::new(TimeSpan::days(3), TimeSpan::hours(h)))
            .collect();
        let out = generate_datasets(
            &events,
            &config,
            &["dos".to_string()],
            &grid,
            gt_start,
            gt_end,
        )
        .unwrap();
        let densities: Vec<f64> = grid
            .iter()
            .map(|p| out[&("dos".to_string(), p.clone())].positive_density())
            .collect();
        for pair in densities.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-12,
                "seed {seed}: densities not monotone: {densities:?}"
            );
        }
    }
}
