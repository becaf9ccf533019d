//! Event ingestion and sliding-window dataset generation.
//!
//! Raw streams carry three kinds of records: keyword `mention`s (pre-tagged
//! upstream; this module never does text matching), global `event`s with a
//! tone and mention/article counts, and ground-truth `attack`s. For a
//! prediction time `t`, signals are aggregated over the half-open window
//! `(t - t_x, t]` and the binary ground truth over `(t, t + t_g]`.

mod io;

pub use io::{read_events, read_events_mapped, write_events, ColumnMap, Separator};

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rayon::prelude::*;

use crate::dataset::{InstanceRow, Provenance, Schema, WeightedDataset};
use crate::error::{Error, Result};
use crate::span::TimeSpan;

pub const DEFAULT_CLASS_NAME: &str = "class";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    Mention,
    Event,
    Attack,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Mention => "mention",
            EventKind::Event => "event",
            EventKind::Attack => "attack",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        match s.to_ascii_lowercase().as_str() {
            "mention" => Some(EventKind::Mention),
            "event" => Some(EventKind::Event),
            "attack" => Some(EventKind::Attack),
            _ => None,
        }
    }
}

/// One time-stamped observation from a source stream.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub timestamp: DateTime<Utc>,
    pub stream_id: String,
    pub kind: EventKind,
    pub value: f64,
    pub tone: Option<f64>,
    pub mentions: Option<u64>,
    pub articles: Option<u64>,
    pub attack_type: Option<String>,
}

impl EventRecord {
    pub fn validate(&self) -> Result<()> {
        if let Some(tone) = self.tone {
            if !(-100.0..=100.0).contains(&tone) {
                return Err(Error::Input(format!(
                    "tone {tone} outside [-100, 100] at {}",
                    self.timestamp
                )));
            }
        }
        if self.kind == EventKind::Attack && self.attack_type.is_none() {
            return Err(Error::Input(format!(
                "attack record at {} has no attack_type",
                self.timestamp
            )));
        }
        Ok(())
    }
}

/// What a signal measures over its window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    /// Count of mention records on the signal's stream.
    MentionCount,
    /// Sum of `mentions` over event records with a negative tone.
    NegativeEventMentions,
    /// Sum of `articles` over event records with a negative tone.
    NegativeEventArticles,
    /// Arithmetic mean of tone over event records with a negative tone;
    /// 0 (neutral) when the window has none.
    NegativeEventTone,
}

impl SignalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SignalKind::MentionCount => "mention_count",
            SignalKind::NegativeEventMentions => "negative_event_mentions",
            SignalKind::NegativeEventArticles => "negative_event_articles",
            SignalKind::NegativeEventTone => "negative_event_tone",
        }
    }

    pub fn parse(s: &str) -> Option<SignalKind> {
        match s {
            "mention_count" => Some(SignalKind::MentionCount),
            "negative_event_mentions" => Some(SignalKind::NegativeEventMentions),
            "negative_event_articles" => Some(SignalKind::NegativeEventArticles),
            "negative_event_tone" => Some(SignalKind::NegativeEventTone),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalDef {
    pub name: String,
    pub kind: SignalKind,
    pub stream: String,
}

/// How count-style signals are normalized over the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AggregationMode {
    /// Divide by the window length in days, so signals are comparable
    /// across `t_x` values. The tone mean is unaffected.
    #[default]
    PerDay,
    /// Raw sums/counts over the window.
    RawSum,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalConfig {
    pub defs: Vec<SignalDef>,
    pub mode: AggregationMode,
}

impl SignalConfig {
    pub fn new(defs: Vec<SignalDef>, mode: AggregationMode) -> Self {
        SignalConfig { defs, mode }
    }

    pub fn def(&self, name: &str) -> Result<&SignalDef> {
        self.defs
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| Error::Config(format!("unknown signal name: {name}")))
    }

    pub fn names(&self) -> Vec<String> {
        self.defs.iter().map(|d| d.name.clone()).collect()
    }
}

impl Default for SignalConfig {
    /// The five stock signals: Twitter cyber/entity mention counts and the
    /// negative-tone mention/article/tone aggregates of a global event feed.
    fn default() -> Self {
        let def = |name: &str, kind, stream: &str| SignalDef {
            name: name.into(),
            kind,
            stream: stream.into(),
        };
        SignalConfig {
            defs: vec![
                def("TCM", SignalKind::MentionCount, "twitter-cyber"),
                def("TEM", SignalKind::MentionCount, "twitter-entity"),
                def("GEM", SignalKind::NegativeEventMentions, "gdelt-events"),
                def("GEA", SignalKind::NegativeEventArticles, "gdelt-events"),
                def("GET", SignalKind::NegativeEventTone, "gdelt-events"),
            ],
            mode: AggregationMode::PerDay,
        }
    }
}

/// One cell of the granularity grid, with optional per-signal lookback
/// overrides.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GranularityPair {
    pub t_x: TimeSpan,
    pub t_g: TimeSpan,
    pub per_signal_tx: BTreeMap<String, TimeSpan>,
}

impl GranularityPair {
    pub fn new(t_x: TimeSpan, t_g: TimeSpan) -> Self {
        GranularityPair {
            t_x,
            t_g,
            per_signal_tx: BTreeMap::new(),
        }
    }

    pub fn with_overrides(mut self, overrides: BTreeMap<String, TimeSpan>) -> Self {
        self.per_signal_tx = overrides;
        self
    }

    pub fn effective_tx(&self, signal: &str) -> TimeSpan {
        self.per_signal_tx.get(signal).copied().unwrap_or(self.t_x)
    }
}

/// Signal values aggregated over the window ending at `window_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalVector {
    pub values: Vec<(String, f64)>,
    pub window_end: DateTime<Utc>,
}

fn check_sorted(events: &[EventRecord]) -> Result<()> {
    for pair in events.windows(2) {
        if pair[0].timestamp > pair[1].timestamp {
            return Err(Error::Input(format!(
                "events not sorted by timestamp near {}",
                pair[1].timestamp
            )));
        }
    }
    Ok(())
}

fn window_days(start: DateTime<Utc>, end: DateTime<Utc>) -> f64 {
    (end - start).num_seconds() as f64 / 86_400.0
}

fn matches_signal(record: &EventRecord, def: &SignalDef) -> bool {
    if record.stream_id != def.stream {
        return false;
    }
    match def.kind {
        SignalKind::MentionCount => record.kind == EventKind::Mention,
        SignalKind::NegativeEventMentions
        | SignalKind::NegativeEventArticles
        | SignalKind::NegativeEventTone => {
            record.kind == EventKind::Event && record.tone.is_some_and(|t| t < 0.0)
        }
    }
}

/// Aggregate one signal over the half-open window `(window_start,
/// window_end]` by direct scan.
pub fn aggregate_signal(
    events: &[EventRecord],
    config: &SignalConfig,
    signal: &str,
    window_start: DateTime<Utc>,
    window_end: DateTime<Utc>,
) -> Result<f64> {
    let def = config.def(signal)?;
    if window_start >= window_end {
        return Err(Error::Input(format!(
            "window start {window_start} is not before window end {window_end}"
        )));
    }
    check_sorted(events)?;

    let lo = events.partition_point(|e| e.timestamp <= window_start);
    let hi = events.partition_point(|e| e.timestamp <= window_end);
    let in_window = events[lo..hi].iter().filter(|e| matches_signal(e, def));

    let value = match def.kind {
        SignalKind::MentionCount => {
            let count = in_window.count() as f64;
            normalize(count, config.mode, window_start, window_end)
        }
        SignalKind::NegativeEventMentions => {
            let sum: f64 = in_window.map(|e| e.mentions.unwrap_or(0) as f64).sum();
            normalize(sum, config.mode, window_start, window_end)
        }
        SignalKind::NegativeEventArticles => {
            let sum: f64 = in_window.map(|e| e.articles.unwrap_or(0) as f64).sum();
            normalize(sum, config.mode, window_start, window_end)
        }
        SignalKind::NegativeEventTone => {
            let (sum, count) = in_window.fold((0.0, 0usize), |(s, c), e| {
                (s + e.tone.unwrap_or(0.0), c + 1)
            });
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        }
    };
    Ok(value)
}

fn normalize(raw: f64, mode: AggregationMode, start: DateTime<Utc>, end: DateTime<Utc>) -> f64 {
    match mode {
        AggregationMode::PerDay => raw / window_days(start, end),
        AggregationMode::RawSum => raw,
    }
}

/// Binary ground truth: 1 iff at least one attack of the given type falls in
/// `(t, t + t_g]` (counts above 1 clamp to 1).
pub fn count_ground_truth(
    events: &[EventRecord],
    attack_type: &str,
    t: DateTime<Utc>,
    t_g: TimeSpan,
) -> Result<u8> {
    check_sorted(events)?;
    let end = t_g.add_to(t);
    let lo = events.partition_point(|e| e.timestamp <= t);
    let hi = events.partition_point(|e| e.timestamp <= end);
    let hit = events[lo..hi]
        .iter()
        .any(|e| e.kind == EventKind::Attack && e.attack_type.as_deref() == Some(attack_type));
    Ok(u8::from(hit))
}

/// Per-signal prefix sums over the sorted event stream, so each window
/// aggregate is two binary searches instead of a scan. A window value only
/// depends on prefix entries up to its end, which keeps past rows
/// bit-identical when later events change.
pub struct SignalIndex<'a> {
    config: &'a SignalConfig,
    per_signal: Vec<SignalPrefix>,
    attacks: BTreeMap<String, Vec<i64>>,
    first_timestamp: Option<DateTime<Utc>>,
}

struct SignalPrefix {
    /// Epoch seconds of matching records, ascending.
    ts: Vec<i64>,
    /// cum[i] = sum of the first i contributions.
    cum: Vec<f64>,
    /// Tone-mean signals additionally track matching-record counts.
    cnt: Option<Vec<f64>>,
}

impl SignalPrefix {
    fn range(&self, start: i64, end: i64) -> (usize, usize) {
        let lo = self.ts.partition_point(|&t| t <= start);
        let hi = self.ts.partition_point(|&t| t <= end);
        (lo, hi)
    }
}

impl<'a> SignalIndex<'a> {
    pub fn build(events: &[EventRecord], config: &'a SignalConfig) -> Result<SignalIndex<'a>> {
        check_sorted(events)?;
        for e in events {
            e.validate()?;
        }
        let mut per_signal = Vec::with_capacity(config.defs.len());
        for def in &config.defs {
            let mut ts = Vec::new();
            let mut cum = vec![0.0];
            let mut cnt = matches!(def.kind, SignalKind::NegativeEventTone).then(|| vec![0.0]);
            for e in events.iter().filter(|e| matches_signal(e, def)) {
                let contribution = match def.kind {
                    SignalKind::MentionCount => 1.0,
                    SignalKind::NegativeEventMentions => e.mentions.unwrap_or(0) as f64,
                    SignalKind::NegativeEventArticles => e.articles.unwrap_or(0) as f64,
                    SignalKind::NegativeEventTone => e.tone.unwrap_or(0.0),
                };
                ts.push(e.timestamp.timestamp());
                cum.push(cum.last().unwrap() + contribution);
                if let Some(cnt) = cnt.as_mut() {
                    cnt.push(cnt.last().unwrap() + 1.0);
                }
            }
            per_signal.push(SignalPrefix { ts, cum, cnt });
        }

        let mut attacks: BTreeMap<String, Vec<i64>> = BTreeMap::new();
        for e in events.iter().filter(|e| e.kind == EventKind::Attack) {
            attacks
                .entry(e.attack_type.clone().unwrap_or_default())
                .or_default()
                .push(e.timestamp.timestamp());
        }

        Ok(SignalIndex {
            config,
            per_signal,
            attacks,
            first_timestamp: events.first().map(|e| e.timestamp),
        })
    }

    pub fn first_timestamp(&self) -> Option<DateTime<Utc>> {
        self.first_timestamp
    }

    fn signal_value(
        &self,
        signal_idx: usize,
        window_start: DateTime<Utc>,
        window_end: DateTime<Utc>,
    ) -> f64 {
        let prefix = &self.per_signal[signal_idx];
        let (lo, hi) = prefix.range(window_start.timestamp(), window_end.timestamp());
        match &prefix.cnt {
            Some(cnt) => {
                let n = cnt[hi] - cnt[lo];
                if n == 0.0 {
                    0.0
                } else {
                    (prefix.cum[hi] - prefix.cum[lo]) / n
                }
            }
            None => normalize(
                prefix.cum[hi] - prefix.cum[lo],
                self.config.mode,
                window_start,
                window_end,
            ),
        }
    }

    pub fn signal_vector(&self, pair: &GranularityPair, t: DateTime<Utc>) -> SignalVector {
        let values = self
            .config
            .defs
            .iter()
            .enumerate()
            .map(|(i, def)| {
                let start = pair.effective_tx(&def.name).sub_from(t);
                (def.name.clone(), self.signal_value(i, start, t))
            })
            .collect();
        SignalVector {
            values,
            window_end: t,
        }
    }

    pub fn ground_truth(&self, attack_type: &str, t: DateTime<Utc>, t_g: TimeSpan) -> u8 {
        let Some(ts) = self.attacks.get(attack_type) else {
            return 0;
        };
        let end = t_g.add_to(t).timestamp();
        let t = t.timestamp();
        let lo = ts.partition_point(|&x| x <= t);
        let hi = ts.partition_point(|&x| x <= end);
        u8::from(hi > lo)
    }
}

/// Number of rows the generation loop produces for a fixed-duration `t_g`.
pub fn expected_row_count(
    gt_start: DateTime<Utc>,
    gt_end: DateTime<Utc>,
    t_g: TimeSpan,
) -> Option<i64> {
    let step = t_g.fixed_seconds()?;
    let span = (gt_end - gt_start).num_seconds();
    if span < step {
        return Some(0);
    }
    Some((span - step) / step + 1)
}

/// Materialize one weighted dataset per (attack type, granularity pair).
///
/// The loop iterates `t` from `gt_start` while `t <= gt_end - t_g`, stepping
/// by `t_g`; each row pairs signals over `(t - t_x, t]` with the ground
/// truth over `(t, t + t_g]`, at weight 1. Cells are computed in parallel;
/// output is identical for any worker count.
pub fn generate_datasets(
    events: &[EventRecord],
    config: &SignalConfig,
    attack_types: &[String],
    grid: &[GranularityPair],
    gt_start: DateTime<Utc>,
    gt_end: DateTime<Utc>,
) -> Result<BTreeMap<(String, GranularityPair), WeightedDataset>> {
    if gt_start >= gt_end {
        return Err(Error::Input(format!(
            "ground-truth span is empty: {gt_start} .. {gt_end}"
        )));
    }
    if config.defs.is_empty() {
        return Err(Error::Config("no signals configured".into()));
    }
    let index = SignalIndex::build(events, config)?;
    let data_start = index
        .first_timestamp()
        .ok_or_else(|| Error::Input("no events supplied".into()))?;

    // Every signal's first window must start at or after the first event.
    for pair in grid {
        let widest = config
            .defs
            .iter()
            .map(|d| pair.effective_tx(&d.name))
            .max_by_key(|tx| (gt_start - tx.sub_from(gt_start)).num_seconds())
            .expect("at least one signal");
        if widest.sub_from(gt_start) < data_start {
            return Err(Error::InsufficientHistory {
                earliest_usable: widest.add_to(data_start),
            });
        }
    }

    let combos: Vec<(String, GranularityPair)> = attack_types
        .iter()
        .flat_map(|a| grid.iter().map(move |p| (a.clone(), p.clone())))
        .collect();

    let cells: Vec<((String, GranularityPair), WeightedDataset)> = combos
        .into_par_iter()
        .map(|(attack, pair)| {
            let ds = generate_cell(&index, config, &attack, &pair, gt_start, gt_end)?;
            Ok(((attack, pair), ds))
        })
        .collect::<Result<_>>()?;

    Ok(cells.into_iter().collect())
}

fn generate_cell(
    index: &SignalIndex,
    config: &SignalConfig,
    attack_type: &str,
    pair: &GranularityPair,
    gt_start: DateTime<Utc>,
    gt_end: DateTime<Utc>,
) -> Result<WeightedDataset> {
    let last_start = pair.t_g.sub_from(gt_end);
    let mut rows = Vec::new();
    let mut t = gt_start;
    while t <= last_start {
        let signals = index.signal_vector(pair, t);
        let label = index.ground_truth(attack_type, t, pair.t_g);
        rows.push(InstanceRow::new(
            signals.values.into_iter().map(|(_, v)| v).collect(),
            label,
            1.0,
        ));
        t = pair.t_g.add_to(t);
    }
    if rows.is_empty() {
        return Err(Error::Input(format!(
            "ground-truth span shorter than t_g {} for attack {attack_type}",
            pair.t_g
        )));
    }
    WeightedDataset::new(
        Schema::new(config.names(), DEFAULT_CLASS_NAME),
        rows,
        Provenance::Generated {
            attack_type: attack_type.to_string(),
            t_x: pair.t_x,
            t_g: pair.t_g,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Duration;

    fn at(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    fn mention(ts: DateTime<Utc>, stream: &str) -> EventRecord {
        EventRecord {
            timestamp: ts,
            stream_id: stream.into(),
            kind: EventKind::Mention,
            value: 1.0,
            tone: None,
            mentions: None,
            articles: None,
            attack_type: None,
        }
    }

    fn gdelt(ts: DateTime<Utc>, tone: f64, mentions: u64, articles: u64) -> EventRecord {
        EventRecord {
            timestamp: ts,
            stream_id: "gdelt-events".into(),
            kind: EventKind::Event,
            value: 1.0,
            tone: Some(tone),
            mentions: Some(mentions),
            articles: Some(articles),
            attack_type: None,
        }
    }

    fn attack(ts: DateTime<Utc>, attack_type: &str) -> EventRecord {
        EventRecord {
            timestamp: ts,
            stream_id: "ground-truth".into(),
            kind: EventKind::Attack,
            value: 1.0,
            tone: None,
            mentions: None,
            articles: None,
            attack_type: Some(attack_type.into()),
        }
    }

    fn sort_events(mut events: Vec<EventRecord>) -> Vec<EventRecord> {
        events.sort_by_key(|e| e.timestamp);
        events
    }

    #[test]
    fn tcm_counts_mentions_per_day() {
        // 14 cyber-keyword mentions over a 7-day window -> 2.0 mentions/day
        let start = at("2016-04-01T00:00:00Z");
        let end = at("2016-04-08T00:00:00Z");
        let events = sort_events(
            (0..14)
                .map(|i| mention(start + Duration::hours(3 + i * 11), "twitter-cyber"))
                .collect(),
        );
        let config = SignalConfig::default();
        let v = aggregate_signal(&events, &config, "TCM", start, end).unwrap();
        assert_eq!(v, 2.0);
        // the other mention stream does not leak in
        let v = aggregate_signal(&events, &config, "TEM", start, end).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn gem_sums_negative_mentions() {
        // negative-tone events with mentions {3, 5} over 1 day -> 8.0
        let start = at("2016-04-01T00:00:00Z");
        let end = at("2016-04-02T00:00:00Z");
        let events = sort_events(vec![
            gdelt(start + Duration::hours(2), -10.0, 3, 1),
            gdelt(start + Duration::hours(5), 20.0, 100, 9), // positive tone: excluded
            gdelt(start + Duration::hours(9), -2.5, 5, 2),
        ]);
        let config = SignalConfig::default();
        assert_eq!(
            aggregate_signal(&events, &config, "GEM", start, end).unwrap(),
            8.0
        );
        assert_eq!(
            aggregate_signal(&events, &config, "GEA", start, end).unwrap(),
            3.0
        );
        let get = aggregate_signal(&events, &config, "GET", start, end).unwrap();
        assert!((get - (-6.25)).abs() < 1e-12);
    }

    #[test]
    fn get_is_zero_on_empty_window() {
        let start = at("2016-04-01T00:00:00Z");
        let end = at("2016-04-02T00:00:00Z");
        let events = vec![gdelt(end + Duration::hours(1), -10.0, 3, 1)];
        let config = SignalConfig::default();
        assert_eq!(
            aggregate_signal(&events, &config, "GET", start, end).unwrap(),
            0.0
        );
    }

    #[test]
    fn raw_sum_mode_skips_per_day_normalization() {
        let start = at("2016-04-01T00:00:00Z");
        let end = at("2016-04-08T00:00:00Z");
        let events = sort_events(
            (0..14)
                .map(|i| mention(start + Duration::hours(3 + i * 11), "twitter-cyber"))
                .collect(),
        );
        let config = SignalConfig {
            mode: AggregationMode::RawSum,
            ..SignalConfig::default()
        };
        assert_eq!(
            aggregate_signal(&events, &config, "TCM", start, end).unwrap(),
            14.0
        );
    }

    #[test]
    fn window_boundaries_are_half_open() {
        let start = at("2016-04-01T00:00:00Z");
        let end = at("2016-04-02T00:00:00Z");
        let events = vec![
            mention(start, "twitter-cyber"), // exactly at window start: excluded
            mention(end, "twitter-cyber"),   // exactly at window end: included
        ];
        let config = SignalConfig::default();
        assert_eq!(
            aggregate_signal(&events, &config, "TCM", start, end).unwrap(),
            1.0
        );
    }

    #[test]
    fn unknown_signal_is_a_config_error() {
        let config = SignalConfig::default();
        let err = aggregate_signal(
            &[],
            &config,
            "BOGUS",
            at("2016-04-01T00:00:00Z"),
            at("2016-04-02T00:00:00Z"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn unsorted_events_are_an_input_error() {
        let t0 = at("2016-04-01T00:00:00Z");
        let events = vec![
            mention(t0 + Duration::hours(5), "twitter-cyber"),
            mention(t0 + Duration::hours(1), "twitter-cyber"),
        ];
        let config = SignalConfig::default();
        let err =
            aggregate_signal(&events, &config, "TCM", t0, t0 + Duration::days(1)).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn ground_truth_clamps_counts() {
        let t = at("2016-04-01T00:00:00Z");
        let t_g = TimeSpan::hours(24);
        let events = sort_events(vec![
            attack(t + Duration::hours(2), "dos"),
            attack(t + Duration::hours(8), "dos"),
            attack(t + Duration::hours(20), "dos"),
        ]);
        assert_eq!(count_ground_truth(&events, "dos", t, t_g).unwrap(), 1);
        assert_eq!(count_ground_truth(&events, "malware", t, t_g).unwrap(), 0);
    }

    #[test]
    fn ground_truth_window_end_is_inclusive() {
        let t = at("2016-04-01T00:00:00Z");
        let t_g = TimeSpan::hours(24);
        let events = vec![attack(t + Duration::hours(24), "dos")];
        assert_eq!(count_ground_truth(&events, "dos", t, t_g).unwrap(), 1);
        // ...and the start is exclusive
        let events = vec![attack(t, "dos")];
        assert_eq!(count_ground_truth(&events, "dos", t, t_g).unwrap(), 0);
    }

    fn history_stream(from: DateTime<Utc>, to: DateTime<Utc>) -> Vec<EventRecord> {
        let mut events = Vec::new();
        let mut t = from;
        let mut i = 0u64;
        while t < to {
            events.push(mention(t, "twitter-cyber"));
            events.push(mention(t + Duration::minutes(7), "twitter-entity"));
            events.push(gdelt(
                t + Duration::minutes(31),
                -15.0 - (i % 7) as f64,
                2 + i % 5,
                1 + i % 3,
            ));
            if i.is_multiple_of(3) {
                events.push(attack(t + Duration::hours(5), "dos"));
            }
            t += Duration::hours(6);
            i += 1;
        }
        sort_events(events)
    }

    #[test]
    fn row_count_matches_loop_arithmetic() {
        let gt_start = at("2016-04-01T00:00:00Z");
        let gt_end = at("2016-04-08T00:00:00Z"); // 7-day span
        let events = history_stream(at("2016-03-01T00:00:00Z"), gt_end);
        let config = SignalConfig::default();
        let grid = vec![
            GranularityPair::new(TimeSpan::days(3), TimeSpan::hours(24)),
            GranularityPair::new(TimeSpan::days(3), TimeSpan::hours(48)),
        ];
        let out = generate_datasets(
            &events,
            &config,
            &["dos".to_string()],
            &grid,
            gt_start,
            gt_end,
        )
        .unwrap();
        let rows_24 = out[&("dos".to_string(), grid[0].clone())].len();
        let rows_48 = out[&("dos".to_string(), grid[1].clone())].len();
        assert_eq!(rows_24, 7);
        assert_eq!(
            rows_24 as i64,
            expected_row_count(gt_start, gt_end, TimeSpan::hours(24)).unwrap()
        );
        // halving resolution roughly halves the row count
        assert_eq!(rows_48, 3);
        assert_eq!(
            rows_48 as i64,
            expected_row_count(gt_start, gt_end, TimeSpan::hours(48)).unwrap()
        );
    }

    #[test]
    fn generated_rows_match_direct_aggregation() {
        let gt_start = at("2016-04-01T00:00:00Z");
        let gt_end = at("2016-04-08T00:00:00Z");
        let events = history_stream(at("2016-03-01T00:00:00Z"), gt_end);
        let config = SignalConfig::default();
        let pair = GranularityPair::new(TimeSpan::days(3), TimeSpan::hours(12));
        let out = generate_datasets(
            &events,
            &config,
            &["dos".to_string()],
            std::slice::from_ref(&pair),
            gt_start,
            gt_end,
        )
        .unwrap();
        let ds = &out[&("dos".to_string(), pair.clone())];
        let mut t = gt_start;
        for row in &ds.rows {
            for (i, name) in config.names().iter().enumerate() {
                let direct = aggregate_signal(
                    &events,
                    &config,
                    name,
                    pair.effective_tx(name).sub_from(t),
                    t,
                )
                .unwrap();
                assert!(
                    (row.features[i] - direct).abs() < 1e-9,
                    "{name} at {t}: {} vs {direct}",
                    row.features[i]
                );
            }
            assert_eq!(
                row.label,
                count_ground_truth(&events, "dos", t, pair.t_g).unwrap()
            );
            t = pair.t_g.add_to(t);
        }
    }

    #[test]
    fn positive_rate_is_higher_at_coarser_granularity() {
        // attacks every day: every 48h window is positive, 6h windows are not
        let gt_start = at("2016-04-01T00:00:00Z");
        let gt_end = at("2016-04-15T00:00:00Z");
        let mut events = history_stream(at("2016-03-20T00:00:00Z"), gt_end);
        let mut day = gt_start;
        while day < gt_end {
            events.push(attack(day + Duration::hours(3), "daily"));
            day += Duration::days(1);
        }
        let events = sort_events(events);
        let config = SignalConfig::default();
        let fine = GranularityPair::new(TimeSpan::days(3), TimeSpan::hours(6));
        let coarse = GranularityPair::new(TimeSpan::days(3), TimeSpan::hours(48));
        let out = generate_datasets(
            &events,
            &config,
            &["daily".to_string()],
            &[fine.clone(), coarse.clone()],
            gt_start,
            gt_end,
        )
        .unwrap();
        let fine_rate = out[&("daily".to_string(), fine)].positive_density();
        let coarse_rate = out[&("daily".to_string(), coarse)].positive_density();
        assert_eq!(coarse_rate, 1.0);
        assert!(fine_rate < coarse_rate);
    }

    #[test]
    fn insufficient_history_names_earliest_usable_time() {
        let gt_start = at("2016-04-01T00:00:00Z");
        let gt_end = at("2016-04-08T00:00:00Z");
        // data starts less than 3 days before gt_start
        let data_start = at("2016-03-30T12:00:00Z");
        let events = history_stream(data_start, gt_end);
        let config = SignalConfig::default();
        let grid = vec![GranularityPair::new(TimeSpan::days(3), TimeSpan::hours(24))];
        let err = generate_datasets(
            &events,
            &config,
            &["dos".to_string()],
            &grid,
            gt_start,
            gt_end,
        )
        .unwrap_err();
        match err {
            Error::InsufficientHistory { earliest_usable } => {
                assert_eq!(earliest_usable, at("2016-04-02T12:00:00Z"));
            }
            other => panic!("expected InsufficientHistory, got {other:?}"),
        }
    }

    #[test]
    fn per_signal_override_changes_only_that_column() {
        let gt_start = at("2016-04-01T00:00:00Z");
        let gt_end = at("2016-04-08T00:00:00Z");
        let events = history_stream(at("2016-02-01T00:00:00Z"), gt_end);
        let config = SignalConfig::default();
        let base = GranularityPair::new(TimeSpan::days(3), TimeSpan::hours(12));
        let overridden = base.clone().with_overrides(
            [("GEM".to_string(), TimeSpan::weeks(1))]
                .into_iter()
                .collect(),
        );
        let out = generate_datasets(
            &events,
            &config,
            &["dos".to_string()],
            &[base.clone(), overridden.clone()],
            gt_start,
            gt_end,
        )
        .unwrap();
        let a = &out[&("dos".to_string(), base)];
        let b = &out[&("dos".to_string(), overridden)];
        let gem = config.names().iter().position(|n| n == "GEM").unwrap();
        let mut gem_changed = false;
        for (ra, rb) in a.rows.iter().zip(b.rows.iter()) {
            for (i, (va, vb)) in ra.features.iter().zip(rb.features.iter()).enumerate() {
                if i == gem {
                    gem_changed |= va.to_bits() != vb.to_bits();
                } else {
                    assert_eq!(va.to_bits(), vb.to_bits(), "column {i} drifted");
                }
            }
            assert_eq!(ra.label, rb.label);
        }
        assert!(gem_changed, "override had no effect on the GEM column");
    }

    #[test]
    fn future_events_leave_past_rows_bit_identical() {
        let gt_start = at("2016-04-01T00:00:00Z");
        let gt_end = at("2016-04-08T00:00:00Z");
        let events = history_stream(at("2016-03-01T00:00:00Z"), gt_end);
        let config = SignalConfig::default();
        let pair = GranularityPair::new(TimeSpan::days(3), TimeSpan::hours(12));
        let key = ("dos".to_string(), pair.clone());
        let base = generate_datasets(
            &events,
            &config,
            &["dos".to_string()],
            std::slice::from_ref(&pair),
            gt_start,
            gt_end,
        )
        .unwrap();

        // bolt a burst of extra activity onto the end of the stream
        let mut extended = events.clone();
        for h in 0..40 {
            extended.push(mention(gt_end + Duration::hours(1 + h), "twitter-cyber"));
            extended.push(gdelt(gt_end + Duration::hours(2 + h), -60.0, 50, 20));
        }
        let extended = sort_events(extended);
        let after = generate_datasets(
            &extended,
            &config,
            &["dos".to_string()],
            std::slice::from_ref(&pair),
            gt_start,
            gt_end,
        )
        .unwrap();

        let a = &base[&key];
        let b = &after[&key];
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.rows.iter().zip(b.rows.iter()) {
            assert_eq!(ra.label, rb.label);
            for (va, vb) in ra.features.iter().zip(rb.features.iter()) {
                assert_eq!(va.to_bits(), vb.to_bits());
            }
        }
    }
}
