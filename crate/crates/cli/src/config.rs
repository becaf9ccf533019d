//! Declarative run configuration: one TOML file, every key overridable
//! through `AUGUR_`-prefixed environment variables (`AUGUR_CV__FOLDS=5`
//! sets `cv.folds`; nesting uses double underscores).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Deserialize;

use augur_core::bayes::StructureStrategy;
use augur_core::dataset::BinStrategy;
use augur_core::eval::{
    ClassifierConfig, CompareMethod, CvPlan, FilterKind, FilterSpec, SweepConfig,
};
use augur_core::span::TimeSpan;
use augur_core::timeline::{
    AggregationMode, ColumnMap, EventKind, GranularityPair, Separator, SignalConfig, SignalDef,
    SignalKind,
};
use augur_core::{Error, Result};

pub const ENV_PREFIX: &str = "AUGUR_";

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub ingest: IngestSection,
    pub grid: GridSection,
    pub signals: SignalsSection,
    pub classifier: ClassifierSection,
    pub cv: CvSection,
    pub filters: FiltersSection,
    pub compare: CompareSection,
    pub report: ReportSection,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub events: Option<PathBuf>,
    pub mapping: Option<MappingSection>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MappingSection {
    pub separator: String,
    pub has_header: bool,
    pub timestamp: usize,
    pub stream_id: Option<usize>,
    pub stream_id_const: Option<String>,
    pub kind: Option<usize>,
    pub kind_const: Option<String>,
    pub value: Option<usize>,
    pub tone: Option<usize>,
    pub mentions: Option<usize>,
    pub articles: Option<usize>,
    pub attack_type: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub attack_types: Vec<String>,
    pub t_x: Vec<String>,
    pub t_g: Vec<String>,
    pub gt_start: String,
    pub gt_end: String,
    pub per_signal_tx: BTreeMap<String, String>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            attack_types: ["malware", "defacement", "dos", "meu"]
                .map(String::from)
                .to_vec(),
            t_x: ["3d", "1w", "1m", "3m", "6m"].map(String::from).to_vec(),
            t_g: ["6h", "12h", "24h", "48h"].map(String::from).to_vec(),
            gt_start: "2016-04-01T00:00:00Z".into(),
            gt_end: "2016-10-30T00:00:00Z".into(),
            per_signal_tx: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SignalsSection {
    pub mode: Option<String>,
    pub defs: Vec<SignalDefSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalDefSection {
    pub name: String,
    pub kind: String,
    pub stream: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub structure: String,
    pub max_parents: usize,
    pub alpha: f64,
    pub discretizer: String,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        ClassifierSection {
            structure: "naive".into(),
            max_parents: 2,
            alpha: 0.5,
            discretizer: "median".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub folds: usize,
    pub repetitions: usize,
    pub stratified: bool,
}

impl Default for CvSection {
    fn default() -> Self {
        CvSection {
            folds: 10,
            repetitions: 10,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiltersSection {
    pub enabled: Vec<String>,
    pub smote_percent: Option<f64>,
    pub smote_k: usize,
    pub spread_ratio: f64,
    pub smote_pp_p: f64,
    pub smote_pp_k2: usize,
    pub kmeans_max_iter: usize,
}

impl Default for FiltersSection {
    fn default() -> Self {
        FiltersSection {
            enabled: ["none", "smote", "spread", "smote_pp"]
                .map(String::from)
                .to_vec(),
            smote_percent: None,
            smote_k: 5,
            spread_ratio: 1.0,
            smote_pp_p: 20.0,
            smote_pp_k2: 5,
            kmeans_max_iter: 20,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub method: String,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            method: "corrected".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub variable_tx: bool,
    pub cfs_repetitions: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            variable_tx: false,
            cfs_repetitions: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub start: String,
    pub end: String,
    pub streams: BTreeMap<String, StreamSection>,
    pub attacks: BTreeMap<String, AttackSection>,
}

impl Default for SynthSection {
    fn default() -> Self {
        let mention = |rate: f64| StreamSection {
            kind: "mention".into(),
            rate_per_day: rate,
            tone_mean: 0.0,
            tone_std: 0.0,
            mentions_mean: 0.0,
            articles_mean: 0.0,
        };
        let mut streams = BTreeMap::new();
        streams.insert("twitter-cyber".into(), mention(40.0));
        streams.insert("twitter-entity".into(), mention(25.0));
        streams.insert(
            "gdelt-events".into(),
            StreamSection {
                kind: "event".into(),
                rate_per_day: 60.0,
                tone_mean: -5.0,
                tone_std: 30.0,
                mentions_mean: 8.0,
                articles_mean: 3.0,
            },
        );

        // base rates tuned so the 6h positive densities land near the
        // 36 / 15 / 2 / 10 percent shape of the reference scenario
        let attack = |rate: f64, lifts: &[&str], strength: f64| AttackSection {
            rate_per_day: rate,
            lift_signals: lifts.iter().map(|s| s.to_string()).collect(),
            lead: "1m".into(),
            strength,
        };
        let mut attacks = BTreeMap::new();
        attacks.insert("malware".into(), attack(1.786, &["TEM", "GEM", "GEA"], 1.0));
        attacks.insert(
            "defacement".into(),
            attack(0.650, &["TCM", "TEM", "GEM", "GEA"], 2.0),
        );
        attacks.insert("dos".into(), attack(0.081, &["GEM", "GET"], 15.0));
        attacks.insert("meu".into(), attack(0.421, &["GEM", "GEA"], 3.0));

        SynthSection {
            // two weeks of slack before the deepest 6m lookback window
            start: "2015-09-15T00:00:00Z".into(),
            end: "2016-11-01T00:00:00Z".into(),
            streams,
            attacks,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamSection {
    pub kind: String,
    pub rate_per_day: f64,
    pub tone_mean: f64,
    pub tone_std: f64,
    pub mentions_mean: f64,
    pub articles_mean: f64,
}

impl Default for StreamSection {
    fn default() -> Self {
        StreamSection {
            kind: "mention".into(),
            rate_per_day: 10.0,
            tone_mean: 0.0,
            tone_std: 0.0,
            mentions_mean: 0.0,
            articles_mean: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub rate_per_day: f64,
    pub lift_signals: Vec<String>,
    pub lead: String,
    pub strength: f64,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            rate_per_day: 0.5,
            lift_signals: Vec::new(),
            lead: "1m".into(),
            strength: 0.0,
        }
    }
}

fn parse_env_value(raw: &str) -> toml::Value {
    raw.parse::<toml::Value>()
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()))
}

/// Set `value` at the `__`-separated path inside a TOML table, creating
/// intermediate tables as needed.
fn set_path(root: &mut toml::Value, path: &[&str], value: toml::Value) {
    let mut cursor = root;
    for (i, key) in path.iter().enumerate() {
        let table = match cursor.as_table_mut() {
            Some(t) => t,
            None => return,
        };
        if i + 1 == path.len() {
            table.insert(key.to_string(), value);
            return;
        }
        cursor = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
}

impl RunConfig {
    /// Load the config file (or defaults when absent) and apply `AUGUR_`
    /// environment overrides.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let mut value: toml::Value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::Input(format!("cannot read config {}: {e}", p.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| Error::Input(format!("bad config {}: {e}", p.display())))?
            }
            None => toml::Value::Table(Default::default()),
        };

        let mut overrides: Vec<(String, String)> = std::env::vars()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        overrides.sort();
        for (key, raw) in overrides {
            let path_str = key[ENV_PREFIX.len()..].to_ascii_lowercase();
            let segments: Vec<&str> = path_str.split("__").collect();
            set_path(&mut value, &segments, parse_env_value(&raw));
        }

        value
            .try_into()
            .map_err(|e| Error::Input(format!("bad configuration: {e}")))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn events_path(&self) -> PathBuf {
        self.ingest
            .events
            .clone()
            .unwrap_or_else(|| self.out_dir().join("events.csv"))
    }

    pub fn signal_config(&self) -> Result<SignalConfig> {
        let mode = match self.signals.mode.as_deref() {
            None | Some("per_day") => AggregationMode::PerDay,
            Some("raw_sum") => AggregationMode::RawSum,
            Some(other) => {
                return Err(Error::Config(format!(
                    "unknown aggregation mode {other:?} (per_day or raw_sum)"
                )))
            }
        };
        if self.signals.defs.is_empty() {
            return Ok(SignalConfig {
                mode,
                ..SignalConfig::default()
            });
        }
        let defs = self
            .signals
            .defs
            .iter()
            .map(|d| {
                let kind = SignalKind::parse(&d.kind).ok_or_else(|| {
                    Error::Config(format!("unknown signal kind {:?} for {}", d.kind, d.name))
                })?;
                Ok(SignalDef {
                    name: d.name.clone(),
                    kind,
                    stream: d.stream.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SignalConfig::new(defs, mode))
    }

    pub fn grid(&self) -> Result<Vec<GranularityPair>> {
        let mut overrides = BTreeMap::new();
        for (signal, span) in &self.grid.per_signal_tx {
            overrides.insert(signal.clone(), span.parse::<TimeSpan>()?);
        }
        let mut pairs = Vec::new();
        for tx in &self.grid.t_x {
            let t_x: TimeSpan = tx.parse()?;
            for tg in &self.grid.t_g {
                let t_g: TimeSpan = tg.parse()?;
                pairs.push(GranularityPair::new(t_x, t_g).with_overrides(overrides.clone()));
            }
        }
        if pairs.is_empty() {
            return Err(Error::Config("grid has no (t_x, t_g) pairs".into()));
        }
        Ok(pairs)
    }

    pub fn gt_span(&self) -> Result<(DateTime<Utc>, DateTime<Utc>)> {
        Ok((
            parse_instant("grid.gt_start", &self.grid.gt_start)?,
            parse_instant("grid.gt_end", &self.grid.gt_end)?,
        ))
    }

    pub fn classifier(&self) -> Result<ClassifierConfig> {
        let structure = match self.classifier.structure.as_str() {
            "naive" => StructureStrategy::Naive,
            "k2" => StructureStrategy::K2HillClimb,
            other => {
                return Err(Error::Config(format!(
                    "unknown structure strategy {other:?} (naive or k2)"
                )))
            }
        };
        let bin_strategy = match self.classifier.discretizer.as_str() {
            "median" => BinStrategy::Median,
            "entropy" => BinStrategy::Entropy,
            other => {
                return Err(Error::Config(format!(
                    "unknown discretizer {other:?} (median or entropy)"
                )))
            }
        };
        Ok(ClassifierConfig {
            structure,
            max_parents: self.classifier.max_parents,
            alpha: self.classifier.alpha,
            bin_strategy,
        })
    }

    pub fn cv_plan(&self) -> CvPlan {
        CvPlan {
            folds: self.cv.folds,
            repetitions: self.cv.repetitions,
            seed: self.seed,
            stratified: self.cv.stratified,
        }
    }

    pub fn filter_spec(&self, name: &str) -> Result<FilterSpec> {
        let f = &self.filters;
        let kind = match name {
            "none" => FilterKind::None,
            "smote" => FilterKind::Smote {
                percent: f.smote_percent,
                k: f.smote_k,
            },
            "spread" => FilterKind::SpreadSubsample {
                ratio: f.spread_ratio,
            },
            "smote_pp" => FilterKind::SmotePP {
                p: f.smote_pp_p,
                k2: f.smote_pp_k2,
                kmeans_max_iter: f.kmeans_max_iter,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown filter {other:?} (none, smote, spread, or smote_pp)"
                )))
            }
        };
        Ok(FilterSpec {
            name: name.to_string(),
            kind,
        })
    }

    pub fn filters(&self) -> Result<Vec<FilterSpec>> {
        self.filters
            .enabled
            .iter()
            .map(|name| self.filter_spec(name))
            .collect()
    }

    pub fn compare_method(&self) -> Result<CompareMethod> {
        match self.compare.method.as_str() {
            "corrected" => Ok(CompareMethod::CorrectedResampledT {
                test_train_ratio: self.cv_plan().test_train_ratio(),
            }),
            "paired" => Ok(CompareMethod::PairedT),
            other => Err(Error::Config(format!(
                "unknown comparison method {other:?} (corrected or paired)"
            ))),
        }
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        Ok(SweepConfig {
            filters: self.filters()?,
            classifier: self.classifier()?,
            plan: self.cv_plan(),
            compare_method: self.compare_method()?,
            variable_tx: self.report.variable_tx,
            cfs_repetitions: self.report.cfs_repetitions,
        })
    }

    pub fn column_map(&self) -> Result<Option<ColumnMap>> {
        let Some(m) = &self.ingest.mapping else {
            return Ok(None);
        };
        let separator = match m.separator.as_str() {
            "" | "comma" => Separator::Comma,
            "tab" => Separator::Tab,
            other => {
                return Err(Error::Config(format!(
                    "unknown separator {other:?} (comma or tab)"
                )))
            }
        };
        let kind_const = m
            .kind_const
            .as_deref()
            .map(|k| {
                EventKind::parse(k)
                    .ok_or_else(|| Error::Config(format!("unknown record kind {k:?}")))
            })
            .transpose()?;
        Ok(Some(ColumnMap {
            separator,
            has_header: m.has_header,
            timestamp: m.timestamp,
            stream_id: m.stream_id,
            stream_id_const: m.stream_id_const.clone(),
            kind: m.kind,
            kind_const,
            value: m.value,
            tone: m.tone,
            mentions: m.mentions,
            articles: m.articles,
            attack_type: m.attack_type,
        }))
    }
}

impl RunConfig {
    /// Materialize the synthetic-stream spec, deriving its seed from the
    /// run seed.
    pub fn synth_spec(&self) -> Result<crate::synth::SynthSpec> {
        let s = &self.synth;
        let streams = s
            .streams
            .iter()
            .map(|(id, spec)| {
                let kind = EventKind::parse(&spec.kind).ok_or_else(|| {
                    Error::Config(format!("stream {id}: unknown kind {:?}", spec.kind))
                })?;
                Ok(crate::synth::StreamSpec {
                    id: id.clone(),
                    kind,
                    rate_per_day: spec.rate_per_day,
                    tone_mean: spec.tone_mean,
                    tone_std: spec.tone_std,
                    mentions_mean: spec.mentions_mean,
                    articles_mean: spec.articles_mean,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let attacks = s
            .attacks
            .iter()
            .map(|(attack_type, spec)| {
                Ok(crate::synth::AttackSpec {
                    attack_type: attack_type.clone(),
                    rate_per_day: spec.rate_per_day,
                    lift_signals: spec.lift_signals.clone(),
                    lead: spec.lead.parse()?,
                    strength: spec.strength,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(crate::synth::SynthSpec {
            start: parse_instant("synth.start", &s.start)?,
            end: parse_instant("synth.end", &s.end)?,
            seed: augur_core::seed::derive(self.seed, 0x5E),
            streams,
            attacks,
        })
    }
}

pub fn parse_instant(what: &str, raw: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(raw)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Config(format!("{what}: bad RFC 3339 timestamp {raw:?}: {e}")))
}
