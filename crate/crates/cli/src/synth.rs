//! Seeded synthetic event streams with planted signal-to-attack
//! dependencies, standing in for proprietary ground truth at desk scale.
//!
//! Attacks of each type arrive as a Poisson process. When an attack type
//! carries a planted dependency, every scheduled attack elevates its
//! designated signals during the lead window before it: `strength` days'
//! worth of the stream's base volume is added, with intensity accelerating
//! toward the attack time (chatter builds as the attack nears), shaped so
//! that exactly the designated signal moves (negative-tone records with
//! only mentions for a mention-sum signal, only articles for an article-sum
//! signal, very negative tones for the tone mean). Overlapping campaigns
//! stack. With strength 0 the schedule still exists but signals stay
//! independent of the labels.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use augur_core::seed;
use augur_core::span::TimeSpan;
use augur_core::timeline::{EventKind, EventRecord, SignalConfig, SignalKind};
use augur_core::{Error, Result};

const SALT_ATTACKS: u64 = 0xA7;
const SALT_STREAMS: u64 = 0xB8;
const SALT_LIFTS: u64 = 0xC9;

#[derive(Debug, Clone)]
pub struct StreamSpec {
    pub id: String,
    pub kind: EventKind,
    pub rate_per_day: f64,
    pub tone_mean: f64,
    pub tone_std: f64,
    pub mentions_mean: f64,
    pub articles_mean: f64,
}

#[derive(Debug, Clone)]
pub struct AttackSpec {
    pub attack_type: String,
    pub rate_per_day: f64,
    pub lift_signals: Vec<String>,
    pub lead: TimeSpan,
    pub strength: f64,
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub seed: u64,
    pub streams: Vec<StreamSpec>,
    pub attacks: Vec<AttackSpec>,
}

pub const GROUND_TRUTH_STREAM: &str = "ground-truth";

impl SynthSpec {
    fn validate(&self, signals: &SignalConfig) -> Result<()> {
        if self.start >= self.end {
            return Err(Error::Input(format!(
                "synthetic span is empty: {} .. {}",
                self.start, self.end
            )));
        }
        for s in &self.streams {
            if !(s.rate_per_day.is_finite() && s.rate_per_day >= 0.0) {
                return Err(Error::Input(format!(
                    "stream {}: rate {} is not a non-negative real",
                    s.id, s.rate_per_day
                )));
            }
            if !(s.tone_std.is_finite() && s.tone_std >= 0.0)
                || !s.tone_mean.is_finite()
                || !(-100.0..=100.0).contains(&s.tone_mean)
            {
                return Err(Error::Input(format!(
                    "stream {}: bad tone parameters",
                    s.id
                )));
            }
            let bad_mean = |m: f64| !m.is_finite() || m < 0.0;
            if bad_mean(s.mentions_mean) || bad_mean(s.articles_mean) {
                return Err(Error::Input(format!(
                    "stream {}: negative count means",
                    s.id
                )));
            }
        }
        for a in &self.attacks {
            if !(a.rate_per_day.is_finite() && a.rate_per_day >= 0.0) {
                return Err(Error::Input(format!(
                    "attack {}: rate {} is not a non-negative real",
                    a.attack_type, a.rate_per_day
                )));
            }
            if !(a.strength.is_finite() && a.strength >= 0.0) {
                return Err(Error::Input(format!(
                    "attack {}: strength must be non-negative",
                    a.attack_type
                )));
            }
            for name in &a.lift_signals {
                signals.def(name)?;
                let def = signals.def(name)?;
                if !self.streams.iter().any(|s| s.id == def.stream) {
                    return Err(Error::Input(format!(
                        "attack {}: lift signal {} needs stream {} which is not configured",
                        a.attack_type, name, def.stream
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Poisson-process arrival times in `(from, to)` at second resolution.
fn arrival_times(
    rng: &mut ChaCha8Rng,
    rate_per_day: f64,
    from: DateTime<Utc>,
    to: DateTime<Utc>,
) -> Vec<DateTime<Utc>> {
    let mut times = Vec::new();
    if rate_per_day <= 0.0 {
        return times;
    }
    let mean_gap_secs = 86_400.0 / rate_per_day;
    let mut t = from;
    loop {
        let u: f64 = rng.gen::<f64>().max(1e-12);
        let gap = (-u.ln() * mean_gap_secs).ceil() as i64;
        t += Duration::seconds(gap.max(1));
        if t >= to {
            return times;
        }
        times.push(truncate_to_second(t));
    }
}

fn truncate_to_second(t: DateTime<Utc>) -> DateTime<Utc> {
    Utc.timestamp_opt(t.timestamp(), 0).unwrap()
}

fn sample_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |d| d.sample(rng) as u64)
}

fn sample_tone(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    if std <= 0.0 {
        return mean.clamp(-100.0, 100.0);
    }
    let normal = Normal::new(mean, std).expect("finite tone parameters");
    normal.sample(rng).clamp(-100.0, 100.0)
}

fn base_record(stream: &StreamSpec, t: DateTime<Utc>, rng: &mut ChaCha8Rng) -> EventRecord {
    match stream.kind {
        EventKind::Event => EventRecord {
            timestamp: t,
            stream_id: stream.id.clone(),
            kind: EventKind::Event,
            value: 1.0,
            tone: Some(sample_tone(rng, stream.tone_mean, stream.tone_std)),
            mentions: Some(sample_count(rng, stream.mentions_mean)),
            articles: Some(sample_count(rng, stream.articles_mean)),
            attack_type: None,
        },
        _ => EventRecord {
            timestamp: t,
            stream_id: stream.id.clone(),
            kind: EventKind::Mention,
            value: 1.0,
            tone: None,
            mentions: None,
            articles: None,
            attack_type: None,
        },
    }
}

/// A lifted record moves exactly its target signal.
fn lift_record(
    kind: SignalKind,
    stream: &StreamSpec,
    t: DateTime<Utc>,
    rng: &mut ChaCha8Rng,
) -> EventRecord {
    let negative_tone = |rng: &mut ChaCha8Rng, mean: f64| -> f64 {
        let normal = Normal::new(mean, 10.0).expect("finite tone parameters");
        normal.sample(rng).clamp(-100.0, -1.0)
    };
    match kind {
        SignalKind::MentionCount => EventRecord {
            timestamp: t,
            stream_id: stream.id.clone(),
            kind: EventKind::Mention,
            value: 1.0,
            tone: None,
            mentions: None,
            articles: None,
            attack_type: None,
        },
        SignalKind::NegativeEventMentions => EventRecord {
            timestamp: t,
            stream_id: stream.id.clone(),
            kind: EventKind::Event,
            value: 1.0,
            tone: Some(negative_tone(rng, -30.0)),
            mentions: Some(1 + sample_count(rng, stream.mentions_mean)),
            articles: Some(0),
            attack_type: None,
        },
        SignalKind::NegativeEventArticles => EventRecord {
            timestamp: t,
            stream_id: stream.id.clone(),
            kind: EventKind::Event,
            value: 1.0,
            tone: Some(negative_tone(rng, -30.0)),
            mentions: Some(0),
            articles: Some(1 + sample_count(rng, stream.articles_mean)),
            attack_type: None,
        },
        SignalKind::NegativeEventTone => EventRecord {
            timestamp: t,
            stream_id: stream.id.clone(),
            kind: EventKind::Event,
            value: 1.0,
            tone: Some(negative_tone(rng, -70.0)),
            mentions: Some(0),
            articles: Some(0),
            attack_type: None,
        },
    }
}

fn record_sort_key(e: &EventRecord) -> impl Ord {
    (
        e.timestamp,
        e.stream_id.clone(),
        e.kind,
        e.attack_type.clone().unwrap_or_default(),
        e.tone.unwrap_or(0.0).to_bits(),
        e.mentions.unwrap_or(0),
        e.articles.unwrap_or(0),
    )
}

/// Generate the full event stream: per-type attack schedules, base stream
/// activity, and lead-window elevations. Fully determined by the spec seed.
pub fn generate(spec: &SynthSpec, signals: &SignalConfig) -> Result<Vec<EventRecord>> {
    spec.validate(signals)?;
    let mut events: Vec<EventRecord> = Vec::new();

    // attack schedules, kept for the elevation pass
    let mut schedules: Vec<Vec<DateTime<Utc>>> = Vec::new();
    for (idx, attack) in spec.attacks.iter().enumerate() {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed::derive_path(spec.seed, &[SALT_ATTACKS, idx as u64]));
        let times = arrival_times(&mut rng, attack.rate_per_day, spec.start, spec.end);
        for &t in &times {
            events.push(EventRecord {
                timestamp: t,
                stream_id: GROUND_TRUTH_STREAM.into(),
                kind: EventKind::Attack,
                value: 1.0,
                tone: None,
                mentions: None,
                articles: None,
                attack_type: Some(attack.attack_type.clone()),
            });
        }
        schedules.push(times);
    }

    // base stream activity
    for (idx, stream) in spec.streams.iter().enumerate() {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed::derive_path(spec.seed, &[SALT_STREAMS, idx as u64]));
        for t in arrival_times(&mut rng, stream.rate_per_day, spec.start, spec.end) {
            events.push(base_record(stream, t, &mut rng));
        }
    }

    // planted elevations in the lead window before each scheduled attack
    for (attack_idx, attack) in spec.attacks.iter().enumerate() {
        if attack.strength <= 0.0 || attack.lift_signals.is_empty() {
            continue;
        }
        for (signal_idx, name) in attack.lift_signals.iter().enumerate() {
            let def = signals.def(name)?;
            let stream = spec
                .streams
                .iter()
                .find(|s| s.id == def.stream)
                .expect("validated above");
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_path(
                spec.seed,
                &[SALT_LIFTS, attack_idx as u64, signal_idx as u64],
            ));
            for &attack_time in &schedules[attack_idx] {
                let window_start = attack.lead.sub_from(attack_time).max(spec.start);
                let window_secs = (attack_time - window_start).num_seconds();
                if window_secs <= 0 {
                    continue;
                }
                // strength days' worth of base volume per campaign, with a
                // cubic intensity ramp peaking at the attack time
                let budget = attack.strength * stream.rate_per_day;
                let count = sample_count(&mut rng, budget);
                for _ in 0..count {
                    let phase = rng.gen::<f64>().cbrt();
                    let offset = (phase * window_secs as f64) as i64;
                    let t = truncate_to_second(window_start + Duration::seconds(offset));
                    if t >= spec.start && t < spec.end {
                        events.push(lift_record(def.kind, stream, t, &mut rng));
                    }
                }
            }
        }
    }

    events.sort_by_key(record_sort_key);
    Ok(events)
}
