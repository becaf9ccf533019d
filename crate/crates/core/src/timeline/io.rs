//! Event stream files.
//!
//! Native format: optional `#sep=comma|tab` directive lines, then a header
//! naming the eight fields, then one record per line. Optional fields are
//! left empty. Third-party exports are adapted with a [`ColumnMap`] that
//! places each field at a caller-supplied column index; nothing about the
//! mapping is hard-coded.

use std::fs;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use super::{EventKind, EventRecord};
use crate::error::{Error, Result};

pub const FIELDS: [&str; 8] = [
    "timestamp",
    "stream_id",
    "kind",
    "value",
    "tone",
    "mentions",
    "articles",
    "attack_type",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Separator {
    #[default]
    Comma,
    Tab,
}

impl Separator {
    fn as_char(self) -> char {
        match self {
            Separator::Comma => ',',
            Separator::Tab => '\t',
        }
    }

    pub fn parse(s: &str) -> Option<Separator> {
        match s {
            "comma" => Some(Separator::Comma),
            "tab" => Some(Separator::Tab),
            _ => None,
        }
    }
}

/// Field-to-column assignment for third-party event exports. Column indices
/// are zero-based. Fields without a column fall back to their constant (for
/// `stream_id`/`kind`) or to absent.
#[derive(Debug, Clone)]
pub struct ColumnMap {
    pub separator: Separator,
    pub has_header: bool,
    pub timestamp: usize,
    pub stream_id: Option<usize>,
    pub stream_id_const: Option<String>,
    pub kind: Option<usize>,
    pub kind_const: Option<EventKind>,
    pub value: Option<usize>,
    pub tone: Option<usize>,
    pub mentions: Option<usize>,
    pub articles: Option<usize>,
    pub attack_type: Option<usize>,
}

impl ColumnMap {
    fn validate(&self) -> Result<()> {
        if self.stream_id.is_none() && self.stream_id_const.is_none() {
            return Err(Error::Config(
                "column mapping needs a stream_id column or constant".into(),
            ));
        }
        if self.kind.is_none() && self.kind_const.is_none() {
            return Err(Error::Config(
                "column mapping needs a kind column or constant".into(),
            ));
        }
        Ok(())
    }
}

fn parse_timestamp(raw: &str) -> std::result::Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(raw)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("bad timestamp {raw:?}: {e}"))
}

fn fmt_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Write events in the native format, comma-separated.
pub fn write_events(events: &[EventRecord], path: &Path) -> Result<()> {
    let mut out = String::from("#sep=comma\n");
    out.push_str(&FIELDS.join(","));
    out.push('\n');
    for e in events {
        out.push_str(&fmt_timestamp(e.timestamp));
        out.push(',');
        out.push_str(&e.stream_id);
        out.push(',');
        out.push_str(e.kind.as_str());
        out.push(',');
        out.push_str(&format!("{}", e.value));
        out.push(',');
        if let Some(tone) = e.tone {
            out.push_str(&format!("{tone}"));
        }
        out.push(',');
        if let Some(m) = e.mentions {
            out.push_str(&format!("{m}"));
        }
        out.push(',');
        if let Some(a) = e.articles {
            out.push_str(&format!("{a}"));
        }
        out.push(',');
        if let Some(t) = &e.attack_type {
            out.push_str(t);
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a native-format event file. Records are returned in file order and
/// validated; callers that need sorted input check ordering themselves.
pub fn read_events(path: &Path) -> Result<Vec<EventRecord>> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: display.clone(),
        line,
        msg,
    };

    let mut sep = Separator::Comma;
    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(_, line)) = lines.peek() {
        let Some(directive) = line.strip_prefix('#') else {
            break;
        };
        if let Some(value) = directive.trim().strip_prefix("sep=") {
            sep = Separator::parse(value).ok_or_else(|| {
                parse_err(
                    lines.peek().unwrap().0 + 1,
                    format!("unknown separator {value:?} (expected comma or tab)"),
                )
            })?;
        }
        lines.next();
    }

    let (header_idx, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header line".into()))?;
    let names: Vec<&str> = header.split(sep.as_char()).collect();
    if names != FIELDS {
        return Err(parse_err(
            header_idx + 1,
            format!("header must name the fields {FIELDS:?}, found {names:?}"),
        ));
    }

    let mut events = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(sep.as_char()).collect();
        if fields.len() != FIELDS.len() {
            return Err(parse_err(
                lineno,
                format!("expected {} fields, found {}", FIELDS.len(), fields.len()),
            ));
        }
        let record = parse_record(&fields, lineno, &parse_err)?;
        events.push(record);
    }
    Ok(events)
}

fn parse_record(
    fields: &[&str],
    lineno: usize,
    parse_err: &dyn Fn(usize, String) -> Error,
) -> Result<EventRecord> {
    let timestamp = parse_timestamp(fields[0]).map_err(|m| parse_err(lineno, m))?;
    let kind = EventKind::parse(fields[2])
        .ok_or_else(|| parse_err(lineno, format!("unknown record kind {:?}", fields[2])))?;
    let value = if fields[3].is_empty() {
        1.0
    } else {
        fields[3]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad value {:?}", fields[3])))?
    };
    let opt_f64 = |raw: &str, name: &str| -> Result<Option<f64>> {
        if raw.is_empty() {
            Ok(None)
        } else {
            raw.parse()
                .map(Some)
                .map_err(|_| parse_err(lineno, format!("bad {name} {raw:?}")))
        }
    };
    let opt_u64 = |raw: &str, name: &str| -> Result<Option<u64>> {
        if raw.is_empty() {
            Ok(None)
        } else {
            raw.parse().map(Some).map_err(|_| {
                parse_err(lineno, format!("bad {name} {raw:?} (non-negative integer)"))
            })
        }
    };
    let record = EventRecord {
        timestamp,
        stream_id: fields[1].to_string(),
        kind,
        value,
        tone: opt_f64(fields[4], "tone")?,
        mentions: opt_u64(fields[5], "mentions")?,
        articles: opt_u64(fields[6], "articles")?,
        attack_type: (!fields[7].is_empty()).then(|| fields[7].to_string()),
    };
    record
        .validate()
        .map_err(|e| parse_err(lineno, e.to_string()))?;
    Ok(record)
}

/// Read an arbitrary delimited export through a user-supplied column map.
pub fn read_events_mapped(path: &Path, map: &ColumnMap) -> Result<Vec<EventRecord>> {
    map.validate()?;
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: display.clone(),
        line,
        msg,
    };

    let mut events = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() || (idx == 0 && map.has_header) {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(map.separator.as_char()).collect();
        let cell = |col: usize, name: &str| -> Result<&str> {
            fields.get(col).copied().ok_or_else(|| {
                parse_err(
                    lineno,
                    format!("{name} column {col} out of range ({} fields)", fields.len()),
                )
            })
        };

        let timestamp =
            parse_timestamp(cell(map.timestamp, "timestamp")?).map_err(|m| parse_err(lineno, m))?;
        let stream_id = match map.stream_id {
            Some(col) => cell(col, "stream_id")?.to_string(),
            None => map.stream_id_const.clone().unwrap(),
        };
        let kind = match map.kind {
            Some(col) => {
                let raw = cell(col, "kind")?;
                EventKind::parse(raw)
                    .ok_or_else(|| parse_err(lineno, format!("unknown record kind {raw:?}")))?
            }
            None => map.kind_const.unwrap(),
        };
        let opt_f64 = |col: Option<usize>, name: &str| -> Result<Option<f64>> {
            match col {
                None => Ok(None),
                Some(c) => {
                    let raw = cell(c, name)?;
                    if raw.is_empty() {
                        Ok(None)
                    } else {
                        raw.parse()
                            .map(Some)
                            .map_err(|_| parse_err(lineno, format!("bad {name} {raw:?}")))
                    }
                }
            }
        };
        let opt_u64 = |col: Option<usize>, name: &str| -> Result<Option<u64>> {
            match col {
                None => Ok(None),
                Some(c) => {
                    let raw = cell(c, name)?;
                    if raw.is_empty() {
                        Ok(None)
                    } else {
                        raw.parse()
                            .map(Some)
                            .map_err(|_| parse_err(lineno, format!("bad {name} {raw:?}")))
                    }
                }
            }
        };

        let value = match map.value {
            Some(c) => {
                let raw = cell(c, "value")?;
                if raw.is_empty() {
                    1.0
                } else {
                    raw.parse()
                        .map_err(|_| parse_err(lineno, format!("bad value {raw:?}")))?
                }
            }
            None => 1.0,
        };
        let attack_type = match map.attack_type {
            Some(c) => {
                let raw = cell(c, "attack_type")?;
                (!raw.is_empty()).then(|| raw.to_string())
            }
            None => None,
        };

        let record = EventRecord {
            timestamp,
            stream_id,
            kind,
            value,
            tone: opt_f64(map.tone, "tone")?,
            mentions: opt_u64(map.mentions, "mentions")?,
            articles: opt_u64(map.articles, "articles")?,
            attack_type,
        };
        record
            .validate()
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        events.push(record);
    }
    Ok(events)
}
