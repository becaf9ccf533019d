//! Time spans for signal lookback (`t_x`) and ground-truth horizon (`t_g`).
//!
//! Spans keep the unit they were written with, so `24h` and `1d` are
//! distinct values that cover the same amount of time. Month spans are
//! calendar-aware: subtracting one month from March 31 lands on the last
//! day of February, not 30 days earlier.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, Months, Utc};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpanUnit {
    Seconds,
    Hours,
    Days,
    Weeks,
    Months,
}

impl SpanUnit {
    fn suffix(self) -> &'static str {
        match self {
            SpanUnit::Seconds => "s",
            SpanUnit::Hours => "h",
            SpanUnit::Days => "d",
            SpanUnit::Weeks => "w",
            SpanUnit::Months => "m",
        }
    }

    fn rank(self) -> u8 {
        match self {
            SpanUnit::Seconds => 0,
            SpanUnit::Hours => 1,
            SpanUnit::Days => 2,
            SpanUnit::Weeks => 3,
            SpanUnit::Months => 4,
        }
    }
}

/// A positive duration with a remembered unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeSpan {
    count: u32,
    unit: SpanUnit,
}

/// Average Gregorian month in seconds, used only for ordering spans.
const APPROX_MONTH_SECS: i64 = 2_629_746;

impl TimeSpan {
    pub fn new(count: u32, unit: SpanUnit) -> Self {
        debug_assert!(count > 0, "time spans must be positive");
        TimeSpan { count, unit }
    }

    pub fn seconds(n: u32) -> Self {
        Self::new(n, SpanUnit::Seconds)
    }

    pub fn hours(n: u32) -> Self {
        Self::new(n, SpanUnit::Hours)
    }

    pub fn days(n: u32) -> Self {
        Self::new(n, SpanUnit::Days)
    }

    pub fn weeks(n: u32) -> Self {
        Self::new(n, SpanUnit::Weeks)
    }

    pub fn months(n: u32) -> Self {
        Self::new(n, SpanUnit::Months)
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn unit(&self) -> SpanUnit {
        self.unit
    }

    /// Exact length in seconds for fixed-length units; `None` for months.
    pub fn fixed_seconds(&self) -> Option<i64> {
        let per = match self.unit {
            SpanUnit::Seconds => 1,
            SpanUnit::Hours => 3_600,
            SpanUnit::Days => 86_400,
            SpanUnit::Weeks => 604_800,
            SpanUnit::Months => return None,
        };
        Some(per * self.count as i64)
    }

    /// Approximate length in seconds; months use the Gregorian average.
    /// Used for ordering spans, never for window arithmetic.
    pub fn approx_seconds(&self) -> i64 {
        self.fixed_seconds()
            .unwrap_or(APPROX_MONTH_SECS * self.count as i64)
    }

    pub fn sub_from(&self, t: DateTime<Utc>) -> DateTime<Utc> {
        match self.unit {
            SpanUnit::Months => t
                .checked_sub_months(Months::new(self.count))
                .expect("month subtraction out of range"),
            _ => t - Duration::seconds(self.fixed_seconds().unwrap()),
        }
    }

    pub fn add_to(&self, t: DateTime<Utc>) -> DateTime<Utc> {
        match self.unit {
            SpanUnit::Months => t
                .checked_add_months(Months::new(self.count))
                .expect("month addition out of range"),
            _ => t + Duration::seconds(self.fixed_seconds().unwrap()),
        }
    }
}

impl PartialOrd for TimeSpan {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TimeSpan {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.approx_seconds(), self.unit.rank(), self.count).cmp(&(
            other.approx_seconds(),
            other.unit.rank(),
            other.count,
        ))
    }
}

impl fmt::Display for TimeSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.count, self.unit.suffix())
    }
}

impl FromStr for TimeSpan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let digits: String = s.chars().take_while(|c| c.is_ascii_digit()).collect();
        let suffix = &s[digits.len()..];
        let count: u32 = digits
            .parse()
            .map_err(|_| Error::Config(format!("invalid time span: {s:?}")))?;
        if count == 0 {
            return Err(Error::Config(format!("time span must be positive: {s:?}")));
        }
        let unit = match suffix {
            "s" => SpanUnit::Seconds,
            "h" | "hr" => SpanUnit::Hours,
            "d" => SpanUnit::Days,
            "w" => SpanUnit::Weeks,
            "m" => SpanUnit::Months,
            _ => {
                return Err(Error::Config(format!(
                    "invalid time span unit {suffix:?} in {s:?} (expected s, h, d, w, or m)"
                )))
            }
        };
        Ok(TimeSpan::new(count, unit))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in [
            "3d", "1w", "1m", "3m", "6m", "6h", "12h", "24h", "48h", "30s",
        ] {
            let span: TimeSpan = s.parse().unwrap();
            assert_eq!(span.to_string(), s);
        }
        assert_eq!("6hr".parse::<TimeSpan>().unwrap(), TimeSpan::hours(6));
    }

    #[test]
    fn rejects_bad_spans() {
        assert!("0d".parse::<TimeSpan>().is_err());
        assert!("3x".parse::<TimeSpan>().is_err());
        assert!("d".parse::<TimeSpan>().is_err());
        assert!("".parse::<TimeSpan>().is_err());
    }

    #[test]
    fn calendar_month_subtraction_clamps() {
        let t = at("2016-03-31T12:00:00Z");
        assert_eq!(TimeSpan::months(1).sub_from(t), at("2016-02-29T12:00:00Z"));
        let t = at("2016-07-31T00:00:00Z");
        assert_eq!(TimeSpan::months(1).sub_from(t), at("2016-06-30T00:00:00Z"));
    }

    #[test]
    fn fixed_units_are_exact() {
        let t = at("2016-04-08T00:00:00Z");
        assert_eq!(TimeSpan::weeks(1).sub_from(t), at("2016-04-01T00:00:00Z"));
        assert_eq!(TimeSpan::hours(48).sub_from(t), at("2016-04-06T00:00:00Z"));
        assert_eq!(TimeSpan::days(3).fixed_seconds(), Some(259_200));
        assert_eq!(TimeSpan::months(1).fixed_seconds(), None);
    }

    #[test]
    fn ordering_follows_length() {
        let mut spans: Vec<TimeSpan> = ["6m", "3d", "1m", "48h", "1w", "6h"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        spans.sort();
        let shown: Vec<String> = spans.iter().map(|s| s.to_string()).collect();
        assert_eq!(shown, ["6h", "48h", "3d", "1w", "1m", "6m"]);
    }
}
