//! Calendar days as integer offsets from the Unix epoch.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const EPOCH_CE_DAYS: i32 = 719_163;

/// A calendar day, stored as the number of days since 1970-01-01.
///
/// Serializes as an ISO-8601 date string (`YYYY-MM-DD`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Day(pub i32);

impl Day {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Day> {
        NaiveDate::from_ymd_opt(year, month, day).map(Day::from)
    }

    pub fn to_naive(self) -> NaiveDate {
        NaiveDate::from_num_days_from_ce_opt(self.0 + EPOCH_CE_DAYS)
            .expect("day index within chrono's supported range")
    }

    /// Day of week, Monday = 0 through Sunday = 6.
    pub fn weekday(self) -> usize {
        // 1970-01-01 was a Thursday (index 3).
        (self.0 + 3).rem_euclid(7) as usize
    }

    /// Ordinal day of the year, 1..=366.
    pub fn day_of_year(self) -> u16 {
        self.to_naive().ordinal() as u16
    }

    pub fn offset(self, days: i32) -> Day {
        Day(self.0 + days)
    }

    /// Signed number of days from `earlier` to `self`.
    pub fn since(self, earlier: Day) -> i32 {
        self.0 - earlier.0
    }
}

impl From<NaiveDate> for Day {
    fn from(d: NaiveDate) -> Self {
        Day(d.num_days_from_ce() - EPOCH_CE_DAYS)
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_naive().format("%Y-%m-%d"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid date '{0}', expected YYYY-MM-DD")]
pub struct ParseDayError(pub String);

impl FromStr for Day {
    type Err = ParseDayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .map(Day::from)
            .map_err(|_| ParseDayError(s.to_string()))
    }
}

impl Serialize for Day {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Day {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Weekday names, indexed like [`Day::weekday`].
pub const WEEKDAY_NAMES: [&str; 7] = [
    "Monday",
    "Tuesday",
    "Wednesday",
    "Thursday",
    "Friday",
    "Saturday",
    "Sunday",
];

/// A contiguous, non-empty run of days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRange {
    pub start: Day,
    pub len: usize,
}

impl DayRange {
    pub fn new(start: Day, len: usize) -> Self {
        DayRange { start, len }
    }

    pub fn between_inclusive(first: Day, last: Day) -> Self {
        DayRange {
            start: first,
            len: (last.since(first) + 1).max(0) as usize,
        }
    }

    pub fn end(&self) -> Day {
        self.start.offset(self.len as i32 - 1)
    }

    pub fn contains(&self, day: Day) -> bool {
        self.len > 0 && day >= self.start && day <= self.end()
    }

    pub fn iter(&self) -> impl Iterator<Item = Day> + '_ {
        (0..self.len as i32).map(move |i| self.start.offset(i))
    }

    pub fn index_of(&self, day: Day) -> Option<usize> {
        self.contains(day).then(|| day.since(self.start) as usize)
    }
}
