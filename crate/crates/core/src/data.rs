//! Sales and event-calendar ingestion.
//!
//! Files are long-format CSV (`product_id,date,sales` and
//! `date,event_1,event_2`). Series must be gap-free daily data; missing days
//! are rejected rather than imputed.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::date::{Day, DayRange};

pub mod m5;

/// Default forecast horizon in days.
pub const DEFAULT_HORIZON_DAYS: usize = 14;

/// Most events the calendar can hold for a single date.
pub const MAX_EVENTS_PER_DAY: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("product '{product}': {message} at {date}")]
    Validation {
        product: String,
        date: Day,
        message: String,
    },
    #[error("calendar {date}: {count} events, at most {MAX_EVENTS_PER_DAY} allowed")]
    TooManyEvents { date: Day, count: usize },
    #[error("series '{product}' has {len} points, need more than {horizon} for a {horizon}-day horizon")]
    TooShort {
        product: String,
        len: usize,
        horizon: usize,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Daily sales observations for one product on consecutive days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub product_id: String,
    pub start: Day,
    pub sales: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series, checking that all values are finite and non-negative.
    pub fn new(product_id: impl Into<String>, start: Day, sales: Vec<f64>) -> Result<Self, DataError> {
        let product_id = product_id.into();
        if let Some((i, _)) = sales
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(DataError::Validation {
                product: product_id,
                date: start.offset(i as i32),
                message: format!("sales must be a non-negative number, got {}", sales[i]),
            });
        }
        Ok(TimeSeries {
            product_id,
            start,
            sales,
        })
    }

    pub fn len(&self) -> usize {
        self.sales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sales.is_empty()
    }

    pub fn range(&self) -> DayRange {
        DayRange::new(self.start, self.sales.len())
    }

    pub fn end(&self) -> Day {
        self.range().end()
    }

    pub fn days(&self) -> impl Iterator<Item = Day> + '_ {
        (0..self.sales.len() as i32).map(move |i| self.start.offset(i))
    }

    pub fn points(&self) -> impl Iterator<Item = (Day, f64)> + '_ {
        self.days().zip(self.sales.iter().copied())
    }

    pub fn last(&self) -> Option<f64> {
        self.sales.last().copied()
    }
}

/// Named events per date, at most [`MAX_EVENTS_PER_DAY`] per date.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventCalendar {
    entries: BTreeMap<Day, Vec<String>>,
}

impl EventCalendar {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces the events on `date`. An empty list removes the date.
    pub fn set(&mut self, date: Day, events: Vec<String>) -> Result<(), DataError> {
        if events.len() > MAX_EVENTS_PER_DAY {
            return Err(DataError::TooManyEvents {
                date,
                count: events.len(),
            });
        }
        if events.is_empty() {
            self.entries.remove(&date);
        } else {
            self.entries.insert(date, events);
        }
        Ok(())
    }

    pub fn events_on(&self, date: Day) -> &[String] {
        self.entries.get(&date).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Day, &[String])> {
        self.entries.iter().map(|(d, e)| (*d, e.as_slice()))
    }
}

/// A history to fit on and the held-out actuals of the following horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastTask {
    pub history: TimeSeries,
    pub truth: Vec<f64>,
}

impl ForecastTask {
    pub fn horizon_days(&self) -> usize {
        self.truth.len()
    }

    pub fn horizon(&self) -> DayRange {
        DayRange::new(self.history.end().offset(1), self.truth.len())
    }
}

/// Splits off the last `horizon_days` observations as the held-out truth.
pub fn split_task(series: &TimeSeries, horizon_days: usize) -> Result<ForecastTask, DataError> {
    if horizon_days == 0 || series.len() <= horizon_days {
        return Err(DataError::TooShort {
            product: series.product_id.clone(),
            len: series.len(),
            horizon: horizon_days,
        });
    }
    let cut = series.len() - horizon_days;
    Ok(ForecastTask {
        history: TimeSeries {
            product_id: series.product_id.clone(),
            start: series.start,
            sales: series.sales[..cut].to_vec(),
        },
        truth: series.sales[cut..].to_vec(),
    })
}

#[derive(Debug, Deserialize)]
struct SalesRow {
    product_id: String,
    date: String,
    sales: String,
}

/// Reads long-format sales rows and groups them into date-sorted series.
///
/// Series are returned in order of first appearance in the input.
pub fn read_sales<R: Read>(reader: R) -> Result<Vec<TimeSeries>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<(Day, f64)>> = HashMap::new();

    let headers = rdr.headers()?.clone();
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: SalesRow = record
            .deserialize(Some(&headers))
            .map_err(|e| DataError::Parse {
                line,
                message: e.to_string(),
            })?;
        let date: Day = row.date.parse().map_err(|e: crate::date::ParseDayError| DataError::Parse {
            line,
            message: e.to_string(),
        })?;
        let sales: f64 = row.sales.parse().map_err(|_| DataError::Parse {
            line,
            message: format!("invalid sales value '{}'", row.sales),
        })?;
        if !sales.is_finite() || sales < 0.0 {
            return Err(DataError::Validation {
                product: row.product_id,
                date,
                message: format!("sales must be a non-negative number, got {sales}"),
            });
        }
        let entry = grouped.entry(row.product_id.clone()).or_insert_with(|| {
            order.push(row.product_id.clone());
            Vec::new()
        });
        entry.push((date, sales));
    }

    order
        .into_iter()
        .map(|product| {
            let mut points = grouped.remove(&product).unwrap_or_default();
            points.sort_by_key(|(d, _)| *d);
            assemble_series(product, points)
        })
        .collect()
}

fn assemble_series(product: String, points: Vec<(Day, f64)>) -> Result<TimeSeries, DataError> {
    let start = points[0].0;
    for (i, pair) in points.windows(2).enumerate() {
        let (prev, next) = (pair[0].0, pair[1].0);
        if next == prev {
            return Err(DataError::Validation {
                product,
                date: next,
                message: "duplicate observation".into(),
            });
        }
        if next.since(prev) != 1 {
            return Err(DataError::Validation {
                product,
                date: prev.offset(1),
                message: format!("missing day (gap after row {})", i + 1),
            });
        }
    }
    TimeSeries::new(product, start, points.into_iter().map(|(_, v)| v).collect())
}

pub fn load_sales_csv(path: impl AsRef<Path>) -> Result<Vec<TimeSeries>, DataError> {
    read_sales(File::open(path)?)
}

/// Writes series in the long `product_id,date,sales` layout.
pub fn write_sales<W: Write>(writer: W, series: &[TimeSeries]) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["product_id", "date", "sales"])?;
    for s in series {
        for (day, v) in s.points() {
            wtr.write_record([s.product_id.as_str(), &day.to_string(), &v.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_sales_csv(path: impl AsRef<Path>, series: &[TimeSeries]) -> Result<(), DataError> {
    write_sales(File::create(path)?, series)
}

/// Reads a calendar, returning it together with any merge warnings.
///
/// A date appearing on several rows keeps the last row's events.
pub fn read_calendar<R: Read>(reader: R) -> Result<(EventCalendar, Vec<String>), DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut calendar = EventCalendar::new();
    let mut seen: HashMap<Day, u64> = HashMap::new();
    let mut warnings = Vec::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let Some(raw_date) = record.get(0) else { continue };
        if raw_date.is_empty() && record.iter().all(str::is_empty) {
            continue;
        }
        let date: Day = raw_date.parse().map_err(|e: crate::date::ParseDayError| DataError::Parse {
            line,
            message: e.to_string(),
        })?;
        let events: Vec<String> = record
            .iter()
            .skip(1)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        if events.len() > MAX_EVENTS_PER_DAY {
            return Err(DataError::TooManyEvents {
                date,
                count: events.len(),
            });
        }
        if let Some(prev_line) = seen.insert(date, line) {
            warnings.push(format!(
                "calendar date {date} on line {line} overrides line {prev_line}"
            ));
        }
        calendar.set(date, events)?;
    }
    Ok((calendar, warnings))
}

pub fn load_calendar_csv(path: impl AsRef<Path>) -> Result<EventCalendar, DataError> {
    let (calendar, warnings) = read_calendar(File::open(path)?)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(calendar)
}

pub fn write_calendar<W: Write>(writer: W, calendar: &EventCalendar) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["date", "event_1", "event_2"])?;
    for (day, events) in calendar.iter() {
        let first = events.first().map(String::as_str).unwrap_or("");
        let second = events.get(1).map(String::as_str).unwrap_or("");
        wtr.write_record([day.to_string().as_str(), first, second])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Day {
        s.parse().unwrap()
    }

    #[test]
    fn two_products_three_days() {
        let csv = "product_id,date,sales\n\
                   A,2016-01-02,3\nB,2016-01-01,0\nA,2016-01-01,1\n\
                   B,2016-01-02,5\nA,2016-01-03,2\nB,2016-01-03,7\n";
        let series = read_sales(csv.as_bytes()).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].product_id, "A");
        assert_eq!(series[0].sales, vec![1.0, 3.0, 2.0]);
        assert_eq!(series[0].start, d("2016-01-01"));
        assert_eq!(series[1].len(), 3);
    }

    #[test]
    fn negative_sales_rejected() {
        let csv = "product_id,date,sales\nA,2016-01-01,-1\n";
        assert!(matches!(
            read_sales(csv.as_bytes()),
            Err(DataError::Validation { .. })
        ));
    }

    #[test]
    fn gap_names_product_and_missing_date() {
        let csv = "product_id,date,sales\nA,2016-01-01,1\nA,2016-01-03,1\n";
        match read_sales(csv.as_bytes()) {
            Err(DataError::Validation { product, date, .. }) => {
                assert_eq!(product, "A");
                assert_eq!(date, d("2016-01-02"));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "product_id,date,sales\nA,2016-01-01,1\nA,2016-01-02,abc\n";
        match read_sales(csv.as_bytes()) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let csv = "product_id,date,sales\nA,not-a-date,1\n";
        assert!(matches!(
            read_sales(csv.as_bytes()),
            Err(DataError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn calendar_memorial_day() {
        let csv = "date,event_1,event_2\n2016-05-30,Memorial Day,\n2016-05-31,,\n";
        let (cal, warnings) = read_calendar(csv.as_bytes()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(cal.len(), 1);
        assert_eq!(cal.events_on(d("2016-05-30")), ["Memorial Day".to_string()]);
        assert!(cal.events_on(d("2016-05-31")).is_empty());
    }

    #[test]
    fn calendar_empty_body() {
        let (cal, _) = read_calendar("date,event_1,event_2\n".as_bytes()).unwrap();
        assert!(cal.is_empty());
    }

    #[test]
    fn calendar_duplicate_date_last_row_wins() {
        let csv = "date,event_1,event_2\n2016-02-14,ValentinesDay,\n2016-02-14,SuperBowl,Foo\n";
        let (cal, warnings) = read_calendar(csv.as_bytes()).unwrap();
        assert_eq!(
            cal.events_on(d("2016-02-14")),
            ["SuperBowl".to_string(), "Foo".to_string()]
        );
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("2016-02-14"));
    }

    #[test]
    fn calendar_three_events_rejected() {
        let csv = "date,event_1,event_2\n2016-02-14,A,B,C\n";
        assert!(matches!(
            read_calendar(csv.as_bytes()),
            Err(DataError::TooManyEvents { count: 3, .. })
        ));
    }

    fn series_of(len: usize) -> TimeSeries {
        TimeSeries::new("P", d("2011-01-29"), (0..len).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn split_lengths() {
        let task = split_task(&series_of(100), 14).unwrap();
        assert_eq!(task.history.len(), 86);
        assert_eq!(task.truth.len(), 14);
        assert_eq!(task.horizon().start, task.history.end().offset(1));

        let task = split_task(&series_of(1941), 14).unwrap();
        assert_eq!(task.history.len(), 1927);
        assert_eq!(task.truth.len(), 14);
    }

    #[test]
    fn split_too_short() {
        assert!(matches!(
            split_task(&series_of(14), 14),
            Err(DataError::TooShort { .. })
        ));
    }
}
