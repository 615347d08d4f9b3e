//! Conversion of the wide M5 competition layout into the long ingestion format.
//!
//! The wide sales file has one row per series (`id, ..., d_1, d_2, ...`); the
//! M5 calendar maps each `d_N` column to a date and lists up to two events.

use std::collections::{HashMap, HashSet};
use std::io::Read;

use super::{DataError, EventCalendar, TimeSeries};
use crate::date::Day;

/// The parts of the M5 calendar needed to melt sales data.
#[derive(Debug, Clone, Default)]
pub struct M5Calendar {
    pub day_columns: HashMap<String, Day>,
    pub events: EventCalendar,
}

pub fn read_m5_calendar<R: Read>(reader: R) -> Result<M5Calendar, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize, DataError> {
        headers.iter().position(|h| h == name).ok_or(DataError::Parse {
            line: 1,
            message: format!("M5 calendar is missing column '{name}'"),
        })
    };
    let (date_col, d_col) = (col("date")?, col("d")?);
    let event_cols = [col("event_name_1")?, col("event_name_2")?];

    let mut out = M5Calendar::default();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let date: Day = record[date_col].parse().map_err(|e: crate::date::ParseDayError| DataError::Parse {
            line,
            message: e.to_string(),
        })?;
        out.day_columns.insert(record[d_col].to_string(), date);
        let events: Vec<String> = event_cols
            .iter()
            .map(|&c| record.get(c).unwrap_or(""))
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        out.events.set(date, events)?;
    }
    Ok(out)
}

/// Melts wide M5 sales rows into long series.
///
/// `keep` restricts the output to the listed ids (in file order); `None`
/// keeps every row. The series id is taken from the `id` column.
pub fn melt_sales<R: Read>(
    reader: R,
    calendar: &M5Calendar,
    keep: Option<&[String]>,
) -> Result<Vec<TimeSeries>, DataError> {
    let keep: Option<HashSet<&str>> = keep.map(|ids| ids.iter().map(String::as_str).collect());
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = headers.iter().position(|h| h == "id").ok_or(DataError::Parse {
        line: 1,
        message: "M5 sales file is missing column 'id'".into(),
    })?;

    let mut day_cols: Vec<(usize, Day)> = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if h.starts_with("d_") {
            let day = calendar.day_columns.get(h).ok_or(DataError::Parse {
                line: 1,
                message: format!("column '{h}' not found in calendar"),
            })?;
            day_cols.push((i, *day));
        }
    }
    day_cols.sort_by_key(|(_, d)| *d);
    let Some(&(_, start)) = day_cols.first() else {
        return Ok(Vec::new());
    };
    for (k, (_, day)) in day_cols.iter().enumerate() {
        if day.since(start) != k as i32 {
            return Err(DataError::Validation {
                product: "<all>".into(),
                date: start.offset(k as i32),
                message: "day columns are not consecutive".into(),
            });
        }
    }

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = &record[id_col];
        if keep.as_ref().is_some_and(|k| !k.contains(id)) {
            continue;
        }
        let sales = day_cols
            .iter()
            .map(|&(c, _)| {
                record[c].parse::<f64>().map_err(|_| DataError::Parse {
                    line,
                    message: format!("invalid sales value '{}'", &record[c]),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(TimeSeries::new(id, start, sales)?);
    }
    Ok(out)
}
