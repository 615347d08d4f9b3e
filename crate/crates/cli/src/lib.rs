//! Shared helpers for the `fss-data` and `fss-metrics` binaries.

use std::fmt::Write as _;

use fss_core::metrics::{Report, Stat};

fn cell(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.2}"))
}

/// Plain-text rendering of the adjustment and accuracy tables.
pub fn render_report(report: &Report) -> String {
    let mut out = String::new();
    let mean = |s: &Option<Stat>| s.as_ref().map(|s| s.mean);
    let std = |s: &Option<Stat>| s.as_ref().map(|s| s.std);
    let _ = writeln!(out, "{:<6}{:>10}{:>10}{:>8}", "FSS", "AV mean", "AV std", "AF");
    for s in &report.summaries {
        let _ = writeln!(out, "{:<6}{:>10}{:>10}{:>8}", s.treatment, cell(mean(&s.av)), cell(std(&s.av)), cell(s.af));
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<6}{:>10}{:>10}", "Mode", "Mean", "Std");
    for s in &report.summaries {
        let _ = writeln!(out, "{:<6}{:>10}{:>10}", s.treatment, cell(mean(&s.rmae)), cell(std(&s.rmae)));
    }
    out
}
