use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{adjustment_frequency, resample_records, MetricError, ResultRecord, ADJUSTED_THRESHOLD};

pub const SURVEY_CATEGORIES: [&str; 5] = [
    "Understanding",
    "Usefulness",
    "Bring in Intuition",
    "Satisfaction",
    "Bonus Motivation",
];

/// Mean and sample standard deviation (n − 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    /// Reported as 0 when `n == 1`, with `degenerate` set.
    pub std: f64,
    pub degenerate: bool,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Some(Stat { n, mean, std: 0.0, degenerate: true });
        }
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        Some(Stat {
            n,
            mean,
            std: (ss / (n - 1) as f64).sqrt(),
            degenerate: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductSummary {
    pub product_id: String,
    pub n: usize,
    pub av_mean: Option<f64>,
    pub rmae_mean: Option<f64>,
    pub model_vs_ses_rmae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreatmentSummary {
    pub treatment: String,
    pub n_records: usize,
    pub av: Option<Stat>,
    pub af: Option<f64>,
    pub rmae: Option<Stat>,
    /// Restricted to records with a positive adjustment volume.
    pub av_conditional: Option<Stat>,
    pub rmae_conditional: Option<Stat>,
    pub per_product: Vec<ProductSummary>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    Stat::of(&v).map(|s| s.mean)
}

/// Summarizes the records of one treatment. Undefined metrics are skipped.
pub fn summarize_treatment(treatment: &str, records: &[ResultRecord]) -> Result<TreatmentSummary, MetricError> {
    if records.is_empty() {
        return Err(MetricError::Empty);
    }
    let avs: Vec<f64> = records.iter().filter_map(|r| r.av).collect();
    let rmaes: Vec<f64> = records.iter().filter_map(|r| r.rmae).collect();
    let adjusted: Vec<&ResultRecord> = records
        .iter()
        .filter(|r| r.av.is_some_and(|v| v > ADJUSTED_THRESHOLD))
        .collect();
    let cond_av: Vec<f64> = adjusted.iter().filter_map(|r| r.av).collect();
    let cond_rmae: Vec<f64> = adjusted.iter().filter_map(|r| r.rmae).collect();

    let mut by_product: BTreeMap<&str, Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        by_product.entry(&r.product_id).or_default().push(r);
    }
    let per_product = by_product
        .into_iter()
        .map(|(product_id, rs)| ProductSummary {
            product_id: product_id.to_string(),
            n: rs.len(),
            av_mean: mean(rs.iter().filter_map(|r| r.av)),
            rmae_mean: mean(rs.iter().filter_map(|r| r.rmae)),
            model_vs_ses_rmae: rs.iter().find_map(|r| r.model_vs_ses_rmae),
        })
        .collect();

    Ok(TreatmentSummary {
        treatment: treatment.to_string(),
        n_records: records.len(),
        af: adjustment_frequency(&avs).ok(),
        av: Stat::of(&avs),
        rmae: Stat::of(&rmaes),
        av_conditional: Stat::of(&cond_av),
        rmae_conditional: Stat::of(&cond_rmae),
        per_product,
    })
}

/// Mean of the first four survey items; a fifth item, if given, is checked
/// but not included.
pub fn satisfaction_scale(items: &[f64]) -> Result<f64, MetricError> {
    if items.len() < 4 || items.len() > 5 {
        return Err(MetricError::LengthMismatch(format!("{} survey items, expected 4 or 5", items.len())));
    }
    for (i, &v) in items.iter().enumerate() {
        if !(1.0..=7.0).contains(&v) {
            return Err(MetricError::ItemOutOfRange { item: i + 1, value: v });
        }
    }
    Ok(items[..4].iter().sum::<f64>() / 4.0)
}

/// Puts the known treatment labels first (O, T, TA), others after in
/// lexicographic order.
pub fn order_treatments<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let rank = |t: &str| match t {
        "O" => 0,
        "T" => 1,
        "TA" => 2,
        _ => 3,
    };
    let mut set: Vec<&str> = labels.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    set.sort_by_key(|t| (rank(t), t.to_string()));
    set.into_iter().map(str::to_string).collect()
}

/// Participant filters applied before summarizing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Filters {
    pub drop_duplicates: bool,
    /// Sessions faster than this, or never completed, are dropped.
    pub min_completion_seconds: Option<f64>,
}

impl Default for Filters {
    fn default() -> Self {
        Filters {
            drop_duplicates: true,
            min_completion_seconds: Some(180.0),
        }
    }
}

impl Filters {
    pub fn none() -> Self {
        Filters {
            drop_duplicates: false,
            min_completion_seconds: None,
        }
    }

    fn keeps_duplicate_check(&self, r: &ResultRecord) -> bool {
        !(self.drop_duplicates && r.duplicate)
    }

    fn keeps_completion_check(&self, r: &ResultRecord) -> bool {
        match self.min_completion_seconds {
            None => true,
            Some(min) => r.completion_seconds.is_some_and(|s| s >= min),
        }
    }

    pub fn keeps(&self, r: &ResultRecord) -> bool {
        self.keeps_duplicate_check(r) && self.keeps_completion_check(r)
    }
}

/// Distinct participants per treatment at each filtering step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantCounts {
    pub treatments: Vec<String>,
    pub initial: Vec<usize>,
    pub after_duplicates: Vec<usize>,
    pub after_completion: Vec<usize>,
    pub min_completion_seconds: Option<f64>,
}

pub fn participant_counts(records: &[ResultRecord], filters: &Filters) -> ParticipantCounts {
    let treatments = order_treatments(records.iter().map(|r| r.treatment.as_str()));
    let count = |pred: &dyn Fn(&ResultRecord) -> bool| -> Vec<usize> {
        treatments
            .iter()
            .map(|t| {
                records
                    .iter()
                    .filter(|r| &r.treatment == t && pred(r))
                    .map(|r| r.session_id.as_str())
                    .collect::<BTreeSet<_>>()
                    .len()
            })
            .collect()
    };
    ParticipantCounts {
        initial: count(&|_| true),
        after_duplicates: count(&|r| filters.keeps_duplicate_check(r)),
        after_completion: count(&|r| filters.keeps(r)),
        treatments,
        min_completion_seconds: filters.min_completion_seconds,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveyRow {
    pub category: String,
    pub treatment: String,
    pub stat: Stat,
}

/// Item statistics per treatment over distinct participants with a complete
/// survey.
pub fn survey_table(records: &[ResultRecord]) -> Vec<SurveyRow> {
    let treatments = order_treatments(records.iter().map(|r| r.treatment.as_str()));
    let mut per_session: BTreeMap<(&str, &str), [f64; 5]> = BTreeMap::new();
    for r in records {
        if let Some(s) = r.survey() {
            per_session.entry((&r.treatment, &r.session_id)).or_insert(s);
        }
    }
    let mut rows = Vec::new();
    for (item, category) in SURVEY_CATEGORIES.iter().enumerate() {
        for t in &treatments {
            let values: Vec<f64> = per_session
                .iter()
                .filter(|((tr, _), _)| tr == t)
                .map(|(_, s)| s[item])
                .collect();
            if let Some(stat) = Stat::of(&values) {
                rows.push(SurveyRow {
                    category: category.to_string(),
                    treatment: t.clone(),
                    stat,
                });
            }
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub counts: ParticipantCounts,
    /// Summaries of the filtered and (if seeded) resampled records.
    pub summaries: Vec<TreatmentSummary>,
    pub survey: Vec<SurveyRow>,
    /// Satisfaction scale per treatment, from the first four item means.
    pub satisfaction: Vec<(String, f64)>,
    pub resample_seed: Option<u64>,
}

/// Filters, optionally resamples, and summarizes a results file.
pub fn summarize(records: &[ResultRecord], filters: &Filters, resample_seed: Option<u64>) -> Result<Report, MetricError> {
    let counts = participant_counts(records, filters);
    let kept: Vec<ResultRecord> = records.iter().filter(|r| filters.keeps(r)).cloned().collect();
    let analysed = match resample_seed {
        Some(seed) => resample_records(&kept, seed)?,
        None => kept.clone(),
    };
    let treatments = order_treatments(analysed.iter().map(|r| r.treatment.as_str()));
    let summaries = treatments
        .iter()
        .map(|t| {
            let rs: Vec<ResultRecord> = analysed.iter().filter(|r| &r.treatment == t).cloned().collect();
            summarize_treatment(t, &rs)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let survey = survey_table(&kept);
    let satisfaction = order_treatments(kept.iter().map(|r| r.treatment.as_str()))
        .into_iter()
        .filter_map(|t| {
            let means: Vec<f64> = SURVEY_CATEGORIES[..4]
                .iter()
                .filter_map(|c| survey.iter().find(|r| r.category == *c && r.treatment == t))
                .map(|r| r.stat.mean)
                .collect();
            satisfaction_scale(&means).ok().map(|s| (t, s))
        })
        .collect();
    Ok(Report {
        counts,
        summaries,
        survey,
        satisfaction,
        resample_seed,
    })
}

fn fmt2(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

fn completion_label(min: Option<f64>) -> String {
    match min {
        Some(s) if s % 60.0 == 0.0 => format!("Drop Completion Time below {} min", s / 60.0),
        Some(s) => format!("Drop Completion Time below {s} s"),
        None => "Drop Completion Time (off)".to_string(),
    }
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), MetricError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Writes the participant, adjustment, accuracy, per-product and survey
/// tables into `dir` (created if missing). Values use two decimals.
pub fn write_tables(report: &Report, dir: &Path) -> Result<(), MetricError> {
    fs::create_dir_all(dir)?;
    let c = &report.counts;

    let mut header = vec!["Filter".to_string()];
    header.extend(c.treatments.iter().cloned());
    let row = |label: String, counts: &[usize]| {
        let mut r = vec![label];
        r.extend(counts.iter().map(|n| n.to_string()));
        r
    };
    write_csv(
        &dir.join("table1_participants.csv"),
        &header,
        &[
            row("Initial Sample".into(), &c.initial),
            row("Drop Duplicates".into(), &c.after_duplicates),
            row(completion_label(c.min_completion_seconds), &c.after_completion),
        ],
    )?;

    let av_rows = |cond: bool| -> Vec<Vec<String>> {
        report
            .summaries
            .iter()
            .map(|s| {
                let stat = if cond { s.av_conditional } else { s.av };
                vec![
                    s.treatment.clone(),
                    fmt2(stat.map(|x| x.mean)),
                    fmt2(stat.map(|x| x.std)),
                    fmt2(s.af),
                ]
            })
            .collect()
    };
    let av_header = strings(&["FSS", "AV_mean", "AV_std", "AF"]);
    write_csv(&dir.join("table2_adjustment.csv"), &av_header, &av_rows(false))?;
    write_csv(&dir.join("table2_adjustment_conditional.csv"), &av_header, &av_rows(true))?;

    let rmae_rows = |cond: bool| -> Vec<Vec<String>> {
        report
            .summaries
            .iter()
            .map(|s| {
                let stat = if cond { s.rmae_conditional } else { s.rmae };
                vec![s.treatment.clone(), fmt2(stat.map(|x| x.mean)), fmt2(stat.map(|x| x.std))]
            })
            .collect()
    };
    let rmae_header = strings(&["Mode", "Mean", "Std"]);
    write_csv(&dir.join("table3_rmae.csv"), &rmae_header, &rmae_rows(false))?;
    write_csv(&dir.join("table3_rmae_conditional.csv"), &rmae_header, &rmae_rows(true))?;

    let product_rows: Vec<Vec<String>> = report
        .summaries
        .iter()
        .flat_map(|s| {
            s.per_product.iter().map(move |p| {
                vec![
                    p.product_id.clone(),
                    s.treatment.clone(),
                    p.n.to_string(),
                    fmt2(p.av_mean),
                    fmt2(p.rmae_mean),
                    fmt2(p.model_vs_ses_rmae),
                ]
            })
        })
        .collect();
    write_csv(
        &dir.join("per_product.csv"),
        &strings(&["Product", "FSS", "N", "AV_mean", "rMAE_mean", "Model_vs_SES_rMAE"]),
        &product_rows,
    )?;

    let survey_rows: Vec<Vec<String>> = report
        .survey
        .iter()
        .map(|r| {
            vec![
                r.category.clone(),
                r.treatment.clone(),
                fmt2(Some(r.stat.mean)),
                fmt2(Some(r.stat.std)),
            ]
        })
        .collect();
    write_csv(
        &dir.join("survey.csv"),
        &strings(&["Category", "Treatment", "Average", "StdDev"]),
        &survey_rows,
    )?;

    let sat_rows: Vec<Vec<String>> = report
        .satisfaction
        .iter()
        .map(|(t, s)| vec![t.clone(), fmt2(Some(*s))])
        .collect();
    write_csv(&dir.join("satisfaction.csv"), &strings(&["FSS", "Satisfaction"]), &sat_rows)?;
    Ok(())
}
