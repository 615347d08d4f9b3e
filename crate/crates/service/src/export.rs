use fss_core::metrics::{
    adjustment_volume, bonus_cents, mape, relative_mae, rmae, Filters, ForecastTriple, ResultRecord,
};

use crate::session::SessionRecord;

/// Participant filters: duplicates and completion time.
pub type ExportFilters = Filters;

fn seconds(from_ms: u64, to_ms: u64) -> f64 {
    to_ms.saturating_sub(from_ms) as f64 / 1000.0
}

/// One row per signed-off product, sessions in the given order.
pub fn session_rows(rec: &SessionRecord) -> Vec<ResultRecord> {
    let survey = rec.survey.as_ref();
    let score = |i: usize| survey.map(|s| s.scores[i]);
    rec.products
        .iter()
        .enumerate()
        .filter_map(|(k, p)| {
            let signed = p.signed_off.as_ref()?;
            let snap = &signed.snapshot;
            let triple = ForecastTriple::new(snap.model.clone(), snap.final_values.clone(), snap.truth.clone()).ok();
            let av = triple.as_ref().and_then(|t| adjustment_volume(t).ok());
            let rm = triple.as_ref().and_then(|t| rmae(t).ok());
            let mp = mape(&snap.truth, &snap.final_values).ok();
            Some(ResultRecord {
                session_id: rec.id.clone(),
                worker_id: rec.worker_id.clone(),
                treatment: rec.treatment.to_string(),
                product_index: k,
                product_id: p.product_id.clone(),
                av,
                rmae: rm,
                mape: mp.map(|m| m.value),
                mape_excluded: mp.map_or(0, |m| m.excluded),
                model_vs_ses_rmae: relative_mae(&snap.model, &snap.ses, &snap.truth).ok(),
                view_seconds: seconds(p.view_start_ms.unwrap_or(signed.at_ms), signed.at_ms),
                completion_seconds: rec.completed_ms().map(|c| seconds(rec.created_ms, c)),
                duplicate: rec.duplicate,
                bonus_cents: rm.map_or(0, bonus_cents),
                s1: score(0),
                s2: score(1),
                s3: score(2),
                s4: score(3),
                s5: score(4),
                comment: survey.map(|s| s.comment.clone()).unwrap_or_default(),
            })
        })
        .collect()
}

/// Result rows of all sessions that pass `filters`.
pub fn export_sessions(records: &[SessionRecord], filters: &ExportFilters) -> Vec<ResultRecord> {
    records
        .iter()
        .flat_map(session_rows)
        .filter(|r| filters.keeps(r))
        .collect()
}
