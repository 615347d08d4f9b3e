use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use fss_core::adjust::{DatedValue, Edit};
use fss_core::metrics::{adjustment_volume, bonus_cents, mape, rmae, ForecastTriple, ResultRecord};
use fss_service::http::router;
use fss_service::treatment::ALL_TREATMENTS;
use fss_service::view::{AdjustmentResponse, ErrorBody, Receipt, SessionCreated, ViewPayload};
use fss_service::{Catalog, MemoryStore, SessionService, Treatment};
use http_body_util::BodyExt;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tower::ServiceExt;

use crate::policy::{self, JudgePolicy};
use crate::{SimConfig, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPlan {
    pub index: usize,
    pub worker_id: String,
    pub treatment: Treatment,
    pub policy: JudgePolicy,
    pub start_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductOutcome {
    pub product_id: String,
    pub model: Vec<f64>,
    pub final_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentOutcome {
    pub plan: AgentPlan,
    pub session_id: String,
    pub duplicate: bool,
    pub products: Vec<ProductOutcome>,
    /// Sign-off attempts the service turned down as too fast.
    pub early_rejections: usize,
    pub receipt: Receipt,
}

pub struct SimRun {
    pub outcomes: Vec<AgentOutcome>,
    /// Agents whose session the service refused (duplicate workers).
    pub refused: Vec<AgentPlan>,
    /// Unfiltered export, one row per signed-off product.
    pub records: Vec<ResultRecord>,
    /// The same rows as the service's CSV export.
    pub results_csv: Vec<u8>,
    pub service: Arc<SessionService>,
}

impl SimRun {
    pub fn early_rejections(&self) -> usize {
        self.outcomes.iter().map(|o| o.early_rejections).sum()
    }
}

/// Agents in session-creation order: treatments interleaved, then the
/// returning duplicate workers.
pub fn plan_agents(cfg: &SimConfig) -> Result<Vec<AgentPlan>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pickers = Vec::new();
    for t in ALL_TREATMENTS {
        let mix = cfg.policies.for_treatment(t);
        let w = WeightedIndex::new(mix.iter().map(|p| p.weight)).map_err(|e| SimError::Config(format!("policy weights of {t}: {e}")))?;
        pickers.push((t, mix, w));
    }
    let mut plans = Vec::new();
    for i in 0..cfg.agents_per_treatment {
        for (t, mix, w) in &pickers {
            let index = plans.len();
            plans.push(AgentPlan {
                index,
                worker_id: format!("W{i:04}{t}"),
                treatment: *t,
                policy: mix[w.sample(&mut rng)].policy,
                start_ms: index as u64 * 1_000,
            });
        }
    }
    for j in 0..cfg.duplicate_workers {
        let first = plans[j].clone();
        let t = ALL_TREATMENTS[(ALL_TREATMENTS.iter().position(|x| *x == first.treatment).unwrap() + 1) % 3];
        let (_, mix, w) = &pickers[ALL_TREATMENTS.iter().position(|x| *x == t).unwrap()];
        let index = plans.len();
        plans.push(AgentPlan {
            index,
            worker_id: first.worker_id,
            treatment: t,
            policy: mix[w.sample(&mut rng)].policy,
            start_ms: index as u64 * 1_000,
        });
    }
    Ok(plans)
}

fn values(points: &[DatedValue]) -> Vec<f64> {
    points.iter().map(|p| p.value).collect()
}

/// Pins the dates where `target` differs from the model forecast.
fn values_edit(view: &ViewPayload, target: &[f64]) -> Option<Edit> {
    let pins: Vec<DatedValue> = view
        .model_forecast
        .iter()
        .zip(target)
        .filter(|(m, t)| m.value.to_bits() != t.to_bits())
        .map(|(m, t)| DatedValue { date: m.date, value: *t })
        .collect();
    (!pins.is_empty()).then_some(Edit::Values(pins))
}

fn level_edit(view: &ViewPayload, level: Vec<f64>) -> Option<Edit> {
    let forecast = &view.decomposition.as_ref()?.forecast;
    if forecast.iter().zip(&level).all(|(p, l)| p.level.to_bits() == l.to_bits()) {
        return None;
    }
    Some(Edit::Level(
        forecast
            .iter()
            .zip(level)
            .map(|(p, value)| DatedValue { date: p.date, value })
            .collect(),
    ))
}

/// The edit an agent with `policy` posts for the product in `view`, if any.
/// Agents in the adjustable design redraw the level for level-type biases;
/// everyone else drags forecast values.
pub fn plan_edit(policy: &JudgePolicy, view: &ViewPayload) -> Option<Edit> {
    let model = values(&view.model_forecast);
    let can_redraw = view.adjustable.is_some();
    match *policy {
        JudgePolicy::Noop => None,
        JudgePolicy::AnchorAdjust { alpha } => {
            let last = view.history.last()?.value;
            values_edit(view, &policy::anchor_adjust_forecast(&model, last, alpha))
        }
        JudgePolicy::Extreme { gain } => values_edit(view, &policy::extreme_forecast(&model, gain)),
        JudgePolicy::NoiseModel { window, gain } => {
            let actual = values(&view.history);
            let fitted = values(&view.fitted);
            if can_redraw {
                let shift = gain * policy::recent_residual(&actual, &fitted, window);
                let d = view.decomposition.as_ref()?;
                level_edit(view, d.forecast.iter().map(|p| p.level + shift).collect())
            } else {
                values_edit(view, &policy::noise_model_forecast(&model, &actual, &fitted, window, gain))
            }
        }
        JudgePolicy::TrendDampen { factor } => match &view.decomposition {
            Some(d) if can_redraw => level_edit(view, policy::dampened_level(&d.forecast, factor)),
            Some(d) => values_edit(view, &policy::trend_dampen_forecast(&d.forecast, factor)),
            None => values_edit(view, &policy::trend_dampen_totals(&model, factor)),
        },
    }
}

#[derive(Clone)]
struct Client {
    app: Router,
}

enum Reply<T> {
    Ok(StatusCode, T),
    Err(StatusCode, ErrorBody),
}

impl Client {
    async fn call<T: DeserializeOwned>(&self, method: &str, uri: &str, body: Option<Value>) -> Result<Reply<T>, SimError> {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .map_err(|e| SimError::Harness(e.to_string()))?;
        let resp = self.app.clone().oneshot(req).await.map_err(|e| SimError::Harness(e.to_string()))?;
        let status = resp.status();
        let bytes = resp
            .into_body()
            .collect()
            .await
            .map_err(|e| SimError::Harness(e.to_string()))?
            .to_bytes();
        let http_err = || SimError::Http {
            method: method.to_string(),
            uri: uri.to_string(),
            status: status.as_u16(),
            body: String::from_utf8_lossy(&bytes).into_owned(),
        };
        if status.is_success() {
            Ok(Reply::Ok(status, serde_json::from_slice(&bytes).map_err(|_| http_err())?))
        } else {
            Ok(Reply::Err(status, serde_json::from_slice(&bytes).map_err(|_| http_err())?))
        }
    }

    async fn expect<T: DeserializeOwned>(&self, method: &str, uri: &str, body: Option<Value>) -> Result<T, SimError> {
        match self.call(method, uri, body).await? {
            Reply::Ok(_, v) => Ok(v),
            Reply::Err(status, e) if e.error == "treatment_violation" => Err(SimError::Harness(format!(
                "policy misconfigured, {method} {uri} was refused with {status}: {}",
                e.message
            ))),
            Reply::Err(status, e) => Err(SimError::Http {
                method: method.into(),
                uri: uri.into(),
                status: status.as_u16(),
                body: e.message,
            }),
        }
    }

    async fn raw(&self, uri: &str) -> Result<Vec<u8>, SimError> {
        let req = Request::get(uri).body(Body::empty()).map_err(|e| SimError::Harness(e.to_string()))?;
        let resp = self.app.clone().oneshot(req).await.map_err(|e| SimError::Harness(e.to_string()))?;
        let ok = resp.status().is_success();
        let bytes = resp.into_body().collect().await.map_err(|e| SimError::Harness(e.to_string()))?.to_bytes();
        if !ok {
            return Err(SimError::Harness(String::from_utf8_lossy(&bytes).into_owned()));
        }
        Ok(bytes.to_vec())
    }
}

struct Timing {
    seed: u64,
    early_rate: f64,
    min_view_ms: u64,
    dwell_ms: (u64, u64),
    survey_ms: (u64, u64),
}

async fn run_agent(client: Client, plan: AgentPlan, created: SessionCreated, timing: Arc<Timing>) -> Result<AgentOutcome, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(timing.seed);
    rng.set_stream(plan.index as u64 + 1);
    let id = &created.session_id;
    let mut now = plan.start_ms + 2_000;
    let mut products = Vec::new();
    let mut early_rejections = 0;
    for k in 0..created.products.len() {
        let view_at = now;
        let view: ViewPayload = client
            .expect("GET", &format!("/sessions/{id}/products/{k}/view?at_ms={view_at}"), None)
            .await?;
        let mut final_values = values(&view.forecast);
        if let Some(edit) = plan_edit(&plan.policy, &view) {
            let resp: AdjustmentResponse = client
                .expect(
                    "POST",
                    &format!("/sessions/{id}/products/{k}/adjustments"),
                    Some(json!({"edit": edit, "at_ms": view_at + 500})),
                )
                .await?;
            final_values = values(&resp.forecast);
        }
        let signoff = format!("/sessions/{id}/products/{k}/signoff");
        if timing.min_view_ms > 1_000 && rng.random_bool(timing.early_rate) {
            let at = view_at + rng.random_range(1_000..timing.min_view_ms);
            match client.call::<Value>("POST", &signoff, Some(json!({"at_ms": at}))).await? {
                Reply::Err(_, e) if e.error == "too_fast" => early_rejections += 1,
                _ => return Err(SimError::Harness(format!("{id}: sign-off after {} ms was accepted", at - view_at))),
            }
        }
        let signed_at = view_at + rng.random_range(timing.dwell_ms.0..=timing.dwell_ms.1);
        let _: Value = client.expect("POST", &signoff, Some(json!({"at_ms": signed_at}))).await?;
        now = signed_at + 1_000;
        products.push(ProductOutcome {
            product_id: view.product_id,
            model: values(&view.model_forecast),
            final_values,
        });
    }
    let scores: Vec<f64> = (0..5).map(|_| rng.random_range(1..=7) as f64).collect();
    let at = now + rng.random_range(timing.survey_ms.0..=timing.survey_ms.1);
    let receipt: Receipt = client
        .expect(
            "POST",
            &format!("/sessions/{id}/survey"),
            Some(json!({"scores": scores, "comment": plan.policy.name(), "at_ms": at})),
        )
        .await?;
    Ok(AgentOutcome {
        session_id: created.session_id,
        duplicate: created.duplicate,
        plan,
        products,
        early_rejections,
        receipt,
    })
}

/// Builds the catalog from the service config and runs the experiment.
pub fn run(cfg: &SimConfig) -> Result<SimRun, SimError> {
    cfg.validate()?;
    let catalog = Arc::new(Catalog::from_config(&cfg.service)?);
    run_with_catalog(cfg, catalog)
}

/// Runs every planned agent against an in-memory service over `catalog`.
/// Sessions are created in plan order, then agents run concurrently.
pub fn run_with_catalog(cfg: &SimConfig, catalog: Arc<Catalog>) -> Result<SimRun, SimError> {
    cfg.validate()?;
    let plans = plan_agents(cfg)?;
    let service = Arc::new(SessionService::new(cfg.service.clone(), catalog, Box::new(MemoryStore::new()))?);
    let client = Client {
        app: router(service.clone()),
    };
    let ms = |s: f64| (s * 1000.0).round() as u64;
    let timing = Arc::new(Timing {
        seed: cfg.seed,
        early_rate: cfg.early_signoff_rate,
        min_view_ms: ms(cfg.service.min_view_seconds),
        dwell_ms: (ms(cfg.dwell_seconds[0]).max(ms(cfg.service.min_view_seconds)), ms(cfg.dwell_seconds[1])),
        survey_ms: (ms(cfg.survey_seconds[0]), ms(cfg.survey_seconds[1])),
    });
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .build()
        .map_err(SimError::Io)?;

    runtime.block_on(async move {
        let mut refused = Vec::new();
        let mut started = Vec::new();
        for plan in plans {
            let body = json!({"worker_id": plan.worker_id, "treatment": plan.treatment, "at_ms": plan.start_ms});
            match client.call::<SessionCreated>("POST", "/sessions", Some(body)).await? {
                Reply::Ok(StatusCode::CREATED, created) => started.push((plan, created)),
                Reply::Err(_, e) if e.duplicate => refused.push(plan),
                Reply::Ok(status, c) => {
                    return Err(SimError::Harness(format!("{} resumed {} ({status})", plan.worker_id, c.session_id)))
                }
                Reply::Err(status, e) => return Err(SimError::Harness(format!("create failed ({status}): {}", e.message))),
            }
        }
        let mut tasks = tokio::task::JoinSet::new();
        for (plan, created) in started {
            tasks.spawn(run_agent(client.clone(), plan, created, timing.clone()));
        }
        let mut outcomes = Vec::new();
        while let Some(joined) = tasks.join_next().await {
            outcomes.push(joined.map_err(|e| SimError::Harness(e.to_string()))??);
        }
        outcomes.sort_by_key(|o| o.plan.index);

        let records: Vec<ResultRecord> = client.expect("GET", "/export?format=json", None).await?;
        let results_csv = client.raw("/export?format=csv").await?;
        check_integrity(&service, &outcomes, &records)?;
        Ok(SimRun {
            outcomes,
            refused,
            records,
            results_csv,
            service,
        })
    })
}

/// Recomputes every exported metric from the forecasts the agents saw and
/// the held-out truth, and demands exact equality.
fn check_integrity(service: &SessionService, outcomes: &[AgentOutcome], records: &[ResultRecord]) -> Result<(), SimError> {
    let by_key: HashMap<(&str, usize), &ResultRecord> = records
        .iter()
        .map(|r| ((r.session_id.as_str(), r.product_index), r))
        .collect();
    let expected_rows: usize = outcomes.iter().map(|o| o.products.len()).sum();
    if expected_rows != records.len() {
        return Err(SimError::Integrity(format!("{} exported rows for {expected_rows} sign-offs", records.len())));
    }
    for o in outcomes {
        for (k, p) in o.products.iter().enumerate() {
            let rec = by_key
                .get(&(o.session_id.as_str(), k))
                .ok_or_else(|| SimError::Integrity(format!("{} product {k} missing from export", o.session_id)))?;
            let truth = service
                .catalog()
                .get(&p.product_id)
                .ok_or_else(|| SimError::Integrity(format!("unknown product {}", p.product_id)))?
                .task
                .truth
                .clone();
            let triple = ForecastTriple::new(p.model.clone(), p.final_values.clone(), truth.clone())?;
            let av = adjustment_volume(&triple).ok();
            let rm = rmae(&triple).ok();
            let mp = mape(&truth, &p.final_values).ok().map(|m| m.value);
            let bonus = rm.map_or(0, bonus_cents);
            let same = |a: Option<f64>, b: Option<f64>| a.map(f64::to_bits) == b.map(f64::to_bits);
            if !(same(av, rec.av) && same(rm, rec.rmae) && same(mp, rec.mape) && bonus == rec.bonus_cents) {
                return Err(SimError::Integrity(format!(
                    "{} product {k}: harness av={av:?} rmae={rm:?} mape={mp:?}, export av={:?} rmae={:?} mape={:?}",
                    o.session_id, rec.av, rec.rmae, rec.mape
                )));
            }
            if rec.product_id != p.product_id || rec.treatment != o.plan.treatment.as_str() {
                return Err(SimError::Integrity(format!("{} product {k}: identity mismatch", o.session_id)));
            }
        }
    }
    Ok(())
}
