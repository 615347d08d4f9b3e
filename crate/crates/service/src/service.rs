use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use fss_core::adjust::{apply_edit, compose_final, AdjustmentState, ComponentKind, DatedValue, Edit, EditContext};
use fss_core::metrics::{bonus_cents, format_cents, rmae, session_bonus_cents, ForecastTriple, ResultRecord};
use parking_lot::{Mutex, RwLock};
use sha2::{Digest, Sha256};

use crate::catalog::{Catalog, Product};
use crate::config::{ClockMode, DuplicatePolicy, ServiceConfig};
use crate::export::{export_sessions, ExportFilters};
use crate::session::{SessionEvent, SessionRecord, SignOffSnapshot, Stage};
use crate::store::EventStore;
use crate::treatment::{Treatment, ALL_TREATMENTS};
use crate::view::*;
use crate::ServiceError;

type SessionHandle = Arc<Mutex<SessionRecord>>;

/// The experiment workflow over a fixed product catalog.
///
/// Operations on one session are serialized by its own lock; different
/// sessions proceed independently.
pub struct SessionService {
    config: ServiceConfig,
    catalog: Arc<Catalog>,
    store: Box<dyn EventStore>,
    sessions: RwLock<BTreeMap<String, SessionHandle>>,
    /// Session ids per worker, in creation order. Also serializes creation.
    workers: Mutex<HashMap<String, Vec<String>>>,
    next_id: AtomicU64,
    round_robin: AtomicUsize,
}

fn overridden(state: &AdjustmentState) -> Vec<ComponentKind> {
    let mut out = Vec::new();
    if state.level.is_some() {
        out.push(ComponentKind::Level);
    }
    if state.weekly.is_some() {
        out.push(ComponentKind::Weekly);
    }
    if state.yearly.is_some() {
        out.push(ComponentKind::Yearly);
    }
    if !state.values.is_empty() {
        out.push(ComponentKind::Values);
    }
    out
}

fn dated(points: impl IntoIterator<Item = (fss_core::Day, f64)>) -> Vec<DatedValue> {
    points.into_iter().map(|(date, value)| DatedValue { date, value }).collect()
}

impl SessionService {
    /// Opens the service, replaying any sessions already in `store`.
    pub fn new(config: ServiceConfig, catalog: Arc<Catalog>, store: Box<dyn EventStore>) -> Result<Self, ServiceError> {
        if catalog.is_empty() {
            return Err(ServiceError::Config("catalog is empty".into()));
        }
        let mut sessions = BTreeMap::new();
        let mut workers: HashMap<String, Vec<String>> = HashMap::new();
        let mut max_id = 0u64;
        for (id, events) in store.load_all()? {
            let rec = SessionRecord::replay(&events).map_err(|e| ServiceError::Store(format!("session {id}: {e}")))?;
            if let Some(n) = id.strip_prefix('S').and_then(|n| n.parse::<u64>().ok()) {
                max_id = max_id.max(n);
            }
            workers.entry(rec.worker_id.clone()).or_default().push(id.clone());
            sessions.insert(id, Arc::new(Mutex::new(rec)));
        }
        if !sessions.is_empty() {
            log::info!("replayed {} sessions from the store", sessions.len());
        }
        Ok(SessionService {
            round_robin: AtomicUsize::new(sessions.len()),
            config,
            catalog,
            store,
            sessions: RwLock::new(sessions),
            workers: Mutex::new(workers),
            next_id: AtomicU64::new(max_id + 1),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    fn now(&self, at_ms: Option<u64>) -> Result<u64, ServiceError> {
        match self.config.clock {
            ClockMode::Client => at_ms.ok_or_else(|| ServiceError::InvalidRequest("at_ms is required".into())),
            ClockMode::System => Ok(SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0)),
        }
    }

    fn session(&self, id: &str) -> Result<SessionHandle, ServiceError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    fn product(&self, rec: &SessionRecord, k: usize) -> Result<Arc<Product>, ServiceError> {
        let id = &rec.products.get(k).ok_or(ServiceError::UnknownProduct(k))?.product_id;
        self.catalog
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::Store(format!("product '{id}' is no longer in the catalog")))
    }

    /// Appends to the log first, then updates the in-memory record.
    fn commit(&self, rec: &mut SessionRecord, event: SessionEvent) -> Result<(), ServiceError> {
        self.store.append(&rec.id, &event)?;
        rec.apply(event);
        Ok(())
    }

    fn require_active(rec: &SessionRecord, k: usize) -> Result<(), ServiceError> {
        if k >= rec.products.len() {
            return Err(ServiceError::UnknownProduct(k));
        }
        match rec.stage() {
            Stage::Product(a) if a == k => Ok(()),
            _ if rec.products[k].signed_off.is_some() => Err(ServiceError::AlreadySignedOff(k)),
            stage => Err(ServiceError::OutOfOrder { requested: k, stage }),
        }
    }

    fn assign_products(&self, n: u64) -> Vec<String> {
        let len = self.catalog.len();
        let per = self.config.products_per_session.min(len);
        let offset = ((n - 1) as usize * per) % len;
        (0..per)
            .map(|j| self.catalog.products[(offset + j) % len].id.clone())
            .collect()
    }

    pub fn create_session(&self, req: &CreateSessionRequest) -> Result<SessionCreated, ServiceError> {
        let worker_id = req.worker_id.trim();
        if worker_id.is_empty() {
            return Err(ServiceError::InvalidRequest("worker_id must not be empty".into()));
        }
        let at_ms = self.now(req.at_ms)?;
        let mut workers = self.workers.lock();
        let mut duplicate = false;
        if let Some(ids) = workers.get(worker_id) {
            for id in ids {
                let rec = self.session(id)?;
                let rec = rec.lock();
                let same_treatment = req.treatment.is_none_or(|t| t == rec.treatment);
                if same_treatment && rec.stage() != Stage::Completed {
                    return Ok(SessionCreated {
                        session_id: rec.id.clone(),
                        treatment: rec.treatment,
                        products: rec.products.iter().map(|p| p.product_id.clone()).collect(),
                        resumed: true,
                        duplicate: rec.duplicate,
                        stage: rec.stage(),
                    });
                }
            }
            let first = self.session(&ids[0])?;
            let existing = first.lock().treatment;
            match self.config.duplicates {
                DuplicatePolicy::Reject => {
                    return Err(ServiceError::Duplicate {
                        worker_id: worker_id.to_string(),
                        existing,
                    })
                }
                DuplicatePolicy::Flag => duplicate = true,
            }
        }

        let treatment = req
            .treatment
            .or(self.config.treatment.fixed())
            .unwrap_or_else(|| ALL_TREATMENTS[self.round_robin.fetch_add(1, Ordering::SeqCst) % ALL_TREATMENTS.len()]);
        let n = self.next_id.fetch_add(1, Ordering::SeqCst);
        let session_id = format!("S{n:06}");
        let products = self.assign_products(n);
        let event = SessionEvent::Created {
            session_id: session_id.clone(),
            worker_id: worker_id.to_string(),
            treatment,
            products: products.clone(),
            duplicate,
            at_ms,
        };
        self.store.append(&session_id, &event)?;
        let rec = SessionRecord::from_created(&event).expect("created event");
        let stage = rec.stage();
        self.sessions.write().insert(session_id.clone(), Arc::new(Mutex::new(rec)));
        workers.entry(worker_id.to_string()).or_default().push(session_id.clone());
        log::debug!("session {session_id} created for treatment {treatment}");
        Ok(SessionCreated {
            session_id,
            treatment,
            products,
            resumed: false,
            duplicate,
            stage,
        })
    }

    /// The active product's view, filtered by treatment. `weeks` limits the
    /// weekly fluctuations (clamped to 1..=max).
    pub fn get_view(&self, id: &str, k: usize, weeks: Option<usize>, at_ms: Option<u64>) -> Result<ViewPayload, ServiceError> {
        let at_ms = self.now(at_ms)?;
        let handle = self.session(id)?;
        let mut rec = handle.lock();
        Self::require_active(&rec, k)?;
        let product = self.product(&rec, k)?;
        self.commit(&mut rec, SessionEvent::Viewed { product_index: k, at_ms })?;

        let treatment = rec.treatment;
        let state = &rec.products[k].state;
        let decomposition = treatment.shows_decomposition().then(|| Decomposition {
            fitted: product.fitted.points.clone(),
            forecast: product.forecast.points.clone(),
            weekly_profile: product.model.weekly_profile(),
            yearly_curve: product.yearly_curve.clone(),
        });
        let max_weeks = self.config.max_weeks_shown;
        let weeks_shown = weeks.unwrap_or(max_weeks).clamp(1, max_weeks);
        let adjustable = (treatment == Treatment::TA).then(|| Adjustable {
            overrides: state.clone(),
            overridden: overridden(state),
            weeks_shown,
            max_weeks_shown: max_weeks,
            weekly_residuals: product.weekly_residuals_limited(weeks_shown),
            yearly_residuals: product.yearly_residuals.clone(),
        });
        Ok(ViewPayload {
            session_id: rec.id.clone(),
            treatment,
            product_index: k,
            product_count: rec.products.len(),
            product_id: product.id.clone(),
            function_label: treatment.function_label().to_string(),
            editable: treatment.editable().to_vec(),
            min_view_seconds: self.config.min_view_seconds,
            history: dated(product.task.history.points()),
            fitted: dated(product.fitted.points.iter().map(|p| (p.date, p.total))),
            model_forecast: dated(product.forecast.points.iter().map(|p| (p.date, p.total))),
            forecast: dated(compose_final(&product.forecast, state)),
            value_overrides: dated(state.values.iter().map(|(d, v)| (*d, *v))),
            decomposition,
            adjustable,
        })
    }

    pub fn post_adjustment(&self, id: &str, k: usize, edit: &Edit, at_ms: Option<u64>) -> Result<AdjustmentResponse, ServiceError> {
        let at_ms = self.now(at_ms)?;
        let handle = self.session(id)?;
        let mut rec = handle.lock();
        Self::require_active(&rec, k)?;
        let product = self.product(&rec, k)?;
        let treatment = rec.treatment;
        if !treatment.permits(edit) {
            let action = edit.kind().map(|c| format!("{c:?}").to_lowercase()).unwrap_or_default();
            self.commit(
                &mut rec,
                SessionEvent::Rejected {
                    product_index: k,
                    action: format!("adjust:{action}"),
                    reason: "treatment_violation".into(),
                    at_ms,
                },
            )?;
            return Err(ServiceError::TreatmentViolation { treatment, action });
        }
        let ctx = EditContext {
            horizon: product.task.horizon(),
            yearly_order: product.model.yearly_order(),
        };
        let state = apply_edit(&rec.products[k].state, edit, &ctx)?;
        if treatment != Treatment::TA && state.has_component_overrides() {
            return Err(ServiceError::TreatmentViolation {
                treatment,
                action: "component".into(),
            });
        }
        let response = AdjustmentResponse {
            product_index: k,
            forecast: dated(compose_final(&product.forecast, &state)),
            value_overrides: dated(state.values.iter().map(|(d, v)| (*d, *v))),
            overridden: overridden(&state),
        };
        self.commit(
            &mut rec,
            SessionEvent::Adjusted {
                product_index: k,
                edit: edit.clone(),
                state,
                at_ms,
            },
        )?;
        Ok(response)
    }

    pub fn sign_off(&self, id: &str, k: usize, at_ms: Option<u64>) -> Result<SignOffResponse, ServiceError> {
        let at_ms = self.now(at_ms)?;
        let handle = self.session(id)?;
        let mut rec = handle.lock();
        Self::require_active(&rec, k)?;
        let product = self.product(&rec, k)?;
        let view_start = rec.products[k].view_start_ms.ok_or(ServiceError::NotViewed(k))?;
        let elapsed_ms = at_ms.saturating_sub(view_start);
        let required_ms = (self.config.min_view_seconds * 1000.0).ceil() as u64;
        if elapsed_ms < required_ms {
            self.commit(
                &mut rec,
                SessionEvent::Rejected {
                    product_index: k,
                    action: "sign_off".into(),
                    reason: "too_fast".into(),
                    at_ms,
                },
            )?;
            return Err(ServiceError::TooFast { elapsed_ms, required_ms });
        }
        let final_values = compose_final(&product.forecast, &rec.products[k].state)
            .into_iter()
            .map(|(_, v)| v)
            .collect();
        let snapshot = SignOffSnapshot {
            model: product.forecast.totals(),
            final_values,
            truth: product.task.truth.clone(),
            ses: product.ses.clone(),
        };
        self.commit(
            &mut rec,
            SessionEvent::SignedOff {
                product_index: k,
                snapshot,
                at_ms,
            },
        )?;
        Ok(SignOffResponse {
            signed_off: rec.signed_off_count(),
            next: rec.stage(),
        })
    }

    pub fn submit_survey(&self, id: &str, req: &SurveyRequest) -> Result<Receipt, ServiceError> {
        let at_ms = self.now(req.at_ms)?;
        let handle = self.session(id)?;
        let mut rec = handle.lock();
        match rec.stage() {
            Stage::Survey => {}
            Stage::Completed => return Err(ServiceError::AlreadyCompleted),
            Stage::Product(_) => {
                return Err(ServiceError::SurveyLocked {
                    signed_off: rec.signed_off_count(),
                    required: rec.products.len(),
                })
            }
        }
        if let Some((i, v)) = req.scores.iter().enumerate().find(|(_, v)| !(1.0..=7.0).contains(*v)) {
            return Err(ServiceError::InvalidRequest(format!("survey item {} is {v}, outside 1..=7", i + 1)));
        }
        self.commit(
            &mut rec,
            SessionEvent::SurveySubmitted {
                scores: req.scores,
                comment: req.comment.clone(),
                at_ms,
            },
        )?;
        Ok(self.receipt(&rec))
    }

    /// Secret key shown to a participant on completion.
    pub fn secret_key(&self, session_id: &str) -> String {
        let digest = Sha256::digest(format!("{}:{session_id}", self.config.secret_salt));
        hex::encode(digest)[..16].to_uppercase()
    }

    fn receipt(&self, rec: &SessionRecord) -> Receipt {
        let products: Vec<ProductAccuracy> = rec
            .products
            .iter()
            .map(|p| {
                let rmae = p.signed_off.as_ref().and_then(|s| {
                    let snap = &s.snapshot;
                    ForecastTriple::new(snap.model.clone(), snap.final_values.clone(), snap.truth.clone())
                        .and_then(|t| rmae(&t))
                        .ok()
                });
                ProductAccuracy {
                    product_id: p.product_id.clone(),
                    rmae,
                    bonus_cents: rmae.map_or(0, bonus_cents),
                }
            })
            .collect();
        let rmaes: Vec<f64> = products.iter().filter_map(|p| p.rmae).collect();
        let total = session_bonus_cents(&rmaes);
        Receipt {
            session_id: rec.id.clone(),
            secret_key: self.secret_key(&rec.id),
            products,
            bonus_cents: total,
            bonus: format_cents(total),
        }
    }

    /// Current state of a session.
    pub fn snapshot(&self, id: &str) -> Result<SessionRecord, ServiceError> {
        Ok(self.session(id)?.lock().clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().keys().cloned().collect()
    }

    /// Per-product result rows rebuilt from the persisted event logs.
    pub fn export(&self, filters: &ExportFilters) -> Result<Vec<ResultRecord>, ServiceError> {
        let logs = self.store.load_all()?;
        let mut records = Vec::with_capacity(logs.len());
        for (id, events) in logs {
            records.push(SessionRecord::replay(&events).map_err(|e| ServiceError::Store(format!("session {id}: {e}")))?);
        }
        Ok(export_sessions(&records, filters))
    }

    pub fn store(&self) -> &dyn EventStore {
        self.store.as_ref()
    }
}
