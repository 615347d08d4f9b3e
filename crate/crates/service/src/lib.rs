//! Experiment session service: assigns treatments, serves treatment-filtered
//! forecast views, takes adjustments and sign-offs, records surveys and
//! exports per-product results. Every session is an append-only event log.

pub mod catalog;
pub mod config;
pub mod export;
pub mod http;
pub mod service;
pub mod session;
pub mod store;
pub mod treatment;
pub mod view;

pub use catalog::{Catalog, Product, SpecChoice};
pub use config::ServiceConfig;
pub use service::SessionService;
pub use session::{SessionEvent, SessionRecord, Stage};
pub use store::{EventStore, FileStore, MemoryStore};
pub use treatment::Treatment;

use fss_core::adjust::AdjustError;
use fss_core::data::DataError;
use fss_core::gam::ModelError;
use fss_core::metrics::MetricError;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Adjust(#[from] AdjustError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("store: {0}")]
    Store(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("worker {worker_id} already took part in treatment {existing}")]
    Duplicate { worker_id: String, existing: Treatment },
    #[error("session has no product {0}")]
    UnknownProduct(usize),
    #[error("product {requested} is not the active step ({stage:?})")]
    OutOfOrder { requested: usize, stage: Stage },
    #[error("product {0} was signed off before")]
    AlreadySignedOff(usize),
    #[error("product {0} must be viewed before signing off")]
    NotViewed(usize),
    #[error("signed off after {elapsed_ms} ms, at least {required_ms} ms required")]
    TooFast { elapsed_ms: u64, required_ms: u64 },
    #[error("treatment {treatment} does not allow {action} edits")]
    TreatmentViolation { treatment: Treatment, action: String },
    #[error("survey opens after all {required} sign-offs ({signed_off} so far)")]
    SurveyLocked { signed_off: usize, required: usize },
    #[error("session already completed")]
    AlreadyCompleted,
}

impl ServiceError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Config(_) => "config",
            ServiceError::Data(_) => "data",
            ServiceError::Model(_) => "model",
            ServiceError::Adjust(_) => "invalid_edit",
            ServiceError::Metric(_) => "metric",
            ServiceError::Store(_) => "store",
            ServiceError::InvalidRequest(_) => "invalid_request",
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::Duplicate { .. } => "duplicate",
            ServiceError::UnknownProduct(_) => "unknown_product",
            ServiceError::OutOfOrder { .. } => "out_of_order",
            ServiceError::AlreadySignedOff(_) => "already_signed_off",
            ServiceError::NotViewed(_) => "not_viewed",
            ServiceError::TooFast { .. } => "too_fast",
            ServiceError::TreatmentViolation { .. } => "treatment_violation",
            ServiceError::SurveyLocked { .. } => "survey_locked",
            ServiceError::AlreadyCompleted => "already_completed",
        }
    }
}
