use fss_core::adjust::{AdjustmentState, Edit};
use serde::{Deserialize, Serialize};

use crate::treatment::Treatment;

/// What a participant saw and submitted when signing off one product.
/// Stored in the log so results can be recomputed from it alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignOffSnapshot {
    pub model: Vec<f64>,
    pub final_values: Vec<f64>,
    pub truth: Vec<f64>,
    /// Benchmark forecast for the model-vs-SES comparison.
    pub ses: Vec<f64>,
}

/// One entry of a session's append-only log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        worker_id: String,
        treatment: Treatment,
        products: Vec<String>,
        duplicate: bool,
        at_ms: u64,
    },
    Viewed {
        product_index: usize,
        at_ms: u64,
    },
    /// An accepted edit together with the resulting state.
    Adjusted {
        product_index: usize,
        edit: Edit,
        state: AdjustmentState,
        at_ms: u64,
    },
    /// A refused sign-off or edit, kept for the interaction history.
    Rejected {
        product_index: usize,
        action: String,
        reason: String,
        at_ms: u64,
    },
    SignedOff {
        product_index: usize,
        snapshot: SignOffSnapshot,
        at_ms: u64,
    },
    SurveySubmitted {
        scores: [f64; 5],
        comment: String,
        at_ms: u64,
    },
}

impl SessionEvent {
    pub fn at_ms(&self) -> u64 {
        match self {
            SessionEvent::Created { at_ms, .. }
            | SessionEvent::Viewed { at_ms, .. }
            | SessionEvent::Adjusted { at_ms, .. }
            | SessionEvent::Rejected { at_ms, .. }
            | SessionEvent::SignedOff { at_ms, .. }
            | SessionEvent::SurveySubmitted { at_ms, .. } => *at_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignOff {
    pub at_ms: u64,
    pub snapshot: SignOffSnapshot,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProductProgress {
    pub product_id: String,
    pub state: AdjustmentState,
    /// First view of the product while it was active.
    pub view_start_ms: Option<u64>,
    pub signed_off: Option<SignOff>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Survey {
    pub scores: [f64; 5],
    pub comment: String,
    pub at_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "stage", content = "product_index", rename_all = "snake_case")]
pub enum Stage {
    Product(usize),
    Survey,
    Completed,
}

/// A session as derived from its event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub worker_id: String,
    pub treatment: Treatment,
    pub duplicate: bool,
    pub created_ms: u64,
    pub products: Vec<ProductProgress>,
    pub survey: Option<Survey>,
    pub events: Vec<SessionEvent>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("log does not start with a created event")]
    MissingCreated,
    #[error("event {index} is inconsistent with the session: {reason}")]
    Inconsistent { index: usize, reason: String },
}

impl SessionRecord {
    pub fn from_created(event: &SessionEvent) -> Option<Self> {
        match event {
            SessionEvent::Created {
                session_id,
                worker_id,
                treatment,
                products,
                duplicate,
                at_ms,
            } => Some(SessionRecord {
                id: session_id.clone(),
                worker_id: worker_id.clone(),
                treatment: *treatment,
                duplicate: *duplicate,
                created_ms: *at_ms,
                products: products
                    .iter()
                    .map(|p| ProductProgress {
                        product_id: p.clone(),
                        ..Default::default()
                    })
                    .collect(),
                survey: None,
                events: vec![event.clone()],
            }),
            _ => None,
        }
    }

    /// Rebuilds a session from its log, checking the ordering rules.
    pub fn replay(events: &[SessionEvent]) -> Result<Self, ReplayError> {
        let first = events.first().ok_or(ReplayError::MissingCreated)?;
        let mut rec = Self::from_created(first).ok_or(ReplayError::MissingCreated)?;
        for (i, e) in events.iter().enumerate().skip(1) {
            rec.check(e)
                .map_err(|reason| ReplayError::Inconsistent { index: i, reason })?;
            rec.apply(e.clone());
        }
        Ok(rec)
    }

    pub fn stage(&self) -> Stage {
        match self.products.iter().position(|p| p.signed_off.is_none()) {
            Some(k) => Stage::Product(k),
            None if self.survey.is_some() => Stage::Completed,
            None => Stage::Survey,
        }
    }

    pub fn signed_off_count(&self) -> usize {
        self.products.iter().filter(|p| p.signed_off.is_some()).count()
    }

    pub fn completed_ms(&self) -> Option<u64> {
        self.survey.as_ref().map(|s| s.at_ms)
    }

    /// Checks that `event` may follow the current state.
    pub fn check(&self, event: &SessionEvent) -> Result<(), String> {
        let active = |k: usize| -> Result<(), String> {
            match self.stage() {
                Stage::Product(a) if a == k => Ok(()),
                s => Err(format!("product {k} is not active ({s:?})")),
            }
        };
        match event {
            SessionEvent::Created { .. } => Err("session already created".into()),
            SessionEvent::Viewed { product_index, .. } | SessionEvent::Adjusted { product_index, .. } => {
                active(*product_index)
            }
            SessionEvent::Rejected { .. } => Ok(()),
            SessionEvent::SignedOff { product_index, .. } => {
                active(*product_index)?;
                if self.products[*product_index].view_start_ms.is_none() {
                    return Err("product signed off before it was viewed".into());
                }
                Ok(())
            }
            SessionEvent::SurveySubmitted { .. } => match self.stage() {
                Stage::Survey => Ok(()),
                s => Err(format!("survey not open ({s:?})")),
            },
        }
    }

    /// Applies an event already known to be valid.
    pub fn apply(&mut self, event: SessionEvent) {
        match &event {
            SessionEvent::Created { .. } | SessionEvent::Rejected { .. } => {}
            SessionEvent::Viewed { product_index, at_ms } => {
                let p = &mut self.products[*product_index];
                p.view_start_ms.get_or_insert(*at_ms);
            }
            SessionEvent::Adjusted { product_index, state, .. } => {
                self.products[*product_index].state = state.clone();
            }
            SessionEvent::SignedOff {
                product_index,
                snapshot,
                at_ms,
            } => {
                self.products[*product_index].signed_off = Some(SignOff {
                    at_ms: *at_ms,
                    snapshot: snapshot.clone(),
                });
            }
            SessionEvent::SurveySubmitted { scores, comment, at_ms } => {
                self.survey = Some(Survey {
                    scores: *scores,
                    comment: comment.clone(),
                    at_ms: *at_ms,
                });
            }
        }
        self.events.push(event);
    }
}
