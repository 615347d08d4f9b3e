//! Simulated judges for the forecasting support system. Each agent runs a
//! full session through the service's HTTP interface and adjusts forecasts
//! according to a bias policy.

pub mod config;
pub mod harness;
pub mod policy;

pub use config::{PolicyMix, SimConfig, WeightedPolicy};
pub use harness::{plan_agents, plan_edit, run, run_with_catalog, AgentOutcome, AgentPlan, SimRun};
pub use policy::JudgePolicy;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Service(#[from] fss_service::ServiceError),
    #[error(transparent)]
    Metric(#[from] fss_core::metrics::MetricError),
    #[error("{method} {uri} returned {status}: {body}")]
    Http {
        method: String,
        uri: String,
        status: u16,
        body: String,
    },
    #[error("harness: {0}")]
    Harness(String),
    #[error("pipeline integrity: {0}")]
    Integrity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
