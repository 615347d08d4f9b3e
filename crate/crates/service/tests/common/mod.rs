#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use fss_core::gam::ModelSpec;
use fss_core::synth::m5_like_dataset;
use fss_core::Execution;
use fss_service::config::{ClockMode, DuplicatePolicy, SyntheticData};
use fss_service::{Catalog, EventStore, MemoryStore, ServiceConfig, SessionService, SpecChoice};

pub fn catalog() -> Arc<Catalog> {
    static CATALOG: OnceLock<Arc<Catalog>> = OnceLock::new();
    CATALOG
        .get_or_init(|| {
            let data = m5_like_dataset(4, 420, 11);
            let spec = ModelSpec {
                n_changepoints: 10,
                ..ModelSpec::default()
            };
            Arc::new(
                Catalog::build(
                    &data.series,
                    data.calendar,
                    &[],
                    14,
                    &SpecChoice::Fixed(spec),
                    38,
                    365,
                    Execution::default(),
                )
                .unwrap(),
            )
        })
        .clone()
}

pub fn config() -> ServiceConfig {
    ServiceConfig {
        clock: ClockMode::Client,
        data: fss_service::config::DataConfig {
            synthetic: Some(SyntheticData {
                products: 4,
                days: 420,
                seed: 11,
            }),
            ..Default::default()
        },
        ..ServiceConfig::default()
    }
}

pub fn service_with(config: ServiceConfig, store: Box<dyn EventStore>) -> SessionService {
    SessionService::new(config, catalog(), store).unwrap()
}

pub fn service() -> SessionService {
    service_with(config(), Box::new(MemoryStore::new()))
}

pub fn flagging_service() -> SessionService {
    service_with(
        ServiceConfig {
            duplicates: DuplicatePolicy::Flag,
            ..config()
        },
        Box::new(MemoryStore::new()),
    )
}
