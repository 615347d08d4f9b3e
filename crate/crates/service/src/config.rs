use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::treatment::Treatment;
use crate::ServiceError;

/// How treatments are chosen when a request does not name one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatmentMode {
    RoundRobin,
    #[serde(rename = "O")]
    O,
    #[serde(rename = "T")]
    T,
    #[serde(rename = "TA")]
    Ta,
}

impl TreatmentMode {
    pub fn fixed(self) -> Option<Treatment> {
        match self {
            TreatmentMode::RoundRobin => None,
            TreatmentMode::O => Some(Treatment::O),
            TreatmentMode::T => Some(Treatment::T),
            TreatmentMode::Ta => Some(Treatment::TA),
        }
    }
}

/// What to do with a worker who already has a session in another treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplicatePolicy {
    #[default]
    Reject,
    /// Open the session anyway but flag it, so export filters can drop it.
    Flag,
}

/// Source of request timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    #[default]
    System,
    /// Use the `at_ms` the client sends (simulations, replay).
    Client,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    pub products: usize,
    pub days: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Long-format sales file (`product_id,date,sales`).
    pub sales: Option<PathBuf>,
    /// Event calendar (`date,event_1,event_2`).
    pub calendar: Option<PathBuf>,
    /// Generated data, used when no sales file is configured.
    pub synthetic: Option<SyntheticData>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Model specification file; defaults apply when absent.
    pub spec: Option<PathBuf>,
    /// Tuning grid file. When set, each product is tuned by cross-validation.
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    /// Directory for per-session event logs. In-memory when absent.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub port: u16,
    /// Products offered, in assignment order. Empty means every product in
    /// the data.
    pub products: Vec<String>,
    pub products_per_session: usize,
    pub horizon_days: usize,
    pub min_view_seconds: f64,
    /// Upper bound of the weekly fluctuation slider.
    pub max_weeks_shown: usize,
    /// Most recent history days shown in the yearly fluctuation view.
    pub yearly_points_shown: usize,
    pub treatment: TreatmentMode,
    pub duplicates: DuplicatePolicy,
    pub clock: ClockMode,
    /// Mixed into secret keys.
    pub secret_salt: String,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub store: StoreConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 8080,
            products: Vec::new(),
            products_per_session: 3,
            horizon_days: fss_core::data::DEFAULT_HORIZON_DAYS,
            min_view_seconds: 10.0,
            max_weeks_shown: 38,
            yearly_points_shown: 365,
            treatment: TreatmentMode::RoundRobin,
            duplicates: DuplicatePolicy::Reject,
            clock: ClockMode::System,
            secret_salt: "fss".to_string(),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            store: StoreConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ServiceError> {
        toml::from_str(s).map_err(|e| ServiceError::Config(e.to_string()))
    }

    /// Reads a config file; relative data, model and store paths are
    /// resolved against the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.data.sales);
        fix(&mut self.data.calendar);
        fix(&mut self.model.spec);
        fix(&mut self.model.grid);
        fix(&mut self.store.dir);
    }

    /// Applies `FSS_*` environment overrides: `FSS_PORT`, `FSS_SALES`,
    /// `FSS_CALENDAR`, `FSS_STORE_DIR`, `FSS_TREATMENT`, `FSS_CLOCK`,
    /// `FSS_SECRET_SALT`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ServiceError> {
        let bad = |key: &str, v: &str| ServiceError::Config(format!("{key}={v} is not valid"));
        if let Some(v) = get("FSS_PORT") {
            self.port = v.parse().map_err(|_| bad("FSS_PORT", &v))?;
        }
        if let Some(v) = get("FSS_SALES") {
            self.data.sales = Some(v.into());
        }
        if let Some(v) = get("FSS_CALENDAR") {
            self.data.calendar = Some(v.into());
        }
        if let Some(v) = get("FSS_STORE_DIR") {
            self.store.dir = Some(v.into());
        }
        if let Some(v) = get("FSS_TREATMENT") {
            self.treatment = toml::Value::String(v.clone())
                .try_into()
                .map_err(|_| bad("FSS_TREATMENT", &v))?;
        }
        if let Some(v) = get("FSS_CLOCK") {
            self.clock = toml::Value::String(v.clone())
                .try_into()
                .map_err(|_| bad("FSS_CLOCK", &v))?;
        }
        if let Some(v) = get("FSS_SECRET_SALT") {
            self.secret_salt = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let err = |m: &str| Err(ServiceError::Config(m.to_string()));
        if self.products_per_session == 0 {
            return err("products_per_session must be at least 1");
        }
        if self.horizon_days == 0 {
            return err("horizon_days must be at least 1");
        }
        if self.max_weeks_shown == 0 {
            return err("max_weeks_shown must be at least 1");
        }
        if !(self.min_view_seconds >= 0.0) {
            return err("min_view_seconds must be non-negative");
        }
        if self.data.sales.is_none() && self.data.synthetic.is_none() {
            return err("configure data.sales or data.synthetic");
        }
        Ok(())
    }
}
