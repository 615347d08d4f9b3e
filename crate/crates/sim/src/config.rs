use std::path::Path;

use fss_service::config::ClockMode;
use fss_service::{ServiceConfig, Treatment};
use serde::{Deserialize, Serialize};

use crate::policy::JudgePolicy;
use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedPolicy {
    #[serde(default = "one")]
    pub weight: u32,
    pub policy: JudgePolicy,
}

fn one() -> u32 {
    1
}

/// Policy mix per treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyMix {
    #[serde(rename = "O")]
    pub o: Vec<WeightedPolicy>,
    #[serde(rename = "T")]
    pub t: Vec<WeightedPolicy>,
    #[serde(rename = "TA")]
    pub ta: Vec<WeightedPolicy>,
}

impl PolicyMix {
    /// The same policy for every treatment.
    pub fn uniform(policy: JudgePolicy) -> Self {
        let v = vec![WeightedPolicy { weight: 1, policy }];
        PolicyMix {
            o: v.clone(),
            t: v.clone(),
            ta: v,
        }
    }

    pub fn for_treatment(&self, t: Treatment) -> &[WeightedPolicy] {
        match t {
            Treatment::O => &self.o,
            Treatment::T => &self.t,
            Treatment::TA => &self.ta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub agents_per_treatment: usize,
    /// Workers who come back for a second session in the next treatment.
    pub duplicate_workers: usize,
    /// Share of product views that also get a sign-off attempt before the
    /// minimum viewing time.
    pub early_signoff_rate: f64,
    /// Viewing time per product, seconds, `[min, max]`.
    pub dwell_seconds: [f64; 2],
    /// Time spent on the survey, seconds, `[min, max]`.
    pub survey_seconds: [f64; 2],
    pub policies: PolicyMix,
    pub service: ServiceConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 7,
            agents_per_treatment: 10,
            duplicate_workers: 0,
            early_signoff_rate: 0.2,
            dwell_seconds: [12.0, 90.0],
            survey_seconds: [20.0, 120.0],
            policies: PolicyMix::uniform(JudgePolicy::Noop),
            service: ServiceConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, SimError> {
        toml::from_str(s).map_err(|e| SimError::Config(e.to_string()))
    }

    /// Reads the config; the embedded service section resolves relative
    /// paths against the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            let fix = |p: &mut Option<std::path::PathBuf>| {
                if let Some(x) = p {
                    if x.is_relative() {
                        *x = base.join(&*x);
                    }
                }
            };
            fix(&mut cfg.service.data.sales);
            fix(&mut cfg.service.data.calendar);
            fix(&mut cfg.service.model.spec);
            fix(&mut cfg.service.model.grid);
            fix(&mut cfg.service.store.dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        self.service.validate()?;
        if self.service.clock != ClockMode::Client {
            return bad("the simulation needs service.clock = \"client\"");
        }
        if self.agents_per_treatment == 0 {
            return bad("agents_per_treatment must be at least 1");
        }
        if self.duplicate_workers > 3 * self.agents_per_treatment {
            return bad("duplicate_workers exceeds the number of agents");
        }
        if !(0.0..=1.0).contains(&self.early_signoff_rate) {
            return bad("early_signoff_rate must lie in [0, 1]");
        }
        let [lo, hi] = self.dwell_seconds;
        if !(lo >= self.service.min_view_seconds && hi >= lo) {
            return bad("dwell_seconds must be ordered and at least min_view_seconds");
        }
        let [lo, hi] = self.survey_seconds;
        if !(lo >= 0.0 && hi >= lo) {
            return bad("survey_seconds must be ordered and non-negative");
        }
        for t in fss_service::treatment::ALL_TREATMENTS {
            let mix = self.policies.for_treatment(t);
            if mix.iter().all(|w| w.weight == 0) {
                return Err(SimError::Config(format!("treatment {t} has no policy with positive weight")));
            }
            for w in mix {
                w.policy.validate()?;
            }
        }
        Ok(())
    }
}
