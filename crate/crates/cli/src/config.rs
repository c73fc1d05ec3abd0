//! Campaign configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use morlot::env::{EnvKind, LaneSimConfig};
use morlot::{Approach, LearnParams, SearchParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One campaign: every approach run once per seed on one environment.
///
/// Every field has a default, so `{}` is a valid configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub env_id: String,
    pub approaches: Vec<Approach>,
    pub seeds: Vec<u64>,
    pub budget_steps: u64,
    pub sample_interval_steps: u64,
    pub learn_params: LearnParams<f64>,
    pub search_params: SearchParams,
    /// Overrides for the LaneSim environment; ignored by other environments.
    pub lanesim: LaneSimConfig,
    /// Let MORLOT replace archived test cases of covered objectives with
    /// shorter ones found later.
    pub recheck_covered: bool,
    pub output_dir: PathBuf,
    /// Write a line-delimited JSON step trace per MORLOT run.
    pub trace: bool,
    /// Record wall-clock time in results.csv. With this off the `wall_ms`
    /// column is 0 and reruns produce byte-identical files.
    pub wall_clock: bool,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            env_id: "lanesim:straight".into(),
            approaches: Approach::ALL.to_vec(),
            seeds: (0..10).collect(),
            budget_steps: 200_000,
            sample_interval_steps: 20_000,
            learn_params: LearnParams::default(),
            search_params: SearchParams::default(),
            lanesim: LaneSimConfig::default(),
            recheck_covered: true,
            output_dir: PathBuf::from("morlot-out"),
            trace: false,
            wall_clock: true,
            workers: 0,
        }
    }
}

impl CampaignConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        EnvKind::parse(&self.env_id).map_err(|e| CliError::Config(e.to_string()))?;
        if self.approaches.is_empty() {
            return bad("no approaches given".into());
        }
        if self.approaches.iter().collect::<BTreeSet<_>>().len() != self.approaches.len() {
            return bad("approaches must be distinct".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds given".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.budget_steps == 0 {
            return bad("budget_steps must be positive".into());
        }
        if self.sample_interval_steps == 0 || self.sample_interval_steps > self.budget_steps {
            return bad(format!(
                "sample_interval_steps = {} must lie in [1, budget_steps = {}]",
                self.sample_interval_steps, self.budget_steps
            ));
        }
        self.learn_params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.search_params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.lanesim.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// Shifts every seed by `offset`.
    pub fn offset_seeds(&mut self, offset: u64) -> Result<(), CliError> {
        for s in &mut self.seeds {
            *s = s
                .checked_add(offset)
                .ok_or_else(|| CliError::Config(format!("seed {s} + {offset} overflows")))?;
        }
        Ok(())
    }
}
