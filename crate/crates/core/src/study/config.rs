//! Study configuration, read from a TOML file.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::sha256_hex;
use crate::mcmc::McmcConfig;
use crate::model::{ModelId, StateSpace};
use crate::simulate::{scaled_scenarios, scenario_table, Scenario, SexReveal, SurveyDesign};

/// Source table for scenario ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSet {
    /// The twelve full-scale scenarios.
    Standard,
    /// The two desk-scale analogs (1 = low, 2 = high information).
    Scaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub buffer: f64,
    /// Trap columns and rows.
    pub traps: [usize; 2],
    pub occasions: usize,
    pub grid_resolution: f64,
}

impl DesignConfig {
    pub fn scaled() -> Self {
        DesignConfig {
            x: [0.0, 2.5],
            y: [0.0, 3.5],
            buffer: 0.5,
            traps: [4, 6],
            occasions: 10,
            grid_resolution: 0.125,
        }
    }

    pub fn standard() -> Self {
        DesignConfig {
            x: [0.0, 5.0],
            y: [0.0, 7.0],
            buffer: 1.0,
            traps: [10, 16],
            occasions: 50,
            grid_resolution: 0.25,
        }
    }

    pub fn build(&self) -> Result<SurveyDesign> {
        let ss = StateSpace::new((self.x[0], self.x[1]), (self.y[0], self.y[1]), self.grid_resolution)?;
        ss.grid()?;
        SurveyDesign::regular(ss, self.buffer, self.traps[0], self.traps[1], self.occasions)
    }
}

fn default_models() -> Vec<ModelId> {
    ModelId::ALL.to_vec()
}

fn default_thin() -> usize {
    crate::criteria::PPL_THIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub master_seed: u64,
    pub n_sim: usize,
    pub scenario_set: ScenarioSet,
    pub scenarios: Vec<u32>,
    /// Overrides the augmentation bound of the chosen scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelId>,
    #[serde(default = "default_thin")]
    pub ppl_thin: usize,
    #[serde(default)]
    pub sex_reveal: SexReveal,
    pub design: DesignConfig,
    /// Sampler settings; the seed is replaced per chain.
    pub mcmc: McmcConfig,
}

impl StudyConfig {
    /// Desk-scale study: two scenario analogs, five replicates.
    pub fn scaled(master_seed: u64) -> Self {
        StudyConfig {
            master_seed,
            n_sim: 5,
            scenario_set: ScenarioSet::Scaled,
            scenarios: vec![1, 2],
            m: None,
            models: default_models(),
            ppl_thin: default_thin(),
            sex_reveal: SexReveal::AllCaptured,
            design: DesignConfig::scaled(),
            mcmc: McmcConfig {
                n_iter: 5000,
                burn_in: 1500,
                ..Default::default()
            },
        }
    }

    /// Full-scale study: twelve scenarios, ten replicates, 30000 iterations.
    pub fn standard(master_seed: u64) -> Self {
        StudyConfig {
            master_seed,
            n_sim: 10,
            scenario_set: ScenarioSet::Standard,
            scenarios: (1..=12).collect(),
            m: None,
            models: default_models(),
            ppl_thin: default_thin(),
            sex_reveal: SexReveal::AllCaptured,
            design: DesignConfig::standard(),
            mcmc: McmcConfig {
                n_iter: 30_000,
                burn_in: 10_000,
                ..Default::default()
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::parse("study config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("study config serialises")
    }

    /// Hash of the canonical serialisation.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sim == 0 {
            return Err(Error::arg("n_sim must be at least 1"));
        }
        if self.scenarios.is_empty() {
            return Err(Error::arg("no scenarios selected"));
        }
        if self.models.is_empty() {
            return Err(Error::arg("no models selected"));
        }
        if self.ppl_thin == 0 {
            return Err(Error::arg("ppl_thin must be at least 1"));
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return Err(Error::arg("models listed twice"));
        }
        self.mcmc.validate()?;
        if self.mcmc.validation.is_active() {
            return Err(Error::arg("validation modes are not allowed in a study"));
        }
        self.design.build()?;
        self.scenario_list()?;
        Ok(())
    }

    pub fn scenario_list(&self) -> Result<Vec<Scenario>> {
        let table = match self.scenario_set {
            ScenarioSet::Standard => scenario_table(),
            ScenarioSet::Scaled => scaled_scenarios(),
        };
        self.scenarios
            .iter()
            .map(|&id| {
                let mut sc = *table
                    .iter()
                    .find(|s| s.id == id)
                    .ok_or_else(|| Error::arg(format!("no scenario {id} in the {:?} set", self.scenario_set)))?;
                if let Some(m) = self.m {
                    sc.m = m;
                }
                sc.validate()?;
                Ok(sc)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = StudyConfig::scaled(42);
        let back = StudyConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = StudyConfig::scaled(1);
        cfg.design.occasions = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = StudyConfig::scaled(1);
        cfg.scenarios = vec![7];
        assert!(cfg.validate().is_err());
        let text = format!("bogus = 1\n{}", StudyConfig::scaled(1).to_toml());
        assert!(StudyConfig::from_toml(&text).is_err());
    }

    #[test]
    fn presets_match_the_designs() {
        let a = DesignConfig::scaled().build().unwrap();
        assert_eq!(a, crate::simulate::scaled_design());
        let b = DesignConfig::standard().build().unwrap();
        assert_eq!(b, crate::simulate::standard_design());
    }
}
