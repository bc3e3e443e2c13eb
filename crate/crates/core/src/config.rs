use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub temperature: f64,
    /// Fraction of a candidate's cells that must differ from every stored level.
    pub novelty_fraction: f64,
    pub gen_per_round: usize,
    pub repair_per_round: usize,
    pub stage1_epochs: u32,
    pub stage2_epochs: u32,
    pub stage2_rounds: usize,
    pub stage1_target_new: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            temperature: 0.4,
            novelty_fraction: 0.10,
            gen_per_round: 100,
            repair_per_round: 10,
            stage1_epochs: 5,
            stage2_epochs: 2,
            stage2_rounds: 5,
            stage1_target_new: 60,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("novelty fraction {0} is outside (0, 1]")]
    NoveltyFraction(f64),
    #[error("temperature {0} is negative")]
    Temperature(f64),
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.novelty_fraction > 0.0 && self.novelty_fraction <= 1.0) {
            return Err(ConfigError::NoveltyFraction(self.novelty_fraction));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(ConfigError::Temperature(self.temperature));
        }
        let counts = [
            ("gen_per_round", self.gen_per_round),
            ("repair_per_round", self.repair_per_round),
            ("stage1_epochs", self.stage1_epochs as usize),
            ("stage2_epochs", self.stage2_epochs as usize),
            ("stage2_rounds", self.stage2_rounds),
            ("stage1_target_new", self.stage1_target_new),
        ];
        match counts.iter().find(|(_, n)| *n == 0) {
            Some((name, _)) => Err(ConfigError::NotPositive(name)),
            None => Ok(()),
        }
    }
}
