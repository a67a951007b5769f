use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::assoc::TestKind;
use crate::dsp::PreprocessConfig;
use crate::holter::HolterConfig;
use crate::ingest::{QcRule, DEFAULT_TRIM_EPOCHS};
use crate::model::{TrainConfig, DEFAULT_WINDOW};
use crate::sleepmetrics::OdiConfig;

/// Prefix of environment overrides: `ECGSLEEP__SECTION__KEY=value`.
pub const ENV_PREFIX: &str = "ECGSLEEP__";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub channel: String,
    pub spo2_channel: String,
    /// Alias table overriding the shipped one.
    pub aliases: Option<PathBuf>,
    /// Concept map overriding the shipped one.
    pub concept_map: Option<PathBuf>,
    pub trim_epochs: usize,
    pub qc: QcRule,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            channel: "ECG".into(),
            spo2_channel: "SaO2".into(),
            aliases: None,
            concept_map: None,
            trim_epochs: DEFAULT_TRIM_EPOCHS,
            qc: QcRule::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// A checkpoint trained by this crate.
    Native,
    /// Per-epoch probabilities produced elsewhere.
    External,
    /// Scored stages from the annotation document.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub source: ModelKind,
    pub checkpoint: Option<PathBuf>,
    /// Arousal/respiratory checkpoint; without it event labels come from
    /// annotations when available.
    pub events_checkpoint: Option<PathBuf>,
    pub probabilities: Option<PathBuf>,
    pub window: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            source: ModelKind::Reference,
            checkpoint: None,
            events_checkpoint: None,
            probabilities: None,
            window: DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub split: String,
    pub bootstrap_b: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { split: "standard".into(), bootstrap_b: 1000, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssocConfig {
    pub test: TestKind,
    pub frequent_pvc_per_hour: f64,
    pub frequent_pac_per_hour: f64,
}

impl Default for AssocConfig {
    fn default() -> Self {
        AssocConfig { test: TestKind::MannWhitney, frequent_pvc_per_hour: 21.0, frequent_pac_per_hour: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub output_dir: PathBuf,
    pub html: bool,
    /// Record a wall-clock timestamp in the provenance block.
    pub timestamp: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { output_dir: PathBuf::from("reports"), html: true, timestamp: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Worker threads for recording-level parallelism; 0 picks a default.
    pub workers: usize,
    pub input: InputConfig,
    pub preprocess: PreprocessConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub holter: HolterConfig,
    pub odi: OdiConfig,
    pub eval: EvalConfig,
    pub assoc: AssocConfig,
    pub report: ReportConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let value: toml::Table = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        Self::from_table(value)
    }

    fn from_table(t: toml::Table) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig = t.try_into().map_err(|e: toml::de::Error| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Read `path` (defaults when `None`) and apply environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, PipelineError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        let vars: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        Self::from_toml_with_overrides(&text, &vars)
    }

    /// `overrides` are `(ECGSLEEP__A__B, value)` pairs. Values parse as
    /// TOML scalars or arrays, falling back to a plain string.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self, PipelineError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        for (key, raw) in overrides {
            let Some(rest) = key.strip_prefix(ENV_PREFIX) else { continue };
            let path: Vec<String> = rest.split("__").map(|s| s.to_ascii_lowercase()).collect();
            if path.iter().any(String::is_empty) {
                return Err(PipelineError::Config(format!("malformed override {key}")));
            }
            let value = parse_override(raw);
            let mut node = &mut table;
            for seg in &path[..path.len() - 1] {
                let entry = node.entry(seg.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
                node = entry
                    .as_table_mut()
                    .ok_or_else(|| PipelineError::Config(format!("{key}: '{seg}' is not a section")))?;
            }
            node.insert(path[path.len() - 1].clone(), value);
        }
        Self::from_table(table)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.preprocess.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        crate::eval::SplitRatios::preset(&self.eval.split)
            .ok_or_else(|| PipelineError::Config(format!("unknown split preset '{}'", self.eval.split)))?;
        if self.model.window % 2 == 0 {
            return Err(PipelineError::Config(format!("model.window {} must be odd", self.model.window)));
        }
        if self.eval.bootstrap_b == 0 {
            return Err(PipelineError::Config("eval.bootstrap_b must be positive".into()));
        }
        match self.model.source {
            ModelKind::Native if self.model.checkpoint.is_none() => {
                Err(PipelineError::Config("model.source = native needs model.checkpoint".into()))
            }
            ModelKind::External if self.model.probabilities.is_none() => {
                Err(PipelineError::Config("model.source = external needs model.probabilities".into()))
            }
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn parse_override(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    toml::from_str::<Wrap>(&format!("v = {raw}")).map(|w| w.v).unwrap_or_else(|_| toml::Value::String(raw.to_string()))
}
