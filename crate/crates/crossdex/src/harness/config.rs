//! Experiment configuration: TOML with `[data]`, `[window]`, `[models]`
//! and `[experiment]` sections.

use super::HarnessError;
use crate::models::{ForecasterSpec, ModelKind, Seq2ValTraining, TrainingParams};
use crate::windowing::WindowConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// One input series: symbol plus CSV path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSpec {
    pub symbol: String,
    pub path: PathBuf,
}

/// Fully resolved experiment description. Serialized verbatim into the
/// result artifact so a run is reproducible from its output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub indexes: Vec<IndexSpec>,
    pub models: Vec<ForecasterSpec>,
    pub window: WindowConfig,
    pub seed: u64,
    pub mu_shifts: Vec<f64>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.indexes.is_empty() {
            return Err(HarnessError::Config("at least one index required".into()));
        }
        if self.models.is_empty() {
            return Err(HarnessError::Config("at least one model required".into()));
        }
        let mut symbols: Vec<&str> = self.indexes.iter().map(|i| i.symbol.as_str()).collect();
        symbols.sort_unstable();
        symbols.dedup();
        if symbols.len() != self.indexes.len() {
            return Err(HarnessError::Config("duplicate index symbols".into()));
        }
        self.window.validate()?;
        Ok(())
    }

    /// Parses the TOML file format; serde errors carry field paths.
    pub fn from_toml_path(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&raw)
    }

    pub fn from_toml_str(raw: &str) -> Result<Self, HarnessError> {
        let file: ConfigFile =
            toml::from_str(raw).map_err(|e| HarnessError::Config(e.to_string()))?;
        let cfg = file.build()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    data: DataSection,
    #[serde(default)]
    window: WindowSection,
    models: ModelsSection,
    experiment: ExperimentSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    indexes: Vec<IndexSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowSection {
    input_len: Option<usize>,
    label_len: Option<usize>,
    obs_per_subset: Option<usize>,
    session_len: Option<usize>,
    stride: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelsSection {
    kinds: Vec<ModelKind>,
    epochs: Option<usize>,
    lr: Option<f64>,
    batch_size: Option<usize>,
    /// Per-kind overrides of the normalization default.
    #[serde(default)]
    normalize: BTreeMap<String, bool>,
    seq2val_training: Option<Seq2ValTraining>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    seed: u64,
    mu_shifts: Option<Vec<f64>>,
    output_dir: PathBuf,
}

impl ConfigFile {
    fn build(self) -> Result<ExperimentConfig, HarnessError> {
        let defaults = WindowConfig::default();
        let window = WindowConfig {
            input_len: self.window.input_len.unwrap_or(defaults.input_len),
            label_len: self.window.label_len.unwrap_or(defaults.label_len),
            obs_per_subset: self
                .window
                .obs_per_subset
                .unwrap_or(defaults.obs_per_subset),
            session_len: self.window.session_len.unwrap_or(defaults.session_len),
            stride: self.window.stride.unwrap_or(defaults.stride),
        };

        for key in self.models.normalize.keys() {
            key.parse::<ModelKind>()
                .map_err(|e| HarnessError::Config(format!("models.normalize: {e}")))?;
        }

        let training_defaults = TrainingParams::default();
        let models = self
            .models
            .kinds
            .iter()
            .map(|&kind| {
                let mut spec = ForecasterSpec::new(kind);
                spec.input_len = window.input_len;
                spec.output_len = window.label_len;
                spec.training = TrainingParams {
                    epochs: self.models.epochs.unwrap_or(training_defaults.epochs),
                    lr: self.models.lr.unwrap_or(training_defaults.lr),
                    batch_size: self
                        .models
                        .batch_size
                        .unwrap_or(training_defaults.batch_size),
                };
                if let Some(n) = self.models.normalize.get(kind.name()) {
                    spec.normalize = *n;
                }
                if let Some(mode) = self.models.seq2val_training {
                    spec.seq2val_training = mode;
                }
                spec.seed = self.experiment.seed;
                spec
            })
            .collect();

        Ok(ExperimentConfig {
            indexes: self.data.indexes,
            models,
            window,
            seed: self.experiment.seed,
            mu_shifts: self.experiment.mu_shifts.unwrap_or_else(|| vec![0.0, 0.02]),
            output_dir: self.experiment.output_dir,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[data]
indexes = [
  { symbol = "A", path = "a.csv" },
  { symbol = "B", path = "b.csv" },
]

[models]
kinds = ["ar", "mlp-linear"]
epochs = 50

[experiment]
seed = 42
output_dir = "out"
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.indexes.len(), 2);
        assert_eq!(cfg.models.len(), 2);
        assert_eq!(cfg.models[0].training.epochs, 50);
        assert_eq!(cfg.window.session_len, 120);
        assert_eq!(cfg.mu_shifts, vec![0.0, 0.02]);
        assert!(!cfg.models[0].normalize); // ar default
    }

    #[test]
    fn unknown_fields_are_named_in_the_error() {
        let bad = MINIMAL.replace("seed = 42", "seed = 42\nbogus_field = 1");
        let err = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("bogus_field"), "{err}");
    }

    #[test]
    fn bad_model_kind_is_named() {
        let bad = MINIMAL.replace("\"ar\"", "\"transformer\"");
        let err = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("kinds"), "{err}");
    }

    #[test]
    fn normalize_overrides_apply() {
        let cfg_text = MINIMAL.replace("epochs = 50", "epochs = 50\n[models.normalize]\nar = true");
        let cfg = ExperimentConfig::from_toml_str(&cfg_text).unwrap();
        assert!(cfg.models[0].normalize);
    }

    #[test]
    fn duplicate_symbols_rejected() {
        let bad = MINIMAL.replace("symbol = \"B\"", "symbol = \"A\"");
        let err = ExperimentConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }
}
