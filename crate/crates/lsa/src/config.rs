//! Run configuration: a TOML file with one table per module, plus
//! `--key value` overrides from the command line.
//!
//! ```toml
//! [selection]
//! long_k = 32
//!
//! [training]
//! learning_rate = 0.003
//! ```
//!
//! Override keys are either qualified (`training.learning_rate`) or bare
//! (`learning_rate`). A bare key that exists in several tables (`seed`) sets
//! all of them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lsa_core::model::ModelConfig;
use lsa_core::synth::SynthConfig;
use lsa_core::training::TrainConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::io::ReviewFormat;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("configuration key `{key}` expects {expected}, got `{value}`")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config file {0} not found")]
    Missing(PathBuf),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub format: ReviewFormat,
    pub min_freq: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub long_k: usize,
    pub short_n: usize,
    pub window_days: f64,
    pub full_vocabulary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub d: usize,
    pub layers: usize,
    pub heads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorSection {
    pub lambda: f64,
    pub k_fm: usize,
    pub max_union: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub validation_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    /// Share of reviews held out for testing.
    pub test_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusSection,
    pub selection: SelectionSection,
    pub interest_encoders: EncoderSection,
    pub predictor: PredictorSection,
    pub training: TrainingSection,
    pub evaluation: EvaluationSection,
    pub synth: SynthConfig,
}

impl Default for CorpusSection {
    fn default() -> Self {
        RunConfig::from_parts(&TrainConfig::default(), &SynthConfig::default()).corpus
    }
}

impl Default for SelectionSection {
    fn default() -> Self {
        RunConfig::from_parts(&TrainConfig::default(), &SynthConfig::default()).selection
    }
}

impl Default for EncoderSection {
    fn default() -> Self {
        RunConfig::from_parts(&TrainConfig::default(), &SynthConfig::default()).interest_encoders
    }
}

impl Default for PredictorSection {
    fn default() -> Self {
        RunConfig::from_parts(&TrainConfig::default(), &SynthConfig::default()).predictor
    }
}

impl Default for TrainingSection {
    fn default() -> Self {
        RunConfig::from_parts(&TrainConfig::default(), &SynthConfig::default()).training
    }
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection { test_ratio: 0.2 }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_parts(&TrainConfig::default(), &SynthConfig::default())
    }
}

impl RunConfig {
    pub fn from_parts(t: &TrainConfig, synth: &SynthConfig) -> Self {
        let m = &t.model;
        RunConfig {
            corpus: CorpusSection {
                format: ReviewFormat::Auto,
                min_freq: t.min_freq,
            },
            selection: SelectionSection {
                long_k: m.long_k,
                short_n: m.short_n,
                window_days: m.window_days,
                full_vocabulary: m.full_vocabulary,
            },
            interest_encoders: EncoderSection {
                d: m.d,
                layers: m.layers,
                heads: m.heads,
            },
            predictor: PredictorSection {
                lambda: m.lambda,
                k_fm: m.k_fm,
                max_union: m.max_union,
            },
            training: TrainingSection {
                batch_size: t.batch_size,
                learning_rate: t.learning_rate,
                weight_decay: t.weight_decay,
                max_epochs: t.max_epochs,
                patience: t.patience,
                seed: t.seed,
                validation_fraction: t.validation_fraction,
            },
            evaluation: EvaluationSection::default(),
            synth: synth.clone(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            model: ModelConfig {
                d: self.interest_encoders.d,
                layers: self.interest_encoders.layers,
                heads: self.interest_encoders.heads,
                long_k: self.selection.long_k,
                short_n: self.selection.short_n,
                window_days: self.selection.window_days,
                lambda: self.predictor.lambda,
                k_fm: self.predictor.k_fm,
                max_union: self.predictor.max_union,
                full_vocabulary: self.selection.full_vocabulary,
            },
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            max_epochs: t.max_epochs,
            patience: t.patience,
            seed: t.seed,
            min_freq: self.corpus.min_freq,
            validation_fraction: t.validation_fraction,
        }
    }

    /// Sets the training and the generator seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.training.seed = seed;
        self.synth.seed = seed;
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.synth.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let r = self.evaluation.test_ratio;
        if !(r > 0.0 && r < 1.0) {
            return Err(ConfigError::Invalid(format!("evaluation.test_ratio must lie in (0, 1), got {r}")));
        }
        Ok(())
    }

    /// Defaults, then `file`, then `overrides` in order.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut table = defaults_table();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => ConfigError::Missing(path.to_path_buf()),
                _ => ConfigError::Parse {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                },
            })?;
            let given: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
                path: path.to_path_buf(),
                message: e.message().to_string(),
            })?;
            merge_file(&mut table, given)?;
        }
        for (key, value) in overrides {
            apply_override(&mut table, key, value)?;
        }
        let config: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// `section.key → value` for every setting.
    pub fn flatten(&self) -> BTreeMap<String, String> {
        let table = Value::try_from(self).expect("config serializes to TOML");
        let mut out = BTreeMap::new();
        if let Value::Table(sections) = table {
            for (section, body) in sections {
                if let Value::Table(fields) = body {
                    for (k, v) in fields {
                        out.insert(format!("{section}.{k}"), v.to_string());
                    }
                }
            }
        }
        out
    }

    /// Settings that differ from `base`, as `(key, base value, own value)`.
    pub fn diff(&self, base: &RunConfig) -> Vec<(String, String, String)> {
        let ours = self.flatten();
        let theirs = base.flatten();
        ours.into_iter()
            .filter_map(|(k, v)| {
                let b = theirs.get(&k).cloned().unwrap_or_default();
                (b != v).then_some((k, b, v))
            })
            .collect()
    }

    /// Every accepted qualified key.
    pub fn known_keys() -> Vec<String> {
        RunConfig::default().flatten().into_keys().collect()
    }
}

fn defaults_table() -> Table {
    match Value::try_from(RunConfig::default()).expect("defaults serialize") {
        Value::Table(t) => t,
        _ => unreachable!("config is a table"),
    }
}

fn merge_file(table: &mut Table, given: Table) -> Result<(), ConfigError> {
    for (section, body) in given {
        let Some(Value::Table(target)) = table.get_mut(&section) else {
            return Err(ConfigError::UnknownKey(section));
        };
        let Value::Table(fields) = body else {
            return Err(ConfigError::BadValue {
                key: section,
                value: body.to_string(),
                expected: "a table",
            });
        };
        for (k, v) in fields {
            let key = format!("{section}.{k}");
            let Some(default) = target.get(&k) else {
                return Err(ConfigError::UnknownKey(key));
            };
            let v = coerce(&key, default, v)?;
            target.insert(k, v);
        }
    }
    Ok(())
}

/// Integers are accepted where floats are expected; other type changes fail.
fn coerce(key: &str, default: &Value, v: Value) -> Result<Value, ConfigError> {
    match (default, v) {
        (Value::Float(_), Value::Integer(i)) => Ok(Value::Float(i as f64)),
        (d, v) if d.same_type(&v) => Ok(v),
        (d, v) => Err(ConfigError::BadValue {
            key: key.to_string(),
            value: v.to_string(),
            expected: d.type_str(),
        }),
    }
}

fn apply_override(table: &mut Table, key: &str, raw: &str) -> Result<(), ConfigError> {
    let key = key.replace('-', "_");
    let targets: Vec<(String, String)> = match key.split_once('.') {
        Some((s, f)) => vec![(s.to_string(), f.to_string())],
        None => table
            .iter()
            .filter(|(_, body)| body.as_table().is_some_and(|t| t.contains_key(&key)))
            .map(|(s, _)| (s.clone(), key.clone()))
            .collect(),
    };
    if targets.is_empty() {
        return Err(ConfigError::UnknownKey(key));
    }
    for (section, field) in targets {
        let qualified = format!("{section}.{field}");
        let slot = table
            .get_mut(&section)
            .and_then(Value::as_table_mut)
            .and_then(|t| t.get_mut(&field))
            .ok_or_else(|| ConfigError::UnknownKey(qualified.clone()))?;
        *slot = parse_like(&qualified, slot, raw)?;
    }
    Ok(())
}

fn parse_like(key: &str, default: &Value, raw: &str) -> Result<Value, ConfigError> {
    let bad = || ConfigError::BadValue {
        key: key.to_string(),
        value: raw.to_string(),
        expected: default.type_str(),
    };
    Ok(match default {
        Value::Integer(_) => Value::Integer(raw.parse().map_err(|_| bad())?),
        Value::Float(_) => Value::Float(raw.parse().map_err(|_| bad())?),
        Value::Boolean(_) => Value::Boolean(raw.parse().map_err(|_| bad())?),
        Value::String(_) => Value::String(raw.to_string()),
        _ => return Err(bad()),
    })
}
