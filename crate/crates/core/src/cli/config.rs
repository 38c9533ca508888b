use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineConfig;
use crate::data::{ClassPattern, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 8 channels, 200 samples, small extractors; minutes on a laptop.
    Desk,
    /// 22 channels, 1001 samples, the full architecture.
    #[default]
    Paper,
}

/// Where trials come from: an EEGF file when `path` is set, otherwise the
/// synthetic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    pub path: Option<PathBuf>,
    pub synthetic: SyntheticSpec,
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource {
            path: None,
            synthetic: SyntheticSpec::default(),
        }
    }
}

/// A complete experiment. Precedence when resolving: command-line flags,
/// then the config file, then the profile preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: Profile,
    /// Master seed for splitting, fold assignment and initialization.
    /// `train.seed` is overwritten with it.
    pub seed: u64,
    pub k: usize,
    /// Trials per class held out as the test set.
    pub per_class_test: usize,
    pub parallel_folds: usize,
    pub out: PathBuf,
    pub data: DataSource,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub baseline: BaselineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::preset(Profile::Paper)
    }
}

/// Flag values that override the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub out: Option<PathBuf>,
    pub parallel_folds: Option<usize>,
}

impl ExperimentConfig {
    pub fn preset(profile: Profile) -> Self {
        match profile {
            Profile::Paper => ExperimentConfig {
                profile,
                seed: 0,
                k: 10,
                per_class_test: 10,
                parallel_folds: 1,
                out: PathBuf::from("runs"),
                data: DataSource::default(),
                model: ModelConfig::default(),
                train: TrainConfig::default(),
                baseline: BaselineConfig::default(),
            },
            Profile::Desk => {
                let mut synthetic = SyntheticSpec::new(4, 40, 8, 200, 0);
                synthetic.amplitude = 2.0;
                synthetic.patterns = desk_patterns();
                ExperimentConfig {
                    profile,
                    seed: 0,
                    k: 10,
                    per_class_test: 8,
                    parallel_folds: 1,
                    out: PathBuf::from("runs"),
                    data: DataSource { path: None, synthetic },
                    model: desk_model(),
                    train: TrainConfig {
                        learning_rate: 1e-3,
                        batch_size: 16,
                        max_epochs: 50,
                        patience: 10,
                        ..TrainConfig::default()
                    },
                    baseline: BaselineConfig::default(),
                }
            }
        }
    }

    /// Builds the configuration from a profile, an optional TOML file and
    /// flag overrides, then validates it.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let file_table = match file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let table: toml::Table = text
                    .parse()
                    .map_err(|e: toml::de::Error| Error::config(path.display().to_string(), e.to_string()))?;
                Some(table)
            }
            None => None,
        };
        let profile = match (overrides.profile, file_table.as_ref().and_then(|t| t.get("profile"))) {
            (Some(p), _) => p,
            (None, Some(v)) => Profile::deserialize(v.clone())
                .map_err(|e| Error::config("profile", e.to_string()))?,
            (None, None) => Profile::Paper,
        };
        let mut merged = toml::Value::try_from(ExperimentConfig::preset(profile))
            .map_err(|e| Error::config("<preset>", e.to_string()))?;
        if let Some(table) = file_table {
            merge(&mut merged, toml::Value::Table(table));
        }
        let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.profile = profile;
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(k) = overrides.k {
            cfg.k = k;
        }
        if let Some(out) = &overrides.out {
            cfg.out = out.clone();
        }
        if let Some(n) = overrides.parallel_folds {
            cfg.parallel_folds = n;
        }
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::config("k", format!("{} folds; need at least 2", self.k)));
        }
        if self.per_class_test == 0 {
            return Err(Error::config("per_class_test", "must be positive"));
        }
        if self.parallel_folds == 0 {
            return Err(Error::config("parallel_folds", "must be positive"));
        }
        self.model.validate().map_err(|e| prefix("model", e))?;
        self.train.validate().map_err(|e| prefix("train", e))?;
        self.baseline.validate()?;
        match &self.data.path {
            Some(p) if !p.is_file() => {
                return Err(Error::config("data.path", format!("{} does not exist", p.display())));
            }
            Some(_) => {}
            None => {
                let s = &self.data.synthetic;
                s.validate().map_err(|e| prefix("data.synthetic", e))?;
                for (field, model, data) in [
                    ("model.n_channels", self.model.n_channels, s.n_channels),
                    ("model.n_samples", self.model.n_samples, s.n_samples),
                    ("model.n_classes", self.model.n_classes, s.n_classes),
                ] {
                    if model != data {
                        return Err(Error::config(
                            field,
                            format!("{model} disagrees with the synthetic data ({data})"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is serializable")
    }
}

fn prefix(section: &str, e: Error) -> Error {
    match e {
        Error::Config { field, msg } => Error::config(format!("{section}.{field}"), msg),
        other => other,
    }
}

/// Recursively overlays `over` onto `base`; tables merge, everything else
/// replaces.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// The desk extractors: 16 filters, 25-tap temporal kernel, pooling 30/10,
/// giving 16 × 15 = 240 features per extractor.
pub fn desk_model() -> ModelConfig {
    ModelConfig {
        n_channels: 8,
        n_samples: 200,
        n_classes: 4,
        conv_filters: 16,
        temporal_kernel: 25,
        pool_kernel: 30,
        pool_stride: 10,
        discriminator_hidden: vec![64, 64],
        mlp_hidden: vec![64, 32],
        ..ModelConfig::default()
    }
}

fn desk_patterns() -> Vec<ClassPattern> {
    (0..4)
        .map(|c| ClassPattern {
            channels: vec![2 * c, 2 * c + 1],
            band: (8.0 + 4.0 * c as f64, 12.0 + 4.0 * c as f64),
        })
        .collect()
}
