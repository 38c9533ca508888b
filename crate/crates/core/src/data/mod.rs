//! Trials, datasets, on-disk formats, splitting, normalization and the
//! synthetic EEG generator.

mod eegf;
mod normalize;
mod split;
mod synthetic;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use eegf::{
    import_csv, load_dataset, load_single_arm, read_eegf, save_dataset, write_eegf,
    SingleArmLayout, EEGF_MAGIC, EEGF_VERSION,
};
pub use normalize::{normalize, ChannelStats, NormalizeWarning};
pub use split::{split_train_test, stratified_folds};
pub use synthetic::{generate_synthetic, ClassPattern, NuisanceSource, SyntheticSpec};

/// One multichannel trial, stored channel-major (`channels × samples`).
#[derive(Clone, Debug, PartialEq)]
pub struct EegTrial {
    n_channels: usize,
    n_samples: usize,
    data: Vec<f64>,
    pub label: usize,
}

impl EegTrial {
    pub fn new(n_channels: usize, n_samples: usize, data: Vec<f64>, label: usize) -> Result<Self> {
        if n_channels == 0 || n_samples == 0 {
            return Err(Error::Data("trial must have at least one channel and sample".into()));
        }
        if data.len() != n_channels * n_samples {
            return Err(Error::dim(
                "EegTrial::new",
                "sample count",
                n_channels * n_samples,
                data.len(),
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite sample at channel {}, index {}",
                i / n_samples,
                i % n_samples
            )));
        }
        Ok(EegTrial {
            n_channels,
            n_samples,
            data,
            label,
        })
    }

    pub fn zeros(n_channels: usize, n_samples: usize, label: usize) -> Self {
        EegTrial {
            n_channels,
            n_samples,
            data: vec![0.0; n_channels * n_samples],
            label,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn channels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_samples)
    }

    /// Applies `f` to every channel in place.
    pub fn map_channels(&self, mut f: impl FnMut(usize, &[f64]) -> Vec<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        for (c, ch) in self.channels().enumerate() {
            data.extend(f(c, ch));
        }
        EegTrial::new(self.n_channels, self.n_samples, data, self.label)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        EegTrial {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// Where a dataset came from; recorded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    File { path: String },
    Synthetic { seed: u64 },
    Derived { from: Box<Provenance>, note: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub trials: Vec<EegTrial>,
    pub class_names: Vec<String>,
    /// Samples per second, when known.
    pub sampling_rate: Option<f64>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(
        trials: Vec<EegTrial>,
        n_classes: usize,
        sampling_rate: Option<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let class_names = (0..n_classes).map(|c| format!("class{c}")).collect();
        let ds = Dataset {
            trials,
            class_names,
            sampling_rate,
            provenance,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(first) = self.trials.first() {
            for (i, t) in self.trials.iter().enumerate() {
                if t.n_channels != first.n_channels || t.n_samples != first.n_samples {
                    return Err(Error::Data(format!(
                        "trial {i} has shape {}x{}, expected {}x{}",
                        t.n_channels, t.n_samples, first.n_channels, first.n_samples
                    )));
                }
                if t.label >= self.n_classes() {
                    return Err(Error::Data(format!(
                        "trial {i} label {} out of range for {} classes",
                        t.label,
                        self.n_classes()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// `(channels, samples)` of the trials, `None` for an empty dataset.
    pub fn trial_shape(&self) -> Option<(usize, usize)> {
        self.trials.first().map(|t| (t.n_channels, t.n_samples))
    }

    pub fn labels(&self) -> Vec<usize> {
        self.trials.iter().map(|t| t.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for t in &self.trials {
            counts[t.label] += 1;
        }
        counts
    }

    /// A dataset holding the trials at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], note: &str) -> Dataset {
        Dataset {
            trials: indices.iter().map(|&i| self.trials[i].clone()).collect(),
            class_names: self.class_names.clone(),
            sampling_rate: self.sampling_rate,
            provenance: Provenance::Derived {
                from: Box::new(self.provenance.clone()),
                note: note.to_string(),
            },
        }
    }

    /// SHA-256 over shape, labels and sample bits; identifies the data
    /// independently of its provenance tag.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_classes() as u64).to_le_bytes());
        h.update((self.trials.len() as u64).to_le_bytes());
        for t in &self.trials {
            h.update((t.n_channels as u64).to_le_bytes());
            h.update((t.n_samples as u64).to_le_bytes());
            h.update((t.label as u64).to_le_bytes());
            for v in &t.data {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex_string(&h.finalize())
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
