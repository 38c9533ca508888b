use serde::{Deserialize, Serialize};

use super::{Dataset, EegTrial};
use crate::error::{Error, Result};

/// Floor applied to a channel's standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizeWarning {
    pub channel: usize,
    pub std: f64,
}

impl ChannelStats {
    /// Per-channel mean and population standard deviation over every sample
    /// of every trial.
    pub fn fit(ds: &Dataset) -> Result<(Self, Vec<NormalizeWarning>)> {
        let (channels, samples) = ds
            .trial_shape()
            .ok_or_else(|| Error::Data("cannot fit channel statistics on an empty dataset".into()))?;
        let count = (ds.len() * samples) as f64;
        let mut mean = vec![0.0; channels];
        for t in &ds.trials {
            for (c, ch) in t.channels().enumerate() {
                mean[c] += ch.iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; channels];
        for t in &ds.trials {
            for (c, ch) in t.channels().enumerate() {
                var[c] += ch.iter().map(|v| (v - mean[c]).powi(2)).sum::<f64>();
            }
        }
        let mut warnings = Vec::new();
        let std = var
            .into_iter()
            .enumerate()
            .map(|(c, v)| {
                let s = (v / count).sqrt();
                if s < STD_FLOOR {
                    log::warn!("channel {c} has near-zero variance (std {s:e}); flooring to {STD_FLOOR:e}");
                    warnings.push(NormalizeWarning { channel: c, std: s });
                    STD_FLOOR
                } else {
                    s
                }
            })
            .collect();
        Ok((ChannelStats { mean, std }, warnings))
    }

    pub fn apply_trial(&self, t: &EegTrial) -> Result<EegTrial> {
        if t.n_channels() != self.mean.len() {
            return Err(Error::dim("normalize", "channels", self.mean.len(), t.n_channels()));
        }
        t.map_channels(|c, ch| ch.iter().map(|v| (v - self.mean[c]) / self.std[c]).collect())
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let trials = ds
            .trials
            .iter()
            .map(|t| self.apply_trial(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            trials,
            ..ds.clone()
        })
    }
}

/// Z-scores `train` with its own statistics; the returned stats are reused on
/// held-out data via [`ChannelStats::apply`].
pub fn normalize(train: &Dataset) -> Result<(Dataset, ChannelStats, Vec<NormalizeWarning>)> {
    let (stats, warnings) = ChannelStats::fit(train)?;
    Ok((stats.apply(train)?, stats, warnings))
}
