//! Zero-phase band-pass filtering by a frequency-domain mask.
//!
//! Each channel is reflect-padded, transformed, multiplied by a real mask
//! that is 1 on the passband and falls to 0 through a raised-cosine edge,
//! and transformed back. A real mask has no phase, so the filter is
//! zero-phase.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::data::EegTrial;
use crate::error::{Error, Result};

/// Passband `[low, high]` in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

impl Band {
    pub fn new(low: f64, high: f64) -> Self {
        Band { low, high }
    }

    pub fn validate(&self, sampling_rate: f64) -> Result<()> {
        let nyquist = sampling_rate / 2.0;
        if !(self.low.is_finite() && self.high.is_finite()) || self.low <= 0.0 || self.high <= self.low {
            return Err(Error::config(
                "band",
                format!("[{}, {}] Hz must satisfy 0 < low < high", self.low, self.high),
            ));
        }
        if self.high >= nyquist {
            return Err(Error::config(
                "band",
                format!("[{}, {}] Hz reaches the Nyquist frequency {nyquist} Hz", self.low, self.high),
            ));
        }
        Ok(())
    }
}

/// Mask design parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterDesign {
    /// Width of each raised-cosine edge outside the passband, in Hz. The lower
    /// edge is narrowed to at most a quarter of the low cutoff.
    pub transition_hz: f64,
}

impl Default for FilterDesign {
    fn default() -> Self {
        FilterDesign { transition_hz: 2.0 }
    }
}

/// Mask gain at frequency `f`.
pub fn mask_gain(f: f64, band: Band, design: FilterDesign) -> f64 {
    let f = f.abs();
    let tw_low = design.transition_hz.min(band.low / 4.0);
    let tw_high = design.transition_hz;
    if f >= band.low && f <= band.high {
        1.0
    } else if f < band.low && f > band.low - tw_low {
        0.5 * (1.0 + (PI * (band.low - f) / tw_low).cos())
    } else if f > band.high && f < band.high + tw_high {
        0.5 * (1.0 + (PI * (f - band.high) / tw_high).cos())
    } else {
        0.0
    }
}

/// A band-pass prepared for one signal length and sampling rate.
#[derive(Clone)]
pub struct Bandpass {
    pub band: Band,
    pub sampling_rate: f64,
    n: usize,
    pad: usize,
    mask: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Bandpass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Bandpass")
            .field("band", &self.band)
            .field("sampling_rate", &self.sampling_rate)
            .field("n", &self.n)
            .finish()
    }
}

impl Bandpass {
    pub fn new(band: Band, sampling_rate: f64, n_samples: usize, design: FilterDesign) -> Result<Self> {
        band.validate(sampling_rate)?;
        if !(design.transition_hz > 0.0) {
            return Err(Error::config("transition_hz", "must be positive"));
        }
        if n_samples == 0 {
            return Err(Error::Data("cannot filter an empty signal".into()));
        }
        let pad = n_samples - 1;
        let len = n_samples + 2 * pad;
        let mask = (0..len)
            .map(|k| {
                let bin = if k <= len / 2 { k as f64 } else { k as f64 - len as f64 };
                mask_gain(bin * sampling_rate / len as f64, band, design)
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Bandpass {
            band,
            sampling_rate,
            n: n_samples,
            pad,
            mask,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::dim("bandpass", "samples", self.n, x.len()));
        }
        let len = self.mask.len();
        // Reflection without repeating the edge sample: x[p], …, x[1], x, x[n−2], …
        let (n, pad) = (self.n, self.pad);
        let mut buf: Vec<Complex<f64>> = Vec::with_capacity(len);
        buf.extend((1..=pad).rev().map(|i| Complex::new(x[i], 0.0)));
        buf.extend(x.iter().map(|&v| Complex::new(v, 0.0)));
        buf.extend((0..pad).map(|i| Complex::new(x[n - 2 - i], 0.0)));
        self.forward.process(&mut buf);
        for (b, m) in buf.iter_mut().zip(&self.mask) {
            *b *= m;
        }
        self.inverse.process(&mut buf);
        let norm = 1.0 / len as f64;
        Ok(buf[self.pad..self.pad + self.n].iter().map(|c| c.re * norm).collect())
    }

    pub fn apply_trial(&self, trial: &EegTrial) -> Result<EegTrial> {
        let mut err = None;
        let out = trial.map_channels(|_, ch| match self.apply(ch) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                vec![0.0; ch.len()]
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }
}

/// One-shot band-pass of a single signal.
pub fn bandpass(x: &[f64], band: Band, sampling_rate: f64, design: FilterDesign) -> Result<Vec<f64>> {
    Bandpass::new(band, sampling_rate, x.len(), design)?.apply(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterBank {
    pub bands: Vec<Band>,
    pub design: FilterDesign,
}

impl Default for FilterBank {
    /// 4–40 Hz in 4 Hz steps: nine bands.
    fn default() -> Self {
        FilterBank::uniform(4.0, 40.0, 4.0)
    }
}

impl FilterBank {
    pub fn uniform(low: f64, high: f64, step: f64) -> Self {
        let n = ((high - low) / step).round().max(0.0) as usize;
        FilterBank {
            bands: (0..n)
                .map(|i| Band::new(low + step * i as f64, low + step * (i + 1) as f64))
                .collect(),
            design: FilterDesign::default(),
        }
    }

    pub fn validate(&self, sampling_rate: f64) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::config("bank.bands", "filter bank is empty"));
        }
        for (i, b) in self.bands.iter().enumerate() {
            b.validate(sampling_rate)
                .map_err(|e| Error::config(format!("bank.bands[{i}]"), e.to_string()))?;
        }
        Ok(())
    }

    pub fn prepare(&self, sampling_rate: f64, n_samples: usize) -> Result<Vec<Bandpass>> {
        self.validate(sampling_rate)?;
        self.bands
            .iter()
            .map(|&b| Bandpass::new(b, sampling_rate, n_samples, self.design))
            .collect()
    }
}
