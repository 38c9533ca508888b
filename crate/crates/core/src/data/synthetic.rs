//! Synthetic motor-imagery-like trials with known class structure.
//!
//! Each trial is white Gaussian background plus one band-limited burst on the
//! class's active channels: a sinusoid with a frequency drawn from the class
//! band, random phase, and a Hann envelope over a random window covering
//! 60-100% of the trial. Optional nuisance sources add class-independent
//! oscillations with random per-channel power, which makes broadband spatial
//! statistics uninformative while leaving the class band intact.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, EegTrial, Provenance};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassPattern {
    pub channels: Vec<usize>,
    /// Passband in Hz.
    pub band: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuisanceSource {
    pub band: (f64, f64),
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub trials_per_class: usize,
    pub n_channels: usize,
    pub n_samples: usize,
    pub sampling_rate: f64,
    /// One entry per class; empty means [`SyntheticSpec::default_patterns`].
    pub patterns: Vec<ClassPattern>,
    pub amplitude: f64,
    pub noise_amplitude: f64,
    pub nuisance: Vec<NuisanceSource>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_classes: 4,
            trials_per_class: 50,
            n_channels: 22,
            n_samples: 1001,
            sampling_rate: 250.0,
            patterns: Vec::new(),
            amplitude: 1.0,
            noise_amplitude: 1.0,
            nuisance: Vec::new(),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn new(n_classes: usize, trials_per_class: usize, n_channels: usize, n_samples: usize, seed: u64) -> Self {
        SyntheticSpec {
            n_classes,
            trials_per_class,
            n_channels,
            n_samples,
            seed,
            ..Default::default()
        }
    }

    /// Class `c` drives a contiguous block of `max(1, channels / classes)`
    /// channels in its own 4 Hz band starting at 8 Hz (narrower bands if the
    /// classes would not fit below 80% of Nyquist).
    pub fn default_patterns(&self) -> Vec<ClassPattern> {
        let k = self.n_classes.max(1);
        let block = (self.n_channels / k).max(1);
        let top = 0.8 * self.sampling_rate / 2.0;
        let width = (4.0f64).min((top - 8.0) / k as f64);
        (0..k)
            .map(|c| {
                let start = (c * block) % self.n_channels.max(1);
                let channels = (start..start + block).map(|ch| ch % self.n_channels.max(1)).collect();
                let lo = 8.0 + width * c as f64;
                ClassPattern {
                    channels,
                    band: (lo, lo + width),
                }
            })
            .collect()
    }

    pub fn resolved_patterns(&self) -> Vec<ClassPattern> {
        if self.patterns.is_empty() {
            self.default_patterns()
        } else {
            self.patterns.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_classes", self.n_classes),
            ("trials_per_class", self.trials_per_class),
            ("n_channels", self.n_channels),
            ("n_samples", self.n_samples),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if !(self.sampling_rate > 0.0 && self.sampling_rate.is_finite()) {
            return Err(Error::config("sampling_rate", "must be positive and finite"));
        }
        for (field, v) in [("amplitude", self.amplitude), ("noise_amplitude", self.noise_amplitude)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be finite and non-negative"));
            }
        }
        let nyquist = self.sampling_rate / 2.0;
        let check_band = |field: String, (lo, hi): (f64, f64)| {
            if !(lo > 0.0 && lo < hi && hi < nyquist) {
                Err(Error::config(
                    field,
                    format!("band ({lo}, {hi}) Hz must satisfy 0 < lo < hi < Nyquist ({nyquist} Hz)"),
                ))
            } else {
                Ok(())
            }
        };
        let patterns = self.resolved_patterns();
        if patterns.len() != self.n_classes {
            return Err(Error::config(
                "patterns",
                format!("{} patterns for {} classes", patterns.len(), self.n_classes),
            ));
        }
        for (c, p) in patterns.iter().enumerate() {
            check_band(format!("patterns[{c}].band"), p.band)?;
            if p.channels.is_empty() {
                return Err(Error::config(format!("patterns[{c}].channels"), "must not be empty"));
            }
            if let Some(&ch) = p.channels.iter().find(|&&ch| ch >= self.n_channels) {
                return Err(Error::config(
                    format!("patterns[{c}].channels"),
                    format!("channel {ch} out of range for {} channels", self.n_channels),
                ));
            }
            for (d, q) in patterns.iter().enumerate().take(c) {
                let mut a = p.channels.clone();
                let mut b = q.channels.clone();
                a.sort_unstable();
                b.sort_unstable();
                if a == b && p.band == q.band {
                    return Err(Error::config(
                        "patterns",
                        format!("classes {d} and {c} share band and channels"),
                    ));
                }
            }
        }
        for (i, n) in self.nuisance.iter().enumerate() {
            check_band(format!("nuisance[{i}].band"), n.band)?;
            if !(n.amplitude >= 0.0 && n.amplitude.is_finite()) {
                return Err(Error::config(format!("nuisance[{i}].amplitude"), "must be non-negative"));
            }
        }
        Ok(())
    }
}

fn hann_burst(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
    let len = ((rng.random_range(0.6..=1.0) * n as f64).round() as usize).clamp(1, n);
    let start = rng.random_range(0..=n - len);
    (start, len)
}

/// Generates `trials_per_class × n_classes` trials, labels interleaved
/// (0, 1, .., K-1, 0, 1, ..).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let patterns = spec.resolved_patterns();
    let fs = spec.sampling_rate;
    let (nc, ns) = (spec.n_channels, spec.n_samples);
    // Separate streams keep the signal draws independent of the amplitudes.
    let mut signal_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    signal_rng.set_stream(1);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(2);

    let mut trials = Vec::with_capacity(spec.n_classes * spec.trials_per_class);
    for _ in 0..spec.trials_per_class {
        for (label, pattern) in patterns.iter().enumerate() {
            let mut data: Vec<f64> = (0..nc * ns)
                .map(|_| spec.noise_amplitude * noise_rng.sample::<f64, _>(StandardNormal))
                .collect();

            let freq = signal_rng.random_range(pattern.band.0..=pattern.band.1);
            let phase = signal_rng.random_range(0.0..2.0 * PI);
            let (start, len) = hann_burst(&mut signal_rng, ns);
            let burst: Vec<f64> = (0..ns)
                .map(|t| {
                    if t < start || t >= start + len {
                        return 0.0;
                    }
                    let env = if len == 1 {
                        1.0
                    } else {
                        let u = (t - start) as f64 / (len - 1) as f64;
                        0.5 - 0.5 * (2.0 * PI * u).cos()
                    };
                    env * (2.0 * PI * freq * t as f64 / fs + phase).sin()
                })
                .collect();
            for &ch in &pattern.channels {
                let row = &mut data[ch * ns..(ch + 1) * ns];
                for (d, b) in row.iter_mut().zip(&burst) {
                    *d += spec.amplitude * b;
                }
            }

            for src in &spec.nuisance {
                for ch in 0..nc {
                    let gain = src.amplitude * signal_rng.random_range(0.0..1.0f64).powi(2) * 2.0;
                    let f = signal_rng.random_range(src.band.0..=src.band.1);
                    let ph = signal_rng.random_range(0.0..2.0 * PI);
                    let row = &mut data[ch * ns..(ch + 1) * ns];
                    for (t, d) in row.iter_mut().enumerate() {
                        *d += gain * (2.0 * PI * f * t as f64 / fs + ph).sin();
                    }
                }
            }

            trials.push(EegTrial::new(nc, ns, data, label)?);
        }
    }
    Dataset::new(
        trials,
        spec.n_classes,
        Some(fs),
        Provenance::Synthetic { seed: spec.seed },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec::new(3, 4, 5, 64, 9);
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
    }

    #[test]
    fn counts_and_labels() {
        let spec = SyntheticSpec::new(4, 5, 8, 100, 1);
        let ds = generate_synthetic(&spec).unwrap();
        assert_eq!(ds.class_counts(), vec![5; 4]);
        assert_eq!(ds.trials[5].label, 1);
        assert_eq!(ds.sampling_rate, Some(250.0));
    }

    #[test]
    fn invalid_band_rejected() {
        let mut spec = SyntheticSpec::new(1, 1, 2, 64, 0);
        spec.patterns = vec![ClassPattern {
            channels: vec![0],
            band: (10.0, 200.0),
        }];
        assert!(matches!(generate_synthetic(&spec), Err(Error::Config { .. })));
        spec.patterns[0].band = (12.0, 8.0);
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn zero_trials_rejected() {
        let spec = SyntheticSpec::new(4, 0, 8, 100, 1);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn default_patterns_are_distinct() {
        let spec = SyntheticSpec::new(4, 1, 8, 200, 0);
        spec.validate().unwrap();
        let p = spec.default_patterns();
        assert_eq!(p[0].channels, vec![0, 1]);
        assert_eq!(p[3].channels, vec![6, 7]);
        assert_eq!(p[1].band, (12.0, 16.0));
    }
}
