//! EEGF binary container and CSV import.
//!
//! Layout (all little-endian):
//!
//! ```text
//! offset  size            field
//! 0       4               magic "EEGF"
//! 4       4   u32         format version (1)
//! 8       4   u32         n_trials
//! 12      4   u32         n_channels
//! 16      4   u32         n_samples
//! 20      2·n_trials      u16 labels
//! ..      4·T·C·S         f32 samples, trial-major then channel-major
//! ```

use std::fs;
use std::path::Path;

use super::{Dataset, EegTrial, Provenance};
use crate::error::{Error, Result};

pub const EEGF_MAGIC: &[u8; 4] = b"EEGF";
pub const EEGF_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

/// Serializes a dataset. Samples are narrowed to `f32`.
pub fn write_eegf(ds: &Dataset) -> Result<Vec<u8>> {
    let (channels, samples) = ds.trial_shape().unwrap_or((0, 0));
    let n = ds.len();
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Data(format!("{what} {v} does not fit in u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 2 * n + 4 * n * channels * samples);
    out.extend_from_slice(EEGF_MAGIC);
    out.extend_from_slice(&EEGF_VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(n, "trial count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(channels, "channel count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(samples, "sample count")?.to_le_bytes());
    for t in &ds.trials {
        let label = u16::try_from(t.label)
            .map_err(|_| Error::Data(format!("label {} does not fit in u16", t.label)))?;
        out.extend_from_slice(&label.to_le_bytes());
    }
    for t in &ds.trials {
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.bytes.len() as u64,
                msg: format!(
                    "truncated {what}: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parses an EEGF buffer. When `n_classes` is given, labels must lie below it;
/// otherwise the class count is `max(label) + 1`.
pub fn read_eegf(bytes: &[u8], n_classes: Option<usize>, provenance: Provenance) -> Result<Dataset> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != EEGF_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad magic {magic:?}, expected \"EEGF\""),
        });
    }
    let version = r.u32("version")?;
    if version != EEGF_VERSION {
        return Err(Error::Format {
            offset: 4,
            msg: format!("unsupported format version {version}"),
        });
    }
    let n_trials = r.u32("trial count")? as usize;
    let n_channels = r.u32("channel count")? as usize;
    let n_samples = r.u32("sample count")? as usize;
    if n_trials > 0 && (n_channels == 0 || n_samples == 0) {
        return Err(Error::Format {
            offset: 12,
            msg: "zero channels or samples with a non-empty trial list".into(),
        });
    }

    let label_base = r.pos;
    let labels: Vec<usize> = r
        .take(2 * n_trials, "label block")?
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]) as usize)
        .collect();
    let classes = match n_classes {
        Some(k) => {
            if let Some(i) = labels.iter().position(|&l| l >= k) {
                return Err(Error::Format {
                    offset: (label_base + 2 * i) as u64,
                    msg: format!("label {} out of range for {k} classes", labels[i]),
                });
            }
            k
        }
        None => labels.iter().max().map_or(0, |m| m + 1),
    };

    let per_trial = n_channels * n_samples;
    let payload_base = r.pos;
    let payload = r.take(4 * per_trial * n_trials, "sample payload")?;
    if r.pos != bytes.len() {
        return Err(Error::Format {
            offset: r.pos as u64,
            msg: format!("{} trailing bytes after payload", bytes.len() - r.pos),
        });
    }

    let mut trials = Vec::with_capacity(n_trials);
    for (i, (chunk, &label)) in payload.chunks_exact(4 * per_trial.max(1)).zip(&labels).enumerate() {
        let mut data = Vec::with_capacity(per_trial);
        for (j, b) in chunk.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            if !v.is_finite() {
                return Err(Error::Format {
                    offset: (payload_base + 4 * (i * per_trial + j)) as u64,
                    msg: "non-finite sample".into(),
                });
            }
            data.push(v as f64);
        }
        trials.push(EegTrial::new(n_channels, n_samples, data, label)?);
    }
    Dataset::new(trials, classes, None, provenance)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = write_eegf(ds)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>, n_classes: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_eegf(
        &bytes,
        n_classes,
        Provenance::File {
            path: path.display().to_string(),
        },
    )
}

/// Imports a CSV with one row per (trial, channel) and one column per sample,
/// plus a label file with one integer per line.
pub fn import_csv(
    samples_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    n_channels: usize,
    n_classes: Option<usize>,
) -> Result<Dataset> {
    let samples_path = samples_path.as_ref();
    let labels_path = labels_path.as_ref();
    if n_channels == 0 {
        return Err(Error::config("n_channels", "must be positive"));
    }
    let label_text = fs::read_to_string(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let labels = label_text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse::<usize>()
                .map_err(|e| Error::Data(format!("{}: line {}: {e}", labels_path.display(), i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(samples_path)
        .map_err(|e| Error::Data(format!("{}: {e}", samples_path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("{}: {e}", samples_path.display())))?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|e| {
                    Error::Data(format!("{}: row {}: {e}", samples_path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() != labels.len() * n_channels {
        return Err(Error::Data(format!(
            "{} rows for {} labels x {n_channels} channels",
            rows.len(),
            labels.len()
        )));
    }
    let n_samples = rows.first().map_or(0, Vec::len);
    let mut trials = Vec::with_capacity(labels.len());
    for (t, &label) in labels.iter().enumerate() {
        let mut data = Vec::with_capacity(n_channels * n_samples);
        for row in &rows[t * n_channels..(t + 1) * n_channels] {
            if row.len() != n_samples {
                return Err(Error::Data(format!(
                    "trial {t}: ragged row with {} samples, expected {n_samples}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        trials.push(EegTrial::new(n_channels, n_samples, data, label)?);
    }
    let classes = n_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    Dataset::new(
        trials,
        classes,
        None,
        Provenance::File {
            path: samples_path.display().to_string(),
        },
    )
}

/// Expected shape of the single-arm reaching recordings: 22 channels,
/// 1001 samples, 4 classes with 50 trials each. The recordings themselves are
/// not redistributable; users who hold them convert to EEGF or CSV first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SingleArmLayout {
    pub n_channels: usize,
    pub n_samples: usize,
    pub n_classes: usize,
    pub trials_per_class: usize,
}

impl SingleArmLayout {
    pub const DEFAULT: SingleArmLayout = SingleArmLayout {
        n_channels: 22,
        n_samples: 1001,
        n_classes: 4,
        trials_per_class: 50,
    };

    pub fn check(&self, ds: &Dataset) -> Result<()> {
        let shape = ds.trial_shape();
        if shape != Some((self.n_channels, self.n_samples)) {
            return Err(Error::Data(format!(
                "expected {}x{} trials, found {shape:?}",
                self.n_channels, self.n_samples
            )));
        }
        if ds.n_classes() != self.n_classes {
            return Err(Error::Data(format!(
                "expected {} classes, found {}",
                self.n_classes,
                ds.n_classes()
            )));
        }
        for (c, &n) in ds.class_counts().iter().enumerate() {
            if n != self.trials_per_class {
                return Err(Error::Data(format!(
                    "class {c} has {n} trials, expected {}",
                    self.trials_per_class
                )));
            }
        }
        Ok(())
    }
}

/// Loads an EEGF conversion of the single-arm recordings and checks its layout.
pub fn load_single_arm(path: impl AsRef<Path>) -> Result<Dataset> {
    let layout = SingleArmLayout::DEFAULT;
    let mut ds = load_dataset(path, Some(layout.n_classes))?;
    layout.check(&ds)?;
    ds.sampling_rate = None;
    Ok(ds)
}
