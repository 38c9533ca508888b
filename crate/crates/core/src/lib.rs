//! Factorized feature learning for motor-imagery EEG classification.
//!
//! A generator trained adversarially against noise extracts class-agnostic
//! ("common") features, a structurally identical extractor trained with
//! cross-entropy extracts class-specific features, and an MLP classifies
//! their concatenation. The crate also ships the CSP+LDA and FBCSP
//! baselines, a synthetic EEG generator, the EEGF file format and a
//! cross-validation harness.
//!
//! Modules:
//!
//! - [`tensor`]: dense tensors, reverse-mode tape, SGD/AdamW
//! - [`model`]: generator, discriminator, class-specific extractor, MLP head
//! - [`train`]: losses, the three-part training step, early stopping, k-fold CV
//! - [`data`]: trials, EEGF/CSV I/O, splitting, normalization, synthetic data
//! - [`baselines`]: CSP, LDA, band-pass filter bank, FBCSP
//! - [`cli`]: experiment configs and the commands behind the `factormi` binary

pub mod baselines;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod model;
pub mod tensor;
pub mod train;

use sha2::{Digest, Sha256};

pub use error::{Error, Result};

/// SHA-256 of a config's canonical JSON text (keys sorted).
pub fn config_hash(config: &serde_json::Value) -> String {
    data::hex_string(&Sha256::digest(config.to_string().as_bytes()))
}
