//! Generate a desk-scale synthetic dataset, save it as EEGF and load it back.
//!
//! cargo run --example synth_dataset -- /tmp/desk.eegf

use factormi::cli::{ExperimentConfig, Profile};
use factormi::data::{generate_synthetic, load_dataset, save_dataset};

fn main() -> factormi::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "desk.eegf".into());
    let spec = ExperimentConfig::preset(Profile::Desk).data.synthetic;
    let ds = generate_synthetic(&spec)?;
    save_dataset(&ds, &path)?;
    let back = load_dataset(&path, Some(spec.n_classes))?;
    println!("wrote {} trials to {path}", back.len());
    println!("class counts {:?}, trial shape {:?}", back.class_counts(), back.trial_shape());
    for (c, p) in spec.resolved_patterns().iter().enumerate() {
        println!("class {c}: channels {:?}, band {:.0}-{:.0} Hz", p.channels, p.band.0, p.band.1);
    }
    println!("content hash {}", back.content_hash());
    Ok(())
}
