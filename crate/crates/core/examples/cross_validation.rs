//! k-fold cross-validation of the factorization model on desk data, folds
//! spread over threads.
//!
//! cargo run --release --example cross_validation -- 4

use factormi::cli::{ExperimentConfig, Profile};
use factormi::data::{generate_synthetic, split_train_test};
use factormi::train::cross_validate;

fn main() -> factormi::Result<()> {
    let parallel = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let mut cfg = ExperimentConfig::preset(Profile::Desk);
    cfg.k = 5;
    cfg.train.max_epochs = 20;
    let ds = generate_synthetic(&cfg.data.synthetic)?;
    let (train, test) = split_train_test(&ds, cfg.per_class_test, cfg.seed)?;
    let summary = cross_validate(&train, &test, cfg.k, &cfg.model, &cfg.train, parallel)?;
    for f in &summary.folds {
        println!(
            "fold {}  seed {:#018x}  stopped at {}  test {:.3}",
            f.fold,
            f.seed,
            f.stopping_epoch,
            f.test_accuracy.unwrap_or(f64::NAN)
        );
    }
    println!("{}", summary.row());
    println!("config hash {}", summary.config_hash);
    Ok(())
}
