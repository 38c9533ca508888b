//! Train the desk-scale model once: split, hold out a validation fold, fit
//! with early stopping, score the test set.
//!
//! FACTORMI_LOG=info cargo run --release --example train_factor_model

use factormi::cli::{init_logging, ExperimentConfig, Profile};
use factormi::data::{generate_synthetic, split_train_test, EegTrial};
use factormi::model::FactorModel;
use factormi::train::{fit, fold_plans, FoldData};

fn main() -> factormi::Result<()> {
    init_logging();
    let cfg = ExperimentConfig::preset(Profile::Desk);
    let ds = generate_synthetic(&cfg.data.synthetic)?;
    let (train, test) = split_train_test(&ds, cfg.per_class_test, cfg.seed)?;
    let plan = fold_plans(&train, cfg.k, cfg.seed)?.swap_remove(0);
    let data = FoldData::prepare(&train, &test, &plan)?;

    let mut model = FactorModel::build(cfg.model.clone(), cfg.seed)?;
    let report = fit(&mut model, &refs(&data.train), &refs(&data.val), &cfg.train)?;
    for (i, (e, v)) in report.epochs.iter().zip(&report.val_accuracy).enumerate() {
        println!(
            "epoch {:>2}  L_D {:.4}  L_adv {:.4}  L_ce {:.4}  total {:.4}  val {:.3}",
            i + 1,
            e.discriminator,
            e.adversarial,
            e.cross_entropy,
            e.total,
            v
        );
    }
    println!("best epoch {} (val {:.3})", report.best_epoch, report.best_val_accuracy);
    println!("test accuracy {:.3}", model.accuracy(&refs(&data.test))?);
    Ok(())
}

fn refs(ts: &[EegTrial]) -> Vec<&EegTrial> {
    ts.iter().collect()
}
