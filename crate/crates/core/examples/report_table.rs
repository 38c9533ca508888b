//! Cross-validate both baselines on desk data and render the comparison
//! table.

use factormi::baselines::{cross_validate_baseline, BaselineConfig, BaselineKind};
use factormi::cli::{ExperimentConfig, Profile};
use factormi::data::{generate_synthetic, split_train_test};
use factormi::train::{format_mean_std, render_table, ReportRow};

fn main() -> factormi::Result<()> {
    let cfg = ExperimentConfig::preset(Profile::Desk);
    let ds = generate_synthetic(&cfg.data.synthetic)?;
    let (train, test) = split_train_test(&ds, cfg.per_class_test, cfg.seed)?;
    let bc = BaselineConfig::default();
    let mut rows = Vec::new();
    for kind in [BaselineKind::Csp, BaselineKind::Fbcsp] {
        let s = cross_validate_baseline(&train, &test, cfg.k, kind, &bc, cfg.seed, 1)?;
        rows.push(ReportRow::from(&s));
    }
    print!("{}", render_table(&rows)?);
    println!("formatting: {}", format_mean_std(54.293, 3.401));
    Ok(())
}
