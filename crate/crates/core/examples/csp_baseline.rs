//! Two-class CSP on a toy, then one-vs-rest CSP + shrinkage LDA on desk data.

use factormi::baselines::{fit_csp_pair, BaselineConfig, CspLda, CSP_EPS};
use factormi::cli::{ExperimentConfig, Profile};
use factormi::data::{generate_synthetic, normalize, split_train_test, EegTrial};
use nalgebra::{DMatrix, DVector};

fn main() -> factormi::Result<()> {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
    let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
    let m = fit_csp_pair(&a, &b, 1, CSP_EPS)?;
    println!("toy eigenvalues {:?}", m.eigenvalues);
    println!("toy filters\n{}", m.filters);

    let cfg = ExperimentConfig::preset(Profile::Desk);
    let ds = generate_synthetic(&cfg.data.synthetic)?;
    let (train, test) = split_train_test(&ds, cfg.per_class_test, cfg.seed)?;
    let (train, stats, _) = normalize(&train)?;
    let test = stats.apply(&test)?;
    let model = CspLda::fit(&refs(&train.trials), train.n_classes(), &BaselineConfig::default())?;
    println!("CSP+LDA features per trial {}", model.csp.feature_len());
    println!("test accuracy {:.3}", model.accuracy(&refs(&test.trials))?);
    Ok(())
}

fn refs(ts: &[EegTrial]) -> Vec<&EegTrial> {
    ts.iter().collect()
}
