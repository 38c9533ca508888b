//! Save a model and a fitted baseline as FMCK checkpoints and reload them.

use factormi::baselines::{BaselineConfig, CspLda};
use factormi::checkpoint::Checkpoint;
use factormi::cli::{desk_model, ExperimentConfig, Profile};
use factormi::data::{generate_synthetic, EegTrial};
use factormi::model::FactorModel;

fn main() -> factormi::Result<()> {
    let dir = std::env::temp_dir();
    let ds = generate_synthetic(&ExperimentConfig::preset(Profile::Desk).data.synthetic)?;
    let trials: Vec<&EegTrial> = ds.trials.iter().take(8).collect();

    let model = FactorModel::build(desk_model(), 5)?;
    let path = dir.join("factormi-example-model.fmck");
    model.to_checkpoint()?.save(&path)?;
    let ck = Checkpoint::load(&path)?;
    let back = FactorModel::from_checkpoint(&ck)?;
    println!("{}: kind {}, {} tensors", path.display(), ck.kind, ck.tensors.len());
    println!("logits identical after reload: {}", model.logits(&trials)? == back.logits(&trials)?);

    let all: Vec<&EegTrial> = ds.trials.iter().collect();
    let csp = CspLda::fit(&all, 4, &BaselineConfig::default())?;
    let path = dir.join("factormi-example-csp.fmck");
    csp.to_checkpoint().save(&path)?;
    let back = CspLda::from_checkpoint(&Checkpoint::load(&path)?)?;
    let same = all.iter().all(|t| csp.predict(t).ok() == back.predict(t).ok());
    println!("{}: predictions identical after reload: {same}", path.display());
    Ok(())
}
