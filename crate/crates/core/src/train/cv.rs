use rayon::prelude::*;
use serde_json::json;

use super::report::{CvSummary, FoldReport};
use super::trainer::{fit, TrainConfig};
use crate::data::{stratified_folds, ChannelStats, Dataset, EegTrial};
use crate::error::{Error, Result};
use crate::model::{FactorModel, ModelConfig};

/// One fold: the trials it trains on and the held-out trials used for
/// validation, as indices into the training split.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldPlan {
    pub index: usize,
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// SplitMix64 step; derives independent per-fold seeds from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fold_plans(train: &Dataset, k: usize, seed: u64) -> Result<Vec<FoldPlan>> {
    let folds = stratified_folds(&train.labels(), train.n_classes(), k, seed)?;
    Ok(folds
        .iter()
        .enumerate()
        .map(|(i, held)| {
            let mut is_held = vec![false; train.len()];
            held.iter().for_each(|&j| is_held[j] = true);
            FoldPlan {
                index: i,
                seed: derive_seed(seed, i as u64),
                train: (0..train.len()).filter(|&j| !is_held[j]).collect(),
                val: held.clone(),
            }
        })
        .collect())
}

/// Runs `run` on every fold (on up to `parallel` threads) and aggregates the
/// reports in fold order.
pub fn run_folds<F>(plans: &[FoldPlan], parallel: usize, run: F) -> Result<Vec<FoldReport>>
where
    F: Fn(&FoldPlan) -> Result<FoldReport> + Sync,
{
    let reports: Vec<Result<FoldReport>> = if parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| Error::config("parallel_folds", e.to_string()))?;
        pool.install(|| plans.par_iter().map(&run).collect())
    } else {
        plans.iter().map(&run).collect()
    };
    let mut out = Vec::with_capacity(plans.len());
    for (plan, r) in plans.iter().zip(reports) {
        let mut rep = r?;
        rep.fold = plan.index;
        out.push(rep);
    }
    Ok(out)
}

/// Per-fold z-scoring fitted on the fold's training part only.
pub struct FoldData {
    pub train: Vec<EegTrial>,
    pub val: Vec<EegTrial>,
    pub test: Vec<EegTrial>,
    pub stats: ChannelStats,
}

impl FoldData {
    pub fn prepare(train: &Dataset, test: &Dataset, plan: &FoldPlan) -> Result<Self> {
        let fold_train = train.subset(&plan.train, "fold train");
        let (stats, _) = ChannelStats::fit(&fold_train)?;
        let apply = |ts: &[EegTrial]| ts.iter().map(|t| stats.apply_trial(t)).collect::<Result<Vec<_>>>();
        Ok(FoldData {
            train: apply(&fold_train.trials)?,
            val: apply(&train.subset(&plan.val, "fold val").trials)?,
            test: apply(&test.trials)?,
            stats,
        })
    }
}

pub(crate) fn refs(ts: &[EegTrial]) -> Vec<&EegTrial> {
    ts.iter().collect()
}

/// Stratified k-fold cross-validation of the factorization model. Each fold
/// trains a fresh model on k − 1 folds, uses the held-out fold for early
/// stopping, and scores the fixed `test` set.
pub fn cross_validate(
    train: &Dataset,
    test: &Dataset,
    k: usize,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    parallel: usize,
) -> Result<CvSummary> {
    if test.is_empty() {
        return Err(Error::contract("cross_validate", "empty test set"));
    }
    model_config.validate()?;
    train_config.validate()?;
    let plans = fold_plans(train, k, train_config.seed)?;
    let folds = run_folds(&plans, parallel, |plan| {
        let data = FoldData::prepare(train, test, plan)?;
        let mut model = FactorModel::build(model_config.clone(), plan.seed)?;
        let cfg = TrainConfig {
            seed: plan.seed,
            ..train_config.clone()
        };
        let mut report = fit(&mut model, &refs(&data.train), &refs(&data.val), &cfg)?;
        report.test_accuracy = Some(model.accuracy(&refs(&data.test))?);
        log::info!(
            "fold {}: stopped at epoch {}, test accuracy {:.3}",
            plan.index,
            report.stopping_epoch,
            report.test_accuracy.unwrap()
        );
        Ok(report)
    })?;
    CvSummary::from_folds(
        "proposed",
        train_config.seed,
        folds,
        json!({ "k": k, "model": model_config, "train": train_config }),
        train.content_hash(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..10).map(|i| derive_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 10);
        assert_eq!(derive_seed(7, 3), a[3]);
    }

    #[test]
    fn plans_partition_training_set() {
        let trials = (0..40)
            .map(|i| EegTrial::new(1, 2, vec![i as f64, 0.0], i % 4).unwrap())
            .collect();
        let ds = Dataset::new(trials, 4, None, Provenance::Synthetic { seed: 0 }).unwrap();
        let plans = fold_plans(&ds, 10, 1).unwrap();
        assert_eq!(plans.len(), 10);
        let mut all: Vec<usize> = plans.iter().flat_map(|p| p.val.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
        for p in &plans {
            assert_eq!(p.train.len() + p.val.len(), 40);
            assert!(p.train.iter().all(|i| !p.val.contains(i)));
        }
    }
}
