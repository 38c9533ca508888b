use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

fn indices_by_class(labels: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    by_class
}

/// Holds out `per_class_test` random trials of every class. Both halves keep
/// the original trial order.
pub fn split_train_test(ds: &Dataset, per_class_test: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class = indices_by_class(&ds.labels(), ds.n_classes());
    let mut test = Vec::new();
    for (c, mut idx) in by_class.into_iter().enumerate() {
        if per_class_test > 0 && idx.len() <= per_class_test {
            return Err(Error::Data(format!(
                "class {c} (`{}`) has {} trials, need more than {per_class_test} to hold out a test set",
                ds.class_names[c],
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        test.extend_from_slice(&idx[..per_class_test]);
    }
    test.sort_unstable();
    let mut is_test = vec![false; ds.len()];
    for &i in &test {
        is_test[i] = true;
    }
    let train: Vec<usize> = (0..ds.len()).filter(|&i| !is_test[i]).collect();
    Ok((ds.subset(&train, "train split"), ds.subset(&test, "test split")))
}

/// Stratified k-fold assignment: returns, per fold, the indices it holds out.
/// Every class is spread so that its per-fold counts differ by at most one.
pub fn stratified_folds(labels: &[usize], n_classes: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::config("k", format!("need at least 2 folds, got {k}")));
    }
    let by_class = indices_by_class(labels, n_classes);
    for (c, idx) in by_class.iter().enumerate() {
        if idx.len() < k {
            return Err(Error::config(
                "k",
                format!("{k} folds exceed the {} trials of class {c}", idx.len()),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut cursor = 0;
    for mut idx in by_class {
        idx.shuffle(&mut rng);
        for i in idx {
            folds[cursor % k].push(i);
            cursor += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EegTrial, Provenance};

    fn balanced(n_classes: usize, per_class: usize) -> Dataset {
        let trials = (0..n_classes * per_class)
            .map(|i| EegTrial::new(1, 1, vec![i as f64], i % n_classes).unwrap())
            .collect();
        Dataset::new(trials, n_classes, None, Provenance::Synthetic { seed: 0 }).unwrap()
    }

    #[test]
    fn paper_scale_split_is_40_10() {
        let ds = balanced(4, 50);
        let (train, test) = split_train_test(&ds, 10, 3).unwrap();
        assert_eq!(train.class_counts(), vec![40; 4]);
        assert_eq!(test.class_counts(), vec![10; 4]);
    }

    #[test]
    fn zero_test_keeps_everything() {
        let ds = balanced(3, 5);
        let (train, test) = split_train_test(&ds, 0, 1).unwrap();
        assert!(test.is_empty());
        assert_eq!(train.trials, ds.trials);
    }

    #[test]
    fn insufficient_class_is_named() {
        let ds = balanced(2, 5);
        let err = split_train_test(&ds, 5, 0).unwrap_err();
        assert!(err.to_string().contains("class 0"), "{err}");
    }

    #[test]
    fn folds_are_stratified() {
        let ds = balanced(4, 8);
        let folds = stratified_folds(&ds.labels(), 4, 2, 11).unwrap();
        assert_eq!(folds.len(), 2);
        for f in &folds {
            let mut counts = [0; 4];
            for &i in f {
                counts[ds.trials[i].label] += 1;
            }
            assert_eq!(counts, [4; 4]);
        }
    }

    #[test]
    fn too_many_folds_rejected() {
        let ds = balanced(4, 3);
        assert!(matches!(
            stratified_folds(&ds.labels(), 4, 4, 0),
            Err(Error::Config { .. })
        ));
    }
}
