mod common;

use std::f64::consts::PI;

use common::desk_data;
use factormi::data::{
    generate_synthetic, import_csv, load_dataset, normalize, save_dataset, split_train_test, stratified_folds,
    write_eegf, ChannelStats, Dataset, EegTrial, Provenance, SyntheticSpec,
};
use factormi::Error;
use proptest::prelude::*;

/// Periodogram power summed over the DFT bins inside `band`, by direct
/// summation.
fn dft_band_power(x: &[f64], fs: f64, band: (f64, f64)) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for k in 1..n / 2 {
        let f = k as f64 * fs / n as f64;
        if f < band.0 || f > band.1 {
            continue;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &v) in x.iter().enumerate() {
            let a = 2.0 * PI * (k * t) as f64 / n as f64;
            re += v * a.cos();
            im -= v * a.sin();
        }
        total += (re * re + im * im) / n as f64;
    }
    total
}

/// Mean band power of each class on its own channels and on every other
/// channel.
fn active_inactive(ds: &Dataset, spec: &SyntheticSpec) -> Vec<(f64, f64)> {
    let fs = spec.sampling_rate;
    let patterns = spec.resolved_patterns();
    patterns
        .iter()
        .enumerate()
        .map(|(c, p)| {
            let (mut act, mut na, mut inact, mut ni) = (0.0, 0, 0.0, 0);
            for t in ds.trials.iter().filter(|t| t.label == c) {
                for ch in 0..t.n_channels() {
                    let pw = dft_band_power(t.channel(ch), fs, p.band);
                    if p.channels.contains(&ch) {
                        act += pw;
                        na += 1;
                    } else {
                        inact += pw;
                        ni += 1;
                    }
                }
            }
            (act / na as f64, inact / ni as f64)
        })
        .collect()
}

#[test]
fn noiseless_class_power_sits_on_active_channels() {
    let mut spec = SyntheticSpec::new(4, 10, 8, 200, 5);
    spec.noise_amplitude = 0.0;
    spec.amplitude = 1.0;
    let ds = generate_synthetic(&spec).unwrap();
    for (c, (act, inact)) in active_inactive(&ds, &spec).into_iter().enumerate() {
        assert!(act > 10.0 * inact, "class {c}: active {act} vs inactive {inact}");
    }
}

#[test]
fn band_power_above_background_scales_with_amplitude_squared() {
    let amps = [0.5, 1.0, 2.0];
    let mut spec = SyntheticSpec::new(4, 40, 8, 200, 11);
    spec.amplitude = 0.0;
    let background: f64 = active_inactive(&generate_synthetic(&spec).unwrap(), &spec)
        .iter()
        .map(|p| p.0)
        .sum::<f64>()
        / 4.0;
    let points: Vec<(f64, f64)> = amps
        .iter()
        .map(|&a| {
            spec.amplitude = a;
            let ds = generate_synthetic(&spec).unwrap();
            let p = active_inactive(&ds, &spec).iter().map(|p| p.0).sum::<f64>() / 4.0;
            (a.ln(), (p - background).ln())
        })
        .collect();
    let mx = points.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = points.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 2.0).abs() <= 0.1, "log-log slope {slope}");
}

#[test]
fn same_spec_same_dataset_and_zero_amplitude_is_noise() {
    let mut spec = SyntheticSpec::new(3, 5, 4, 100, 2);
    assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
    spec.amplitude = 0.0;
    let a = generate_synthetic(&spec).unwrap();
    spec.noise_amplitude = 0.0;
    let silent = generate_synthetic(&spec).unwrap();
    assert!(silent.trials.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
    assert!(a.trials.iter().any(|t| t.data().iter().any(|&v| v != 0.0)));
}

#[test]
fn negative_amplitude_rejected() {
    let mut spec = SyntheticSpec::new(2, 2, 2, 64, 0);
    spec.noise_amplitude = -1.0;
    assert!(matches!(generate_synthetic(&spec), Err(Error::Config { .. })));
}

fn f32_exact(ds: &Dataset) -> Dataset {
    let trials = ds
        .trials
        .iter()
        .map(|t| {
            let data = t.data().iter().map(|&v| v as f32 as f64).collect();
            EegTrial::new(t.n_channels(), t.n_samples(), data, t.label).unwrap()
        })
        .collect();
    Dataset::new(trials, ds.n_classes(), ds.sampling_rate, ds.provenance.clone()).unwrap()
}

#[test]
fn eegf_file_round_trip() {
    let ds = f32_exact(&desk_data(3, 1));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.eegf");
    save_dataset(&ds, &path).unwrap();
    let back = load_dataset(&path, Some(4)).unwrap();
    assert_eq!(back.labels(), ds.labels());
    for (a, b) in back.trials.iter().zip(&ds.trials) {
        assert_eq!(a.data(), b.data());
    }
    assert!(matches!(back.provenance, Provenance::File { .. }));
}

#[test]
fn eegf_header_claiming_an_extra_trial_is_truncation() {
    let ds = f32_exact(&desk_data(1, 0));
    let mut bytes = write_eegf(&ds).unwrap();
    // n_trials lives right after magic and version.
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    bytes[8..12].copy_from_slice(&(n + 1).to_le_bytes());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.eegf");
    std::fs::write(&path, &bytes).unwrap();
    let e = load_dataset(&path, None).unwrap_err();
    assert!(matches!(e, Error::Format { .. }), "{e}");
    assert_eq!(e.exit_code(), 3);
    std::fs::write(&path, b"").unwrap();
    assert!(matches!(load_dataset(&path, None), Err(Error::Format { .. })));
}

#[test]
fn csv_import_matches_hand_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("s.csv");
    let labels = dir.path().join("l.txt");
    std::fs::write(&samples, "1,2,3\n4,5,6\n-1,0.5,2\n0,0,1\n").unwrap();
    std::fs::write(&labels, "1\n0\n").unwrap();
    let ds = import_csv(&samples, &labels, 2, Some(2)).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.trials[0].channel(1), &[4.0, 5.0, 6.0]);
    assert_eq!(ds.trials[1].channel(0), &[-1.0, 0.5, 2.0]);
    assert_eq!(ds.labels(), vec![1, 0]);
    std::fs::write(&labels, "1\n0\n1\n").unwrap();
    assert!(import_csv(&samples, &labels, 2, None).is_err());
}

fn indexed(n_classes: usize, per_class: usize) -> Dataset {
    let trials = (0..n_classes * per_class)
        .map(|i| EegTrial::new(1, 1, vec![i as f64], i % n_classes).unwrap())
        .collect();
    Dataset::new(trials, n_classes, None, Provenance::Synthetic { seed: 0 }).unwrap()
}

fn ids(ds: &Dataset) -> Vec<usize> {
    ds.trials.iter().map(|t| t.data()[0] as usize).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn split_is_deterministic_disjoint_and_exact(seed in any::<u64>()) {
        let ds = indexed(4, 50);
        let (train, test) = split_train_test(&ds, 10, seed).unwrap();
        let (train2, test2) = split_train_test(&ds, 10, seed).unwrap();
        prop_assert_eq!(ids(&train), ids(&train2));
        prop_assert_eq!(ids(&test), ids(&test2));
        prop_assert_eq!(train.class_counts(), vec![40; 4]);
        prop_assert_eq!(test.class_counts(), vec![10; 4]);
        let mut all: Vec<usize> = ids(&train).into_iter().chain(ids(&test)).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn folds_partition_and_stay_balanced(seed in any::<u64>(), k in 2usize..11) {
        let labels: Vec<usize> = (0..160).map(|i| i % 4).collect();
        let folds = stratified_folds(&labels, 4, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..160).collect::<Vec<_>>());
        for c in 0..4 {
            let counts: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == c).count()).collect();
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }
}

#[test]
fn different_seeds_give_different_splits() {
    let ds = indexed(4, 50);
    let (_, a) = split_train_test(&ds, 10, 1).unwrap();
    let (_, b) = split_train_test(&ds, 10, 2).unwrap();
    assert_ne!(ids(&a), ids(&b));
}

#[test]
fn test_statistics_never_leak_into_normalization() {
    let ds = desk_data(12, 4);
    let (train, test) = split_train_test(&ds, 4, 9).unwrap();
    let (_, stats, _) = normalize(&train).unwrap();
    let perturbed_test = Dataset {
        trials: test.trials.iter().map(|t| t.scaled(100.0)).collect(),
        ..test.clone()
    };
    let (_, stats_again, _) = normalize(&train).unwrap();
    assert_eq!(stats, stats_again);
    let applied = stats.apply(&perturbed_test).unwrap();
    for (a, t) in applied.trials.iter().zip(&perturbed_test.trials) {
        let manual = stats.apply_trial(t).unwrap();
        assert_eq!(a, &manual);
    }
    // Fitting on train+test would differ.
    let mut joint = train.clone();
    joint.trials.extend(perturbed_test.trials.iter().cloned());
    assert_ne!(ChannelStats::fit(&joint).unwrap().0, stats);
}

#[test]
fn normalized_train_has_zero_mean_unit_variance() {
    let ds = desk_data(10, 3);
    let (z, _, warnings) = normalize(&ds).unwrap();
    assert!(warnings.is_empty());
    let (again, _) = ChannelStats::fit(&z).unwrap();
    for (m, s) in again.mean.iter().zip(&again.std) {
        assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-12, "{m} {s}");
    }
}
