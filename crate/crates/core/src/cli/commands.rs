use std::fs;
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::ExperimentConfig;
use crate::baselines::{cross_validate_baseline, BaselineKind, CspLda, Fbcsp};
use crate::checkpoint::Checkpoint;
use crate::data::{
    generate_synthetic, load_dataset, save_dataset, split_train_test, ChannelStats, Dataset, EegTrial,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::model::FactorModel;
use crate::tensor::Tensor;
use crate::train::{cross_validate, fit, fold_plans, refs, render_table, CvSummary, ReportRow};

/// What a command produced: human-readable text, the same report as JSON,
/// and the files written.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub json: serde_json::Value,
    pub files: Vec<PathBuf>,
}

/// The JSON document written by `cv` and `baseline`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub summary: CvSummary,
}

fn write_outputs(dir: &Path, stem: &str, text: &str, json: &serde_json::Value) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let txt = dir.join(format!("{stem}.txt"));
    let js = dir.join(format!("{stem}.json"));
    fs::write(&txt, text).map_err(|e| Error::io(&txt, e))?;
    let body = serde_json::to_string_pretty(json).expect("json value serializes");
    fs::write(&js, body + "\n").map_err(|e| Error::io(&js, e))?;
    Ok(vec![txt, js])
}

/// Loads or generates the configured dataset and checks it against the
/// model's input shape.
pub fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    let ds = match &cfg.data.path {
        Some(p) => load_dataset(p, Some(cfg.model.n_classes))?,
        None => generate_synthetic(&cfg.data.synthetic)?,
    };
    let (c, t) = ds
        .trial_shape()
        .ok_or_else(|| Error::Data("dataset has no trials".into()))?;
    if (c, t) != (cfg.model.n_channels, cfg.model.n_samples) {
        return Err(Error::Data(format!(
            "trials are {c}x{t} but the model expects {}x{}",
            cfg.model.n_channels, cfg.model.n_samples
        )));
    }
    Ok(ds)
}

fn split(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    split_train_test(&load_data(cfg)?, cfg.per_class_test, cfg.seed)
}

/// Periodogram power of `x` summed over `[band.0, band.1]` Hz.
pub fn band_power(x: &[f64], sampling_rate: f64, band: (f64, f64)) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut p = 0.0;
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1) {
        let f = k as f64 * sampling_rate / n as f64;
        if f >= band.0 && f <= band.1 {
            let one_sided = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            p += one_sided * c.norm_sqr() / (n * n) as f64;
        }
    }
    p
}

/// Arguments of `synth` that override the synthetic spec.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SynthArgs {
    pub classes: Option<usize>,
    pub trials: Option<usize>,
    pub channels: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

pub fn cmd_synth(cfg: &ExperimentConfig, args: &SynthArgs) -> Result<Outcome> {
    let mut spec: SyntheticSpec = cfg.data.synthetic.clone();
    let reshaped = args.classes.is_some() || args.channels.is_some();
    if let Some(v) = args.classes {
        spec.n_classes = v;
    }
    if let Some(v) = args.trials {
        spec.trials_per_class = v;
    }
    if let Some(v) = args.channels {
        spec.n_channels = v;
    }
    if let Some(v) = args.samples {
        spec.n_samples = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if reshaped {
        spec.patterns.clear();
    }
    spec.validate()?;
    let ds = generate_synthetic(&spec)?;
    let path = args.out.clone().unwrap_or_else(|| cfg.out.join("synthetic.eegf"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_dataset(&ds, &path)?;

    let patterns = spec.resolved_patterns();
    let counts = ds.class_counts();
    let mut text = format!(
        "wrote {} trials ({} channels x {} samples) to {}\n",
        ds.len(),
        spec.n_channels,
        spec.n_samples,
        path.display()
    );
    let mut classes = Vec::new();
    for (c, pat) in patterns.iter().enumerate() {
        let (mut active, mut inactive, mut na, mut ni) = (0.0, 0.0, 0usize, 0usize);
        for t in ds.trials.iter().filter(|t| t.label == c) {
            for ch in 0..spec.n_channels {
                let p = band_power(t.channel(ch), spec.sampling_rate, pat.band);
                if pat.channels.contains(&ch) {
                    active += p;
                    na += 1;
                } else {
                    inactive += p;
                    ni += 1;
                }
            }
        }
        let active = active / na.max(1) as f64;
        let inactive = if ni > 0 { inactive / ni as f64 } else { f64::NAN };
        text.push_str(&format!(
            "class {c}: {} trials, band {:.1}-{:.1} Hz, active-channel power {:.4}, inactive {:.4}\n",
            counts[c], pat.band.0, pat.band.1, active, inactive
        ));
        classes.push(json!({
            "class": c,
            "trials": counts[c],
            "band": [pat.band.0, pat.band.1],
            "channels": pat.channels,
            "active_band_power": active,
            "inactive_band_power": if inactive.is_finite() { json!(inactive) } else { json!(null) },
        }));
    }
    let report = json!({
        "command": "synth",
        "seed": spec.seed,
        "spec": spec,
        "path": path,
        "dataset_hash": ds.content_hash(),
        "classes": classes,
    });
    let side = path.with_extension("json");
    let body = serde_json::to_string_pretty(&report).expect("json value serializes");
    fs::write(&side, body + "\n").map_err(|e| Error::io(&side, e))?;
    Ok(Outcome {
        text,
        json: report,
        files: vec![path, side],
    })
}

fn summary_text(summary: &CvSummary) -> String {
    let mut text = String::new();
    for f in &summary.folds {
        text.push_str(&format!(
            "fold {:>2}  test {:.4}  best val {:.4}",
            f.fold,
            f.test_accuracy.unwrap_or(f64::NAN),
            f.best_val_accuracy
        ));
        if f.stopping_epoch > 0 {
            text.push_str(&format!("  epochs {} (best {})", f.stopping_epoch, f.best_epoch));
        }
        if !f.selected_bands.is_empty() {
            text.push_str(&format!("  bands {:?}", f.selected_bands));
        }
        text.push('\n');
    }
    text.push_str(&summary.row());
    text.push('\n');
    text
}

fn finish_run(cfg: &ExperimentConfig, command: &str, stem: &str, summary: CvSummary) -> Result<Outcome> {
    let text = summary_text(&summary);
    let artifact = RunArtifact {
        command: command.into(),
        seed: cfg.seed,
        config: cfg.to_json(),
        summary,
    };
    let json = serde_json::to_value(&artifact).expect("artifact serializes");
    let files = write_outputs(&cfg.out, stem, &text, &json)?;
    Ok(Outcome { text, json, files })
}

/// k-fold cross-validation of the factorization model.
pub fn cmd_cv(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (train, test) = split(cfg)?;
    let summary = cross_validate(&train, &test, cfg.k, &cfg.model, &cfg.train, cfg.parallel_folds)?;
    finish_run(cfg, "cv", "proposed", summary)
}

pub fn baseline_stem(kind: BaselineKind) -> &'static str {
    match kind {
        BaselineKind::Csp => "csp-lda",
        BaselineKind::Fbcsp => "fbcsp",
    }
}

/// k-fold cross-validation of a baseline under the same protocol.
pub fn cmd_baseline(cfg: &ExperimentConfig, kind: BaselineKind) -> Result<Outcome> {
    let (train, test) = split(cfg)?;
    let summary = cross_validate_baseline(&train, &test, cfg.k, kind, &cfg.baseline, cfg.seed, cfg.parallel_folds)?;
    finish_run(cfg, "baseline", baseline_stem(kind), summary)
}

/// Reads every run artifact in `dir` (in file-name order) and renders the
/// comparison table.
pub fn cmd_report(dir: &Path) -> Result<Outcome> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut runs = Vec::new();
    for p in &paths {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) else {
            continue;
        };
        if value.get("summary").is_none() {
            continue;
        }
        let run: RunArtifact = serde_json::from_value(value)
            .map_err(|e| Error::Data(format!("{}: malformed run artifact: {e}", p.display())))?;
        runs.push(run);
    }
    let rows: Vec<ReportRow> = runs.iter().map(|r| ReportRow::from(&r.summary)).collect();
    let table = render_table(&rows)?;
    let json = json!({
        "command": "report",
        "rows": rows,
        "seeds": runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
        "table": table,
    });
    let files = write_outputs(dir, "report", &table, &json)?;
    Ok(Outcome {
        text: table,
        json,
        files,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Csp,
    Fbcsp,
}

fn push_stats(ck: &mut Checkpoint, stats: &ChannelStats) {
    ck.push("norm.mean", Tensor::from_vec(stats.mean.clone()));
    ck.push("norm.std", Tensor::from_vec(stats.std.clone()));
}

fn read_stats(ck: &Checkpoint) -> Result<ChannelStats> {
    Ok(ChannelStats {
        mean: ck.tensor("norm.mean")?.data().to_vec(),
        std: ck.tensor("norm.std")?.data().to_vec(),
    })
}

/// Trains one model on the training split, holding out one stratified fold
/// for early stopping, and saves a checkpoint carrying the normalization.
pub fn cmd_train(cfg: &ExperimentConfig, method: Method) -> Result<Outcome> {
    let (train, _) = split(cfg)?;
    let plan = fold_plans(&train, cfg.k, cfg.seed)?.swap_remove(0);
    let fit_part = train.subset(&plan.train, "train");
    let (stats, _) = ChannelStats::fit(&fit_part)?;
    let norm = |ds: &Dataset| -> Result<Vec<EegTrial>> { ds.trials.iter().map(|t| stats.apply_trial(t)).collect() };
    let tr = norm(&fit_part)?;
    let val = norm(&train.subset(&plan.val, "val"))?;
    let (mut ck, val_acc, report) = match method {
        Method::Proposed => {
            let mut model = FactorModel::build(cfg.model.clone(), cfg.seed)?;
            let report = fit(&mut model, &refs(&tr), &refs(&val), &cfg.train)?;
            let acc = model.accuracy(&refs(&val))?;
            (model.to_checkpoint()?, acc, serde_json::to_value(&report).expect("report serializes"))
        }
        Method::Csp => {
            let m = CspLda::fit(&refs(&tr), train.n_classes(), &cfg.baseline)?;
            (m.to_checkpoint(), m.accuracy(&refs(&val))?, json!(null))
        }
        Method::Fbcsp => {
            let fs = cfg.baseline.resolve_sampling_rate(&train)?;
            let m = Fbcsp::fit(&refs(&tr), train.n_classes(), fs, &cfg.baseline)?;
            let bands = m.selected_bands();
            (m.to_checkpoint(), m.accuracy(&refs(&val))?, json!({ "selected_bands": bands }))
        }
    };
    push_stats(&mut ck, &stats);
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let stem = match method {
        Method::Proposed => "proposed",
        Method::Csp => "csp-lda",
        Method::Fbcsp => "fbcsp",
    };
    let ck_path = cfg.out.join(format!("{stem}.fmck"));
    ck.save(&ck_path)?;
    let text = format!(
        "trained {stem} on {} trials, validation accuracy {:.4}\ncheckpoint {}\n",
        tr.len(),
        val_acc,
        ck_path.display()
    );
    let json = json!({
        "command": "train",
        "method": method,
        "seed": cfg.seed,
        "config": cfg.to_json(),
        "checkpoint": ck_path,
        "val_accuracy": val_acc,
        "report": report,
    });
    let mut files = write_outputs(&cfg.out, &format!("train-{stem}"), &text, &json)?;
    files.push(ck_path);
    Ok(Outcome { text, json, files })
}

/// Scores a saved checkpoint of any kind on the configured test split.
pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<Outcome> {
    let ck = Checkpoint::load(checkpoint)?;
    let stats = read_stats(&ck)?;
    let (train, test) = split(cfg)?;
    let test_trials: Vec<EegTrial> = test
        .trials
        .iter()
        .map(|t| stats.apply_trial(t))
        .collect::<Result<_>>()
        .map_err(|e| Error::Data(format!("checkpoint normalization does not fit the data: {e}")))?;
    let trials = refs(&test_trials);
    let predictions: Vec<usize> = match ck.kind.as_str() {
        FactorModel::CHECKPOINT_KIND => FactorModel::from_checkpoint(&ck)?.predict(&trials)?,
        CspLda::CHECKPOINT_KIND => {
            let m = CspLda::from_checkpoint(&ck)?;
            trials.iter().map(|t| m.predict(t)).collect::<Result<_>>()?
        }
        Fbcsp::CHECKPOINT_KIND => {
            let m = Fbcsp::from_checkpoint(&ck)?;
            trials.iter().map(|t| m.predict(t)).collect::<Result<_>>()?
        }
        other => {
            return Err(Error::Format {
                offset: 8,
                msg: format!("unknown checkpoint kind `{other}`"),
            })
        }
    };
    let k = train.n_classes();
    let mut confusion = vec![vec![0usize; k]; k];
    for (t, &p) in trials.iter().zip(&predictions) {
        if p >= k {
            return Err(Error::Data(format!("checkpoint predicts class {p} but data has {k} classes")));
        }
        confusion[t.label][p] += 1;
    }
    let hits: usize = (0..k).map(|c| confusion[c][c]).sum();
    let accuracy = hits as f64 / trials.len() as f64;
    let mut text = format!(
        "{}: test accuracy {:.4} on {} trials\nconfusion (rows true, columns predicted):\n",
        ck.kind,
        accuracy,
        trials.len()
    );
    for row in &confusion {
        text.push_str(&format!("  {row:?}\n"));
    }
    let json = json!({
        "command": "eval",
        "kind": ck.kind,
        "seed": cfg.seed,
        "config": cfg.to_json(),
        "checkpoint": checkpoint,
        "accuracy": accuracy,
        "confusion": confusion,
        "dataset_hash": train.content_hash(),
    });
    let files = write_outputs(&cfg.out, "eval", &text, &json)?;
    Ok(Outcome { text, json, files })
}
