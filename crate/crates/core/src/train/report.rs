use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean losses over one epoch. `total == adversarial + cross_entropy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub discriminator: f64,
    pub adversarial: f64,
    pub cross_entropy: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub val_accuracy: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stopping_epoch: usize,
    pub test_accuracy: Option<f64>,
    /// Filter-bank bands contributing selected features (FBCSP only).
    pub selected_bands: Vec<usize>,
}

impl FoldReport {
    /// A report for a method without an iterative training trace.
    pub fn single_shot(fold: usize, seed: u64, test_accuracy: f64) -> Self {
        FoldReport {
            fold,
            seed,
            epochs: Vec::new(),
            val_accuracy: Vec::new(),
            best_epoch: 0,
            best_val_accuracy: 0.0,
            stopping_epoch: 0,
            test_accuracy: Some(test_accuracy),
            selected_bands: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub name: String,
    pub seed: u64,
    pub k: usize,
    pub folds: Vec<FoldReport>,
    /// Mean test accuracy over folds, in [0, 1].
    pub mean: f64,
    /// Sample standard deviation (n − 1) of fold test accuracies.
    pub std: f64,
    pub config_hash: String,
    pub dataset_hash: String,
    pub config: serde_json::Value,
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl CvSummary {
    pub fn from_folds(
        name: impl Into<String>,
        seed: u64,
        folds: Vec<FoldReport>,
        config: serde_json::Value,
        dataset_hash: String,
    ) -> Result<Self> {
        let accs = folds
            .iter()
            .map(|f| {
                f.test_accuracy
                    .ok_or_else(|| Error::contract("CvSummary", format!("fold {} has no test accuracy", f.fold)))
            })
            .collect::<Result<Vec<_>>>()?;
        if accs.is_empty() {
            return Err(Error::contract("CvSummary", "no folds"));
        }
        let (mean, std) = mean_std(&accs);
        Ok(CvSummary {
            name: name.into(),
            seed,
            k: folds.len(),
            folds,
            mean,
            std,
            config_hash: crate::config_hash(&config),
            dataset_hash,
            config,
        })
    }

    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.folds.iter().filter_map(|f| f.test_accuracy).collect()
    }

    /// Table row text: `"<name>  mean (std)"` in percent.
    pub fn row(&self) -> String {
        format!("{}  {}", self.name, format_mean_std(100.0 * self.mean, 100.0 * self.std))
    }
}

/// `"54.29 (3.40)"` style rendering, two decimals each.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.2} ({std:.2})")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    /// Percent.
    pub mean: f64,
    pub std: f64,
    pub dataset_hash: String,
}

impl From<&CvSummary> for ReportRow {
    fn from(s: &CvSummary) -> Self {
        ReportRow {
            name: s.name.clone(),
            mean: 100.0 * s.mean,
            std: 100.0 * s.std,
            dataset_hash: s.dataset_hash.clone(),
        }
    }
}

/// Aligned comparison table with the best mean marked by `*`.
pub fn render_table(rows: &[ReportRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Data("no runs to report".into()));
    }
    if let Some(other) = rows.iter().find(|r| r.dataset_hash != rows[0].dataset_hash) {
        return Err(Error::Data(format!(
            "runs `{}` and `{}` were evaluated on different datasets",
            rows[0].name, other.name
        )));
    }
    let best = rows
        .iter()
        .enumerate()
        .fold(0, |b, (i, r)| if r.mean > rows[b].mean { i } else { b });
    let width = rows.iter().map(|r| r.name.len()).max().unwrap().max("Model".len());
    let mut out = format!("{:<width$}  Accuracy (std)\n", "Model");
    for (i, r) in rows.iter().enumerate() {
        let mark = if i == best { "*" } else { "" };
        out.push_str(&format!(
            "{:<width$}  {}{mark}\n",
            r.name,
            format_mean_std(r.mean, r.std)
        ));
    }
    Ok(out)
}
