use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::csp::{CspModel, OneVsRestCsp, CSP_EPS};
use super::filter::{Bandpass, FilterBank};
use super::lda::{fit_lda, LdaModel, DEFAULT_SHRINKAGE};
use super::select::select_top_k;
use crate::checkpoint::Checkpoint;
use crate::data::{Dataset, EegTrial};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::train::{fold_plans, refs, run_folds, CvSummary, FoldData, FoldReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Csp,
    Fbcsp,
}

impl BaselineKind {
    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::Csp => "CSP+LDA",
            BaselineKind::Fbcsp => "FBCSP",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Filters kept from each end of the CSP spectrum.
    pub n_pairs: usize,
    pub shrinkage: f64,
    pub csp_eps: f64,
    /// Features kept by mutual-information selection (FBCSP).
    pub k_select: usize,
    pub bank: FilterBank,
    /// Overrides the dataset's sampling rate.
    pub sampling_rate: Option<f64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            n_pairs: 3,
            shrinkage: DEFAULT_SHRINKAGE,
            csp_eps: CSP_EPS,
            k_select: 8,
            bank: FilterBank::default(),
            sampling_rate: None,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs == 0 {
            return Err(Error::config("baseline.n_pairs", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return Err(Error::config("baseline.shrinkage", "must lie in [0, 1]"));
        }
        if !(self.csp_eps > 0.0) {
            return Err(Error::config("baseline.csp_eps", "must be positive"));
        }
        if self.k_select == 0 {
            return Err(Error::config("baseline.k_select", "must be at least 1"));
        }
        if let Some(fs) = self.sampling_rate {
            if !(fs > 0.0 && fs.is_finite()) {
                return Err(Error::config("baseline.sampling_rate", "must be positive"));
            }
            self.bank.validate(fs)?;
        }
        Ok(())
    }

    pub fn resolve_sampling_rate(&self, ds: &Dataset) -> Result<f64> {
        self.sampling_rate
            .or(ds.sampling_rate)
            .ok_or_else(|| Error::config("baseline.sampling_rate", "dataset has no sampling rate; set one"))
    }
}

fn labels_of(trials: &[&EegTrial]) -> Vec<usize> {
    trials.iter().map(|t| t.label).collect()
}

fn accuracy_of(predict: impl Fn(&EegTrial) -> Result<usize>, trials: &[&EegTrial]) -> Result<f64> {
    if trials.is_empty() {
        return Err(Error::Data("accuracy of an empty trial set".into()));
    }
    let mut hits = 0;
    for t in trials {
        if predict(t)? == t.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials.len() as f64)
}

/// Broadband one-vs-rest CSP, log-variance features, shrinkage LDA.
#[derive(Clone, Debug, PartialEq)]
pub struct CspLda {
    pub config: BaselineConfig,
    pub csp: OneVsRestCsp,
    pub lda: LdaModel,
}

impl CspLda {
    pub const CHECKPOINT_KIND: &'static str = "csp-lda";

    pub fn fit(trials: &[&EegTrial], n_classes: usize, config: &BaselineConfig) -> Result<Self> {
        config.validate()?;
        let csp = OneVsRestCsp::fit(trials, n_classes, config.n_pairs, config.csp_eps)?;
        let feats = trials.iter().map(|t| csp.features(t)).collect::<Result<Vec<_>>>()?;
        let lda = fit_lda(&feats, &labels_of(trials), n_classes, config.shrinkage)?;
        Ok(CspLda {
            config: config.clone(),
            csp,
            lda,
        })
    }

    pub fn predict(&self, trial: &EegTrial) -> Result<usize> {
        self.lda.predict(&self.csp.features(trial)?)
    }

    pub fn accuracy(&self, trials: &[&EegTrial]) -> Result<f64> {
        accuracy_of(|t| self.predict(t), trials)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(Self::CHECKPOINT_KIND, json!({ "baseline": self.config }));
        push_csp(&mut ck, "csp", &self.csp);
        push_lda(&mut ck, &self.lda);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(Self::CHECKPOINT_KIND)?;
        let config = config_from(ck)?;
        let lda = read_lda(ck, config.shrinkage)?;
        let csp = read_csp(ck, "csp", lda.n_classes(), config.csp_eps)?;
        Ok(CspLda { config, csp, lda })
    }
}

/// Per-band CSP, mutual-information feature selection, shrinkage LDA.
#[derive(Clone, Debug)]
pub struct Fbcsp {
    pub config: BaselineConfig,
    pub sampling_rate: f64,
    pub n_samples: usize,
    filters: Vec<Bandpass>,
    pub csps: Vec<OneVsRestCsp>,
    /// Selected feature indices, highest mutual information first.
    pub selected: Vec<usize>,
    /// Mutual information of every concatenated feature, in nats.
    pub scores: Vec<f64>,
    pub lda: LdaModel,
}

impl Fbcsp {
    pub const CHECKPOINT_KIND: &'static str = "fbcsp";

    pub fn fit(trials: &[&EegTrial], n_classes: usize, sampling_rate: f64, config: &BaselineConfig) -> Result<Self> {
        config.validate()?;
        let n_samples = trials
            .first()
            .map(|t| t.n_samples())
            .ok_or_else(|| Error::Data("FBCSP: no training trials".into()))?;
        let filters = config.bank.prepare(sampling_rate, n_samples)?;
        let csps = filters
            .par_iter()
            .map(|f| {
                let filtered = trials.iter().map(|t| f.apply_trial(t)).collect::<Result<Vec<_>>>()?;
                OneVsRestCsp::fit(&refs(&filtered), n_classes, config.n_pairs, config.csp_eps)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut model = Fbcsp {
            config: config.clone(),
            sampling_rate,
            n_samples,
            filters,
            csps,
            selected: Vec::new(),
            scores: Vec::new(),
            lda: placeholder_lda(),
        };
        let all = trials
            .iter()
            .map(|t| model.all_features(t))
            .collect::<Result<Vec<_>>>()?;
        let labels = labels_of(trials);
        let (selected, scores) = select_top_k(&all, &labels, n_classes, config.k_select)?;
        let picked: Vec<Vec<f64>> = all.iter().map(|f| selected.iter().map(|&j| f[j]).collect()).collect();
        model.lda = fit_lda(&picked, &labels, n_classes, config.shrinkage)?;
        model.selected = selected;
        model.scores = scores;
        Ok(model)
    }

    pub fn n_bands(&self) -> usize {
        self.csps.len()
    }

    /// Length of one band's block in the concatenated feature vector.
    pub fn band_width(&self) -> usize {
        self.csps.first().map_or(0, OneVsRestCsp::feature_len)
    }

    /// Band-by-band concatenation of the one-vs-rest CSP features.
    pub fn all_features(&self, trial: &EegTrial) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.n_bands() * self.band_width());
        for (f, csp) in self.filters.iter().zip(&self.csps) {
            out.extend(csp.features(&f.apply_trial(trial)?)?);
        }
        Ok(out)
    }

    pub fn band_of(&self, feature: usize) -> usize {
        feature / self.band_width().max(1)
    }

    /// Distinct bands contributing selected features, ascending.
    pub fn selected_bands(&self) -> Vec<usize> {
        let mut bands: Vec<usize> = self.selected.iter().map(|&j| self.band_of(j)).collect();
        bands.sort_unstable();
        bands.dedup();
        bands
    }

    pub fn predict(&self, trial: &EegTrial) -> Result<usize> {
        let all = self.all_features(trial)?;
        let picked: Vec<f64> = self.selected.iter().map(|&j| all[j]).collect();
        self.lda.predict(&picked)
    }

    pub fn accuracy(&self, trials: &[&EegTrial]) -> Result<f64> {
        accuracy_of(|t| self.predict(t), trials)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(
            Self::CHECKPOINT_KIND,
            json!({
                "baseline": self.config,
                "sampling_rate": self.sampling_rate,
                "n_samples": self.n_samples,
            }),
        );
        for (b, csp) in self.csps.iter().enumerate() {
            push_csp(&mut ck, &format!("band.{b}.csp"), csp);
        }
        ck.push("fbcsp.selected", Tensor::from_vec(self.selected.iter().map(|&j| j as f64).collect()));
        ck.push("fbcsp.scores", Tensor::from_vec(self.scores.clone()));
        push_lda(&mut ck, &self.lda);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(Self::CHECKPOINT_KIND)?;
        let config = config_from(ck)?;
        let field = |name: &str| {
            ck.config.get(name).cloned().ok_or_else(|| Error::Format {
                offset: 0,
                msg: format!("fbcsp checkpoint config lacks `{name}`"),
            })
        };
        let bad = |e: serde_json::Error| Error::Format {
            offset: 0,
            msg: e.to_string(),
        };
        let sampling_rate: f64 = serde_json::from_value(field("sampling_rate")?).map_err(bad)?;
        let n_samples: usize = serde_json::from_value(field("n_samples")?).map_err(bad)?;
        let lda = read_lda(ck, config.shrinkage)?;
        let filters = config.bank.prepare(sampling_rate, n_samples)?;
        let csps = (0..filters.len())
            .map(|b| read_csp(ck, &format!("band.{b}.csp"), lda.n_classes(), config.csp_eps))
            .collect::<Result<Vec<_>>>()?;
        let selected = ck.tensor("fbcsp.selected")?.data().iter().map(|&v| v as usize).collect();
        let scores = ck.tensor("fbcsp.scores")?.data().to_vec();
        Ok(Fbcsp {
            config,
            sampling_rate,
            n_samples,
            filters,
            csps,
            selected,
            scores,
            lda,
        })
    }
}

fn placeholder_lda() -> LdaModel {
    LdaModel {
        means: Vec::new(),
        covariance: DMatrix::zeros(0, 0),
        priors: Vec::new(),
        shrinkage: 0.0,
        weights: DMatrix::zeros(0, 0),
        biases: Vec::new(),
    }
}

fn config_from(ck: &Checkpoint) -> Result<BaselineConfig> {
    let v = ck.config.get("baseline").cloned().unwrap_or_default();
    serde_json::from_value(v).map_err(|e| Error::Format {
        offset: 0,
        msg: format!("baseline config echo: {e}"),
    })
}

fn matrix_tensor(m: &DMatrix<f64>) -> Tensor {
    let data = (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)])).collect();
    Tensor::new(vec![m.nrows(), m.ncols()], data).expect("matrix extents are positive")
}

fn tensor_matrix(t: &Tensor, name: &str) -> Result<DMatrix<f64>> {
    if t.rank() != 2 {
        return Err(Error::Format {
            offset: 0,
            msg: format!("tensor `{name}` should be a matrix, has shape {:?}", t.shape()),
        });
    }
    Ok(DMatrix::from_row_slice(t.shape()[0], t.shape()[1], t.data()))
}

fn push_csp(ck: &mut Checkpoint, prefix: &str, csp: &OneVsRestCsp) {
    for (k, m) in csp.models.iter().enumerate() {
        let p = format!("{prefix}.{k}");
        ck.push(format!("{p}.filters"), matrix_tensor(&m.filters));
        ck.push(format!("{p}.spectrum"), Tensor::from_vec(m.spectrum.clone()));
        ck.push(
            format!("{p}.selected"),
            Tensor::from_vec(m.selected.iter().map(|&i| i as f64).collect()),
        );
        ck.push(
            format!("{p}.flags"),
            Tensor::from_vec(vec![m.regularized as u8 as f64, m.degenerate as u8 as f64]),
        );
    }
}

fn read_csp(ck: &Checkpoint, prefix: &str, n_classes: usize, eps: f64) -> Result<OneVsRestCsp> {
    let models = (0..n_classes)
        .map(|k| {
            let p = format!("{prefix}.{k}");
            let name = format!("{p}.filters");
            let filters = tensor_matrix(ck.tensor(&name)?, &name)?;
            let spectrum = ck.tensor(&format!("{p}.spectrum"))?.data().to_vec();
            let selected: Vec<usize> = ck
                .tensor(&format!("{p}.selected"))?
                .data()
                .iter()
                .map(|&v| v as usize)
                .collect();
            if selected.iter().any(|&i| i >= spectrum.len()) || selected.len() != filters.nrows() {
                return Err(Error::Format {
                    offset: 0,
                    msg: format!("`{p}` filter selection disagrees with its spectrum"),
                });
            }
            let flags = ck.tensor(&format!("{p}.flags"))?.data();
            Ok(CspModel {
                eigenvalues: selected.iter().map(|&i| spectrum[i]).collect(),
                filters,
                spectrum,
                selected,
                target: k,
                eps,
                regularized: flags.first() == Some(&1.0),
                degenerate: flags.get(1) == Some(&1.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OneVsRestCsp { models })
}

fn push_lda(ck: &mut Checkpoint, lda: &LdaModel) {
    let means = DMatrix::from_fn(lda.n_classes(), lda.n_features(), |k, j| lda.means[k][j]);
    ck.push("lda.means", matrix_tensor(&means));
    ck.push("lda.covariance", matrix_tensor(&lda.covariance));
    ck.push("lda.priors", Tensor::from_vec(lda.priors.clone()));
}

fn read_lda(ck: &Checkpoint, shrinkage: f64) -> Result<LdaModel> {
    let means = tensor_matrix(ck.tensor("lda.means")?, "lda.means")?;
    let cov = tensor_matrix(ck.tensor("lda.covariance")?, "lda.covariance")?;
    let priors = ck.tensor("lda.priors")?.data().to_vec();
    if priors.len() != means.nrows() || cov.nrows() != means.ncols() {
        return Err(Error::Format {
            offset: 0,
            msg: "LDA tensors disagree in shape".into(),
        });
    }
    let means = (0..means.nrows())
        .map(|k| DVector::from_iterator(means.ncols(), means.row(k).iter().copied()))
        .collect();
    LdaModel::from_parts(means, cov, priors, shrinkage)
}

/// Stratified k-fold evaluation of a baseline under the same protocol as the
/// factorization model: per-fold z-scoring, fit on the fold's training part,
/// score the fixed test set.
pub fn cross_validate_baseline(
    train: &Dataset,
    test: &Dataset,
    k: usize,
    kind: BaselineKind,
    config: &BaselineConfig,
    seed: u64,
    parallel: usize,
) -> Result<CvSummary> {
    config.validate()?;
    if test.is_empty() {
        return Err(Error::contract("cross_validate_baseline", "empty test set"));
    }
    let fs = match kind {
        BaselineKind::Fbcsp => Some(config.resolve_sampling_rate(train)?),
        BaselineKind::Csp => None,
    };
    let n_classes = train.n_classes();
    let plans = fold_plans(train, k, seed)?;
    let folds = run_folds(&plans, parallel, |plan| {
        let data = FoldData::prepare(train, test, plan)?;
        let (tr, val, te) = (refs(&data.train), refs(&data.val), refs(&data.test));
        let (val_acc, test_acc, bands) = match kind {
            BaselineKind::Csp => {
                let m = CspLda::fit(&tr, n_classes, config)?;
                (m.accuracy(&val)?, m.accuracy(&te)?, Vec::new())
            }
            BaselineKind::Fbcsp => {
                let m = Fbcsp::fit(&tr, n_classes, fs.unwrap(), config)?;
                (m.accuracy(&val)?, m.accuracy(&te)?, m.selected_bands())
            }
        };
        let mut report = FoldReport::single_shot(plan.index, plan.seed, test_acc);
        report.val_accuracy = vec![val_acc];
        report.best_val_accuracy = val_acc;
        report.selected_bands = bands;
        Ok(report)
    })?;
    CvSummary::from_folds(
        kind.label(),
        seed,
        folds,
        json!({ "k": k, "baseline": kind, "config": config }),
        train.content_hash(),
    )
}
