use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::argmax;

pub const DEFAULT_SHRINKAGE: f64 = 0.1;

/// Gaussian classifier with one covariance shared by all classes.
#[derive(Clone, Debug, PartialEq)]
pub struct LdaModel {
    pub means: Vec<DVector<f64>>,
    /// Pooled within-class covariance after shrinkage.
    pub covariance: DMatrix<f64>,
    pub priors: Vec<f64>,
    pub shrinkage: f64,
    /// Row k is `Σ⁻¹μ_k`.
    pub weights: DMatrix<f64>,
    /// `−½ μ_kᵀ Σ⁻¹ μ_k + ln π_k`.
    pub biases: Vec<f64>,
}

impl LdaModel {
    pub fn n_features(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.means.len()
    }

    /// Rebuilds the discriminant from means, covariance and priors.
    pub fn from_parts(
        means: Vec<DVector<f64>>,
        covariance: DMatrix<f64>,
        priors: Vec<f64>,
        shrinkage: f64,
    ) -> Result<Self> {
        let d = covariance.nrows();
        let chol = Cholesky::new(covariance.clone())
            .ok_or_else(|| Error::Numerical("LDA covariance is not positive definite".into()))?;
        let mut weights = DMatrix::zeros(means.len(), d);
        let mut biases = Vec::with_capacity(means.len());
        for (k, mu) in means.iter().enumerate() {
            if mu.len() != d {
                return Err(Error::dim("lda", "features", d, mu.len()));
            }
            let w = chol.solve(mu);
            biases.push(-0.5 * mu.dot(&w) + priors[k].ln());
            weights.set_row(k, &w.transpose());
        }
        Ok(LdaModel {
            means,
            covariance,
            priors,
            shrinkage,
            weights,
            biases,
        })
    }

    pub fn discriminants(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::dim("predict_lda", "features", self.n_features(), x.len()));
        }
        let x = DVector::from_column_slice(x);
        Ok((&self.weights * x)
            .iter()
            .zip(&self.biases)
            .map(|(a, b)| a + b)
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.discriminants(x)?))
    }
}

/// Fits LDA with covariance `(1 − γ)·Σ + γ·(tr Σ / d)·I`.
pub fn fit_lda(features: &[Vec<f64>], labels: &[usize], n_classes: usize, shrinkage: f64) -> Result<LdaModel> {
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(Error::config("shrinkage", format!("{shrinkage} is outside [0, 1]")));
    }
    if features.len() != labels.len() {
        return Err(Error::dim("fit_lda", "samples", features.len(), labels.len()));
    }
    let d = features
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Data("fit_lda: no samples".into()))?;
    if d == 0 {
        return Err(Error::Data("fit_lda: zero-length feature vectors".into()));
    }
    let mut counts = vec![0usize; n_classes];
    let mut sums = vec![DVector::zeros(d); n_classes];
    for (x, &y) in features.iter().zip(labels) {
        if x.len() != d {
            return Err(Error::dim("fit_lda", "features", d, x.len()));
        }
        if y >= n_classes {
            return Err(Error::Data(format!("fit_lda: label {y} out of range for {n_classes} classes")));
        }
        counts[y] += 1;
        sums[y] += DVector::from_column_slice(x);
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::Data(format!("fit_lda: need at least 2 classes, got {present}")));
    }
    if let Some(k) = counts.iter().position(|&c| c < 2) {
        return Err(Error::Data(format!(
            "fit_lda: class {k} has {} samples, need at least 2",
            counts[k]
        )));
    }
    let means: Vec<DVector<f64>> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let mut cov = DMatrix::zeros(d, d);
    for (x, &y) in features.iter().zip(labels) {
        let r = DVector::from_column_slice(x) - &means[y];
        cov += &r * r.transpose();
    }
    let n = features.len();
    cov /= (n - n_classes) as f64;
    let target = cov.trace() / d as f64;
    let target = if target > 0.0 { target } else { 1.0 };
    let mut shrunk = cov * (1.0 - shrinkage);
    for i in 0..d {
        shrunk[(i, i)] += shrinkage * target;
    }
    let priors = counts.iter().map(|&c| c as f64 / n as f64).collect();
    LdaModel::from_parts(means, shrunk, priors, shrinkage)
}
