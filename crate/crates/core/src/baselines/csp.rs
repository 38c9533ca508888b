use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::EegTrial;
use crate::error::{Error, Result};

/// Default diagonal loading for a singular composite covariance.
pub const CSP_EPS: f64 = 1e-6;

/// Eigenvalue spread below which the filter choice is arbitrary.
const DEGENERATE_SPREAD: f64 = 1e-9;

/// `X·Xᵀ / trace(X·Xᵀ)` over the channels of a trial.
pub fn trial_covariance(trial: &EegTrial) -> Result<DMatrix<f64>> {
    let c = trial.n_channels();
    let mut cov = DMatrix::zeros(c, c);
    for i in 0..c {
        for j in 0..=i {
            let v = crate::tensor::kernels::dot(trial.channel(i), trial.channel(j));
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let trace = cov.trace();
    if trace <= 0.0 || !trace.is_finite() {
        return Err(Error::Data(format!(
            "trial covariance has trace {trace}; all-zero or non-finite trial"
        )));
    }
    Ok(cov / trace)
}

/// Mean normalized covariance of `trials` and how many there were.
pub fn class_covariance<'a>(
    trials: impl IntoIterator<Item = &'a EegTrial>,
    n_channels: usize,
) -> Result<(DMatrix<f64>, usize)> {
    let mut sum = DMatrix::zeros(n_channels, n_channels);
    let mut n = 0;
    for t in trials {
        if t.n_channels() != n_channels {
            return Err(Error::dim("class_covariance", "channels", n_channels, t.n_channels()));
        }
        sum += trial_covariance(t)?;
        n += 1;
    }
    if n > 0 {
        sum /= n as f64;
    }
    Ok((sum, n))
}

/// Spatial filters for one target-vs-rest problem.
#[derive(Clone, Debug, PartialEq)]
pub struct CspModel {
    /// Rows are filters: the `n_pairs` most target-variant first, then the
    /// `n_pairs` least, each group in descending eigenvalue order.
    pub filters: DMatrix<f64>,
    /// Generalized eigenvalues of the kept filters, matching `filters` rows.
    pub eigenvalues: Vec<f64>,
    /// All generalized eigenvalues, descending.
    pub spectrum: Vec<f64>,
    /// Indices into `spectrum` of the kept filters.
    pub selected: Vec<usize>,
    pub target: usize,
    pub eps: f64,
    /// The composite covariance needed diagonal loading.
    pub regularized: bool,
    /// All eigenvalues coincide, so any filter is as good as another.
    pub degenerate: bool,
}

impl CspModel {
    pub fn n_channels(&self) -> usize {
        self.filters.ncols()
    }

    pub fn n_filters(&self) -> usize {
        self.filters.nrows()
    }
}

fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Solves `C_a·w = λ·(C_a + C_b)·w` by whitening the composite covariance and
/// diagonalizing the whitened `C_a`. Filters are scaled so that
/// `wᵀ(C_a + C_b)w = 1`.
pub fn fit_csp_pair(cov_a: &DMatrix<f64>, cov_b: &DMatrix<f64>, n_pairs: usize, eps: f64) -> Result<CspModel> {
    let c = cov_a.nrows();
    if c == 0 || !cov_a.is_square() || cov_b.shape() != cov_a.shape() {
        return Err(Error::dim(
            "fit_csp",
            "covariance",
            format!("{c}x{c}"),
            format!("{:?} and {:?}", cov_a.shape(), cov_b.shape()),
        ));
    }
    if n_pairs == 0 {
        return Err(Error::config("n_pairs", "must be at least 1"));
    }
    let mut composite = cov_a + cov_b;
    let (mut d, mut u) = sorted_eigen(&composite);
    let scale = d[0].abs().max(f64::MIN_POSITIVE);
    let regularized = d[c - 1] <= 1e-12 * scale;
    if regularized {
        log::warn!(
            "composite covariance is singular (smallest eigenvalue {:e}); adding {eps:e} to the diagonal",
            d[c - 1]
        );
        for i in 0..c {
            composite[(i, i)] += eps;
        }
        (d, u) = sorted_eigen(&composite);
        if d[c - 1] <= 0.0 {
            return Err(Error::Numerical("composite covariance not positive after regularization".into()));
        }
    }
    // P = D^{-1/2} Uᵀ whitens the composite: P (C_a + C_b) Pᵀ = I.
    let whiten = DMatrix::from_fn(c, c, |r, k| u[(k, r)] / d[r].sqrt());
    let s = &whiten * cov_a * whiten.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let (spectrum, v) = sorted_eigen(&s);
    let all_filters = v.transpose() * &whiten;

    let n_pairs = if 2 * n_pairs > c {
        let clamped = (c / 2).max(1);
        log::warn!("n_pairs {n_pairs} needs {} channels, have {c}; using {clamped}", 2 * n_pairs);
        clamped
    } else {
        n_pairs
    };
    let mut selected: Vec<usize> = (0..n_pairs).collect();
    for i in (c - n_pairs)..c {
        if !selected.contains(&i) {
            selected.push(i);
        }
    }
    let filters = DMatrix::from_fn(selected.len(), c, |r, k| all_filters[(selected[r], k)]);
    let spread = spectrum[0] - spectrum[c - 1];
    let degenerate = spread < DEGENERATE_SPREAD;
    if degenerate {
        log::warn!("class covariances are indistinguishable; CSP filter choice is arbitrary");
    }
    Ok(CspModel {
        filters,
        eigenvalues: selected.iter().map(|&i| spectrum[i]).collect(),
        spectrum,
        selected,
        target: 0,
        eps,
        regularized,
        degenerate,
    })
}

/// CSP for `target` against every other class.
pub fn fit_csp(trials: &[&EegTrial], target: usize, n_pairs: usize, eps: f64) -> Result<CspModel> {
    let first = trials
        .first()
        .ok_or_else(|| Error::Data("fit_csp: no trials".into()))?;
    let c = first.n_channels();
    let (cov_a, n_a) = class_covariance(trials.iter().copied().filter(|t| t.label == target), c)?;
    let (cov_b, n_b) = class_covariance(trials.iter().copied().filter(|t| t.label != target), c)?;
    if n_a == 0 || n_b == 0 {
        return Err(Error::Data(format!(
            "fit_csp: class {target} has {n_a} trials and the rest {n_b}; both must be nonempty"
        )));
    }
    let mut model = fit_csp_pair(&cov_a, &cov_b, n_pairs, eps)?;
    model.target = target;
    Ok(model)
}

/// `f_i = log(var(w_iᵀX) / Σ_j var(w_jᵀX))`.
pub fn csp_features(model: &CspModel, trial: &EegTrial) -> Result<Vec<f64>> {
    if trial.n_channels() != model.n_channels() {
        return Err(Error::dim("csp_features", "channels", model.n_channels(), trial.n_channels()));
    }
    let t = trial.n_samples();
    let vars: Vec<f64> = (0..model.n_filters())
        .map(|f| {
            let mut proj = vec![0.0; t];
            for ch in 0..model.n_channels() {
                crate::tensor::kernels::axpy(model.filters[(f, ch)], trial.channel(ch), &mut proj);
            }
            let mean = proj.iter().sum::<f64>() / t as f64;
            proj.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / t as f64
        })
        .collect();
    let total: f64 = vars.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::Numerical(format!(
            "csp_features: filtered variances sum to {total}"
        )));
    }
    Ok(vars.iter().map(|v| (v / total).max(f64::MIN_POSITIVE).ln()).collect())
}

/// One [`CspModel`] per class, features concatenated in class order.
#[derive(Clone, Debug, PartialEq)]
pub struct OneVsRestCsp {
    pub models: Vec<CspModel>,
}

impl OneVsRestCsp {
    pub fn fit(trials: &[&EegTrial], n_classes: usize, n_pairs: usize, eps: f64) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Data(format!("CSP needs at least 2 classes, got {n_classes}")));
        }
        let models = (0..n_classes)
            .map(|k| fit_csp(trials, k, n_pairs, eps))
            .collect::<Result<_>>()?;
        Ok(OneVsRestCsp { models })
    }

    pub fn feature_len(&self) -> usize {
        self.models.iter().map(CspModel::n_filters).sum()
    }

    pub fn features(&self, trial: &EegTrial) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.feature_len());
        for m in &self.models {
            out.extend(csp_features(m, trial)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(rows: &[&[f64]]) -> EegTrial {
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        EegTrial::new(rows.len(), rows[0].len(), data, 0).unwrap()
    }

    #[test]
    fn hand_computed_covariance() {
        let t = trial(&[&[1.0, 2.0, 0.0], &[0.0, 1.0, -1.0]]);
        // XXᵀ = [[5, 2], [2, 2]], trace 7.
        let c = trial_covariance(&t).unwrap();
        let want = [[5.0 / 7.0, 2.0 / 7.0], [2.0 / 7.0, 2.0 / 7.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((c[(i, j)] - want[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthogonal_channels_give_scaled_identity() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let t = trial(&[&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 1.0], &[s, s, -s, -s]]);
        let c = trial_covariance(&t).unwrap();
        assert!((c - DMatrix::identity(3, 3) / 3.0).abs().max() < 1e-12);
    }

    #[test]
    fn zero_trial_rejected() {
        assert!(matches!(trial_covariance(&EegTrial::zeros(2, 5, 0)), Err(Error::Data(_))));
    }

    #[test]
    fn duplicated_channel_is_rank_deficient() {
        let t = trial(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]);
        let c = trial_covariance(&t).unwrap();
        assert_eq!(c.row(0), c.row(1));
        assert!(c.determinant().abs() < 1e-15);
    }

    #[test]
    fn closed_form_two_by_two() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0]));
        let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]));
        let m = fit_csp_pair(&a, &b, 1, CSP_EPS).unwrap();
        assert!((m.eigenvalues[0] - 0.8).abs() < 1e-10);
        assert!((m.eigenvalues[1] - 0.2).abs() < 1e-10);
        assert!(m.filters[(0, 1)].abs() < 1e-10);
        assert!(m.filters[(1, 0)].abs() < 1e-10);
        let comp = &a + &b;
        for r in 0..2 {
            let w = m.filters.row(r).transpose();
            assert!(((w.transpose() * &comp * &w)[(0, 0)] - 1.0).abs() < 1e-10);
        }
        assert!(!m.degenerate && !m.regularized);
    }

    #[test]
    fn identical_classes_flagged() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let m = fit_csp_pair(&a, &a, 1, CSP_EPS).unwrap();
        assert!(m.degenerate);
        assert!(m.spectrum.iter().all(|l| (l - 0.5).abs() < 1e-12));
    }

    #[test]
    fn singular_composite_is_regularized() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let m = fit_csp_pair(&a, &a, 1, CSP_EPS).unwrap();
        assert!(m.regularized);
        assert!(m.filters.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn features_scale_invariant() {
        let a = DMatrix::from_row_slice(3, 3, &[3.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 0.5]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.1, 0.0, 1.0, 0.0, 0.1, 0.0, 2.0]);
        let m = fit_csp_pair(&a, &b, 1, CSP_EPS).unwrap();
        let t = trial(&[&[0.3, -1.0, 2.0, 0.5], &[1.0, 0.1, -0.4, 0.2], &[-0.7, 0.9, 0.3, 1.5]]);
        let f = csp_features(&m, &t).unwrap();
        let g = csp_features(&m, &t.scaled(37.5)).unwrap();
        for (x, y) in f.iter().zip(&g) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}
