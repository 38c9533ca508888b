//! CSP+LDA and FBCSP comparison baselines.

mod csp;
mod filter;
mod lda;
mod pipeline;
mod select;

pub use csp::{
    class_covariance, csp_features, fit_csp, fit_csp_pair, trial_covariance, CspModel, OneVsRestCsp, CSP_EPS,
};
pub use filter::{bandpass, mask_gain, Band, Bandpass, FilterBank, FilterDesign};
pub use lda::{fit_lda, LdaModel, DEFAULT_SHRINKAGE};
pub use pipeline::{cross_validate_baseline, BaselineConfig, BaselineKind, CspLda, Fbcsp};
pub use select::{mutual_information, select_top_k, MI_BINS};
