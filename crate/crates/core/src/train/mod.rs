//! Adversarial + cross-entropy training, early stopping and the
//! cross-validation protocol.

mod cv;
mod losses;
mod report;
mod trainer;

pub use cv::{cross_validate, derive_seed, fold_plans, run_folds, FoldData, FoldPlan};
pub(crate) use cv::refs;
pub use losses::{
    adversarial_losses, cross_entropy, cross_entropy_batch, total_loss, AdversarialLosses, GeneratorLoss,
};
pub use report::{format_mean_std, mean_std, render_table, CvSummary, EpochRecord, FoldReport, ReportRow};
pub use trainer::{fit, EarlyStopping, StepLosses, TrainConfig, Trainer};
