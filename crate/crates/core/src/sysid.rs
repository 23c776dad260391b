//! Black-box identification of the plant: `tanh` perceptrons trained with
//! Levenberg–Marquardt, fit statistics, and the per-fault model bank.

mod bank;
mod lm;
mod mlp;
mod report;

pub use bank::{
    build_model_bank, BankDataset, BankModel, ModelBank, ModelTarget, HEALTHY_CORRELATION_GATE,
    MIN_BANK_SAMPLES,
};
pub use lm::{split_indices, train_lm, train_lm_detailed, Split, StopReason, TrainConfig, TrainOutcome};
pub use mlp::{MlpRegressor, Scaling};
pub use report::{fit_report, pearson, FitReport, Histogram, HISTOGRAM_BINS};
