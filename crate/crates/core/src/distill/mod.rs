//! Teacher training, feature-map distillation into the ECG-only student and
//! the ECG-only baseline.

mod data;
mod loss;
mod train;

pub use data::{prepare_windows, PreparedWindow};
pub use loss::{distill_loss, distill_loss_grad};
pub use train::{
    evaluate_student, evaluate_teacher, mean_distill_loss, train_baseline_ecg, train_student, train_teacher,
    EvalRecord, TrainConfig, TrainReport,
};
