//! Teacher–student simulations of deep linear (or leaky) networks trained by
//! full-batch gradient descent.

mod dataset;
mod measure;
mod student;
mod teacher;
mod trace;
mod train;

pub use dataset::{make_dataset, make_dataset_with_noise, noise_matrix, InputDesign, TrainingSet};
pub use measure::{measure_errors, measure_student, mode_profile, row_selector, ErrorPair, TestProbe, PROBE_SIZE};
pub use student::{init_student, Activation, InitInfo, InitMode, StudentDims, StudentState};
pub use teacher::{make_teacher, TeacherSpec};
pub use trace::{alignment_trace, ErrorTrace, ModeAlignment};
pub use train::{default_learning_rate, train_gd, Engine, Schedule, TrainOptions, DIVERGENCE_LIMIT, FLOW_WARN_LIMIT};
