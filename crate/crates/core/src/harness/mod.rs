//! Experiment configuration, run dispatch, figure recipes and output files.

mod config;
mod io;
mod plot;
mod recipes;
mod run;
mod table;

pub use config::{
    CurveSection, DataSection, ExperimentConfig, RunKind, ShrinkSection, StudentSection, TeacherSection,
    TrainingSection, TransferSection,
};
pub use io::{matrix_from_csv, matrix_to_csv, read_matrix, write_atomic, write_matrix};
pub use plot::{Plot, Series, Style};
pub use recipes::{figure_tables, FIGURES};
pub use run::{
    reproduce, run, shrink_matrix, simulate, simulate_seeds, theory_curve, transfer_rows, Artifact, RunManifest,
    MANIFEST_NAME,
};
pub use table::Table;
