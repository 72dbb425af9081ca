use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rmt::SpectrumParams;
use crate::shrinkage::{shrink_denoise, ShrinkageReport};
use crate::simulator::{
    default_learning_rate, init_student, make_dataset, make_teacher, train_gd, ErrorTrace, Schedule, StudentDims,
    TrainOptions,
};
use crate::theory::{log_grid, oversampled_equivalent, TheoryModel, UndersampledModel};
use crate::transfer::{grid_to_csv, transfer_grid, TransferGridRow, TransferSimConfig};

use super::config::{ExperimentConfig, RunKind};
use super::io::{read_matrix, write_atomic, write_matrix};
use super::plot::{Plot, Series, Style};
use super::recipes::reproduce_into;
use super::table::Table;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Record of a finished run, written last so its presence marks completion.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub version: String,
    pub wall_time_secs: f64,
    /// Output files relative to the output directory.
    pub outputs: Vec<PathBuf>,
}

/// A named table with an optional plot, written as `<name>.csv` / `<name>.svg`.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub table: Table,
    pub plot: Option<Plot>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, table: Table) -> Self {
        Artifact {
            name: name.into(),
            table,
            plot: None,
        }
    }

    pub fn with_plot(mut self, plot: Plot) -> Self {
        self.plot = Some(plot);
        self
    }
}

pub(crate) fn write_artifacts(dir: &Path, artifacts: &[Artifact], plots: bool) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for a in artifacts {
        let csv = PathBuf::from(format!("{}.csv", a.name));
        write_atomic(&dir.join(&csv), a.table.to_csv().as_bytes())?;
        written.push(csv);
        if let (true, Some(plot)) = (plots, &a.plot) {
            let svg = PathBuf::from(format!("{}.svg", a.name));
            write_atomic(&dir.join(&svg), plot.to_svg().as_bytes())?;
            written.push(svg);
        }
    }
    Ok(written)
}

/// Analytic `t_over_tau, eps_train, eps_test` on the configured grid. P > N₁
/// goes through the equivalent P = N₁ problem; for P < N₁ only the test error
/// has a closed form and the train column is left empty.
pub fn theory_curve(cfg: &ExperimentConfig) -> Result<Table> {
    let theory = cfg.theory_config()?;
    let grid = log_grid(cfg.curve.t_min, cfg.curve.t_max, cfg.curve.points);
    let mut table = Table::new(["t_over_tau", "eps_train", "eps_test"]);
    let p = theory.sample_count;
    if p < theory.n1 {
        let model = UndersampledModel::new(&theory)?;
        for t in grid {
            table.push(vec![t, f64::NAN, model.test_error(t)?]);
        }
    } else {
        let model = TheoryModel::new(&if p > theory.n1 { oversampled_equivalent(&theory)? } else { theory })?;
        for t in grid {
            table.push(vec![t, model.train_error(t)?, model.test_error(t)?]);
        }
    }
    Ok(table)
}

/// One training run whose teacher, data and student all derive from `seed`.
pub fn simulate(cfg: &ExperimentConfig, seed: u64) -> Result<ErrorTrace> {
    let t = &cfg.teacher;
    let teacher = make_teacher(t.n1, t.n3, &t.snrs, t.sigma_z, seed)?;
    let ds = make_dataset(&teacher, cfg.samples(), cfg.data.design, seed)?;
    let dims = StudentDims::new(t.n1, cfg.width(), t.n3, cfg.student.depth)?;
    let mut student = init_student(dims, cfg.student.eps, cfg.student.init, Some(&ds), seed, cfg.student.activation)?;
    let tr = &cfg.training;
    let lr = tr.learning_rate.unwrap_or_else(|| default_learning_rate(&ds, cfg.student.depth));
    let mut opts = TrainOptions::until(lr, tr.t_max);
    opts.schedule = Schedule::Log {
        points: tr.record_points,
    };
    opts.tracked_modes = cfg.tracked_modes();
    opts.engine = tr.engine;
    opts.early_stop = tr.early_stop;
    train_gd(&mut student, &ds, &teacher, &opts)
}

/// Runs seeds `seed, seed+1, …` in parallel, returned in seed order.
pub fn simulate_seeds(cfg: &ExperimentConfig) -> Result<Vec<ErrorTrace>> {
    (0..cfg.training.seeds as u64)
        .into_par_iter()
        .map(|i| simulate(cfg, cfg.seed.wrapping_add(i)))
        .collect()
}

/// Denoises a matrix whose noise bulk has the given aspect ratio (unit scale).
pub fn shrink_matrix(m: &DMatrix<f64>, aspect: Option<f64>, margin: f64) -> Result<ShrinkageReport> {
    let a = aspect.unwrap_or(m.nrows() as f64 / m.ncols().max(1) as f64);
    let expected = m.nrows() as f64 / m.ncols().max(1) as f64;
    if (a - expected).abs() > 1e-9 * expected.max(1.0) {
        return Err(Error::DimError(format!(
            "aspect {a} does not match the {}x{} input",
            m.nrows(),
            m.ncols()
        )));
    }
    shrink_denoise(m, &SpectrumParams::new(a)?, margin)
}

pub fn transfer_rows(cfg: &ExperimentConfig) -> Result<Vec<TransferGridRow>> {
    let tr = &cfg.transfer;
    let dynamics = cfg.dynamics()?;
    let sim = TransferSimConfig {
        student_width: cfg.width(),
        eps: cfg.student.eps,
        depth: cfg.student.depth,
        base_seed: cfg.seed,
        ..TransferSimConfig::default()
    };
    let sim = (tr.sim_seeds > 0).then_some((&sim, tr.sim_seeds));
    transfer_grid(cfg.teacher.n1, cfg.teacher.n3, tr.snr_a, &tr.snr_b, &tr.q, &dynamics, sim, cfg.seed)
}

fn curve_plot(title: &str, table: &Table) -> Plot {
    Plot::new(title, "t/tau", "relative error")
        .log_x()
        .log_y()
        .with(Series::new("train", table.xy("t_over_tau", "eps_train"), Style::Line))
        .with(Series::new("test", table.xy("t_over_tau", "eps_test"), Style::Line))
}

fn trace_table(trace: &ErrorTrace) -> Result<Table> {
    Table::from_csv(&trace.to_csv())
}

/// Validates, dispatches and writes outputs plus `manifest.json` into
/// `cfg.output_dir`. CSV outputs depend only on the config.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = cfg.output_dir.as_path();
    let outputs = match cfg.kind {
        RunKind::TheoryCurve => {
            let table = theory_curve(cfg)?;
            let plot = curve_plot("theory", &table);
            write_artifacts(dir, &[Artifact::new("theory", table).with_plot(plot)], cfg.plot)?
        }
        RunKind::Simulate => {
            let traces = simulate_seeds(cfg)?;
            let mut summary = Table::new(["seed", "t_opt", "eps_test_min", "eps_train_final", "eps_test_final"]);
            let mut artifacts = Vec::new();
            for (i, trace) in traces.iter().enumerate() {
                let seed = cfg.seed.wrapping_add(i as u64);
                let (t_opt, min) = trace.min_test().unwrap_or((f64::NAN, f64::NAN));
                summary.push(vec![
                    seed as f64,
                    t_opt,
                    min,
                    trace.last_train().unwrap_or(f64::NAN),
                    trace.last_test().unwrap_or(f64::NAN),
                ]);
                let table = trace_table(trace)?;
                let plot = curve_plot(&format!("seed {seed}"), &table);
                artifacts.push(Artifact::new(format!("trace_seed{seed}"), table).with_plot(plot));
            }
            artifacts.push(Artifact::new("summary", summary));
            write_artifacts(dir, &artifacts, cfg.plot)?
        }
        RunKind::Shrink => {
            let input = cfg.shrink.input.as_deref().expect("validated");
            let report = shrink_matrix(&read_matrix(input)?, cfg.shrink.aspect, cfg.shrink.margin)?;
            write_matrix(&dir.join("denoised.csv"), &report.estimate)?;
            write_atomic(&dir.join("shrink_report.csv"), report.to_csv().as_bytes())?;
            vec![PathBuf::from("denoised.csv"), PathBuf::from("shrink_report.csv")]
        }
        RunKind::Transfer => {
            let rows = transfer_rows(cfg)?;
            write_atomic(&dir.join("transfer.csv"), grid_to_csv(&rows).as_bytes())?;
            vec![PathBuf::from("transfer.csv")]
        }
        RunKind::Reproduce => {
            let figure = cfg.figure.as_deref().expect("validated");
            reproduce_into(figure, dir, cfg.seed, cfg.plot)?
        }
    };
    let manifest = RunManifest {
        config: cfg.clone(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        outputs,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&dir.join(MANIFEST_NAME), json.as_bytes())?;
    Ok(manifest)
}

/// `reproduce` as a run: canonical parameters for `figure`, plots on.
pub fn reproduce(figure: &str, outdir: &Path, seed: u64) -> Result<RunManifest> {
    let mut cfg = ExperimentConfig::new(RunKind::Reproduce);
    cfg.figure = Some(figure.to_string());
    cfg.output_dir = outdir.to_path_buf();
    cfg.seed = seed;
    cfg.plot = true;
    run(&cfg)
}
