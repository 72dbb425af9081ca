use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use gendyn::harness::{
    read_matrix, reproduce, run, shrink_matrix, simulate, theory_curve, transfer_rows, write_atomic, write_matrix,
    ExperimentConfig, RunKind, FIGURES,
};
use gendyn::transfer::grid_to_csv;
use gendyn::{Error, Result};

#[derive(Parser)]
#[command(name = "gendyn", version, about = "Learning curves, simulations and transfer of deep linear networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic train/test error curves.
    Theory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one student by gradient descent and write its error trace.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Denoise a matrix by singular-value shrinkage.
    Shrink {
        #[arg(long)]
        input: PathBuf,
        /// Aspect ratio rows/cols of the noise model.
        #[arg(long)]
        aspect: Option<f64>,
        #[arg(long, default_value_t = gendyn::shrinkage::DEFAULT_MARGIN)]
        margin: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Transfer benefit of task B on task A for rank-1 teachers.
    Transfer {
        #[arg(long)]
        snr_a: f64,
        #[arg(long, default_value_t = 3.0)]
        snr_b: f64,
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        /// Sweep q in {0, .25, .5, .75, 1} and snr_b in {1, 2, 3, 5, 10}.
        #[arg(long)]
        grid: bool,
        /// Seeds per cell for the simulated benefit (0: theory only).
        #[arg(long, default_value_t = 0)]
        sim_seeds: usize,
        #[arg(long, default_value_t = 100)]
        n1: usize,
        #[arg(long, default_value_t = 50)]
        n3: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate the data behind one figure.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(FIGURES))]
        figure: String,
        #[arg(long)]
        outdir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run any experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        outdir: Option<PathBuf>,
    },
}

fn load(path: &Path, kind: RunKind) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load_as(path, kind)?;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Theory { config, out } => {
            let cfg = load(&config, RunKind::TheoryCurve)?;
            write_atomic(&out, theory_curve(&cfg)?.to_csv().as_bytes())?;
        }
        Command::Simulate { config, seed, out } => {
            let mut cfg = load(&config, RunKind::Simulate)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let trace = simulate(&cfg, cfg.seed)?;
            if let Some((t, e)) = trace.min_test() {
                info!("minimum test error {e:.4} at t/tau = {t:.3}");
            }
            trace.write_csv(&out)?;
        }
        Command::Shrink {
            input,
            aspect,
            margin,
            out,
            report,
        } => {
            let r = shrink_matrix(&read_matrix(&input)?, aspect, margin)?;
            info!("{} modes above the bulk edge {:.4}", r.detected.len(), r.bulk_edge);
            write_matrix(&out, &r.estimate)?;
            if let Some(path) = report {
                write_atomic(&path, r.to_csv().as_bytes())?;
            }
        }
        Command::Transfer {
            snr_a,
            snr_b,
            q,
            grid,
            sim_seeds,
            n1,
            n3,
            seed,
            out,
        } => {
            let mut cfg = ExperimentConfig::new(RunKind::Transfer);
            cfg.seed = seed;
            cfg.teacher.n1 = n1;
            cfg.teacher.n3 = n3;
            cfg.transfer.snr_a = snr_a;
            cfg.transfer.sim_seeds = sim_seeds;
            if grid {
                cfg.transfer.snr_b = vec![1.0, 2.0, 3.0, 5.0, 10.0];
            } else {
                cfg.transfer.snr_b = vec![snr_b];
                cfg.transfer.q = vec![q];
            }
            cfg.validate()?;
            write_atomic(&out, grid_to_csv(&transfer_rows(&cfg)?).as_bytes())?;
        }
        Command::Reproduce { figure, outdir, seed } => {
            let m = reproduce(&figure, &outdir, seed)?;
            info!("{figure}: {} files in {:.1} s", m.outputs.len(), m.wall_time_secs);
        }
        Command::Run { config, outdir } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = outdir {
                cfg.output_dir = dir;
            }
            let m = run(&cfg)?;
            info!("{} files in {:.1} s", m.outputs.len(), m.wall_time_secs);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
