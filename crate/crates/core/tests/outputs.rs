use std::path::Path;

use gendyn::harness::{reproduce, run, ExperimentConfig, RunKind, Table, MANIFEST_NAME};

fn columns(dir: &Path, name: &str) -> Vec<String> {
    let text = std::fs::read_to_string(dir.join(format!("{name}.csv"))).unwrap();
    Table::from_csv(&text).unwrap().columns().to_vec()
}

fn check(dir: &Path, name: &str, expected: &[&str]) {
    assert_eq!(columns(dir, name), expected, "{name}");
}

const CURVES: [&str; 7] = [
    "t_over_tau",
    "train_theory",
    "test_theory",
    "train_ta",
    "test_ta",
    "train_random",
    "test_random",
];
const STOPPING: [&str; 5] = ["seed", "ta_eps_min", "ta_t_opt", "random_eps_min", "random_t_opt"];

// fig_deep shares the fig3 recipe and fig5 the transfer grid writer, whose
// header has its own unit test; both are too slow to run here.
#[test]
fn figure_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |f: &str| tmp.path().join(f);

    reproduce("fig1", &dir("fig1"), 0).unwrap();
    check(&dir("fig1"), "fig1_mode_curves", &["t_over_tau", "shat_0.5", "shat_1", "shat_2", "shat_4", "shat_8"]);
    check(&dir("fig1"), "fig1_detection_wave", &["shat", "t_0.5", "t_1", "t_2", "t_4", "t_8"]);

    reproduce("fig2", &dir("fig2"), 0).unwrap();
    check(&dir("fig2"), "fig2_histogram", &["shat_lo", "shat_hi", "density_empirical", "density_theory"]);
    check(&dir("fig2"), "fig2_shat", &["sbar", "shat_theory", "shat_empirical"]);
    check(&dir("fig2"), "fig2_overlap", &["sbar", "overlap_theory", "overlap_empirical"]);

    reproduce("fig3", &dir("fig3"), 0).unwrap();
    for rank in ["rank1", "rank3"] {
        check(&dir("fig3"), &format!("fig3_{rank}_curves"), &CURVES);
        check(&dir("fig3"), &format!("fig3_{rank}_stopping"), &STOPPING);
    }

    reproduce("fig6", &dir("fig6"), 0).unwrap();
    check(&dir("fig6"), "fig6_spectra", &["index", "shat_structured", "shat_randomized"]);
    check(
        &dir("fig6"),
        "fig6_curves",
        &[
            "t_over_tau",
            "train_theory_structured",
            "train_sim_structured",
            "train_theory_randomized",
            "train_sim_randomized",
        ],
    );

    reproduce("fig_alignment", &dir("fig_alignment"), 0).unwrap();
    for depth in [3, 5] {
        check(
            &dir("fig_alignment"),
            &format!("fig_alignment_depth{depth}_rank1"),
            &["t_over_tau", "eps_train", "eps_test", "s_1", "align_u_1", "align_v_1"],
        );
        assert_eq!(columns(&dir("fig_alignment"), &format!("fig_alignment_depth{depth}_rank3")).len(), 12);
    }

    reproduce("fig_P", &dir("fig_P"), 0).unwrap();
    let mut p_cols = vec!["t_over_tau".to_string()];
    for p in [25, 50, 100, 200, 400] {
        p_cols.push(format!("test_theory_P{p}"));
        p_cols.push(format!("test_sim_P{p}"));
    }
    assert_eq!(columns(&dir("fig_P"), "fig_P_curves"), p_cols);
    check(&dir("fig_P"), "fig_P_collapse", &["snr", "p", "snr_eff", "eps_min_theory", "eps_min_sim"]);
    check(&dir("fig_P"), "fig_P_gaussian", &["snr", "eps_min_orthonormal", "eps_min_gaussian"]);

    reproduce("fig_rank", &dir("fig_rank"), 0).unwrap();
    check(
        &dir("fig_rank"),
        "fig_rank",
        &["n2", "seed", "eps_min_theory", "ta_eps_min", "ta_t_opt", "random_eps_min", "random_t_opt"],
    );

    let m = reproduce("fig_shrink", &dir("fig_shrink"), 0).unwrap();
    check(&dir("fig_shrink"), "fig_shrink", &["snr", "trial", "eps_shrink", "eps_gd_min", "eps_predicted"]);
    assert!(m.outputs.iter().any(|p| p.extension().is_some_and(|e| e == "svg")));
    assert!(dir("fig_shrink").join(MANIFEST_NAME).exists());
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn identical_runs_write_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(RunKind::Simulate);
    cfg.teacher.snrs = vec![4.0, 2.0];
    cfg.teacher.n1 = 40;
    cfg.teacher.n3 = 20;
    cfg.student.init = gendyn::simulator::InitMode::Random;
    cfg.training.t_max = 5.0;
    cfg.training.record_points = 30;
    cfg.training.seeds = 3;
    cfg.seed = 9;
    let mut outputs = Vec::new();
    for k in 0..2 {
        cfg.output_dir = tmp.path().join(format!("run{k}"));
        run(&cfg).unwrap();
        outputs.push(csv_bytes(&cfg.output_dir));
    }
    assert_eq!(outputs[0].len(), 4);
    assert_eq!(outputs[0], outputs[1]);

    for k in 0..2 {
        reproduce("fig_shrink", &tmp.path().join(format!("shrink{k}")), 3).unwrap();
    }
    assert_eq!(csv_bytes(&tmp.path().join("shrink0")), csv_bytes(&tmp.path().join("shrink1")));
}

#[test]
fn manifest_records_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(RunKind::TheoryCurve);
    cfg.curve.points = 10;
    cfg.output_dir = tmp.path().to_path_buf();
    cfg.seed = 5;
    let m = run(&cfg).unwrap();
    let text = std::fs::read_to_string(tmp.path().join(MANIFEST_NAME)).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["seed"], 5);
    assert_eq!(json["config"]["kind"], "theory_curve");
    assert_eq!(json["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m.outputs, [std::path::PathBuf::from("theory.csv")]);
}
