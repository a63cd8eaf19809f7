//! End-to-end tests of the `transferlab` binary: flag surface, worked
//! examples, exit codes, file conventions, and manifest replays.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transferlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout:\n{}\nstderr:\n{}",
        stdout(out),
        stderr(out)
    );
}

/// The help screens are the public contract of the tool; any flag change
/// shows up as a diff against these checked-in transcripts.
#[test]
fn help_screens_match_the_golden_transcripts() {
    let cases: [(&[&str], &str); 5] = [
        (&["--help"], include_str!("golden/help.txt")),
        (
            &["predict", "reg", "--help"],
            include_str!("golden/help_predict_reg.txt"),
        ),
        (
            &["predict", "class", "--help"],
            include_str!("golden/help_predict_class.txt"),
        ),
        (&["sweep", "--help"], include_str!("golden/help_sweep.txt")),
        (
            &["reproduce", "--help"],
            include_str!("golden/help_reproduce.txt"),
        ),
    ];
    for (args, golden) in cases {
        let out = run(args);
        assert_success(&out);
        assert_eq!(stdout(&out), golden, "help drifted for {args:?}");
    }
}

#[test]
fn predict_reg_reproduces_the_worked_example() {
    let out = run(&["predict", "reg", "--kappa", "2", "--sigma", "0.15", "--ea", "1"]);
    assert_success(&out);
    let text = stdout(&out);
    assert!(text.contains("e_p = 0.5225\n"), "{text}");
    assert!(text.contains("lower_bound = 0.5225\n"), "{text}");
    assert!(text.contains("transfer_helps = true\n"), "{text}");
    assert!(text.contains("best_error = 0.2775"), "{text}");
    assert!(text.contains("argmin_kappa = 1.17647058823"), "{text}");
}

#[test]
fn predict_class_scalar_route_is_pinned() {
    let out = run(&[
        "predict",
        "class",
        "--kappa",
        "2",
        "--rho",
        "2",
        "--ea",
        "0.4999999999",
    ]);
    assert_success(&out);
    let text = stdout(&out);
    assert!(text.contains("error = 0.2397500610"), "{text}");
    assert!(text.contains("regime = transfer_regime\n"), "{text}");
}

#[test]
fn domain_errors_exit_1_and_config_errors_exit_2() {
    // kappa = 1 is outside the overparametrized regime: runtime error.
    let out = run(&["predict", "reg", "--kappa", "1.0", "--sigma", "0.15", "--ea", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("kappa"), "{}", stderr(&out));

    // An unknown key in the config file is reported with its line number.
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "[regression]\nkappa = 2\nsigm = 0.15\n").unwrap();
    let out = run(&[
        "--config",
        conf.to_str().unwrap(),
        "predict",
        "reg",
        "--sigma",
        "0.15",
        "--ea",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 3") && err.contains("sigm"), "{err}");

    // Mixing the scalar and general classification routes is a usage error.
    let out = run(&["predict", "class", "--kappa", "2", "--n", "100"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_resolve_over_config_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "[regression]\nkappa = 3\nsigma = 0.15\nea = 1\nsingle = 1.0\n",
    )
    .unwrap();
    // File alone: kappa = 3.
    let out = run(&["--config", conf.to_str().unwrap(), "predict", "reg"]);
    assert_success(&out);
    assert!(stdout(&out).contains("e_p = 0.677916666666666"), "{}", stdout(&out));
    // Flag overrides to kappa = 2, everything else still from the file.
    let out = run(&["--config", conf.to_str().unwrap(), "predict", "reg", "--kappa", "2"]);
    assert_success(&out);
    assert!(stdout(&out).contains("e_p = 0.5225\n"), "{}", stdout(&out));
}

#[test]
fn sweep_range_grids_expand_to_the_requested_point_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--out-dir",
        dir.path().to_str().unwrap(),
        "sweep",
        "--mode",
        "reg",
        "--grid",
        "1.25:5:8",
        "--trials",
        "1",
        "--d",
        "40",
        "--seed",
        "3",
        "--out",
        "grid.dat",
    ]);
    assert_success(&out);
    let dat = std::fs::read_to_string(dir.path().join("grid.dat")).unwrap();
    let rows: Vec<&str> = dat.lines().collect();
    assert_eq!(rows.len(), 1 + 8, "header plus eight points:\n{dat}");
    assert!(rows[0].starts_with("kappa "), "{dat}");
}

#[test]
fn sweep_names_files_by_convention_and_replays_bytewise_from_its_manifest() {
    let first = tempfile::tempdir().unwrap();
    let out = run(&[
        "--out-dir",
        first.path().to_str().unwrap(),
        "sweep",
        "--mode",
        "class",
        "--var",
        "rho",
        "--grid",
        "0.5,2",
        "--trials",
        "2",
        "--d",
        "60",
        "--seed",
        "17",
        "--t-eta",
        "0.5",
    ]);
    assert_success(&out);
    // Conventional name: swept variable, fixed ratio, confounder weight.
    let dat = first.path().join("class_rho_kap2c0.5.dat");
    let manifest = first.path().join("class_rho_kap2c0.5.manifest");
    assert!(dat.is_file() && manifest.is_file());

    let second = tempfile::tempdir().unwrap();
    let out = run(&[
        "--out-dir",
        second.path().to_str().unwrap(),
        "sweep",
        "--config",
        manifest.to_str().unwrap(),
    ]);
    assert_success(&out);
    assert_eq!(
        std::fs::read(&dat).unwrap(),
        std::fs::read(second.path().join("class_rho_kap2c0.5.dat")).unwrap(),
        "replay from the manifest must be byte-identical"
    );
}

#[test]
fn universality_prints_a_standardized_gap_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--out-dir",
        dir.path().to_str().unwrap(),
        "universality",
        "--mode",
        "reg",
        "--grid",
        "2",
        "--trials",
        "3",
        "--d",
        "60",
        "--seed",
        "23",
    ]);
    assert_success(&out);
    let text = stdout(&out);
    assert!(text.contains("universality report"), "{text}");
    assert!(text.contains("Gauss vs Ber"), "{text}");
    assert!(text.contains("verdict:"), "{text}");

    // A single distribution cannot support a universality comparison.
    let out = run(&["universality", "--mode", "reg", "--dists", "gauss"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reproduce_fig3_writes_the_pinned_dataset_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--out-dir",
        dir.path().to_str().unwrap(),
        "reproduce",
        "fig3",
        "--dim",
        "60",
        "--trials",
        "2",
        "--gnuplot",
    ]);
    assert_success(&out);
    for name in [
        "class_kap_rho1.dat",
        "class_kap_rho2c0.5.dat",
        "class_rho_kap2c1.dat",
    ] {
        let dat = dir.path().join(name);
        assert!(dat.is_file(), "missing {name}");
        assert!(
            dat.with_extension("csv").is_file() && dat.with_extension("manifest").is_file(),
            "missing companions of {name}"
        );
    }
    let script = std::fs::read_to_string(dir.path().join("fig3.gp")).unwrap();
    assert!(script.contains("class_rho_kap2c1.dat"), "{script}");
}

#[test]
fn record_flag_writes_the_prediction_and_a_replayable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "--out-dir",
        dir.path().to_str().unwrap(),
        "predict",
        "reg",
        "--kappa",
        "2",
        "--sigma",
        "0.15",
        "--ea",
        "1",
        "--spectrum",
        "bilevel",
        "--record",
        "pred.txt",
    ]);
    assert_success(&out);
    let record = std::fs::read_to_string(dir.path().join("pred.txt")).unwrap();
    assert_eq!(record, stdout(&out), "record file mirrors the console");

    // The manifest alone reproduces the prediction with no flags.
    let manifest: &Path = &dir.path().join("pred.manifest");
    let out = run(&["--config", manifest.to_str().unwrap(), "predict", "reg"]);
    assert_success(&out);
    assert_eq!(stdout(&out), record);
}
