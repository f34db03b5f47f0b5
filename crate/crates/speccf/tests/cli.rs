//! End-to-end checks of the command-line pipeline: exit codes, pass
//! accounting, determinism, persistence, and stage timing.

mod common;

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use common::blocky_planted;
use speccf::cli::{run, run_train, TrainConfig};
use speccf::model::MomModel;
use speccf::synth::{sample_dataset, write_triplets};
use speccf::Error;
use tempfile::TempDir;

fn write_planted_dataset(dir: &TempDir, n_users: usize, seed: u64) -> PathBuf {
    let planted = blocky_planted(8, 3, 24, &[1.0 / 3.0; 3], 3, 6);
    let x = sample_dataset(&planted, n_users, seed).unwrap();
    let path = dir.path().join("train.tsv");
    let mut file = fs::File::create(&path).unwrap();
    write_triplets(&x, &mut file).unwrap();
    path
}

fn args(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

#[test]
fn train_runs_three_passes_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let input = write_planted_dataset(&dir, 600, 5);
    let output = dir.path().join("model.speccf");

    let mut cfg = TrainConfig::new(&input, &output, 3);
    cfg.seed = 7;
    cfg.restarts = Some(90);
    cfg.power_iters = 80;
    cfg.posteriors = Some(dir.path().join("post.tsv"));
    let report = run_train(&cfg).unwrap();

    assert_eq!(report.passes, 3, "pipeline must touch the data three times");
    assert_eq!(report.k, 3);
    assert_eq!(report.eigenvalues.len(), 3);
    assert!(report.whiten_residual < 1e-8);
    assert!(report.pinv_residual < 1e-10);
    assert!(report.pi_gap.is_finite());

    let text = fs::read_to_string(&output).unwrap();
    let model = MomModel::read_from(text.as_bytes()).unwrap();
    assert_eq!(model.d(), 24);
    assert_eq!(model.k(), 3);

    let posteriors = fs::read_to_string(dir.path().join("post.tsv")).unwrap();
    // Header plus one row per user.
    assert_eq!(posteriors.lines().count(), 601);
}

#[test]
fn train_stage_times_cover_the_wall_clock() {
    let dir = TempDir::new().unwrap();
    let input = write_planted_dataset(&dir, 4000, 9);
    let output = dir.path().join("model.speccf");
    let mut cfg = TrainConfig::new(&input, &output, 3);
    cfg.restarts = Some(150);
    let report = run_train(&cfg).unwrap();
    let stage_total: f64 = report.stages.iter().map(|(_, s)| s).sum();
    assert!(
        stage_total >= 0.95 * report.total_seconds,
        "stages cover {stage_total:.6}s of {:.6}s",
        report.total_seconds
    );
}

#[test]
fn same_seed_gives_byte_identical_artifacts() {
    let dir = TempDir::new().unwrap();
    let input = write_planted_dataset(&dir, 500, 3);
    let out_a = dir.path().join("a.model");
    let out_b = dir.path().join("b.model");

    for (out, post) in [(&out_a, "a.post"), (&out_b, "b.post")] {
        let code = run(args(&[
            "speccf",
            "train",
            "--input",
            input.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--posteriors",
            dir.path().join(post).to_str().unwrap(),
            "--k",
            "3",
            "--seed",
            "11",
            "--restarts",
            "60",
        ]));
        assert_eq!(code, 0);
    }
    let bytes_a = fs::read(&out_a).unwrap();
    let bytes_b = fs::read(&out_b).unwrap();
    assert_eq!(bytes_a, bytes_b, "model files must be byte-identical");
    let post_a = fs::read(dir.path().join("a.post")).unwrap();
    let post_b = fs::read(dir.path().join("b.post")).unwrap();
    assert_eq!(post_a, post_b);
}

#[test]
fn rank_deficient_request_fails_with_achieved_rank() {
    let dir = TempDir::new().unwrap();
    // Every user has the same two items: the co-occurrence matrix has rank 1.
    let path = dir.path().join("rank1.tsv");
    let mut file = fs::File::create(&path).unwrap();
    for u in 0..50 {
        writeln!(file, "u{u}\ti0").unwrap();
        writeln!(file, "u{u}\ti1").unwrap();
    }
    drop(file);

    let cfg = TrainConfig::new(&path, dir.path().join("m.model"), 2);
    let err = run_train(&cfg).unwrap_err();
    let message = err.to_string();
    match err {
        Error::Stage { stage, source } => {
            assert_eq!(stage, "eig");
            match *source {
                Error::RankDeficient {
                    achieved,
                    requested,
                } => {
                    assert_eq!(achieved, 1);
                    assert_eq!(requested, 2);
                }
                other => panic!("unexpected inner error {other:?}"),
            }
        }
        other => panic!("unexpected error {other:?}"),
    }
    assert!(message.contains("eig"));

    // Through the CLI this is a data error: exit code 2.
    let code = run(args(&[
        "speccf",
        "train",
        "--input",
        path.to_str().unwrap(),
        "--output",
        dir.path().join("m2.model").to_str().unwrap(),
        "--k",
        "2",
    ]));
    assert_eq!(code, 2);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(args(&["speccf", "no-such-command"])), 1);
    assert_eq!(run(args(&["speccf", "train", "--bogus-flag"])), 1);
    assert_eq!(
        run(args(&[
            "speccf",
            "recommend",
            "--model",
            "m",
            "--input",
            "x"
        ])),
        1,
        "recommend without --user or --all-users is a usage error"
    );
    let dir = TempDir::new().unwrap();
    let input = write_planted_dataset(&dir, 50, 1);
    assert_eq!(
        run(args(&[
            "speccf",
            "train",
            "--input",
            input.to_str().unwrap(),
            "--output",
            dir.path().join("m.model").to_str().unwrap(),
            "--k",
            "0",
        ])),
        1
    );
}

#[test]
fn missing_input_exits_two() {
    let dir = TempDir::new().unwrap();
    let code = run(args(&[
        "speccf",
        "train",
        "--input",
        dir.path().join("absent.tsv").to_str().unwrap(),
        "--output",
        dir.path().join("m.model").to_str().unwrap(),
        "--k",
        "2",
    ]));
    assert_eq!(code, 2);
}

#[test]
fn truncated_model_file_exits_two() {
    let dir = TempDir::new().unwrap();
    let input = write_planted_dataset(&dir, 100, 2);
    let model_path = dir.path().join("broken.model");
    fs::write(&model_path, "SPECCF 1 24 3\n").unwrap();
    let code = run(args(&[
        "speccf",
        "recommend",
        "--model",
        model_path.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--user",
        "u0",
    ]));
    assert_eq!(code, 2);
}

#[test]
fn recommend_unknown_user_exits_two() {
    let dir = TempDir::new().unwrap();
    let input = write_planted_dataset(&dir, 200, 4);
    let model_path = dir.path().join("m.model");
    let mut cfg = TrainConfig::new(&input, &model_path, 3);
    cfg.restarts = Some(60);
    cfg.posteriors = None;
    run_train(&cfg).unwrap();

    let ok = run(args(&[
        "speccf",
        "recommend",
        "--model",
        model_path.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--user",
        "u0",
        "--tau",
        "5",
    ]));
    assert_eq!(ok, 0);

    let missing = run(args(&[
        "speccf",
        "recommend",
        "--model",
        model_path.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--user",
        "nobody",
    ]));
    assert_eq!(missing, 2);
}

#[test]
fn synth_train_eval_flow() {
    let dir = TempDir::new().unwrap();
    let train_path = dir.path().join("synth-train.tsv");
    let test_path = dir.path().join("synth-test.tsv");
    let truth_path = dir.path().join("truth.model");

    let code = run(args(&[
        "speccf",
        "synth",
        "--users",
        "400",
        "--items",
        "40",
        "--k",
        "3",
        "--seed",
        "13",
        "--out",
        train_path.to_str().unwrap(),
        "--save-model",
        truth_path.to_str().unwrap(),
        "--pi",
        "0.5,0.3,0.2",
    ]));
    assert_eq!(code, 0);
    // Future interactions from the same population as the test set.
    let code = run(args(&[
        "speccf",
        "synth",
        "--users",
        "400",
        "--items",
        "40",
        "--k",
        "3",
        "--seed",
        "14",
        "--out",
        test_path.to_str().unwrap(),
        "--pi",
        "0.5,0.3,0.2",
    ]));
    assert_eq!(code, 0);

    let truth = MomModel::read_from(fs::read(&truth_path).unwrap().as_slice()).unwrap();
    assert_eq!(truth.d(), 40);

    let model_path = dir.path().join("m.model");
    let code = run(args(&[
        "speccf",
        "train",
        "--input",
        train_path.to_str().unwrap(),
        "--output",
        model_path.to_str().unwrap(),
        "--k",
        "3",
        "--restarts",
        "90",
    ]));
    assert_eq!(code, 0);

    let report_path = dir.path().join("report.tsv");
    let code = run(args(&[
        "speccf",
        "eval",
        "--model",
        model_path.to_str().unwrap(),
        "--train",
        train_path.to_str().unwrap(),
        "--test",
        test_path.to_str().unwrap(),
        "--taus",
        "5,10",
        "--output",
        report_path.to_str().unwrap(),
    ]));
    assert_eq!(code, 0);
    let report = fs::read_to_string(&report_path).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "tau\tprecision\trecall\tmap");
    assert_eq!(lines.len(), 3);

    // Same-seed synth files are byte-identical.
    let repeat_path = dir.path().join("synth-train-repeat.tsv");
    let code = run(args(&[
        "speccf",
        "synth",
        "--users",
        "400",
        "--items",
        "40",
        "--k",
        "3",
        "--seed",
        "13",
        "--out",
        repeat_path.to_str().unwrap(),
        "--pi",
        "0.5,0.3,0.2",
    ]));
    assert_eq!(code, 0);
    assert_eq!(
        fs::read(&train_path).unwrap(),
        fs::read(&repeat_path).unwrap()
    );
}

#[test]
fn plsi_train_cli_writes_model() {
    let dir = TempDir::new().unwrap();
    let input = write_planted_dataset(&dir, 300, 8);
    let out = dir.path().join("plsi.model");
    let code = run(args(&[
        "speccf",
        "plsi-train",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--k",
        "3",
        "--seed",
        "5",
    ]));
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("SPECCF-PLSI 1 24 3 300"));
    let model = speccf::baseline::PlsiModel::read_from(text.as_bytes()).unwrap();
    assert_eq!(model.d(), 24);
    assert_eq!(model.n_users(), 300);
}

#[test]
fn bounds_cli_prints_report() {
    let code = run(args(&[
        "speccf",
        "bounds",
        "--sigma1",
        "0.05",
        "--sigma-k",
        "0.02",
        "--d2s",
        "46.0",
        "--d3s",
        "377.0",
        "--k",
        "3",
        "--n",
        "16000",
        "--delta",
        "0.1",
        "--pi-max",
        "0.34",
        "--pi-min",
        "0.33",
    ]));
    assert_eq!(code, 0);

    // Invalid inputs are data errors.
    let code = run(args(&[
        "speccf",
        "bounds",
        "--sigma1",
        "0.01",
        "--sigma-k",
        "0.02",
        "--d2s",
        "46.0",
        "--d3s",
        "377.0",
        "--k",
        "3",
        "--n",
        "16000",
    ]));
    assert_eq!(code, 2);
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(args(&["speccf", "--help"])), 0);
    assert_eq!(run(args(&["speccf", "train", "--help"])), 0);
}
