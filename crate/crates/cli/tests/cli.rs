use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn bxt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bxt"))
        .args(args)
        .output()
        .expect("failed to launch bxt")
}

fn ok(args: &[&str]) -> String {
    let out = bxt(args);
    assert!(
        out.status.success(),
        "bxt {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a synthetic CSV into `dir` and returns its path.
fn synth(dir: &Path, n: usize, dim: usize) -> String {
    ok(&[
        "synth",
        "--out",
        s(dir),
        "--n-samples",
        &n.to_string(),
        "--dimension",
        &dim.to_string(),
        "--seed",
        "7",
    ]);
    s(&dir.join("synthetic.csv")).to_string()
}

#[test]
fn help_exits_zero_and_lists_flags() {
    let top = ok(&["--help"]);
    for cmd in ["train", "evaluate", "sweep", "diagnose", "synth"] {
        assert!(top.contains(cmd), "{cmd} missing from top-level help");
        let help = ok(&[cmd, "--help"]);
        for flag in ["--config", "--data", "--model", "--out", "--seed", "--threads"] {
            assert!(help.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
    let train = ok(&["train", "--help"]);
    for flag in [
        "--mode",
        "--stages",
        "--trees",
        "--max-depth",
        "--k-features",
        "--percentile",
        "--b-reg",
        "--weighted",
    ] {
        assert!(train.contains(flag), "train --help lacks {flag}");
    }
}

#[test]
fn missing_data_file_exits_2_naming_path() {
    let out = bxt(&["train", "--data", "/no/such/higgs.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/higgs.csv"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bxt(&["train", "--stages", "many"]).status.code(), Some(2));
    assert_eq!(bxt(&["train", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(bxt(&["evaluate"]).status.code(), Some(2));
    assert_eq!(bxt(&[]).status.code(), Some(2));
}

#[test]
fn one_stage_on_100_rows_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 100, 3);
    let started = Instant::now();
    ok(&[
        "train",
        "--data",
        &data,
        "--out",
        s(dir.path()),
        "--stages",
        "1",
        "--trees",
        "10",
        "--min-samples-leaf",
        "2",
    ]);
    assert!(started.elapsed().as_secs_f64() < 1.0, "took {:?}", started.elapsed());
    let log = std::fs::read_to_string(dir.path().join("stages.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "stage,epsilon,alpha,weighted_accuracy,seconds");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("1,"));
    assert!(dir.path().join("model.bxt").exists());
}

#[test]
fn dimension_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let three = dir.path().join("three");
    let four = dir.path().join("four");
    let data3 = synth(&three, 300, 3);
    let data4 = synth(&four, 300, 4);
    let model = s(&dir.path().join("m.bxt")).to_string();
    ok(&["train", "--data", &data3, "--model", &model, "--out", s(&three), "--stages", "2", "--trees", "3"]);
    let out = bxt(&["evaluate", "--data", &data4, "--model", &model]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn model_bytes_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 1500, 5);
    let train = |threads: &str| {
        let model = dir.path().join(format!("model-{threads}.bxt"));
        ok(&[
            "train",
            "--data",
            &data,
            "--model",
            s(&model),
            "--out",
            s(dir.path()),
            "--stages",
            "4",
            "--trees",
            "12",
            "--threads",
            threads,
            "--seed",
            "11",
        ]);
        std::fs::read(model).unwrap()
    };
    let one = train("1");
    let eight = train("8");
    assert!(one == eight, "model files differ between 1 and 8 threads");
}

#[test]
fn config_file_with_cli_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 400, 3);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!("# small run\ndata = {data}\nout = {}\nstages = 2\ntrees = 3\nmode = best_split\n", s(dir.path())),
    )
    .unwrap();
    let rows = || std::fs::read_to_string(dir.path().join("stages.csv")).unwrap().lines().count() - 1;
    ok(&["train", "--config", s(&cfg)]);
    assert_eq!(rows(), 2);
    ok(&["train", "--config", s(&cfg), "--stages", "3"]);
    assert_eq!(rows(), 3);

    std::fs::write(&cfg, "stages = 2\ncolour = blue\n").unwrap();
    assert_eq!(bxt(&["train", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn evaluate_json_and_unit_weight_equivalence() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 1200, 4);
    let model = s(&dir.path().join("m.bxt")).to_string();
    ok(&["train", "--data", &data, "--model", &model, "--out", s(dir.path()), "--stages", "3", "--trees", "8"]);
    let report = |weighted: &str| -> serde_json::Value {
        let text = ok(&[
            "evaluate",
            "--data",
            &data,
            "--model",
            &model,
            "--percentile",
            "85",
            "--rescale-event-weights",
            "false",
            "--weighted",
            weighted,
        ]);
        serde_json::from_str(&text).unwrap()
    };
    let w = report("true");
    let u = report("false");
    for key in ["selection_count", "false_positives", "ams", "s_hat", "b_hat"] {
        assert!(w.get(key).is_some(), "report lacks {key}");
        assert_eq!(w[key], u[key], "{key} differs");
    }
    assert_eq!(w["events_evaluated"], 675);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 1000, 4);
    let model = s(&dir.path().join("m.bxt")).to_string();
    ok(&["train", "--data", &data, "--model", &model, "--out", s(dir.path()), "--stages", "3", "--trees", "6"]);
    let outputs = |sub: &str| {
        let out = dir.path().join(sub);
        ok(&["sweep", "--data", &data, "--model", &model, "--out", s(&out), "--percentiles", "50,85,95"]);
        ok(&["diagnose", "--data", &data, "--model", &model, "--out", s(&out), "--n-trees", "8", "--sample-size", "200"]);
        (
            std::fs::read(out.join("sweep.csv")).unwrap(),
            std::fs::read(out.join("correlation.csv")).unwrap(),
        )
    };
    let a = outputs("a");
    assert_eq!(a, outputs("b"));
    let sweep = String::from_utf8(a.0).unwrap();
    assert_eq!(sweep.lines().count(), 4);
    let corr = String::from_utf8(a.1).unwrap();
    assert_eq!(corr.lines().count(), 8);
    assert!(corr.lines().all(|l| l.split(',').count() == 8));
}

#[test]
fn diagnose_rejects_too_many_trees() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 300, 3);
    let model = s(&dir.path().join("m.bxt")).to_string();
    ok(&["train", "--data", &data, "--model", &model, "--out", s(dir.path()), "--stages", "1", "--trees", "4"]);
    let out = bxt(&["diagnose", "--data", &data, "--model", &model, "--out", s(dir.path()), "--n-trees", "5"]);
    assert_eq!(out.status.code(), Some(2));
}
