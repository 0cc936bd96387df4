use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out_dir_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_segfusion"));
    cmd.args(args).env_remove("SEGFUSION_OUT_DIR");
    if let Some(d) = out_dir_env {
        cmd.env("SEGFUSION_OUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes)
        .unwrap_or_else(|e| panic!("{}: {}", e, String::from_utf8_lossy(bytes)))
}

fn write_map(path: &Path, w: usize, h: usize, labels: &[u32]) {
    let mut csv = format!("width={}\nheight={}\n", w, h);
    for l in labels {
        csv.push_str(&format!("{}\n", l));
    }
    std::fs::write(path, csv).unwrap();
}

#[test]
fn help_lists_every_flag() {
    let out = run(&["fuse", "--help"], None);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in [
        "--seed",
        "--out-dir",
        "--manifest",
        "--beta",
        "--t-max",
        "--distance",
        "--qd-model",
        "--qd-train",
        "--qd-basis",
        "--init",
        "--h-init",
        "--patience",
        "--num-labels",
        "--no-keep-best",
        "--format",
        "--palette",
        "SEGFUSION_OUT_DIR",
    ] {
        assert!(text.contains(flag), "fuse --help lacks {}", flag);
    }
    for sub in [
        "segment",
        "estimate-c",
        "estimate-beta",
        "evaluate",
        "convert",
    ] {
        let out = run(&[sub, "--help"], None);
        assert!(out.status.success());
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(
            text.contains("--seed") && text.contains("--manifest"),
            "{}",
            sub
        );
    }
}

#[test]
fn failures_exit_nonzero_with_error_json() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = s(&tmp.path().join("missing.pgm"));
    let out = run(&["fuse", &missing, "--out-dir", &s(tmp.path())], None);
    assert!(!out.status.success());
    assert_eq!(json(&out.stderr)["error"]["code"], "io");

    let out = run(&["fuse", "--beta", "0.5"], None);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stderr)["error"]["code"], "usage");

    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    write_map(&a, 2, 2, &[0, 1, 1, 0]);
    write_map(&b, 3, 1, &[0, 1, 1]);
    let out = run(&["fuse", &s(&a), &s(&b), "--out-dir", &s(tmp.path())], None);
    assert!(!out.status.success());
    assert_eq!(json(&out.stderr)["error"]["code"], "incomparable");

    let out = run(
        &["fuse", &s(&a), "--beta", "1.5", "--out-dir", &s(tmp.path())],
        None,
    );
    assert_eq!(json(&out.stderr)["error"]["code"], "invalid_config");
}

#[test]
fn out_dir_defaults_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    write_map(&a, 3, 2, &[0, 0, 1, 1, 2, 2]);
    write_map(&b, 3, 2, &[0, 0, 1, 1, 1, 2]);
    let env_dir = tmp.path().join("from-env");
    let out = run(
        &["fuse", &s(&a), &s(&b), "--t-max", "20", "--palette"],
        Some(&env_dir),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "consensus.pgm",
        "report.json",
        "trace.csv",
        "palette.json",
        "fuse.manifest.json",
    ] {
        assert!(env_dir.join(f).exists(), "{}", f);
    }
    let report = json(&std::fs::read(env_dir.join("report.json")).unwrap());
    assert_eq!(report["distance"]["kind"], "sdd");
    let trace = std::fs::read_to_string(env_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,average_sod\n1,"));
    let manifest = json(&std::fs::read(env_dir.join("fuse.manifest.json")).unwrap());
    assert_eq!(manifest["invocation"]["command"], "fuse");
    assert_eq!(
        manifest["label_maps"][1]["values"],
        serde_json::json!([0, 1, 2])
    );
}

#[test]
fn evaluate_reports_null_for_undefined_ari() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    write_map(&a, 4, 1, &[0, 0, 1, 1]);
    write_map(&b, 4, 1, &[5, 7, 5, 7]);
    let out = run(
        &[
            "evaluate",
            "--labels",
            &s(&a),
            "--reference",
            &s(&b),
            "--out-dir",
            &s(tmp.path()),
        ],
        None,
    );
    assert!(out.status.success());
    let doc = json(&out.stdout);
    assert!((doc["ari"].as_f64().unwrap() + 0.5).abs() < 1e-12);
    assert!((doc["ri"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);

    write_map(&a, 4, 1, &[3, 3, 3, 3]);
    write_map(&b, 4, 1, &[0, 0, 0, 0]);
    let out = run(
        &[
            "evaluate",
            "--labels",
            &s(&a),
            "--reference",
            &s(&b),
            "--out-dir",
            &s(tmp.path()),
        ],
        None,
    );
    assert!(out.status.success());
    let doc = json(&std::fs::read(tmp.path().join("evaluation.json")).unwrap());
    assert!(doc["ari"].is_null());
    assert_eq!(doc["ri"], 1.0);
    assert!(doc["diagnostic"].is_string());
}

#[test]
fn convert_round_trips_values() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src.csv");
    write_map(&src, 3, 2, &[0, 300, 7, 7, 65535, 1]);
    let dir = s(tmp.path());
    let out = run(
        &[
            "convert",
            "--input",
            &s(&src),
            "--output",
            "mid.pgm",
            "--out-dir",
            &dir,
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mid = s(&tmp.path().join("mid.pgm"));
    let out = run(
        &[
            "convert",
            "--input",
            &mid,
            "--output",
            "back.csv",
            "--out-dir",
            &dir,
        ],
        None,
    );
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(&src).unwrap(),
        std::fs::read(tmp.path().join("back.csv")).unwrap()
    );
}

#[test]
fn grids_write_json_and_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let maps: Vec<String> = [
        [0, 0, 1, 1, 2, 2, 2, 2],
        [0, 0, 1, 1, 2, 2, 0, 2],
        [1, 1, 0, 0, 2, 2, 2, 2],
    ]
    .iter()
    .enumerate()
    .map(|(i, l)| {
        let p = tmp.path().join(format!("m{}.csv", i));
        write_map(&p, 4, 2, l);
        s(&p)
    })
    .collect();
    let dir = s(tmp.path());
    let mut args = vec!["estimate-beta"];
    args.extend(maps.iter().map(String::as_str));
    args.extend(["--beta-grid", "0.2,0.9", "--t-max", "30", "--out-dir", &dir]);
    let out = run(&args, None);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let grid = json(&std::fs::read(tmp.path().join("grid_beta.json")).unwrap());
    assert_eq!(grid["grid"], serde_json::json!([0.2, 0.9]));
    let csv = std::fs::read_to_string(tmp.path().join("grid_beta.csv")).unwrap();
    assert!(csv.starts_with("candidate,score,valid\n0.2,"));

    let band = tmp.path().join("band.csv");
    write_map(&band, 4, 2, &[0, 0, 10, 10, 20, 20, 30, 30]);
    std::fs::write(
        tmp.path().join("img.json"),
        r#"{"bands": ["band.csv", "band.csv"]}"#,
    )
    .unwrap();
    let out = run(
        &[
            "estimate-c",
            "--image",
            &s(&tmp.path().join("img.json")),
            "--c-grid",
            "2,3",
            "--out-dir",
            &dir,
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let grid = json(&std::fs::read(tmp.path().join("grid_c.json")).unwrap());
    assert_eq!(grid["direction"], "maximize");
    assert!(tmp.path().join("grid_c.csv").exists());
}

#[test]
fn replay_rejects_a_different_command() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    write_map(&a, 4, 1, &[0, 0, 1, 1]);
    let dir = s(tmp.path());
    let out = run(
        &[
            "evaluate",
            "--labels",
            &s(&a),
            "--reference",
            &s(&a),
            "--out-dir",
            &dir,
        ],
        None,
    );
    assert!(out.status.success());
    let m = s(&tmp.path().join("evaluate.manifest.json"));
    let out = run(&["fuse", "--manifest", &m], None);
    assert!(!out.status.success());
    assert_eq!(json(&out.stderr)["error"]["code"], "usage");
    let out = run(&["evaluate", "--manifest", &m], None);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn identical_maps_fuse_to_themselves() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    write_map(&a, 4, 3, &[0, 0, 1, 1, 0, 2, 2, 1, 3, 3, 2, 1]);
    let m = s(&a);
    let dir = s(&tmp.path().join("out"));
    let out = run(
        &[
            "fuse",
            &m,
            &m,
            &m,
            "--format",
            "csv",
            "--t-max",
            "50",
            "--out-dir",
            &dir,
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        std::fs::read(&a).unwrap(),
        std::fs::read(tmp.path().join("out/consensus.csv")).unwrap()
    );

    let out = run(
        &[
            "evaluate",
            "--labels",
            &m,
            "--reference",
            &m,
            "--out-dir",
            &dir,
        ],
        None,
    );
    let doc = json(&out.stdout);
    assert_eq!(
        (doc["ri"].as_f64(), doc["ari"].as_f64()),
        (Some(1.0), Some(1.0))
    );
}
