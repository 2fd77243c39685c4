//! End-to-end checks of the command-line surface: outputs, file contracts,
//! and the exit-code taxonomy (2 = config error, 3 = numeric failure).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_recon")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn recon")
}

struct Fixture {
    #[allow(dead_code)]
    dir: tempfile::TempDir,
    root: PathBuf,
    schema: PathBuf,
    data: PathBuf,
    workload: PathBuf,
}

/// Three-attribute labelled schema with a three-level hierarchy and a small
/// deterministic dataset.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let schema = root.join("schema.json");
    std::fs::write(
        &schema,
        r#"{
            "attributes": [
                {"name": "STATE", "labels": ["s0", "s1"]},
                {"name": "COUNTY", "labels": ["c0", "c1"]},
                {"name": "TRACT", "labels": ["t0", "t1"]},
                {"name": "VAL", "labels": ["v0", "v1", "v2"]}
            ],
            "hierarchy": ["STATE", "COUNTY", "TRACT"]
        }"#,
    )
    .unwrap();
    let data = root.join("data.csv");
    let mut csv = String::from("STATE,COUNTY,TRACT,VAL\n");
    for i in 0..24 {
        csv.push_str(&format!(
            "s{},c{},t{},v{}\n",
            i % 2,
            (i / 2) % 2,
            (i / 4) % 2,
            i % 3
        ));
    }
    std::fs::write(&data, csv).unwrap();
    let workload = root.join("workload.json");
    std::fs::write(&workload, r#"{"marginals": {"k": 2}}"#).unwrap();
    Fixture { dir, root, schema, data, workload }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn attack_then_evaluate_produces_expected_files() {
    let fx = fixture();
    let out = fx.root.join("attack");
    let output = run(&[
        "attack",
        "--schema", s(&fx.schema),
        "--data", s(&fx.data),
        "--workload", s(&fx.workload),
        "--runs", "4",
        "--rows", "10",
        "--epochs", "120",
        "--seed", "5",
        "--out", s(&out),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(out.join("ranking.csv").exists());
    assert!(out.join("manifest.json").exists());
    assert!(out.join("answers.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["result"]["runs_effective"], 4);
    assert_eq!(manifest["seed"], 5);

    let eval_out = fx.root.join("eval");
    let output = run(&[
        "evaluate",
        "--schema", s(&fx.schema),
        "--target", s(&fx.data),
        "--ranking", s(&out.join("ranking.csv")),
        "--average",
        "--out", s(&eval_out),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(eval_out.join("curves.csv").exists());
    assert!(eval_out.join("averaged.csv").exists());
    assert!(eval_out.join("match_rate.svg").exists());
}

#[test]
fn attack_accepts_released_answers_without_data() {
    let fx = fixture();
    // First produce a valid answers file by attacking with --data.
    let seed_out = fx.root.join("first");
    assert!(run(&[
        "attack",
        "--schema", s(&fx.schema),
        "--data", s(&fx.data),
        "--workload", s(&fx.workload),
        "--runs", "2",
        "--rows", "6",
        "--epochs", "60",
        "--out", s(&seed_out),
    ])
    .status
    .success());

    let out = fx.root.join("from_answers");
    let output = run(&[
        "attack",
        "--schema", s(&fx.schema),
        "--answers", s(&seed_out.join("answers.csv")),
        "--workload", s(&fx.workload),
        "--runs", "2",
        "--rows", "6",
        "--epochs", "60",
        "--out", s(&out),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(out.join("ranking.csv").exists());
}

#[test]
fn attack_rejects_answers_of_wrong_length_with_exit_2() {
    let fx = fixture();
    let answers = fx.root.join("short.csv");
    std::fs::write(&answers, "query_id,value\n0,0.5\n1,0.25\n").unwrap();
    let out = fx.root.join("bad");
    let output = run(&[
        "attack",
        "--schema", s(&fx.schema),
        "--answers", s(&answers),
        "--workload", s(&fx.workload),
        "--out", s(&out),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("2 entries"), "stderr: {stderr}");
    assert!(!out.join("ranking.csv").exists());
}

#[test]
fn attack_optimizer_abort_exits_3() {
    let fx = fixture();
    let out = fx.root.join("abort");
    let output = run(&[
        "attack",
        "--schema", s(&fx.schema),
        "--data", s(&fx.data),
        "--workload", s(&fx.workload),
        "--runs", "2",
        "--rows", "4",
        "--epochs", "10",
        "--lr", "1e308",
        "--out", s(&out),
    ]);
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("non-finite"), "stderr: {stderr}");
    assert!(stderr.contains("run 0"), "stderr: {stderr}");
}

#[test]
fn baseline_holdout_writes_ranking_and_target_half() {
    let fx = fixture();
    let out = fx.root.join("holdout");
    let output = run(&[
        "baseline",
        "--mode", "holdout",
        "--schema", s(&fx.schema),
        "--data", s(&fx.data),
        "--seed", "3",
        "--out", s(&out),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(out.join("baseline_holdout.csv").exists());
    let target = std::fs::read_to_string(out.join("target.csv")).unwrap();
    assert_eq!(target.lines().count(), 13, "12 target rows plus a header");
    assert!(target.starts_with("STATE,COUNTY,TRACT,VAL"));
}

#[test]
fn baseline_hierarchy_emits_one_csv_per_level() {
    let fx = fixture();
    let out = fx.root.join("hier");
    let output = run(&[
        "baseline",
        "--mode", "hierarchy",
        "--schema", s(&fx.schema),
        "--data", s(&fx.data),
        "--target-path", "s0,c0,t0",
        "--out", s(&out),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    for name in ["baseline_national.csv", "baseline_STATE.csv", "baseline_COUNTY.csv"] {
        assert!(out.join(name).exists(), "missing {name}");
    }
}

#[test]
fn baseline_augment_requires_attr_with_exit_2() {
    let fx = fixture();
    let out = fx.root.join("aug");
    let output = run(&[
        "baseline",
        "--mode", "augment",
        "--schema", s(&fx.schema),
        "--data", s(&fx.data),
        "--target-data", s(&fx.data),
        "--out", s(&out),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--attr"));

    let output = run(&[
        "baseline",
        "--mode", "augment",
        "--schema", s(&fx.schema),
        "--data", s(&fx.data),
        "--target-data", s(&fx.data),
        "--attr", "NOPE",
        "--out", s(&out),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("NOPE"));

    let output = run(&[
        "baseline",
        "--mode", "augment",
        "--schema", s(&fx.schema),
        "--data", s(&fx.data),
        "--target-data", s(&fx.data),
        "--attr", "TRACT",
        "--seed", "4",
        "--out", s(&out),
    ]);
    assert!(output.status.success());
    assert!(out.join("baseline_augment_TRACT.csv").exists());
}

#[test]
fn baseline_unknown_mode_exits_2() {
    let fx = fixture();
    let output = run(&[
        "baseline",
        "--mode", "telepathy",
        "--schema", s(&fx.schema),
        "--data", s(&fx.data),
        "--out", s(&fx.root.join("x")),
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn evaluate_rejects_ranking_from_a_different_schema_with_exit_2() {
    let fx = fixture();
    let foreign = fx.root.join("foreign.csv");
    std::fs::write(&foreign, "rank,frequency,A,B\n1,3,x,y\n").unwrap();
    let output = run(&[
        "evaluate",
        "--schema", s(&fx.schema),
        "--target", s(&fx.data),
        "--ranking", s(&foreign),
        "--out", s(&fx.root.join("e")),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("STATE"));
}

#[test]
fn evaluate_u_rule_holdout_requires_holdout_ranking() {
    let fx = fixture();
    let out = fx.root.join("hold");
    assert!(run(&[
        "baseline",
        "--mode", "holdout",
        "--schema", s(&fx.schema),
        "--data", s(&fx.data),
        "--out", s(&out),
    ])
    .status
    .success());

    let missing = run(&[
        "evaluate",
        "--schema", s(&fx.schema),
        "--target", s(&out.join("target.csv")),
        "--labels",
        "--ranking", s(&out.join("baseline_holdout.csv")),
        "--u-rule", "holdout",
        "--out", s(&fx.root.join("e1")),
    ]);
    assert_eq!(missing.status.code(), Some(2));

    let ok = run(&[
        "evaluate",
        "--schema", s(&fx.schema),
        "--target", s(&out.join("target.csv")),
        "--labels",
        "--ranking", s(&out.join("baseline_holdout.csv")),
        "--u-rule", "holdout",
        "--holdout", s(&out.join("baseline_holdout.csv")),
        "--out", s(&fx.root.join("e2")),
    ]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
}

#[test]
fn oracle_default_instance_reports_tiny_gap() {
    let fx = fixture();
    let out = fx.root.join("oracle");
    let output = run(&["oracle", "--seed", "1", "--out", s(&out)]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("gap < 1e-12"), "stdout: {stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("oracle.json")).unwrap()).unwrap();
    assert!(report["identity"]["gap"].as_f64().unwrap() < 1e-12);
}

#[test]
fn oracle_guard_exceeded_exits_2() {
    let fx = fixture();
    let output = run(&[
        "oracle",
        "--cards", "10,10,10,10",
        "--n", "4",
        "--out", s(&fx.root.join("o")),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("guard"));
}

#[test]
fn oracle_chi_row_flag_is_honored() {
    let fx = fixture();
    let out = fx.root.join("chi");
    let output = run(&[
        "oracle",
        "--cards", "2,2",
        "--n", "2",
        "--chi", "row=1,0",
        "--out", s(&out),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("oracle.json")).unwrap()).unwrap();
    assert_eq!(report["chi_row"][0], "1");
    assert_eq!(report["chi_row"][1], "0");
}

#[test]
fn bundled_configs_parse_and_drive_the_pipeline() {
    // The shipped sample configs stay valid: census schema + P12-style
    // cells, survey schema + 2-way marginals.
    let manifest_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let repo = manifest_dir.parent().unwrap().parent().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demo");
    let output = run(&[
        "attack",
        "--schema", s(&repo.join("configs/schema_census.json")),
        "--data", s(&repo.join("data/census_demo.csv")),
        "--workload", s(&repo.join("configs/workload_p12_style.json")),
        "--runs", "2",
        "--rows", "20",
        "--epochs", "60",
        "--out", s(&out),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let out2 = dir.path().join("survey");
    let output = run(&[
        "attack",
        "--schema", s(&repo.join("configs/schema_survey.json")),
        "--data", s(&repo.join("data/survey_demo.csv")),
        "--workload", s(&repo.join("configs/workload_marginals_2way.json")),
        "--runs", "2",
        "--rows", "20",
        "--epochs", "60",
        "--out", s(&out2),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(out2.join("bin_edges.json").exists(), "binned schema persists edges");
}
