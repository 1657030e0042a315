// SPDX-License-Identifier: Apache-2.0

mod common;

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::Stdio;
use std::time::Duration;

use cgaps_core::export::StaticBundle;
use common::*;
use serde_json::{json, Value};

fn ids(list: &Value) -> Vec<u64> {
    list.as_array().unwrap().iter().map(|e| e["id"].as_u64().unwrap()).collect()
}

fn small_suite(dir: &Path, extra: &[&str]) {
    let mut args = vec!["--benchmarks", "3", "--concepts", "60", "--records", "80", "--seed", "4"];
    args.extend_from_slice(extra);
    synth(dir, &args);
}

#[test]
fn synth_is_deterministic_and_writes_every_record() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        synth(dir, &["--benchmarks", "2", "--concepts", "30", "--records", "10", "--seed", "1"]);
    }
    same_tree(&a, &b).unwrap();

    let mut lines = 0;
    for file in tree(&a.join("records")) {
        let text = std::fs::read_to_string(a.join("records").join(file)).unwrap();
        lines += text.lines().count() - 1;
    }
    assert_eq!(lines, 20);
    let manifest = read_json(&a.join("suite.json"));
    assert_eq!(manifest["benchmarks"].as_object().unwrap().len(), 2);
}

#[test]
fn gzip_suites_analyze_like_plain_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let (plain, gz) = (tmp.path().join("plain"), tmp.path().join("gz"));
    small_suite(&plain, &[]);
    small_suite(&gz, &["--gzip"]);
    for dir in [&plain, &gz] {
        let out = run_analyze(&dir.join("suite.json"), &dir.join("out"), &[]);
        assert!(out.status.success());
    }
    let a = std::fs::read(plain.join("out/report.json")).unwrap();
    let b = std::fs::read(gz.join("out/report.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn planted_missing_concept_round_trips_to_gap_listing() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("suite");
    small_suite(&suite, &["--missing", "7"]);
    let out = tmp.path().join("out");
    assert!(run_analyze(&suite.join("suite.json"), &out, &[]).status.success());
    let report = read_json(&out.join("report.json"));
    assert!(report["analysis"]["cross_performance"][7].is_null());

    let mut cmd = cgaps();
    run_ok(cmd.arg("gaps").arg("--analysis-dir").arg(&out));
    let gaps = read_json(&out.join("gaps.json"));
    assert_eq!(ids(&gaps["missing"]), [7]);
    assert!(gaps.get("assist").is_none());
    for (_, b) in gaps["per_benchmark"].as_object().unwrap() {
        assert!(b["missing"].as_array().unwrap().contains(&json!(7)));
    }
    let run = read_json(&out.join("run-gaps.json"));
    assert_eq!(run["command"], "gaps");
}

#[test]
fn missing_record_file_is_an_io_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("suite");
    small_suite(&suite, &[]);
    let victim = suite.join("records/bench-01.cgr");
    std::fs::remove_file(&victim).unwrap();
    let out = run_analyze(&suite.join("suite.json"), &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bench-01.cgr"), "{stderr}");
}

#[test]
fn invalid_input_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("suite");
    small_suite(&suite, &[]);
    let out = run_analyze(&suite.join("suite.json"), &tmp.path().join("o1"), &["--epsilon", "-1"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = suite.join("records/bench-00.cgr");
    let mut text = std::fs::read_to_string(&bad).unwrap();
    text.push_str("{not json\n");
    std::fs::write(&bad, text).unwrap();
    let out = run_analyze(&suite.join("suite.json"), &tmp.path().join("o2"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bench-00.cgr"));

    let out = cgaps().args(["analyze", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_layers_resolve_last_wins() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("suite");
    small_suite(&suite, &[]);
    let manifest_path = suite.join("suite.json");
    let mut manifest = read_json(&manifest_path);
    manifest["config"] = json!({ "epsilon": 1e-3, "under_percentile": 5.0 });
    std::fs::write(&manifest_path, manifest.to_string()).unwrap();
    let config_file = tmp.path().join("config.json");
    std::fs::write(&config_file, r#"{"epsilon": 1e-4}"#).unwrap();

    let epsilon_of = |out: &str, extra: &[&str]| {
        let out = tmp.path().join(out);
        let result = run_analyze(&manifest_path, &out, extra);
        assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
        let run = read_json(&out.join("run-analyze.json"));
        (run["config"]["epsilon"].as_f64().unwrap(), run["config"]["under_percentile"].as_f64().unwrap())
    };
    assert_eq!(epsilon_of("m", &[]), (1e-3, 5.0));
    let cfg = config_file.to_str().unwrap();
    assert_eq!(epsilon_of("c", &["--config", cfg]), (1e-4, 5.0));
    assert_eq!(epsilon_of("f", &["--config", cfg, "--epsilon", "1e-5"]), (1e-5, 5.0));
    let report = read_json(&tmp.path().join("f/report.json"));
    assert_eq!(report["analysis"]["config"]["epsilon"], 1e-5);

    std::fs::write(&config_file, r#"{"epsilonn": 1}"#).unwrap();
    let out = run_analyze(&manifest_path, &tmp.path().join("x"), &["--config", cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_manifest_records_digests_and_reruns_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("suite");
    small_suite(&suite, &[]);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        assert!(run_analyze(&suite.join("suite.json"), out, &[]).status.success());
    }
    same_tree(&a, &b).unwrap();
    let run = read_json(&a.join("run-analyze.json"));
    let inputs = run["inputs"].as_object().unwrap();
    assert_eq!(inputs.len(), 5);
    assert!(inputs.values().all(|d| d.as_str().unwrap().len() == 64));
    assert_eq!(tree(&a), ["report.csv", "report.json", "run-analyze.json"].map(std::path::PathBuf::from));
}

#[test]
fn robustness_commands_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("suite");
    synth(
        &suite,
        &[
            "--benchmarks", "3", "--concepts", "120", "--records", "150", "--seed", "5", "--binary-scores",
            "--high", "0,1,2,3,4,5,6,7,8,9", "--low", "10,11,12,13,14,15,16,17,18,19",
        ],
    );
    let manifest = suite.join("suite.json");
    let robustness = |out: &Path, args: &[&str]| {
        let mut cmd = cgaps();
        cmd.arg("robustness").arg(args[0]).arg("--manifest").arg(&manifest).arg("--out-dir").arg(out);
        cmd.args(&args[1..]).output().unwrap()
    };

    let fix = tmp.path().join("fix");
    assert!(robustness(&fix, &["subsample", "--drop", "0", "--repetitions", "4", "--seed", "1"]).status.success());
    let report = read_json(&fix.join("subsample.json"));
    assert_eq!(report["median_x_model_std"], 0.0);
    assert_eq!(report["median_x_bench_std"], 0.0);

    let args = ["ablation", "--k-concepts", "10", "--k-datapoints", "20", "--repetitions", "3", "--candidate-pool", "60", "--seed", "9"];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(robustness(&a, &args).status.success());
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "1"]);
    assert!(robustness(&b, &threaded).status.success());
    same_tree(&a, &b).unwrap();
    let report = read_json(&a.join("ablation.json"));
    assert!(report["high_side_delta_pct"].as_f64().unwrap() < 0.0);
    assert_eq!(read_json(&a.join("run-ablation.json"))["seeds"], json!([9]));

    let out = robustness(&tmp.path().join("c"), &["subsample", "--repetitions", "2"]);
    assert_eq!(out.status.code(), Some(2), "seed is required");
}

fn analyzed_with_missing(tmp: &Path) -> std::path::PathBuf {
    let suite = tmp.join("suite");
    small_suite(&suite, &["--missing", "3,7,11,20"]);
    let out = tmp.join("out");
    assert!(run_analyze(&suite.join("suite.json"), &out, &[]).status.success());
    out
}

fn assist_config(tmp: &Path, url: &str) -> std::path::PathBuf {
    let path = tmp.join("assist.json");
    let config = json!({
        "endpoint_url": url,
        "auth_token_env_var": "CGAPS_TEST_TOKEN",
        "model_name": "mock",
        "max_concepts_per_request": 3,
        "max_retries": 1,
        "initial_backoff_ms": 1,
        "timeout_seconds": 10.0,
    });
    std::fs::write(&path, config.to_string()).unwrap();
    path
}

#[test]
fn gaps_with_mock_assist_keeps_only_the_returned_subset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = analyzed_with_missing(tmp.path());
    let service = mock_service(|prompt| {
        let keep: Vec<u32> = prompt_ids(prompt).into_iter().filter(|id| id % 2 == 1).collect();
        Some(format!("{:?}", [keep, vec![999]].concat()))
    });
    let config = assist_config(tmp.path(), &service.url());
    let definitions = tmp.path().join("defs.json");
    std::fs::write(&definitions, r#"{"bench-01": "grade-school arithmetic word problems"}"#).unwrap();

    let mut cmd = cgaps();
    cmd.arg("gaps").arg("--analysis-dir").arg(&out).arg("--assist-config").arg(&config);
    cmd.arg("--benchmark-definitions").arg(&definitions).env("CGAPS_TEST_TOKEN", "secret");
    run_ok(&mut cmd);

    let gaps = read_json(&out.join("gaps.json"));
    assert_eq!(ids(&gaps["missing"]), [3, 7, 11, 20]);
    let relevant = &gaps["assist"]["relevant_missing"];
    assert_eq!(ids(&relevant["concepts"]), [3, 7, 11]);
    assert_eq!(relevant["chunks"], 2);
    assert_eq!(relevant["discarded"], 2);
    let per = &gaps["assist"]["relevant_missing_per_benchmark"]["bench-01"];
    assert_eq!(ids(&per["concepts"]), [3, 7, 11]);
    let prompts = service.prompts.lock().unwrap();
    assert!(prompts.iter().any(|p| p.contains("grade-school arithmetic word problems")));
}

#[test]
fn gaps_assist_failures_still_write_the_lists() {
    let tmp = tempfile::tempdir().unwrap();
    let out = analyzed_with_missing(tmp.path());
    let service = mock_service(|_| None);
    let config = assist_config(tmp.path(), &service.url());

    let mut cmd = cgaps();
    cmd.arg("gaps").arg("--analysis-dir").arg(&out).arg("--assist-config").arg(&config);
    let result = cmd.env("CGAPS_TEST_TOKEN", "secret").output().unwrap();
    assert_eq!(result.status.code(), Some(4));
    let gaps = read_json(&out.join("gaps.json"));
    assert_eq!(ids(&gaps["missing"]), [3, 7, 11, 20]);
    assert!(gaps["assist"]["error"].as_str().unwrap().contains("parse"));

    let mut cmd = cgaps();
    cmd.arg("gaps").arg("--analysis-dir").arg(&out).arg("--assist-config").arg(&config);
    let result = cmd.env_remove("CGAPS_TEST_TOKEN").output().unwrap();
    assert_eq!(result.status.code(), Some(4));
    let gaps = read_json(&out.join("gaps.json"));
    assert!(gaps["assist"]["error"].as_str().unwrap().contains("CGAPS_TEST_TOKEN"));
    assert_eq!(ids(&gaps["missing"]), [3, 7, 11, 20]);
}

#[test]
fn serve_build_only_writes_a_loadable_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let out = analyzed_with_missing(tmp.path());
    let bundle_dir = tmp.path().join("bundle");
    let mut cmd = cgaps();
    cmd.arg("serve").arg(&out).arg("--build-only").arg("--bundle-out").arg(&bundle_dir);
    run_ok(cmd.args(["--page-size", "25"]));
    let bundle = StaticBundle::load(&bundle_dir).unwrap();
    assert_eq!(bundle.manifest.page_count, 3);
    assert_eq!(bundle.rows.len(), 60);

    // Default location, and byte-identical on rebuild.
    let mut cmd = cgaps();
    run_ok(cmd.arg("serve").arg(&out).arg("--build-only").args(["--page-size", "25"]));
    same_tree(&bundle_dir, &out.join("bundle")).unwrap();
}

#[test]
fn serve_refuses_changed_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = analyzed_with_missing(tmp.path());
    let record = tmp.path().join("suite/records/bench-00.cgr");
    let mut text = std::fs::read_to_string(&record).unwrap();
    text.push('\n');
    std::fs::write(&record, text).unwrap();
    let result = cgaps().arg("serve").arg(&out).arg("--build-only").output().unwrap();
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("bench-00.cgr"));
}

#[test]
fn serve_answers_http_and_reports_bind_conflicts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = analyzed_with_missing(tmp.path());
    let mut child = cgaps()
        .arg("serve")
        .arg(&out)
        .args(["--bind", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr: std::net::SocketAddr = line.trim().strip_prefix("listening on http://").unwrap().parse().unwrap();

    let (status, body) = http_get(addr, "/manifest");
    assert_eq!(status, 200);
    let manifest: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(manifest["concept_count"], 60);
    let (status, body) = http_get(addr, "/concepts?class=missing");
    assert_eq!(status, 200);
    let page: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(ids(&page["rows"]), [3, 7, 11, 20]);
    assert_eq!(http_get(addr, "/concepts/12345").0, 404);

    // Serving the written bundle directory on the same port fails to bind.
    let start = std::time::Instant::now();
    let result = cgaps()
        .arg("serve")
        .arg(out.join("bundle"))
        .arg("--bind")
        .arg(addr.to_string())
        .output()
        .unwrap();
    assert!(start.elapsed() < Duration::from_secs(30));
    assert_eq!(result.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&result.stderr).contains("bind"));
    child.kill().unwrap();
    child.wait().unwrap();
}
