use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn bdspell(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_bdspell"))
        .args(args)
        .env_remove("BDSPELL_RULESET")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn plan_prints_labels() {
    let o = bdspell(&["plan", "ক্ত"], b"");
    assert!(o.status.success());
    assert_eq!(stdout(&o), "ka tta two\n");

    let o = bdspell(&["plan", "মন্ত্র", "--json"], b"");
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["labels"], serde_json::json!(["ma", "na", "tta", "ra", "three"]));
}

#[test]
fn simulate_pipes_into_compose() {
    let trace = bdspell(&["simulate", "--text", "আম", "--noise", "off", "--seed", "3"], b"");
    assert!(trace.status.success(), "{}", stderr(&trace));
    let o = bdspell(&["compose", "--delta", "50"], &trace.stdout);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "আম\n");
    assert!(stderr(&o).contains("confirmed ma"));
}

#[test]
fn noisy_default_trace_still_composes() {
    let trace = bdspell(&["simulate", "--text", "১২ কলম", "--seed", "11"], b"");
    let o = bdspell(&["compose", "--json"], &trace.stdout);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["text"], "১২ কলম");
    assert_eq!(v["mode"], "textual");
    assert!(stderr(&o).is_empty());
}

#[test]
fn compose_of_nothing_is_empty() {
    let o = bdspell(&["compose"], b"");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim_end_matches('\n'), "");
}

#[test]
fn seeds_make_runs_reproducible() {
    let a = bdspell(&["simulate", "--text", "কমল", "--seed", "42"], b"");
    let b = bdspell(&["simulate", "--text", "কমল", "--seed", "42"], b"");
    assert_eq!(a.stdout, b.stdout);

    let unseeded = bdspell(&["simulate", "--text", "কমল"], b"");
    let line = stderr(&unseeded);
    let seed = line.trim().strip_prefix("seed: ").expect("seed is printed");
    let again = bdspell(&["simulate", "--text", "কমল", "--seed", seed], b"");
    assert_eq!(unseeded.stdout, again.stdout);
}

#[test]
fn bench_grid() {
    let o = bdspell(&["bench", "--deltas", "5,10,20,30,50", "--strategy", "both", "--seed", "7", "--json"], b"");
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 10);
    for strategy in ["cumulative_confidence", "detection_count"] {
        let acc: Vec<f64> = rows
            .iter()
            .filter(|r| r["strategy"] == strategy)
            .map(|r| r["accuracy"].as_f64().unwrap())
            .collect();
        assert_eq!(acc.len(), 5);
        assert!(acc.windows(2).all(|w| w[1] >= w[0]), "{strategy}: {acc:?}");
    }

    let table = bdspell(&["bench", "--chars", "50", "--seed", "7", "--deltas", "50"], b"");
    assert!(stdout(&table).starts_with("threshold"));
}

#[test]
fn replay_streams_through_a_session() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    let path_str = path.to_str().unwrap();
    let o = bdspell(&["simulate", "--text", "ক্ষ", "--seed", "5", "--out", path_str], b"");
    assert!(o.status.success());
    let o = bdspell(&["replay", path_str], b"");
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().last(), Some("ক্ষ"));

    let o = bdspell(&["replay", path_str, "--json"], b"");
    let types: Vec<String> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["type"].as_str().unwrap().to_string())
        .collect();
    assert!(types.contains(&"confirmed".to_string()));
    assert!(types.contains(&"accumulators".to_string()));
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn eval_reports_scores() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.json", r#"[{"image_id": 1, "label": "ka", "box": [10, 10, 20, 20]}]"#);
    let pred = write(
        dir.path(),
        "pred.json",
        r#"[{"image_id": 1, "label": "ka", "box": [10, 10, 20, 20], "score": 0.9}]"#,
    );
    let o = bdspell(&["eval", "--gt", &gt, "--pred", &pred, "--json"], b"");
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["map_50"], 1.0);
    assert_eq!(v["map_50_95"], 1.0);

    let out = dir.path().join("report.json");
    let o = bdspell(&["eval", "--gt", &gt, "--pred", &pred, "--out", out.to_str().unwrap()], b"");
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["best_f1"]["f1"], 1.0);

    let table = bdspell(&["eval", "--gt", &gt, "--pred", &pred], b"");
    assert!(stdout(&table).contains("mAP"));

    let empty = write(dir.path(), "empty.json", "[]");
    let o = bdspell(&["eval", "--gt", &empty, "--pred", &pred], b"");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn input_errors_exit_1() {
    let cases: [&[&str]; 4] = [
        &["plan", "--bogus"],
        &["frobnicate"],
        &["compose", "/no/such/file.jsonl"],
        &["compose", "--strategy", "both"],
    ];
    for args in cases {
        let o = bdspell(args, b"");
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
    let o = bdspell(&["compose"], b"{not json}\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
    let o = bdspell(&["plan", "ঘ"], b"");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invariant_violations_exit_2() {
    let bad_frame = br#"{"type":"frame","t":0,"detections":[{"label":"ka","conf":1.7,"bbox":[0.1,0.1,0.1,0.1]}]}"#;
    let o = bdspell(&["compose"], bad_frame);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let unknown = br#"{"type":"frame","t":0,"detections":[{"label":"zz","conf":0.5,"bbox":[0.1,0.1,0.1,0.1]}]}"#;
    assert_eq!(bdspell(&["compose"], unknown).status.code(), Some(2));
    assert_eq!(bdspell(&["compose", "--delta", "0"], b"").status.code(), Some(2));
    assert_eq!(bdspell(&["bench", "--deltas=-1", "--seed", "1"], b"").status.code(), Some(2));
}

#[test]
fn ruleset_flag_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.json", &bdspell::RuleSet::default_bengali().to_canonical_json());
    let o = bdspell(&["--ruleset", &good, "plan", "ক"], b"");
    assert_eq!(stdout(&o), "ka\n");

    let mut doc = bdspell::RuleSet::default_bengali().to_json_value();
    let first = doc["classes"][0].clone();
    doc["classes"].as_array_mut().unwrap().push(first);
    let dup = write(dir.path(), "dup.json", &doc.to_string());
    let o = Command::new(env!("CARGO_BIN_EXE_bdspell"))
        .args(["plan", "ক"])
        .env("BDSPELL_RULESET", &dup)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("duplicate label"));

    let garbage = write(dir.path(), "garbage.json", "{");
    assert_eq!(bdspell(&["--ruleset", &garbage, "plan", "ক"], b"").status.code(), Some(1));
}
