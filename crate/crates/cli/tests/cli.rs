use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn anonqtx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anonqtx"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Minimal validator for the keywords used by the shipped schema.
fn validate(schema: &Value, value: &Value, at: &str) -> Result<(), String> {
    if let Some(c) = schema.get("const") {
        if c != value {
            return Err(format!("{at}: expected {c}"));
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            return Err(format!("{at}: {value} not in enum"));
        }
    }
    if let Some(ty) = schema.get("type").and_then(Value::as_str) {
        let ok = match ty {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "boolean" => value.is_boolean(),
            "integer" => value.is_u64() || value.is_i64(),
            "number" => value.is_number(),
            _ => true,
        };
        if !ok {
            return Err(format!("{at}: expected {ty}"));
        }
    }
    if let Some(n) = value.as_f64() {
        if schema.get("minimum").and_then(Value::as_f64).is_some_and(|m| n < m - 1e-12) {
            return Err(format!("{at}: below minimum"));
        }
        if schema.get("maximum").and_then(Value::as_f64).is_some_and(|m| n > m + 1e-12) {
            return Err(format!("{at}: above maximum"));
        }
    }
    if let Some(obj) = value.as_object() {
        for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            let key = key.as_str().unwrap();
            if !obj.contains_key(key) {
                return Err(format!("{at}: missing {key}"));
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (k, v) in obj {
            if let Some(sub) = props.and_then(|p| p.get(k)) {
                validate(sub, v, &format!("{at}.{k}"))?;
            } else if let Some(sub) = schema.get("additionalProperties").filter(|s| s.is_object()) {
                validate(sub, v, &format!("{at}.{k}"))?;
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            validate(items, v, &format!("{at}[{i}]"))?;
        }
    }
    Ok(())
}

fn schema() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/run_result.schema.json");
    read_json(&path)
}

#[test]
fn honest_protocol2_run_reports_four_perfect_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", r#"{"protocol": 2, "n": 5, "seed": 7}"#);
    let out = dir.path().join("out");
    let res = anonqtx(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let doc = read_json(&out.join("result.json"));
    validate(&schema(), &doc, "$").unwrap();
    assert_eq!(doc["pair_count"], 4);
    assert_eq!(doc["seed"], 7);
    for pair in doc["pairs"].as_array().unwrap() {
        assert!(pair["fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
    }
    let log = fs::read_to_string(out.join("channel_log.jsonl")).unwrap();
    assert!(log.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
}

#[test]
fn malformed_config_exits_one_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "bad.json", "{\n  \"n\": 5,\n  \"p\": \"high\"\n}\n");
    let res = anonqtx(&["run", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");

    let invalid = write_config(dir.path(), "invalid.json", r#"{"n": 2}"#);
    let res = anonqtx(&["run", "--config", &invalid, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical_and_never_overwrite_silently() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"protocol": 3, "n": 5, "m": 8, "p": 0.3, "sender_index": 2, "seed": 99,
        "adversary": {"corrupted": [0], "strategy": {"kind": "TRAP_GUESS"}}, "xi": 0.5,
        "distill_variant": "PER_DISTRIBUTOR"}"#;
    let config = write_config(dir.path(), "c.json", body);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let res = anonqtx(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
        assert!(matches!(res.status.code(), Some(0) | Some(2)));
    }
    for file in ["result.json", "channel_log.jsonl"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap());
    }
    let doc = read_json(&a.join("result.json"));
    validate(&schema(), &doc, "$").unwrap();
    assert_eq!(doc["collusion"]["strategy"]["xi"], 0.5);

    let before = fs::read(a.join("result.json")).unwrap();
    let res = anonqtx(&["run", "--config", &config, "--out", a.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(fs::read(a.join("result.json")).unwrap(), before);
    let res = anonqtx(&["run", "--config", &config, "--out", a.to_str().unwrap(), "--seed", "1", "--force-overwrite"]);
    assert!(matches!(res.status.code(), Some(0) | Some(2)));
    assert_eq!(read_json(&a.join("result.json"))["seed"], 1);
}

#[test]
fn thread_cap_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "s.json", r#"{"p": 0.25, "xi": 0.5, "theta": 0.1, "m": [40, 80], "trials": 300}"#);
    let one = dir.path().join("one");
    let many = dir.path().join("many");
    let res = Command::new(env!("CARGO_BIN_EXE_anonqtx"))
        .args(["sweep", "--config", &config, "--out", one.to_str().unwrap()])
        .env("ANONQTX_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(0));
    let res = anonqtx(&["sweep", "--config", &config, "--out", many.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(fs::read(one.join("sweep.csv")).unwrap(), fs::read(many.join("sweep.csv")).unwrap());
}

#[test]
fn restart_budget_exhaustion_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"protocol": 3, "n": 4, "m": 3, "p": 0.9, "sender_index": 1, "max_restarts": 0,
        "adversary": {"corrupted": [0], "strategy": {"kind": "FLIP_OUTCOME", "prob": 1.0}}}"#;
    let config = write_config(dir.path(), "c.json", body);
    let res = anonqtx(&["run", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let doc = read_json(&dir.path().join("result.json"));
    validate(&schema(), &doc, "$").unwrap();
    assert_eq!(doc["status"], "RESTART_LIMIT");
}

#[test]
fn teleport_run_and_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", r#"{"protocol": 1, "n": 4, "variant": "MTAR_INVERTED", "seed": 3}"#);
    let res = anonqtx(&["run", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    let doc = read_json(&dir.path().join("result.json"));
    validate(&schema(), &doc, "$").unwrap();
    assert!(doc["teleport"]["fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);

    let csv_dir = dir.path().join("csv");
    let res = anonqtx(&["run", "--config", &config, "--out", csv_dir.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(res.status.code(), Some(0));
    let csv = fs::read_to_string(csv_dir.join("result.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("seed,distributor,attempt,round,label,touched,fidelity"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn sweep_rows_and_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "s.json",
        r#"{"p": 0.25, "xi": 0.5, "theta": 0.1, "m": [50, 100, 200], "trials": 4000, "seed": 5}"#,
    );
    let out = dir.path().join("sweep");
    let res = anonqtx(&["sweep", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, anonqtx::analysis::SWEEP_COLUMNS);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    let bounds: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(bounds.windows(2).all(|w| w[1] < w[0]));
    assert!(rows.iter().all(|r| &r[13] == "true"));

    let empty = write_config(dir.path(), "e.json", r#"{"p": [], "xi": 0.5, "theta": 0.1, "m": 10}"#);
    let out = dir.path().join("empty");
    let res = anonqtx(&["sweep", "--config", &empty, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 1);

    let bad = write_config(dir.path(), "b.json", r#"{"p": 2.0, "xi": 0.5, "theta": 0.1, "m": 10}"#);
    let res = anonqtx(&["sweep", "--config", &bad, "--out", dir.path().join("bad").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn verify_quick_passes_and_fault_is_caught() {
    let res = anonqtx(&["verify", "--quick"]);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(res.status.code(), Some(0), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));

    let res = anonqtx(&["verify", "--quick", "--inject-fault", "flip-parity"]);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_ne!(res.status.code(), Some(0));
    let parity = stdout.lines().find(|l| l.contains("parity-law")).unwrap();
    assert!(parity.starts_with("FAIL"), "{stdout}");
}
