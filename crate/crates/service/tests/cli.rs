use std::process::{Command, Output};

use gridshed::grid::{parse_case, read_case_file, serialize_case_compact};
use gridshed::report::{case_id, RunStore};
use gridshed_service::{Mode, OptimizeRequest};

const CASE9: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/case9.m");

fn gridshed(dir: &std::path::Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridshed"))
        .args(args)
        .env("GRIDSHED_DATA_DIR", dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn validate_reports_counts_and_field_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&gridshed(dir.path(), &["validate", "--case", CASE9]));
    assert!(out.starts_with("ok: 9 buses"), "{out}");

    let bad = dir.path().join("bad.json");
    let mut doc: serde_json::Value = serde_json::from_str(&gridshed::grid::serialize_case(
        &read_case_file(CASE9).unwrap(),
    ))
    .unwrap();
    doc["loads"][1]["bus"] = serde_json::json!(77);
    std::fs::write(&bad, doc.to_string()).unwrap();
    let o = gridshed(dir.path(), &["validate", "--case", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("loads[1].bus"));
}

#[test]
fn optimize_matches_the_service_run_id() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&gridshed(
        dir.path(),
        &["optimize", "--case", CASE9, "--outage", "0", "--mode", "binary", "--seed", "4", "--max-iterations", "20"],
    ));
    let printed = out.lines().next().unwrap().strip_prefix("run ").unwrap().to_string();

    let net = read_case_file(CASE9).unwrap();
    let canonical = serialize_case_compact(&net);
    let req = OptimizeRequest {
        outage: vec![0],
        mode: Mode::Binary,
        seed: Some(4),
        ga: gridshed::ga::GAConfig {
            max_iterations: 20,
            ..Default::default()
        },
        ..Default::default()
    };
    let cfg = req.normalize(&parse_case(&canonical).unwrap()).unwrap();
    assert_eq!(cfg.run_id(&case_id(&canonical)).unwrap(), printed);

    let store = RunStore::open(dir.path()).unwrap();
    assert!(store.contains(&printed));
    let shown = stdout(&gridshed(dir.path(), &["runs", &printed]));
    assert_eq!(shown.as_bytes(), store.record_bytes(&printed).unwrap());
    assert!(stdout(&gridshed(dir.path(), &["runs"])).contains(&printed));

    // Running it again reuses the stored record.
    let again = stdout(&gridshed(
        dir.path(),
        &["optimize", "--case", CASE9, "--outage", "0", "--mode", "binary", "--seed", "4", "--max-iterations", "20"],
    ));
    assert_eq!(again.lines().next(), out.lines().next());
    assert_eq!(store.list().unwrap().len(), 1);
}

#[test]
fn screen_writes_csv_and_oracle_runs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("report.csv");
    stdout(&gridshed(
        dir.path(),
        &["screen", "--case", CASE9, "--mode", "partial", "--saturate", "10", "--seed", "1", "--out", csv.to_str().unwrap()],
    ));
    let rows = gridshed::report::read_screening_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].approach, "partial-sat10");
    assert_eq!(rows[0].n_infeasible + rows[0].n_solution + rows[0].n_no_instability, 9);

    let out = stdout(&gridshed(dir.path(), &["oracle", "--case", CASE9, "--outage", "3"]));
    assert!(out.contains("search space: 8 points"), "{out}");

    let o = gridshed(dir.path(), &["optimize", "--case", CASE9, "--mode", "sideways"]);
    assert!(!o.status.success());
}
