use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tdtsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdtsp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tiny4() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/tiny4.json")
}

fn record(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().next().expect("a record line")).unwrap()
}

#[test]
fn solve_tiny4_exactly() {
    let out = tdtsp(&["solve", tiny4().to_str().unwrap(), "--formulation", "z-agg", "--epsilon", "0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = record(&out);
    assert_eq!(r["ub"], 8);
    assert_eq!(r["gap"], 0.0);
    assert_eq!(r["status"], "optimal");
}

#[test]
fn solve_writes_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let report = dir.path().join("out.json");
    for f in ["path", "z", "full", "oracle"] {
        let out = tdtsp(&[
            "solve",
            tiny4().to_str().unwrap(),
            "--formulation",
            f,
            "--waiting",
            "forbid",
            "--trace",
            trace.to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{f}");
        let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(r["record"]["ub"], 8, "{f}");
        assert_eq!(r["schedule"]["cost"], 8, "{f}");
    }
    let lines = std::fs::read_to_string(&trace).unwrap();
    assert!(lines.is_empty(), "oracle runs leave an empty trace");
}

#[test]
fn infeasible_instance_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("late.json");
    std::fs::write(
        &path,
        r#"{"n": 2, "windows": [[0, 10], [0, 1]], "arcs": [[0, 1], [1, 0]],
            "tau": {"0,1": [[0, 5]], "1,0": [[0, 5]]}}"#,
    )
    .unwrap();
    let out = tdtsp(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(record(&out)["status"], "infeasible");
}

#[test]
fn time_limit_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.json");
    let out = tdtsp(&["generate", "--n", "12", "--seed", "12001", "--horizon", "280", "--window-width", "80", "--segments", "4", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let out = tdtsp(&["solve", path.to_str().unwrap(), "--formulation", "path", "--epsilon", "0", "--time-limit", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = tdtsp(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parsing"));
}

#[test]
fn bench_writes_one_row_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..4 {
        let p = dir.path().join(format!("g{seed}.json"));
        let out = tdtsp(&["generate", "--n", "5", "--seed", &seed.to_string(), "--out", p.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    for (csv, jobs) in [(&csv_a, "1"), (&csv_b, "3")] {
        let out = tdtsp(&[
            "bench",
            dir.path().to_str().unwrap(),
            "--formulations",
            "path,z,z-agg",
            "--epsilon",
            "0",
            "--jobs",
            jobs,
            "--csv",
            csv.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let table = String::from_utf8_lossy(&out.stdout);
        assert!(table.contains("z-agg"));
    }
    let strip = |p: &Path| -> Vec<String> {
        let text = std::fs::read_to_string(p).unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().unwrap().clone();
        let wall = header.iter().position(|h| h == "wall_ms").unwrap();
        rdr.records()
            .map(|r| {
                let r = r.unwrap();
                r.iter().enumerate().filter(|(k, _)| *k != wall).map(|(_, v)| v).collect::<Vec<_>>().join(",")
            })
            .collect()
    };
    let (a, b) = (strip(&csv_a), strip(&csv_b));
    assert_eq!(a.len(), 12);
    assert_eq!(a, b, "non-timing fields are reproducible");
}

#[test]
fn generate_suite_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = tdtsp(&["generate", "--suite", "bench", "--dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 40);

    for mode in ["free", "forbidden", "priced"] {
        let out = tdtsp(&["validate", "--n-max", "5", "--seeds", "6", "--waiting", mode]);
        assert_eq!(out.status.code(), Some(0), "{mode}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn external_backend_env_is_checked() {
    let out = Command::new(env!("CARGO_BIN_EXE_tdtsp"))
        .args(["solve", tiny4().to_str().unwrap()])
        .env("TDTSP_SOLVER", "bogus")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
