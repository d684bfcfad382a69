use std::path::Path;
use std::process::{Command, Output};

fn gmclp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmclp"))
        .args(args)
        .current_dir(dir)
        .env("GMCLP_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

/// p = 1, w = (1, -1, -1), I_1 = {2,3,4}, I_2 = {1,2,3}, I_3 = {1,4} (one-based).
const THREE_CUSTOMERS: &str = "GMCLP 1\n4 3 1\n1 3 2 3 4\n-1 3 1 2 3\n-1 2 1 4\n";
/// Both customers covered by all four facilities, weights 5/4 and -1.
const UNIFORM4: &str = "GMCLP 1\n4 2 1\n5/4 4 1 2 3 4\n-1 4 1 2 3 4\n";

#[test]
fn generate_large_planar_file() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "generate",
        "--facilities",
        "100",
        "--customers",
        "1000",
        "--p",
        "10",
        "--radius",
        "5.5",
        "--weights",
        "unit",
        "--seed",
        "7",
        "--out-dir",
        "out",
    ];
    let out = gmclp(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = String::from_utf8(out.stdout).unwrap().trim().to_string();
    let text = std::fs::read_to_string(dir.path().join(&path)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("GMCLP 1"));
    assert_eq!(lines.next(), Some("100 1000 10"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["instances"][0]["seed"], 7);
    assert_eq!(manifest["instances"][0]["weights"], "unit");
}

#[test]
fn generate_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        let args = [
            "generate",
            "--facilities",
            "20",
            "--customers",
            "60",
            "--p",
            "3",
            "--radius",
            "6",
            "--weights",
            "ratio:0.5",
            "--seed",
            "7",
            "--out-dir",
            out,
        ];
        let o = gmclp(&args, dir.path());
        assert!(o.status.success());
        std::fs::read(dir.path().join(String::from_utf8(o.stdout).unwrap().trim())).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn generate_rejects_zero_p() {
    let dir = tempfile::tempdir().unwrap();
    let out = gmclp(&["generate", "--facilities", "5", "--customers", "5", "--p", "0", "--radius", "3"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let out = gmclp(
        &["generate", "--weights", "ratio:0.4", "--facilities", "5", "--customers", "5", "--p", "1", "--radius", "3"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solve_three_customers() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ex.gmclp"), THREE_CUSTOMERS).unwrap();
    let out = gmclp(&["solve", "ex.gmclp", "--setting", "full", "--solution-out", "sol.txt"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = json(&out);
    assert_eq!(rec["status"], "optimal");
    assert_eq!(rec["z_exact"], "0");
    assert_eq!(rec["setting"], "full");
    let sol = std::fs::read_to_string(dir.path().join("sol.txt")).unwrap();
    assert_eq!(sol.lines().count(), 1);
}

#[test]
fn baseline_and_full_bounds_on_uniform_cover() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("u4.gmclp"), UNIFORM4).unwrap();
    let base = json(&gmclp(&["solve", "u4.gmclp", "--setting", "baseline"], dir.path()));
    let full = json(&gmclp(&["solve", "u4.gmclp", "--setting", "full"], dir.path()));
    assert!((base["z_lp"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((base["z_root"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((full["z_root"].as_f64().unwrap() - 0.25).abs() < 1e-6);
    assert_eq!(full["z_exact"], "1/4");
}

#[test]
fn exit_codes_for_io_and_limits() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gmclp(&["solve", "missing.gmclp"], dir.path()).status.code(), Some(4));
    std::fs::write(dir.path().join("bad.gmclp"), "GMCLP 1\n3 1 5\n1 1 1\n").unwrap();
    assert_eq!(gmclp(&["solve", "bad.gmclp"], dir.path()).status.code(), Some(3));
    std::fs::write(dir.path().join("ex.gmclp"), THREE_CUSTOMERS).unwrap();
    let out = gmclp(&["solve", "ex.gmclp", "--node-limit", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["status"], "node-limit");
    assert_eq!(gmclp(&["solve", "ex.gmclp", "--option", "nonsense=1"], dir.path()).status.code(), Some(3));
    assert_eq!(gmclp(&["frobnicate"], dir.path()).status.code(), Some(3));
}

#[test]
fn presolve_reports_reductions_and_writes_lp() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("u4.gmclp"), UNIFORM4).unwrap();
    let out = gmclp(&["presolve", "u4.gmclp", "--lp-out", "u4.lp"], dir.path());
    assert!(out.status.success());
    let rep = json(&out);
    assert_eq!(rep["variables_before"], 6);
    assert!(rep["variables_after"].as_u64().unwrap() < 6);
    let lp = std::fs::read_to_string(dir.path().join("u4.lp")).unwrap();
    assert!(lp.contains("Maximize"));
}

#[test]
fn bench_writes_csv_json_and_records_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("ex.gmclp"), THREE_CUSTOMERS).unwrap();
    std::fs::write(d.join("u4.gmclp"), UNIFORM4).unwrap();
    let manifest = r#"{"instances": [
        {"id": "ex", "path": "ex.gmclp", "group": "toy"},
        {"id": "u4", "path": "u4.gmclp", "group": "toy"},
        {"id": "gone", "path": "gone.gmclp", "group": "toy"}
    ]}"#;
    std::fs::write(d.join("m.json"), manifest).unwrap();
    let out =
        gmclp(&["bench", "m.json", "--settings", "baseline,full,no-tci", "--csv", "r.csv", "--json", "r.json"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(d.join("r.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    for field in [
        "instance_id",
        "setting",
        "status",
        "z",
        "z_lp",
        "z_root",
        "lpg_pct",
        "gi_pct",
        "dv_pct",
        "dc_pct",
        "nodes",
        "cuts",
        "presolve_time",
        "separation_time",
        "total_time",
    ] {
        assert!(header.split(',').any(|h| h == field), "missing column {field}");
    }
    assert_eq!(csv.lines().count(), 1 + 9);
    assert_eq!(csv.lines().filter(|l| l.contains(",error,")).count(), 3);

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 6);
    assert_eq!(report["aggregates"].as_array().unwrap().len(), 3);
    // z <= z_root <= z_LP on every optimal row.
    for r in report["records"].as_array().unwrap() {
        let (z, root, lp) = (r["z"].as_f64().unwrap(), r["z_root"].as_f64().unwrap(), r["z_lp"].as_f64().unwrap());
        assert!(z <= root + 1e-6 && root <= lp + 1e-6, "{r}");
    }

    let again = gmclp(&["report", "r.json", "--json"], d);
    assert!(again.status.success());
    assert_eq!(json(&again), report["aggregates"]);
}

#[test]
fn bench_is_reproducible_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = [
        "generate",
        "--facilities",
        "15",
        "--customers",
        "50",
        "--p",
        "3",
        "--radius",
        "7",
        "--weights",
        "ratio:0.5",
        "--seed",
        "3",
        "--count",
        "2",
        "--out-dir",
        ".",
    ];
    assert!(gmclp(&gen, d).status.success());
    let strip = |path: &str| -> Vec<(String, String, f64, f64, f64, u64)> {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join(path)).unwrap()).unwrap();
        v["records"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| {
                (
                    r["instance_id"].as_str().unwrap().to_string(),
                    r["setting"].as_str().unwrap().to_string(),
                    r["z"].as_f64().unwrap(),
                    r["z_lp"].as_f64().unwrap(),
                    r["z_root"].as_f64().unwrap(),
                    r["nodes"].as_u64().unwrap(),
                )
            })
            .collect()
    };
    for name in ["a.json", "b.json"] {
        assert!(gmclp(&["bench", "manifest.json", "--settings", "full,no-dr", "--json", name], d).status.success());
    }
    assert_eq!(strip("a.json"), strip("b.json"));
}

#[test]
fn empty_manifest_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.json"), r#"{"instances": []}"#).unwrap();
    let out = gmclp(&["bench", "m.json", "--json", "r.json"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert!(v["records"].as_array().unwrap().is_empty());
    assert!(v["aggregates"].as_array().unwrap().is_empty());
}
