use std::path::PathBuf;
use std::process::{Command, Output};

use polyext::extensions::CoefficientFamily;
use polyext::SymTensor;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polyext"))
}

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn path_str(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn injective_norm_of_e1_square() {
    let input = fixture("tensors/e1_square.json");
    let out = run(&["norm", "--input", path_str(&input), "--kind", "injective", "--ball", "l2"]);
    let report = json_stdout(&out);
    assert_eq!(report["norm"], "injective_s");
    assert_eq!(report["kind"], "lower");
    assert_eq!(report["seed"], 0);
    assert!((report["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn sup_norm_of_x1x2_on_the_cube() {
    let input = fixture("tensors/x1x2.json");
    let out = run(&["norm", "--input", path_str(&input), "--kind", "sup", "--ball", "linf"]);
    let report = json_stdout(&out);
    // a bilinear form attains its sup on the cube at a vertex
    let p = SymTensor::from_json(&std::fs::read_to_string(&input).unwrap()).unwrap();
    let mut best = 0.0f64;
    for mask in 0..(1u32 << p.dim()) {
        let x: Vec<f64> = (0..p.dim()).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        best = best.max(p.evaluate(&x).unwrap().abs());
    }
    assert_eq!(best, 1.0);
    assert!((report["value"].as_f64().unwrap() - best).abs() < 1e-12);
    let point: Vec<f64> = serde_json::from_value(report["witness"]["point"].clone()).unwrap();
    assert!((p.evaluate(&point).unwrap().abs() - best).abs() < 1e-12);
}

#[test]
fn nuclear_report_is_an_upper_bound_with_decomposition() {
    let input = fixture("tensors/x1x2.json");
    let out = run(&["norm", "--input", path_str(&input), "--kind", "nuclear", "--ball", "l2", "--seed", "3"]);
    let report = json_stdout(&out);
    assert_eq!(report["kind"], "upper");
    assert_eq!(report["seed"], 3);
    // x1 x2 = ((x1 + x2)^2 - (x1 - x2)^2) / 4 with unit functionals costs 1
    let v = report["value"].as_f64().unwrap();
    assert!(v >= 1.0 - 1e-9 && v <= 1.0 + 1e-6, "{v}");
    assert!(!report["witness"]["terms"].as_array().unwrap().is_empty());
}

#[test]
fn csv_norm_report() {
    let input = fixture("tensors/e1_square.json");
    let out = run(&["norm", "--input", path_str(&input), "--kind", "sup", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("norm,kind,ball,value,seed"));
    assert_eq!(lines.next(), Some("sup,lower,l2,1.0,0"));
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n\": 2, \"d\": ").unwrap();
    let out = run(&["norm", "--input", bad.to_str().unwrap(), "--kind", "sup"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unsorted_index_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n":2,"d":2,"entries":[{"idx":[1,0],"val":1.0}]}"#).unwrap();
    let out = run(&["norm", "--input", bad.to_str().unwrap(), "--kind", "sup"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_kind_and_ball_exit_2() {
    let input = fixture("tensors/e1_square.json");
    let out = run(&["norm", "--input", path_str(&input), "--kind", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["norm", "--input", path_str(&input), "--kind", "sup", "--ball", "l3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_rank_exits_3() {
    let input = fixture("tensors/cubic.json");
    let out = run(&["norm", "--input", path_str(&input), "--kind", "min_kernel", "--rank", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_suite_exits_2() {
    assert_eq!(run(&["verify", "bogus"]).status.code(), Some(2));
}

#[test]
fn failed_run_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.json");
    let out = run(&["verify", "bogus", "--output", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn verify_dg_is_deterministic_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = run(&["verify", "dg", "--epsilon", "1e-2", "--seed", "7", "--output", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ra, rb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ra, rb);
    // only the two reports, no temporaries
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    let report: Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(report["pass"], true);
    for entry in report["dg"].as_array().unwrap() {
        assert_eq!(entry["epsilon"], 1e-2);
        let m = entry["m"].as_u64().unwrap() as usize;
        assert_eq!(entry["stages"].as_array().unwrap().len(), m);
        assert!(entry["C"].is_number());
        assert_eq!(entry["pass"], true);
    }
}

#[test]
fn verify_ideals_is_deterministic_across_thread_counts() {
    let one = bin()
        .args(["verify", "ideals", "--seed", "7"])
        .env("SYMT_THREADS", "1")
        .output()
        .unwrap();
    let many = bin().args(["verify", "ideals", "--seed", "7"]).env("SYMT_THREADS", "4").output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn verify_csv_lists_criteria() {
    let out = run(&["verify", "dg", "--epsilon", "1e-1", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("id,name,passed,cases,measured,threshold\n9,averaged operators,true,"));
}

#[test]
fn verify_reads_a_fixture_directory() {
    let out = run(&["verify", "dg", "--epsilon", "1e-1", "--input", path_str(&fixture(""))]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["verify", "dg", "--input", "/nonexistent/fixtures"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn extend_halving_diagonal() {
    let input = fixture("extend/halving.json");
    let out = run(&["extend", "--input", path_str(&input), "--stages", "5,10,20,40"]);
    let report = json_stdout(&out);
    let points = report["points"].as_array().unwrap();
    assert_eq!(points.len(), 2);

    // constant-1 point: partial sums of sum_k 2^{-(k+1)} and limit 1
    let first = &points[0];
    assert!((first["value"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    for s in first["uniterated"]["trace"].as_array().unwrap() {
        let stage = s["stage"].as_u64().unwrap() as i32;
        let partial: f64 = (0..stage).map(|k| 0.5f64.powi(k + 1)).sum();
        assert!((s["value"].as_f64().unwrap() - partial).abs() < 1e-15);
    }
    assert_eq!(first["uniterated"]["trace"][0]["value"], 0.96875);

    // tail-0 point: extension and every stage equal the plain value
    let raw: Value = serde_json::from_str(&std::fs::read_to_string(&input).unwrap()).unwrap();
    let family: CoefficientFamily = serde_json::from_value(raw["family"].clone()).unwrap();
    let head: Vec<f64> = serde_json::from_value(raw["points"][1]["head"].clone()).unwrap();
    let plain = family.evaluate(&head);
    let second = &points[1];
    assert_eq!(second["value"].as_f64().unwrap(), plain);
    assert_eq!(second["uniterated"]["converged"], true);
    for s in second["uniterated"]["trace"].as_array().unwrap() {
        assert_eq!(s["value"].as_f64().unwrap(), plain);
    }
}

#[test]
fn extend_empty_point_list() {
    let input = fixture("extend/empty.json");
    let report = json_stdout(&run(&["extend", "--input", path_str(&input)]));
    assert_eq!(report["points"].as_array().unwrap().len(), 0);
}

#[test]
fn extend_rejects_bad_stages() {
    let input = fixture("extend/halving.json");
    let out = run(&["extend", "--input", path_str(&input), "--stages", "10,5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn extend_csv_rows() {
    let input = fixture("extend/halving.json");
    let out = run(&["extend", "--input", path_str(&input), "--stages", "5,10", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "point,stage,value,converged");
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[3].starts_with("0,limit,1.0,"));
}
