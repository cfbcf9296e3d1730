use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, cfg: &str) -> Output {
    let path = dir.join("run.cfg");
    fs::write(&path, cfg).unwrap();
    Command::new(env!("CARGO_BIN_EXE_anisowave")).arg(&path).current_dir(dir).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_lists_commands() {
    let o = Command::new(env!("CARGO_BIN_EXE_anisowave")).arg("--help").output().unwrap();
    assert!(o.status.success());
    let s = String::from_utf8_lossy(&o.stdout);
    for c in ["verify-decay", "bounds-audit", "manifold-demo", "sigma_shift"] {
        assert!(s.contains(c), "{c}");
    }
}

#[test]
fn malformed_config_exits_2_with_line() {
    let d = tempfile::tempdir().unwrap();
    for (cfg, line) in [
        ("command = sstar\nwhat = 1\n", "line 2"),
        ("# x\nJ = 3\nJ = 4\n", "line 3"),
        ("alpha = 0.9\n", ""),
        ("J = three\n", "line 1"),
        ("kernel = power_law:3\n", "line 1"),
        ("command sstar\n", "line 1"),
    ] {
        let o = run(d.path(), cfg);
        assert_eq!(o.status.code(), Some(2), "{cfg}: {}", stderr(&o));
        assert!(stderr(&o).contains(line), "{cfg}: {}", stderr(&o));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_anisowave")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn guard_exits_3_without_outputs() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), "command = verify-decay\nJ = 7\nout_dir = out\n");
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!d.path().join("out").exists());
}

#[test]
fn sstar_table_written() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), "command = sstar\n");
    assert!(o.status.success(), "{}", stderr(&o));
    let t = fs::read_to_string(d.path().join("out/sstar.csv")).unwrap();
    let col: Vec<&str> = t.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(col, ["4", "6", "3", "5", "-", "4"]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "sstar");
    assert!(m["outputs"].as_array().unwrap().iter().any(|v| v == "sstar.csv"));
}

fn strip_runtime(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(a, _)| a)).collect::<Vec<_>>().join("\n")
}

#[test]
fn verify_decay_rows_and_determinism() {
    let d = tempfile::tempdir().unwrap();
    let cfg = "command = verify-decay\nJ = 4\nr_min = 1\nr_max = 5\nout_dir = a\n";
    let o = run(d.path(), cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = fs::read_to_string(d.path().join("a/decay.csv")).unwrap();
    let rows: Vec<Vec<f64>> = a
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.windows(2).all(|w| w[1][1] >= w[0][1]));
    assert!(rows.iter().all(|r| r[3] > 0.0 && r[3].is_finite()));
    let o = run(d.path(), &cfg.replace("out_dir = a", "out_dir = b\nthreads = 1"));
    assert!(o.status.success());
    let b = fs::read_to_string(d.path().join("b/decay.csv")).unwrap();
    assert_eq!(strip_runtime(&a), strip_runtime(&b));
}

#[test]
fn compress_dumps_patterns() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), "command = compress\nJ = 2\nr_min = 3\nr_max = 3\n");
    assert!(o.status.success(), "{}", stderr(&o));
    let p = fs::read_to_string(d.path().join("out/pattern_r3.csv")).unwrap();
    assert_eq!(p.lines().next().unwrap(), "row_index,col_index,jx,jy,jx2,jy2,stage,value");
    assert_eq!(p.lines().count(), 1 + 64 * 64);
    let op: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("out/operator_r3.json")).unwrap()).unwrap();
    let kept = p.lines().skip(1).filter(|l| l.contains(",kept,")).count();
    assert_eq!(op["nnz"].as_u64().unwrap() as usize, kept);
}

#[test]
fn manifold_demo_reports_geometry() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), "command = manifold-demo\ngeometry = l_corner\nJ = 2\nr_max = 4\n");
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["results"]["geometry"]["patches"], 3);
    assert_eq!(m["results"]["distance_ratios_within_band"], true);
    assert_eq!(fs::read_to_string(d.path().join("out/distances.csv")).unwrap().lines().count(), 201);
}
