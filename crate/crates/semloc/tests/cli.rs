mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use semloc::formats::report::parse_structured;

fn bin(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_semloc")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let (code, _, err) = bin(&["mine", "--bogus"]);
    assert_eq!(code, 1);
    assert!(err.contains("Usage"), "{err}");
    let (code, _, _) = bin(&[]);
    assert_eq!(code, 1);
    let (code, _, _) = bin(&["train", "--raw", "a", "--triplets", "b", "--out", "c", "--epochs", "many"]);
    assert_eq!(code, 1);
}

#[test]
fn help_and_version_succeed() {
    let (code, out, _) = bin(&["--help"]);
    assert_eq!(code, 0);
    for cmd in ["synth", "featurize", "mine", "train", "index", "localize", "evaluate"] {
        assert!(out.contains(cmd), "{cmd} missing from help");
    }
    assert_eq!(bin(&["--version"]).0, 0);
}

#[test]
fn data_errors_exit_2_and_leave_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let poses = dir.path().join("poses.csv");
    fs::write(&poses, "id,lat,lon\nA,0,0\nA,0,0.001\n").unwrap();
    let out = dir.path().join("t.csv");
    let (code, _, err) = bin(&["mine", "--poses", s(&poses), "--out", s(&out)]);
    assert_eq!(code, 2);
    assert!(err.contains("line 3") && err.contains("\"A\""), "{err}");
    assert!(!out.exists());

    let (code, _, err) = bin(&["mine", "--poses", s(&dir.path().join("missing.csv")), "--out", s(&out)]);
    assert_eq!(code, 2, "{err}");

    fs::write(&poses, "id,lat,lon\nA,0,0\nB,0,0.001\nC,0,0.002\n").unwrap();
    let (code, _, _) = bin(&["mine", "--poses", s(&poses), "--rpos", "30", "--rneg", "20", "--out", s(&out)]);
    assert_eq!(code, 1);
}

fn small_dataset(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("cfg.toml");
    fs::write(
        &cfg,
        "query_places = 6\n[world]\nnum_places = 40\n\
         [db_condition]\nname = \"clean\"\np_sem = 0.0\np_app = 0.0\npose_jitter_m = 0.0\n\
         [query_condition]\nname = \"clean\"\np_sem = 0.0\np_app = 0.0\npose_jitter_m = 0.0\n",
    )
    .unwrap();
    let ds = dir.join("ds");
    let (code, out, err) = bin(&["synth", "--config", s(&cfg), "--out", s(&ds)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "database,40\nqueries,6\n");
    ds
}

#[test]
fn noiseless_self_match_localizes_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path());
    let p = |n: &str| dir.path().join(n);
    let db_poses = ds.join("db_poses.csv");
    assert_eq!(bin(&["featurize", "--maps", s(&ds.join("semantic/db")), "--out", s(&p("raw.rds"))]).0, 0);
    assert_eq!(bin(&["mine", "--poses", s(&db_poses), "--out", s(&p("t.csv"))]).0, 0);
    let (code, out, err) = bin(&[
        "train", "--raw", s(&p("raw.rds")), "--triplets", s(&p("t.csv")), "--epochs", "3", "--dout", "16",
        "--out", s(&p("m.txt")),
    ]);
    assert_eq!(code, 0, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("epoch,1,mean_loss,"));
    assert_eq!(
        bin(&["index", "--model", s(&p("m.txt")), "--raw", s(&p("raw.rds")), "--poses", s(&db_poses), "--out", s(&p("db.gdb"))]).0,
        0
    );
    let member = ds.join("semantic/db/db_0017_0.slm");
    let (code, out, err) = bin(&["localize", "--index", s(&p("db.gdb")), "--model", s(&p("m.txt")), "--query", s(&member)]);
    assert_eq!(code, 0, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "id,lat,lon,distance");
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "db_0017_0");
    assert_eq!(fields[3], "0");
    let row = fs::read_to_string(&db_poses).unwrap();
    assert!(row.contains(&format!("db_0017_0,{},{}", fields[1], fields[2])));
}

#[test]
fn divergent_learning_rate_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let ds = small_dataset(dir.path());
    let p = |n: &str| dir.path().join(n);
    bin(&["featurize", "--maps", s(&ds.join("appearance/db")), "--out", s(&p("raw.rds"))]);
    bin(&["mine", "--poses", s(&ds.join("db_poses.csv")), "--out", s(&p("t.csv"))]);
    let (code, _, err) = bin(&[
        "train", "--raw", s(&p("raw.rds")), "--triplets", s(&p("t.csv")), "--lr", "1e300", "--out", s(&p("m.txt")),
    ]);
    assert_eq!(code, 3, "{err}");
    assert!(!p("m.txt").exists());
    let (code, _, _) = bin(&[
        "train", "--raw", s(&p("raw.rds")), "--triplets", s(&p("t.csv")), "--dout", "999", "--out", s(&p("m.txt")),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn scripted_pipeline_on_defaults_is_idempotent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let log_a = common::cli_pipeline(a.path(), "semantic");
    let log_b = common::cli_pipeline(b.path(), "semantic");
    assert_eq!(log_a, log_b);
    assert_eq!(log_a.lines().count(), 30);
    for f in ["db.rds", "triplets.csv", "model.txt", "db.gdb", "report.toml", "report.csv", "ds/manifest.toml"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    let report = parse_structured(&fs::read(a.path().join("report.toml")).unwrap()).unwrap();
    assert!(report.is_consistent());
    assert_eq!(report.per_query.len(), 39);
    let csv = fs::read_to_string(a.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("D_meters,recall\n") && csv.contains("\n\nN,recall\n"));

    // Re-running into an existing dataset directory replaces it.
    common::semloc(&["synth", "--out", a.path().join("ds").to_str().unwrap()]);
    assert_eq!(
        fs::read(a.path().join("ds/db_poses.csv")).unwrap(),
        fs::read(b.path().join("ds/db_poses.csv")).unwrap()
    );
}

#[test]
fn synth_refuses_to_clobber_foreign_directories() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("notes.txt"), "keep").unwrap();
    let (code, _, _) = bin(&["synth", "--out", s(dir.path())]);
    assert_eq!(code, 2);
    assert_eq!(fs::read_to_string(dir.path().join("notes.txt")).unwrap(), "keep");
}

#[test]
fn evaluate_rejects_bad_grids() {
    let (code, _, _) = bin(&[
        "evaluate", "--index", "x", "--model", "y", "--queries", "q", "--qposes", "p", "--out", "o", "--dgrid", "10,5",
    ]);
    assert_eq!(code, 1);
}
