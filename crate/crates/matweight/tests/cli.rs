use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn matweight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matweight")).args(args).output().expect("spawn matweight")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn exponents_default() {
    let dir = tempfile::tempdir().unwrap();
    let o = matweight(&["exponents", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(stdout(&o).contains("alpha = 1.5"), "{}", stdout(&o));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["command"], "exponents");
    assert_eq!(summary["status"], "ok");
}

#[test]
fn constant_weight_characteristics_are_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = matweight(&["char", "-P", "spread=0", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().filter(|l| l.contains(" = ")).collect();
    assert_eq!(lines.len(), 4, "{text}");
    assert!(lines.iter().all(|l| l.trim_end().ends_with("= 1")), "{text}");
    let csv = fs::read_to_string(dir.path().join("char.csv")).unwrap();
    assert!(csv.starts_with("characteristic,operation,family_id,interval,value\n"), "{csv}");
    for op in ["apq_characteristic", "matrix_a1", "at_infinity_characteristic", "rh_characteristic"] {
        assert!(csv.contains(op), "{op} missing from\n{csv}");
    }
}

#[test]
fn unconstrained_exponents_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = matweight(&["counterexample", "-P", "q2=2", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
}

#[test]
fn bad_arguments_exit_three() {
    assert_eq!(matweight(&["no-such-command"]).status.code(), Some(3));
    assert_eq!(matweight(&["char", "-P", "nonsense=1"]).status.code(), Some(3));
    assert_eq!(matweight(&["char", "-P", "noequals"]).status.code(), Some(3));
    assert_eq!(matweight(&["exponents", "-P", "p=0.5"]).status.code(), Some(3));
}

#[test]
fn same_seed_same_bytes_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let o = matweight(&["cordes", "--seed", "11", "--threads", threads, "-P", "pairs=60", "-P", "appendix_points=5", "--out", &out_arg(dir.path())]);
        assert_eq!(o.status.code(), Some(0), "{o:?}");
    }
    let names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).filter(|n| n.to_string_lossy().ends_with(".csv")).collect();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn different_seeds_differ() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "1"), (&b, "2")] {
        let o = matweight(&["john", "--seed", seed, "-P", "bodies=6", "--out", &out_arg(dir.path())]);
        assert_eq!(o.status.code(), Some(0), "{o:?}");
    }
    assert_ne!(fs::read(a.path().join("john.csv")).unwrap(), fs::read(b.path().join("john.csv")).unwrap());
}

#[test]
fn printed_config_runs_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let o = matweight(&["rdf-demo", "--seed", "5", "-P", "instances=1", "--print-config"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, &o.stdout).unwrap();

    let (x, y) = (dir.path().join("x"), dir.path().join("y"));
    let direct = matweight(&["rdf-demo", "--seed", "5", "-P", "instances=1", "--out", &out_arg(&x)]);
    let from_file = matweight(&["rdf-demo", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&y)]);
    assert_eq!(direct.status.code(), Some(0), "{direct:?}");
    assert_eq!(from_file.status.code(), Some(0), "{from_file:?}");
    assert_eq!(fs::read(x.join("rdf_trace.csv")).unwrap(), fs::read(y.join("rdf_trace.csv")).unwrap());

    let mismatch = matweight(&["john", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&x)]);
    assert_eq!(mismatch.status.code(), Some(3));
}

#[test]
fn verify_sparse_files() {
    let dir = tempfile::tempdir().unwrap();
    let nested = dir.path().join("nested.json");
    fs::write(&nested, r#"{"epsilon": 0.9, "intervals": [[0, 0], [1, 0], [2, 0], [3, 0]]}"#).unwrap();
    let o = matweight(&["verify-sparse", "-P", &format!("file={}", nested.display()), "--out", &out_arg(&dir.path().join("a"))]);
    assert_eq!(o.status.code(), Some(2), "{o:?}");

    let generated = dir.path().join("b");
    let o = matweight(&["verify-sparse", "-P", "depth=5", "--out", &out_arg(&generated)]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let saved = generated.join("sparse.json");
    assert!(saved.exists());
    let o = matweight(&["verify-sparse", "-P", &format!("file={}", saved.display()), "--out", &out_arg(&dir.path().join("c"))]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");

    fs::write(&nested, "{not json").unwrap();
    let o = matweight(&["verify-sparse", "-P", &format!("file={}", nested.display())]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn char_reads_a_saved_weight() {
    let dir = tempfile::tempdir().unwrap();
    let o = matweight(&["counterexample", "-P", "depths=[4]", "-P", "save_depth=4", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let saved: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "json") && !p.ends_with("summary.json")).collect();
    assert_eq!(saved.len(), 1, "{saved:?}");
    let o = matweight(&["char", "-P", &format!("weight={}", saved[0].display()), "--out", &out_arg(&dir.path().join("c"))]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(stdout(&o).lines().filter(|l| l.contains(" = ")).count() == 4);
}
