use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench")).args(args).output().unwrap()
}

#[test]
fn oracle_run_passes_its_gates_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (out, lanes) in [(&a, "1"), (&b, "4")] {
        let o = bench(&[
            "run", "--sizes", "2..8", "--per-size", "5", "--seed", "42", "--gateway", "oracle", "--feedback", "none",
            "--mode", "tree", "--lanes", lanes, "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = std::fs::read_to_string(&a).unwrap();
    assert_eq!(csv.lines().count(), 36);
    assert!(csv.starts_with("task_id,n_boxes,condition,attempt_1_success"));
    assert_eq!(csv, std::fs::read_to_string(&b).unwrap());
}

#[test]
fn corrupting_with_feedback_passes_monotone_gate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = bench(&[
        "run", "--gateway", "corrupting:3", "--feedback", "scripted", "--sizes", "2..4", "--per-size", "3",
        "--seed", "9", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("PASS with feedback >= without"));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.contains("with_feedback")));
}

#[test]
fn tasks_emit_matches_frozen_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tasks.json");
    let o = bench(&["tasks", "--emit", path.to_str().unwrap()]);
    assert!(o.status.success());
    let emitted: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let frozen: serde_json::Value =
        serde_json::from_str(include_str!("../../core/fixtures/tasks_seed42.json")).unwrap();
    assert_eq!(emitted, frozen);

    // and a run can read them back
    let o = bench(&["run", "--tasks", path.to_str().unwrap(), "--mode", "script"]);
    assert!(o.status.success());
}

#[test]
fn coffee_and_sensitivity() {
    let o = bench(&["coffee", "--mode", "fsm"]);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("12 "));
    assert!(out.contains("failure=0 machine_on=true mug_inserted=true cabinet_door_closed=true cover_closed=true"));

    let o = bench(&["sensitivity", "--gateway", "oracle"]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["pairs"].as_array().unwrap().len(), 4);
    assert!(report["pairs"].as_array().unwrap().iter().all(|p| p["equal"] == true));
}

#[test]
fn skill_conversion() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo.csv");
    let mut csv = String::from("t,y1,y2\n");
    for k in 0..60 {
        let t = k as f64 / 59.0;
        csv.push_str(&format!("{t},{},{}\n", 0.5 * t * t, 0.2 * (3.0 * t).sin()));
    }
    std::fs::write(&demo, csv).unwrap();
    let lib = dir.path().join("lib.json");
    std::fs::write(&lib, nlrobot_core::ActionLibrary::builtin_default().to_json_string()).unwrap();
    let model = dir.path().join("model.json");
    let lib_out = dir.path().join("lib2.json");
    let o = bench(&[
        "skill", "--demo", demo.to_str().unwrap(), "--description", "wipe the table", "--n-basis", "20", "--out",
        model.to_str().unwrap(), "--library", lib.to_str().unwrap(), "--library-out", lib_out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m["weights"].as_array().unwrap().len(), 2);
    let lib2 = nlrobot_core::ActionLibrary::load(&lib_out).unwrap();
    assert!(lib2.contains("wipe_the_table"));
}

#[test]
fn bad_arguments_exit_nonzero() {
    assert_eq!(bench(&["run", "--gateway", "nonsense"]).status.code(), Some(2));
    assert_eq!(bench(&["run", "--tasks", "/does/not/exist.json"]).status.code(), Some(2));
}
