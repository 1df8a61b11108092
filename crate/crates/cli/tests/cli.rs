use bendgraph::datagen::{cube, l_bracket, plate, MANIFEST_NAME};
use bendgraph::enrich::{read_bgr1, MF_WIDTH};
use bendgraph::step::write_step;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bendgraph");

fn cmd() -> Command {
    let mut c = Command::new(BIN);
    for (k, _) in std::env::vars() {
        if k.starts_with("BENDGRAPH_") {
            c.env_remove(k);
        }
    }
    c.env("RUST_LOG", "info");
    c
}

fn run(c: &mut Command) -> Output {
    c.output().expect("spawn bendgraph")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn resolved(o: &Output) -> Value {
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().find_map(|l| l.split_once("resolved config: ").map(|(_, r)| r)).expect("resolved config logged");
    serde_json::from_str(line).unwrap()
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, bytes).unwrap();
    p
}

#[test]
fn help_lists_every_flag() {
    let cases: &[(&str, &[&str])] = &[
        ("inspect", &["--config"]),
        ("recognize", &["--out", "--config"]),
        ("graph", &["--grid", "--no-mf", "--out"]),
        ("gen", &["--n", "--seed", "--profile", "--out"]),
        (
            "train",
            &[
                "--manifest", "--task", "--no-mf", "--seed", "--out", "--history", "--grid", "--conv1", "--max-epochs",
                "--patience", "--lr", "--batch-size", "--paired",
            ],
        ),
        ("eval", &["--ckpt", "--manifest", "--split", "--predictions"]),
        ("validate", &["--manifest"]),
    ];
    for (sub, flags) in cases {
        let o = run(cmd().args([sub, "--help"]));
        assert!(o.status.success());
        let text = String::from_utf8_lossy(&o.stdout);
        for f in *flags {
            assert!(text.contains(f), "{sub} --help lacks {f}");
        }
    }
    let o = run(cmd().arg("--help"));
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["inspect", "recognize", "graph", "gen", "train", "eval", "validate"] {
        assert!(text.contains(sub));
    }
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = run(cmd().args(["inspect", "--bogus", "x.stp"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn inspect_reference_parts() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "plate.stp", &plate().unwrap().step);
    let v = stdout_json(&run(cmd().arg("inspect").arg(&p)));
    assert_eq!(v["faces"], 6);
    assert_eq!(v["edges"], 12);
    assert_eq!(v["vertices"], 8);
    assert_eq!(v["euler"]["chi"], 2);
    assert_eq!(v["euler"]["genus"], 0);
    assert_eq!(v["manifold"], true);

    let p = write(dir.path(), "l.stp", &l_bracket().unwrap().step);
    let v = stdout_json(&run(cmd().arg("inspect").arg(&p)));
    assert_eq!(v["faces"], 10);
    assert_eq!(v["edges"], 24);
    assert_eq!(v["vertices"], 16);
    assert_eq!(v["surface_kinds"]["cylinder"], 2);
    assert_eq!(v["surface_kinds"]["plane"], 8);
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.stp", b"not a step file");
    let o = run(cmd().arg("inspect").arg(&p));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error"));

    let o = run(cmd().args(["graph", "/nonexistent/part.stp"]));
    assert_eq!(o.status.code(), Some(2));

    let bytes = write_step(&cube().unwrap()).unwrap();
    let p = write(dir.path(), "cube.stp", &bytes);
    let o = run(cmd().arg("recognize").arg(&p));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn recognize_l_bracket() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "l.stp", &l_bracket().unwrap().step);
    let v = stdout_json(&run(cmd().arg("recognize").arg(&p)));
    assert_eq!(v["bends"].as_array().unwrap().len(), 1);
    assert!((v["thickness"].as_f64().unwrap() - 2.0).abs() < 1e-6);
}

#[test]
fn graph_export_and_no_mf() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "l.stp", &l_bracket().unwrap().step);
    let out = dir.path().join("l.bgr");
    let v = stdout_json(&run(cmd().arg("graph").arg(&p).args(["--grid", "5", "--out"]).arg(&out)));
    assert_eq!(v["meta"]["nodes"], 10);
    assert_eq!(v["meta"]["mf_width"], MF_WIDTH);
    assert_eq!(v["meta"]["node_width_post_encode"], 92);
    assert_eq!(v["meta"]["grid_shape"], serde_json::json!([7, 5, 5]));
    let g = read_bgr1(&mut std::fs::read(&out).unwrap().as_slice()).unwrap();
    assert_eq!(g.grid, 5);
    assert!(g.nodes.iter().any(|n| n.mf.iter().any(|&x| x != 0.0)));

    let o = run(cmd().arg("graph").arg(&p).args(["--grid", "5", "--no-mf", "--out"]).arg(&out));
    let v = stdout_json(&o);
    assert_eq!(v["meta"]["with_mf"], false);
    let g = read_bgr1(&mut std::fs::read(&out).unwrap().as_slice()).unwrap();
    assert!(g.nodes.iter().all(|n| n.mf.len() == MF_WIDTH && n.mf.iter().all(|&x| x == 0.0)));

    let v = stdout_json(&run(cmd().arg("graph").arg(&p).args(["--grid", "3"])));
    assert_eq!(v["graph"]["nodes"].as_array().unwrap().len(), 10);
}

#[test]
fn precedence_cli_env_file_default() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "plate.stp", &plate().unwrap().step);
    let cfg = write(dir.path(), "run.cfg", b"# graph settings\ngrid = 3\nno-mf = true\nout = ignored.json\n");
    let out = dir.path().join("g.json");

    let o = run(cmd().arg("--config").arg(&cfg).arg("graph").arg(&p).env("BENDGRAPH_GRID", "4").arg("--out").arg(&out));
    let v = stdout_json(&o);
    let r = resolved(&o);
    assert_eq!(r["command"], "graph");
    assert_eq!(r["settings"]["grid"]["value"], "4");
    assert_eq!(r["settings"]["grid"]["source"], "env");
    assert_eq!(r["settings"]["no_mf"]["source"], "file");
    assert_eq!(r["settings"]["out"]["source"], "cli");
    assert_eq!(v["meta"]["grid"], 4);
    assert_eq!(v["meta"]["with_mf"], false);

    let o = run(cmd().arg("graph").arg(&p).env("BENDGRAPH_CONFIG", &cfg).env("BENDGRAPH_GRID", "4").args(["--grid", "2", "--out"]).arg(&out));
    let v = stdout_json(&o);
    let r = resolved(&o);
    assert_eq!(r["settings"]["grid"]["source"], "cli");
    assert_eq!(v["meta"]["grid"], 2);

    let o = run(cmd().arg("graph").arg(&p).arg("--out").arg(&out));
    let r = resolved(&o);
    assert_eq!(r["settings"]["grid"]["source"], "default");
    assert_eq!(r["settings"]["grid"]["value"], "10");
}

#[test]
fn bad_config_value_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "plate.stp", &plate().unwrap().step);
    let o = run(cmd().arg("graph").arg(&p).env("BENDGRAPH_GRID", "many"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    stdout_json(&run(cmd().args(["gen", "--n", "12", "--seed", "5", "--out"]).arg(&corpus)));
    let manifest = corpus.join(MANIFEST_NAME);
    let v = stdout_json(&run(cmd().arg("validate").arg("--manifest").arg(&manifest)));
    assert_eq!(v["parts"], 12);
    assert_eq!(v["passed"], 12);

    // Swap one part's geometry for a flat plate: its ground truth no longer matches.
    let first = std::fs::read_to_string(&manifest).unwrap();
    let rec: Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    std::fs::write(corpus.join(rec["step_path"].as_str().unwrap()), plate().unwrap().step).unwrap();
    let o = run(cmd().arg("validate").arg("--manifest").arg(&manifest));
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], 11);

    let empty = write(dir.path(), "empty.jsonl", b"");
    let o = run(cmd().arg("validate").arg("--manifest").arg(&empty));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_train_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    let v = stdout_json(&run(cmd().args(["gen", "--n", "20", "--seed", "9", "--profile", "plain,holes", "--out"]).arg(&corpus)));
    assert_eq!(v["n"], 20);
    assert_eq!(v["splits"]["train"], 16);
    let manifest = corpus.join(MANIFEST_NAME);
    let ckpt = dir.path().join("m.bgck");
    let o = run(cmd()
        .args(["train", "--grid", "3", "--conv1", "4", "--max-epochs", "2", "--seed", "1", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(&ckpt));
    let v = stdout_json(&o);
    assert_eq!(v["report"]["epochs_run"], 2);
    let hist = std::fs::read_to_string(format!("{}.history.csv", ckpt.display())).unwrap();
    assert_eq!(hist.lines().count(), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("resolved training config: "));

    let preds = dir.path().join("p.csv");
    let o = run(cmd().arg("eval").arg("--ckpt").arg(&ckpt).arg("--manifest").arg(&manifest).arg("--predictions").arg(&preds));
    let e = stdout_json(&o);
    assert_eq!(e["split"], "test");
    // Test metrics from eval equal those reported at the end of training.
    assert_eq!(e["metrics"], v["report"]["test"]);
    assert_eq!(e["baseline"]["metrics"], v["report"]["baseline_test"]);

    let rows: Vec<(f64, f64)> = std::fs::read_to_string(&preds)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[1], f[2])
        })
        .collect();
    assert_eq!(rows.len(), 2);
    let mae = rows.iter().map(|(y, p)| (y - p).abs()).sum::<f64>() / rows.len() as f64;
    assert!((mae - e["metrics"]["mae"].as_f64().unwrap()).abs() < 1e-9);

    let o = run(cmd().arg("eval").arg("--ckpt").arg(&preds).arg("--manifest").arg(&manifest));
    assert_eq!(o.status.code(), Some(2));
}
