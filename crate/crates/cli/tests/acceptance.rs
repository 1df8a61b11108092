//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Built with `harness = false` so the lines
//! always reach the test log.
//!
//! Training criteria use a reduced encoder (G = 4, first conv width 8) and a
//! capped epoch budget so the suite finishes in minutes on a single core;
//! everything else runs at library defaults.

use bendgraph::brep::{euler_counts, resolve_solid, BrepSolid};
use bendgraph::datagen::{build_dataset, read_manifest, DatasetOptions, GroundTruth, Profile, Split, MANIFEST_NAME};
use bendgraph::enrich::{assemble_graph, read_bgr1, write_bgr1, GLOBAL_WIDTH, GRID_CHANNELS, MF_WIDTH};
use bendgraph::featrec::recognize;
use bendgraph::nn::{
    load_graphs, prepare_split, run_experiment, Batch, ExperimentReport, LabeledGraph, Loss, Model, ModelConfig,
    Normalizer, Sample, Task, TrainConfig, Trainer, GRAPH_EMBED, HEAD_INPUT, NODE_INPUT,
};
use bendgraph::step::{parse_step, write_step};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

const BIN: &str = env!("CARGO_BIN_EXE_bendgraph");
const CORPUS_SEED: u64 = 7;
const RECOGNIZER_SEED: u64 = 2026;
const TRAIN_SEEDS: [u64; 3] = [1, 2, 3];
const DESK_GRID: usize = 4;
const DESK_CONV1: usize = 8;
const TIME_EPOCHS: usize = 40;
const COLLISION_EPOCHS: usize = 30;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).env("RUST_LOG", "info").output().expect("spawn bendgraph")
}

fn logged(stderr: &[u8], tag: &str) -> Option<Value> {
    let text = String::from_utf8_lossy(stderr);
    let line = text.lines().find_map(|l| l.split_once(tag).map(|(_, r)| r.to_string()))?;
    serde_json::from_str(&line).ok()
}

fn resolve(bytes: &[u8]) -> Result<BrepSolid, String> {
    let model = parse_step(bytes).map_err(|e| e.to_string())?;
    resolve_solid(&model).map_err(|e| e.to_string())
}

fn topology(s: &BrepSolid) -> Vec<(String, bool, Vec<(usize, bool)>, Vec<Vec<(usize, bool)>>)> {
    let lp = |l: &bendgraph::brep::Loop| l.coedges.iter().map(|c| (c.edge, c.forward)).collect::<Vec<_>>();
    s.faces.iter().map(|f| (format!("{:?}", f.kind()), f.sense, lp(&f.outer), f.inners.iter().map(lp).collect())).collect()
}

// 1
fn recognizer_oracle(dir: &Path) -> Outcome {
    let out = dir.to_str().unwrap();
    let g = cli(&["gen", "--n", "500", "--seed", &RECOGNIZER_SEED.to_string(), "--profile", "all", "--out", out]);
    if !g.status.success() {
        return Err(format!("gen failed: {}", String::from_utf8_lossy(&g.stderr)));
    }
    let manifest = dir.join(MANIFEST_NAME);
    let v = cli(&["validate", "--manifest", manifest.to_str().unwrap()]);
    let report: Value = serde_json::from_slice(&v.stdout).map_err(|e| e.to_string())?;
    let profiles: std::collections::BTreeSet<String> = read_manifest(&manifest)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|r| {
            let gt: GroundTruth = serde_json::from_slice(&std::fs::read(dir.join(r.gt_path())).unwrap()).unwrap();
            gt.spec.profile.as_str().to_string()
        })
        .collect();
    check(
        v.status.success() && report["parts"] == 500 && report["passed"] == 500 && profiles.len() == Profile::ALL.len(),
        format!("500/500 parts, {} bends matched, profiles {profiles:?}", report["bends_matched"]),
        format!("exit {:?}, {} of {} parts passed, profiles {profiles:?}", v.status.code(), report["passed"], report["parts"]),
    )
}

// 2
fn round_trip_and_euler(dir: &Path) -> Outcome {
    let records = read_manifest(&dir.join(MANIFEST_NAME)).map_err(|e| e.to_string())?;
    let mut bad = Vec::new();
    for r in &records {
        let bytes = std::fs::read(dir.join(&r.step_path)).map_err(|e| e.to_string())?;
        let gt: GroundTruth = serde_json::from_slice(&std::fs::read(dir.join(r.gt_path())).unwrap()).unwrap();
        let a = resolve(&bytes)?;
        let b = resolve(&write_step(&a).map_err(|e| e.to_string())?)?;
        let (ca, cb) = (euler_counts(&a), euler_counts(&b));
        let genus_ok = ca.genus() == Some(gt.through_holes as i64);
        let counts_ok = (ca.vertices, ca.edges, ca.faces) == (gt.vertex_count, gt.edge_count, gt.face_count);
        if ca != cb || topology(&a) != topology(&b) || !genus_ok || !counts_ok {
            bad.push(r.id);
        }
    }
    check(
        bad.is_empty(),
        format!("{} parts round-trip with identical topology; V-E+F-R = 2-2h exact on all", records.len()),
        format!("{} failing parts, first ids {:?}", bad.len(), &bad[..bad.len().min(5)]),
    )
}

// 3
fn widths(dir: &Path) -> Outcome {
    let records = read_manifest(&dir.join(MANIFEST_NAME)).map_err(|e| e.to_string())?;
    let grid = bendgraph::enrich::DEFAULT_GRID;
    let model = Model::new(ModelConfig::new(Task::Time, grid, 0)).map_err(|e| e.to_string())?;
    let norm = Normalizer::identity();
    let (mut graphs, mut nodes) = (0, 0);
    for r in &records {
        let solid = resolve(&std::fs::read(dir.join(&r.step_path)).unwrap())?;
        let report = recognize(&solid).map_err(|e| e.to_string())?;
        let g = assemble_graph(&solid, &report, grid, true).map_err(|e| e.to_string())?;
        let mut bytes = Vec::new();
        write_bgr1(&g, &mut bytes).map_err(|e| e.to_string())?;
        let back = read_bgr1(&mut bytes.as_slice()).map_err(|e| e.to_string())?;
        let json = g.to_json();
        let exported_ok = back.nodes.len() == g.nodes.len()
            && back.globals.len() == GLOBAL_WIDTH
            && json["grid_shape"] == serde_json::json!([GRID_CHANNELS, grid, grid])
            && back.nodes.iter().all(|n| n.mf.len() == MF_WIDTH && n.uv_grid.data.len() == GRID_CHANNELS * grid * grid);
        let s = bendgraph::nn::prepare(&g, r.time_s, &norm, Task::Time).map_err(|e| e.to_string())?;
        let batch = Batch::new(&[&s]).map_err(|e| e.to_string())?;
        let (out, cache) = model.forward(&batch).map_err(|e| e.to_string())?;
        let forward_ok = cache.node_input_width == NODE_INPUT
            && cache.node_inputs().len() == g.nodes.len() * NODE_INPUT
            && cache.graph_embedding.len() == GRAPH_EMBED
            && cache.head_input_width == HEAD_INPUT
            && out.len() == 1;
        if !exported_ok || !forward_ok {
            return Err(format!("part {}: export ok {exported_ok}, forward ok {forward_ok}", r.id));
        }
        graphs += 1;
        nodes += g.nodes.len();
    }
    Ok(format!("{graphs} graphs / {nodes} nodes: MF {MF_WIDTH}, node input {NODE_INPUT}, graph {GRAPH_EMBED}, globals {GLOBAL_WIDTH}"))
}

// 4
fn gradients(dir: &Path) -> Outcome {
    let t0 = Instant::now();
    let grid = 3;
    let records = read_manifest(&dir.join(MANIFEST_NAME)).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (task, loss) in [(Task::Time, Loss::Mse), (Task::Collision, Loss::CrossEntropy)] {
        let mut picked = Vec::new();
        for r in records.iter().filter(|r| r.split == Split::Train).take(3) {
            let solid = resolve(&std::fs::read(dir.join(&r.step_path)).unwrap())?;
            let report = recognize(&solid).map_err(|e| e.to_string())?;
            let graph = assemble_graph(&solid, &report, grid, true).map_err(|e| e.to_string())?;
            picked.push(LabeledGraph { id: r.id, split: r.split, graph, label: LabeledGraph::label_of(r, task) });
        }
        let norm = Normalizer::fit(&picked, task);
        let samples: Vec<Sample> = prepare_split(&picked, Split::Train, &norm, task).map_err(|e| e.to_string())?;
        let batch = Batch::new(&samples.iter().collect::<Vec<_>>()).map_err(|e| e.to_string())?;
        let mut model = Model::new(ModelConfig::new(task, grid, 17)).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        // nonzero biases so every SiLU operates away from the origin
        for t in model.tensors.clone() {
            if t.shape.len() == 1 {
                for x in &mut model.params[t.range()] {
                    *x = rng.gen_range(-0.2..0.2);
                }
            }
        }
        let (_, grad) = model.loss_and_grads(&batch, loss).map_err(|e| e.to_string())?;
        let kinds = ["enc.conv1", "enc.conv2", "mp0.self", "mp0.nbr", "mp1.self", "mp1.nbr", "mp.b", "pool", "head"];
        for kind in kinds {
            let idx: Vec<usize> = model
                .tensors
                .iter()
                .filter(|t| if kind == "mp.b" { t.name.starts_with("mp") && t.name.ends_with(".b") } else { t.name.starts_with(kind) })
                .flat_map(|t| t.range())
                .collect();
            for _ in 0..50 {
                let i = idx[rng.gen_range(0..idx.len())];
                let h = 1e-5 * model.params[i].abs().max(1.0);
                let mut m = model.clone();
                m.params[i] = model.params[i] + h;
                let up = m.loss(&batch, loss).map_err(|e| e.to_string())?;
                m.params[i] = model.params[i] - h;
                let down = m.loss(&batch, loss).map_err(|e| e.to_string())?;
                let fd = (up - down) / (2.0 * h);
                let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-7);
                worst = worst.max(rel);
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    check(
        worst <= 1e-4 && secs < 60.0,
        format!("9 layer kinds x 50 params x 2 losses, worst rel err {worst:.2e}, {secs:.1} s"),
        format!("worst rel err {worst:.2e}, {secs:.1} s"),
    )
}

fn desk(task: Task, seed: u64, use_mf: bool) -> (ModelConfig, TrainConfig) {
    let mut mc = ModelConfig::new(task, DESK_GRID, seed);
    mc.conv_channels[0] = DESK_CONV1;
    mc.use_mf = use_mf;
    let mut tc = TrainConfig::new(task, seed);
    tc.max_epochs = if task == Task::Time { TIME_EPOCHS } else { COLLISION_EPOCHS };
    (mc, tc)
}

fn runs(graphs: &[LabeledGraph], task: Task, use_mf: bool) -> Result<Vec<ExperimentReport>, String> {
    TRAIN_SEEDS
        .iter()
        .map(|&s| {
            let (mc, tc) = desk(task, s, use_mf);
            let t0 = Instant::now();
            let (r, _) = run_experiment(graphs, mc, tc).map_err(|e| e.to_string())?;
            eprintln!("  {:?} mf={use_mf} seed {s}: {:?} in {:.0} s", task, r.test, t0.elapsed().as_secs_f64());
            Ok(r)
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn mae(r: &ExperimentReport) -> f64 {
    r.test.mae.unwrap_or(f64::NAN)
}

// 9
fn protocol(graphs: &[LabeledGraph], manifest: &Path, ckpt: &Path) -> Outcome {
    let picked: Vec<LabeledGraph> = graphs.iter().filter(|g| g.split == Split::Train).take(4).cloned().collect();
    let norm = Normalizer::fit(&picked, Task::Time);
    let samples = prepare_split(&picked, Split::Train, &norm, Task::Time).map_err(|e| e.to_string())?;
    let mut tc = TrainConfig::new(Task::Time, 5);
    tc.max_epochs = 400;
    let trainer = Trainer::new(ModelConfig::new(Task::Time, DESK_GRID, 5), tc, norm);
    // validation loss rises every epoch: epoch 1 stays best
    let out = trainer.fit_with(&samples, |epoch, _| Ok(1.0 + epoch as f64)).map_err(|e| e.to_string())?;
    let h = &out.history;
    let stop_ok = h.stopped_early && h.best_epoch == 1 && h.last_epoch() == 51;

    let o = cli(&[
        "train", "--manifest", manifest.to_str().unwrap(), "--out", ckpt.to_str().unwrap(),
        "--grid", "3", "--conv1", "4", "--max-epochs", "1",
    ]);
    let cfg = logged(&o.stderr, "resolved training config: ").ok_or("no resolved training config logged")?;
    let run = logged(&o.stderr, "resolved config: ").ok_or("no resolved run config logged")?;
    let opt = &cfg["optimizer"];
    let logged_ok = o.status.success()
        && opt["lr"] == 1e-4
        && opt["batch_size"] == 32
        && cfg["train"]["patience"] == 50
        && run["settings"]["lr"]["source"] == "default"
        && run["settings"]["batch_size"]["source"] == "default";
    check(
        stop_ok && logged_ok,
        format!("stopped after epoch {} (best {}); logged lr {} batch {}", h.last_epoch(), h.best_epoch, opt["lr"], opt["batch_size"]),
        format!("stop ok {stop_ok} (last {}, best {}), logged ok {logged_ok}: {opt}", h.last_epoch(), h.best_epoch),
    )
}

fn main() -> ExitCode {
    // libtest-style flags (e.g. --nocapture) are accepted and ignored
    let t0 = Instant::now();
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();

    let small = tmp.path().join("recognizer");
    results.push((1, "recognizer oracle", recognizer_oracle(&small)));
    results.push((2, "round trip and Euler", round_trip_and_euler(&small)));
    results.push((3, "dimensional contract", widths(&small)));
    results.push((4, "gradient check", gradients(&small)));

    let corpus = tmp.path().join("corpus");
    let profiles = Profile::ALL.to_vec();
    let built = build_dataset(&DatasetOptions { n: 1000, seed: CORPUS_SEED, profiles, out_dir: corpus.clone() });
    let manifest = corpus.join(MANIFEST_NAME);
    let loaded = built
        .map_err(|e| e.to_string())
        .and_then(|_| load_graphs(&manifest, DESK_GRID, true, Task::Time).map_err(|e| e.to_string()))
        .and_then(|t| load_graphs(&manifest, DESK_GRID, true, Task::Collision).map(|c| (t, c)).map_err(|e| e.to_string()));
    let (time, coll) = match loaded {
        Ok(v) => v,
        Err(e) => {
            println!("corpus generation failed: {e}");
            return ExitCode::FAILURE;
        }
    };

    let mf = runs(&time, Task::Time, true);
    let c5 = mf.as_ref().map_err(Clone::clone).and_then(|rs| {
        let m = mean(rs.iter().map(mae));
        let b = mean(rs.iter().map(|r| r.baseline_test.mae.unwrap_or(f64::NAN)));
        check(m <= 0.7 * b, format!("mean MAE {m:.3} s vs baseline {b:.3} s (ratio {:.3})", m / b), format!("mean MAE {m:.3} vs baseline {b:.3} (ratio {:.3})", m / b))
    });
    results.push((5, "learnability, regression", c5));

    let cls = runs(&coll, Task::Collision, true);
    let c6 = cls.and_then(|rs| {
        let acc = mean(rs.iter().map(|r| r.test.accuracy.unwrap_or(f64::NAN)));
        let base = mean(rs.iter().map(|r| r.baseline_test.accuracy.unwrap_or(f64::NAN)));
        // Metrics report accuracy in percent
        check(acc >= 85.0, format!("mean accuracy {acc:.1}% (majority baseline {base:.1}%)"), format!("mean accuracy {acc:.1}%"))
    });
    results.push((6, "learnability, classification", c6));

    let plain = runs(&time, Task::Time, false);
    let c7 = match (&mf, &plain) {
        (Ok(a), Ok(b)) => {
            let (ma, mb) = (mean(a.iter().map(mae)), mean(b.iter().map(mae)));
            check(ma < mb, format!("MAE with MF {ma:.3} s < without {mb:.3} s"), format!("MAE with MF {ma:.3} s >= without {mb:.3} s"))
        }
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    results.push((7, "MF enrichment direction", c7));

    let again = runs(&time, Task::Time, true);
    let c8 = match (&mf, &again) {
        (Ok(a), Ok(b)) => {
            let bits = |r: &ExperimentReport| {
                [r.test.rmse, r.test.mae, r.test.mape, Some(r.best_val_loss)].map(|x| x.map(f64::to_bits))
            };
            let same = a.iter().zip(b).all(|(x, y)| bits(x) == bits(y) && x.epochs_run == y.epochs_run);
            check(same, "3 reruns bit-identical".into(), "rerun metrics differ".into())
        }
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    results.push((8, "determinism", c8));

    results.push((9, "training protocol", protocol(&time, &manifest, &tmp.path().join("p.bgck"))));

    let mut failed = 0;
    for (n, name, r) in &results {
        match r {
            Ok(msg) => println!("criterion {n} ({name}): PASS: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL: {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {:.0} s", results.len() - failed, t0.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
