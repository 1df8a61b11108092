use bendgraph::datagen::{l_bracket, plate_with_hole, sample_part, Profile};
use bendgraph::enrich::{assemble_graph, EnrichedGraph, UvGrid, MF_WIDTH};
use bendgraph::featrec::recognize;
use bendgraph::nn::{
    prepare, read_checkpoint, write_checkpoint, Batch, Checkpoint, Loss, Model, ModelConfig, Normalizer, Sample, Task,
    Trainer, TrainConfig, NODE_INPUT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: usize = 3;

fn graph_of(part: &bendgraph::datagen::Part) -> EnrichedGraph {
    let r = recognize(&part.solid).unwrap();
    assemble_graph(&part.solid, &r, GRID, true).unwrap()
}

fn graphs() -> Vec<EnrichedGraph> {
    let mut v = vec![graph_of(&l_bracket().unwrap()), graph_of(&plate_with_hole().unwrap())];
    v.push(graph_of(&sample_part(3, Profile::Corners, None).unwrap()));
    v
}

fn samples(task: Task, labels: &[f64]) -> Vec<Sample> {
    let gs = graphs();
    let norm = Normalizer::identity();
    // coordinates in decimetres keep activations moderate without fitted statistics
    let norm = Normalizer { xyz_std: [100.0; 3], mf_std: [10.0; MF_WIDTH], glob_std: [1e4, 1e4, 1e6], ..norm };
    gs.iter().zip(labels).map(|(g, &y)| prepare(g, y, &norm, task).unwrap()).collect()
}

fn batch(s: &[Sample]) -> Batch {
    Batch::new(&s.iter().collect::<Vec<_>>()).unwrap()
}

fn perturbed_model(task: Task, seed: u64) -> Model {
    let mut m = Model::new(ModelConfig::new(task, GRID, seed)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB1A5);
    for t in m.tensors.clone() {
        if t.shape.len() == 1 {
            for x in &mut m.params[t.range()] {
                *x = rng.gen_range(-0.2..0.2);
            }
        }
    }
    m
}

fn fd_check(task: Task, loss: Loss, labels: &[f64]) {
    let s = samples(task, labels);
    let b = batch(&s);
    let model = perturbed_model(task, 11);
    let (_, grad) = model.loss_and_grads(&b, loss).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let kinds = ["enc.conv1", "enc.conv2", "mp0.self", "mp0.nbr", "mp1.self", "mp1.nbr", "mp", "pool", "head"];
    let mut worst = 0.0f64;
    for kind in kinds {
        let idx: Vec<usize> = model
            .tensors
            .iter()
            .filter(|t| if kind == "mp" { t.name.starts_with("mp") && t.name.ends_with(".b") } else { t.name.starts_with(kind) })
            .flat_map(|t| t.range())
            .collect();
        assert!(!idx.is_empty(), "{kind}");
        for _ in 0..50 {
            let i = idx[rng.gen_range(0..idx.len())];
            let h = 1e-5 * model.params[i].abs().max(1.0);
            let mut plus = model.clone();
            plus.params[i] += h;
            let mut minus = model.clone();
            minus.params[i] -= h;
            let fd = (plus.loss(&b, loss).unwrap() - minus.loss(&b, loss).unwrap()) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-7);
            worst = worst.max(rel);
            assert!(rel <= 1e-4, "{kind} param {i}: analytic {} vs fd {fd} (rel {rel:e})", grad[i]);
        }
    }
    eprintln!("{task:?}: worst relative error {worst:e}");
}

#[test]
fn gradients_match_finite_differences_regression() {
    fd_check(Task::Time, Loss::Mse, &[1.5, -0.5, 0.25]);
}

#[test]
fn gradients_match_finite_differences_classification() {
    fd_check(Task::Collision, Loss::CrossEntropy, &[1.0, 0.0, 1.0]);
}

#[test]
fn widths_through_the_forward_pass() {
    let s = samples(Task::Time, &[0.0, 0.0, 0.0]);
    let b = batch(&s);
    let m = Model::new(ModelConfig::new(Task::Time, GRID, 1)).unwrap();
    let (out, cache) = m.forward(&b).unwrap();
    assert_eq!(out.len(), 3);
    assert_eq!(cache.node_input_width, 92);
    assert_eq!(cache.node_inputs().len(), b.nodes * NODE_INPUT);
    assert_eq!(cache.graph_embedding.len(), 3 * 64);
    assert_eq!(cache.head_input_width, 67);
    let c = Model::new(ModelConfig::new(Task::Collision, GRID, 1)).unwrap();
    assert_eq!(c.forward(&b).unwrap().0.len(), 6);
    let mut bad = ModelConfig::new(Task::Time, GRID, 1);
    bad.conv_channels[1] = 32;
    assert!(Model::new(bad).is_err());
    let wrong_grid = Model::new(ModelConfig::new(Task::Time, GRID + 1, 1)).unwrap();
    assert!(wrong_grid.forward(&b).is_err());
}

#[test]
fn zero_head_regression_loss_is_bias_squared() {
    let s = samples(Task::Time, &[0.0, 0.0, 0.0]);
    let b = batch(&s);
    let mut m = perturbed_model(Task::Time, 5);
    m.tensor_values_mut("head2.w").unwrap().iter_mut().for_each(|x| *x = 0.0);
    m.tensor_values_mut("head2.b").unwrap()[0] = 0.7;
    let (l, _) = m.loss_and_grads(&b, Loss::Mse).unwrap();
    assert!((l - 0.49).abs() < 1e-15);
}

#[test]
fn symmetric_logits_give_ln2() {
    let s = samples(Task::Collision, &[0.0, 1.0, 1.0]);
    let b = batch(&s);
    let mut m = perturbed_model(Task::Collision, 5);
    m.tensor_values_mut("head2.w").unwrap().iter_mut().for_each(|x| *x = 0.0);
    m.tensor_values_mut("head2.b").unwrap().iter_mut().for_each(|x| *x = 0.0);
    let l = m.loss(&b, Loss::CrossEntropy).unwrap();
    assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
}

fn permuted(g: &EnrichedGraph, perm: &[usize]) -> EnrichedGraph {
    // node k of the result is node perm[k] of g
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    let mut out = g.clone();
    out.nodes = perm.iter().map(|&p| g.nodes[p].clone()).collect();
    out.edges = g.edges.iter().map(|e| [inv[e[0]], inv[e[1]]]).collect();
    out
}

#[test]
fn forward_is_permutation_invariant() {
    let g = graph_of(&sample_part(8, Profile::Holes, None).unwrap());
    let norm = Normalizer::identity();
    let m = perturbed_model(Task::Time, 2);
    let base = prepare(&g, 0.0, &norm, Task::Time).unwrap();
    let y0 = m.predict(&batch(&[base])).unwrap()[0];
    let n = g.nodes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let s = prepare(&permuted(&g, &perm), 0.0, &norm, Task::Time).unwrap();
        let y = m.predict(&batch(&[s])).unwrap()[0];
        assert!((y - y0).abs() <= 1e-6 * y0.abs().max(1.0), "{y} vs {y0}");
    }
}

#[test]
fn single_node_graph_and_empty_grid() {
    let mut g = graph_of(&l_bracket().unwrap());
    g.nodes.truncate(1);
    g.edges.clear();
    g.dihedrals.clear();
    g.nodes[0].uv_grid = UvGrid::zeros(GRID);
    let s = prepare(&g, 0.0, &Normalizer::identity(), Task::Time).unwrap();
    let m = perturbed_model(Task::Time, 3);
    let (out, cache) = m.forward(&batch(&[s.clone()])).unwrap();
    assert!(out[0].is_finite());
    let twice = m.forward(&batch(&[s])).unwrap().1;
    assert_eq!(cache.node_inputs(), twice.node_inputs());
    // bias pathway: an all-zero grid equals the encoder applied to zeros
    let emb = &cache.node_inputs()[..64];
    assert!(emb.iter().all(|x| x.is_finite()));
    let mut empty = g.clone();
    empty.nodes.clear();
    assert!(prepare(&empty, 0.0, &Normalizer::identity(), Task::Time).is_err());
}

#[test]
fn masked_samples_do_not_contribute() {
    let g = graph_of(&plate_with_hole().unwrap());
    let norm = Normalizer::identity();
    let m = perturbed_model(Task::Time, 3);
    let s = prepare(&g, 0.0, &norm, Task::Time).unwrap();
    let e0 = m.forward(&batch(&[s.clone()])).unwrap().1.node_inputs().to_vec();
    // garbage written under mask-0 samples of the prepared pixels changes nothing
    let mut s2 = s.clone();
    let p = GRID * GRID;
    for i in 0..s2.nodes {
        for k in 0..p {
            if s2.pool[i * p + k] == 0.0 && s2.pixels[(i * p + k) * 7 + 6] == 0.0 {
                s2.pixels[(i * p + k) * 7] = 1e3;
            }
        }
    }
    // masked pixels are still read by neighbouring convolution taps, so compare
    // only faces whose mask is all ones or all zeros
    let e1 = m.forward(&batch(&[s2])).unwrap().1.node_inputs().to_vec();
    for i in 0..s.nodes {
        let full = (0..p).all(|k| s.pixels[(i * p + k) * 7 + 6] == 1.0);
        if full {
            assert_eq!(&e0[i * NODE_INPUT..(i + 1) * NODE_INPUT], &e1[i * NODE_INPUT..(i + 1) * NODE_INPUT]);
        }
    }
}

#[test]
fn checkpoint_round_trip_is_bit_identical() {
    let s = samples(Task::Collision, &[1.0, 0.0, 1.0]);
    let b = batch(&s);
    let model = perturbed_model(Task::Collision, 21);
    let norm = Normalizer { label_mean: 1.25, xyz_std: [3.0, 1.0 / 3.0, 7.0], ..Normalizer::identity() };
    let ck = Checkpoint { model, normalizer: norm, best_val_loss: 0.1 + 0.2, epoch: 17 };
    let mut bytes = Vec::new();
    write_checkpoint(&ck, &mut bytes).unwrap();
    assert_eq!(&bytes[..4], b"BGCK");
    let back = read_checkpoint(bytes.as_slice()).unwrap();
    assert_eq!(back, ck);
    let a = ck.model.predict(&b).unwrap();
    let c = back.model.predict(&b).unwrap();
    assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), c.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    assert!(read_checkpoint(wrong.as_slice()).is_err());
}

#[test]
fn early_stopping_at_patience() {
    let s = samples(Task::Time, &[0.0, 1.0, 2.0]);
    let mut tc = TrainConfig::new(Task::Time, 1);
    tc.max_epochs = 500;
    let trainer = Trainer::new(ModelConfig::new(Task::Time, GRID, 1), tc, Normalizer::identity());
    let out = trainer.fit_with(&s, |epoch, _| Ok(epoch as f64)).unwrap();
    assert_eq!(out.history.last_epoch(), 51);
    assert_eq!(out.history.best_epoch, 1);
    assert!(out.history.stopped_early);
    assert_eq!(out.resolved["optimizer"]["lr"], 1e-4);
    assert_eq!(out.resolved["optimizer"]["batch_size"], 32);
    let csv = out.history.to_csv();
    assert!(csv.starts_with("epoch,train_loss,val_loss\n1,"));
    assert_eq!(csv.lines().count(), 52);
}

#[test]
fn constant_label_is_learned() {
    let s = samples(Task::Time, &[5.0, 5.0, 5.0]);
    let norm = Normalizer { label_mean: 5.0, label_std: 1.0, ..Normalizer::identity() };
    // targets are standardized by the normalizer used in prepare; redo with it
    let s: Vec<Sample> = s.into_iter().map(|mut x| { x.target = (x.label - norm.label_mean) / norm.label_std; x }).collect();
    let mut tc = TrainConfig::new(Task::Time, 2);
    tc.max_epochs = 200;
    let out = Trainer::new(ModelConfig::new(Task::Time, GRID, 2), tc, norm).fit(&s, &s).unwrap();
    let pred = bendgraph::nn::predict_labels(&out.checkpoint, &s).unwrap();
    let mae = pred.iter().map(|p| (p - 5.0).abs()).sum::<f64>() / 3.0;
    assert!(mae <= 1e-2, "mae {mae}");
}

#[test]
fn training_is_seed_deterministic() {
    let s = samples(Task::Time, &[0.3, 1.0, -2.0]);
    let run = || {
        let mut tc = TrainConfig::new(Task::Time, 9);
        tc.max_epochs = 5;
        tc.batch_size = 2;
        Trainer::new(ModelConfig::new(Task::Time, GRID, 9), tc, Normalizer::identity()).fit(&s, &s).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.history, b.history);
    assert_eq!(a.checkpoint.model.params, b.checkpoint.model.params);
}
