//! Adam, the epoch loop with early stopping, and end-to-end experiments.

use super::checkpoint::Checkpoint;
use super::data::{prepare, Batch, LabeledGraph, Normalizer, Sample};
use super::metrics::{baseline, classification_metrics, regression_metrics, Baseline, Metrics};
use super::model::Model;
use super::{ModelConfig, NnError, Task, TrainConfig};
use crate::datagen::{derive_seed, Split};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const SHUFFLE_STREAM: u64 = 0x5F1;
const EVAL_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    #[serde(skip)]
    m: Vec<f64>,
    #[serde(skip)]
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_loss));
        }
        s
    }

    pub fn last_epoch(&self) -> usize {
        self.epochs.last().map_or(0, |r| r.epoch)
    }
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: History,
    /// Fully resolved configuration, as logged at the start of training.
    pub resolved: serde_json::Value,
}

pub struct Trainer {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub normalizer: Normalizer,
}

fn batches<'a>(samples: &'a [Sample], order: &[usize], size: usize) -> impl Iterator<Item = Vec<&'a Sample>> + 'a {
    let order = order.to_vec();
    (0..order.len().div_ceil(size)).map(move |k| order[k * size..((k + 1) * size).min(order.len())].iter().map(|&i| &samples[i]).collect())
}

/// Mean per-sample loss over `samples`.
pub fn dataset_loss(model: &Model, samples: &[Sample], loss: super::Loss) -> Result<f64, NnError> {
    if samples.is_empty() {
        return Err(NnError::EmptySplit("validation"));
    }
    let order: Vec<usize> = (0..samples.len()).collect();
    let mut total = 0.0;
    for chunk in batches(samples, &order, EVAL_BATCH) {
        let b = Batch::new(&chunk)?;
        total += model.loss(&b, loss)? * chunk.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

/// Raw model outputs, `outputs()` values per sample.
pub fn raw_outputs(model: &Model, samples: &[Sample]) -> Result<Vec<f64>, NnError> {
    let order: Vec<usize> = (0..samples.len()).collect();
    let mut out = Vec::new();
    for chunk in batches(samples, &order, EVAL_BATCH) {
        out.extend(model.predict(&Batch::new(&chunk)?)?);
    }
    Ok(out)
}

impl Trainer {
    pub fn new(model: ModelConfig, train: TrainConfig, normalizer: Normalizer) -> Self {
        Trainer { model, train, normalizer }
    }

    pub fn resolved_config(&self) -> serde_json::Value {
        serde_json::json!({ "model": self.model, "train": self.train, "optimizer": {
            "kind": "adam", "lr": self.train.learning_rate, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8,
            "batch_size": self.train.batch_size,
        }})
    }

    /// Trains with validation loss measured on `val`.
    pub fn fit(&self, train: &[Sample], val: &[Sample]) -> Result<TrainOutcome, NnError> {
        if val.is_empty() {
            return Err(NnError::EmptySplit("validation"));
        }
        let loss = self.train.loss;
        self.fit_with(train, |_, m| dataset_loss(m, val, loss))
    }

    /// Trains with a caller-supplied validation loss `validator(epoch, model)`.
    /// Keeps the parameters of the best validation epoch and stops after
    /// `patience` epochs without strict improvement.
    pub fn fit_with<F>(&self, train: &[Sample], mut validator: F) -> Result<TrainOutcome, NnError>
    where
        F: FnMut(usize, &Model) -> Result<f64, NnError>,
    {
        self.train.validate()?;
        if train.is_empty() {
            return Err(NnError::EmptySplit("train"));
        }
        let resolved = self.resolved_config();
        log::info!("resolved training config: {resolved}");
        let mut model = Model::new(self.model.clone())?;
        let mut adam = Adam::new(model.params.len(), self.train.learning_rate);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.train.seed, SHUFFLE_STREAM));
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut history = History { epochs: Vec::new(), best_epoch: 0, best_val_loss: f64::INFINITY, stopped_early: false };
        let mut best = model.params.clone();
        let mut stale = 0;
        for epoch in 1..=self.train.max_epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for (k, chunk) in batches(train, &order, self.train.batch_size).enumerate() {
                let b = Batch::new(&chunk)?;
                let (l, g) = model.loss_and_grads(&b, self.train.loss).map_err(|e| match e {
                    NnError::NonFinite { loss, .. } => NnError::NonFinite { loss, epoch, batch: k },
                    e => e,
                })?;
                if g.iter().any(|x| !x.is_finite()) {
                    return Err(NnError::NonFinite { loss: f64::NAN, epoch, batch: k });
                }
                adam.step(&mut model.params, &g);
                total += l * chunk.len() as f64;
            }
            let train_loss = total / train.len() as f64;
            let val_loss = validator(epoch, &model)?;
            log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
            history.epochs.push(EpochRecord { epoch, train_loss, val_loss });
            if val_loss < history.best_val_loss {
                history.best_val_loss = val_loss;
                history.best_epoch = epoch;
                best.copy_from_slice(&model.params);
                stale = 0;
            } else {
                stale += 1;
                if stale >= self.train.patience {
                    history.stopped_early = true;
                    break;
                }
            }
        }
        model.params = best;
        let checkpoint = Checkpoint {
            model,
            normalizer: self.normalizer.clone(),
            best_val_loss: history.best_val_loss,
            epoch: history.best_epoch,
        };
        Ok(TrainOutcome { checkpoint, history, resolved })
    }
}

/// Predictions in label units: seconds for time, class index for collision.
pub fn predict_labels(ckpt: &Checkpoint, samples: &[Sample]) -> Result<Vec<f64>, NnError> {
    let out = raw_outputs(&ckpt.model, samples)?;
    Ok(match ckpt.model.config.task {
        Task::Time => out.iter().map(|&y| ckpt.normalizer.denormalize_label(y)).collect(),
        Task::Collision => out.chunks_exact(2).map(|r| if r[1] > r[0] { 1.0 } else { 0.0 }).collect(),
    })
}

pub fn evaluate(ckpt: &Checkpoint, samples: &[Sample]) -> Result<Metrics, NnError> {
    if samples.is_empty() {
        return Err(NnError::EmptySplit("evaluation"));
    }
    let pred = predict_labels(ckpt, samples)?;
    let truth: Vec<f64> = samples.iter().map(|s| s.label).collect();
    match ckpt.model.config.task {
        Task::Time => regression_metrics(&pred, &truth),
        Task::Collision => classification_metrics(
            &pred.iter().map(|&p| p as usize).collect::<Vec<_>>(),
            &truth.iter().map(|&t| t as usize).collect::<Vec<_>>(),
        ),
    }
}

/// Metrics of the constant train-mean predictor (majority class for collision).
pub fn baseline_metrics(base: &Baseline, task: Task, samples: &[Sample]) -> Result<Metrics, NnError> {
    let truth: Vec<f64> = samples.iter().map(|s| s.label).collect();
    match task {
        Task::Time => regression_metrics(&vec![base.mean; truth.len()], &truth),
        Task::Collision => {
            let c = usize::from(base.mean > 0.5);
            classification_metrics(&vec![c; truth.len()], &truth.iter().map(|&t| t as usize).collect::<Vec<_>>())
        }
    }
}

/// Graphs of one split, prepared with `norm`.
pub fn prepare_split(graphs: &[LabeledGraph], split: Split, norm: &Normalizer, task: Task) -> Result<Vec<Sample>, NnError> {
    graphs
        .iter()
        .filter(|g| g.split == split)
        .map(|g| {
            let mut s = prepare(&g.graph, g.label, norm, task)?;
            s.id = g.id;
            Ok(s)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub task: Task,
    pub with_mf: bool,
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub test: Metrics,
    pub baseline: Baseline,
    pub baseline_test: Metrics,
}

fn strip_mf(graphs: &[LabeledGraph]) -> Vec<LabeledGraph> {
    graphs.iter().map(|g| LabeledGraph { graph: g.graph.clone().without_mf(), ..g.clone() }).collect()
}

/// One split prepared the way `ckpt` was trained (normalizer, MF switch).
pub fn samples_for(ckpt: &Checkpoint, graphs: &[LabeledGraph], split: Split) -> Result<Vec<Sample>, NnError> {
    let cfg = &ckpt.model.config;
    if let Some(g) = graphs.first() {
        if g.graph.grid != cfg.grid {
            return Err(NnError::Width { what: "grid size", expected: cfg.grid, got: g.graph.grid });
        }
    }
    if cfg.use_mf {
        prepare_split(graphs, split, &ckpt.normalizer, cfg.task)
    } else {
        prepare_split(&strip_mf(graphs), split, &ckpt.normalizer, cfg.task)
    }
}

/// Fits normalization on the train split, trains, and scores the test split.
/// With `use_mf` off every MF vector is zeroed first.
pub fn run_experiment(
    graphs: &[LabeledGraph],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
) -> Result<(ExperimentReport, TrainOutcome), NnError> {
    let task = model_cfg.task;
    let with_mf = model_cfg.use_mf;
    let owned;
    let graphs = if with_mf {
        graphs
    } else {
        owned = strip_mf(graphs);
        &owned[..]
    };
    let norm = Normalizer::fit(graphs.iter().filter(|g| g.split == Split::Train), task);
    let train = prepare_split(graphs, Split::Train, &norm, task)?;
    let val = prepare_split(graphs, Split::Val, &norm, task)?;
    let test = prepare_split(graphs, Split::Test, &norm, task)?;
    if test.is_empty() {
        return Err(NnError::EmptySplit("test"));
    }
    let seed = train_cfg.seed;
    let outcome = Trainer::new(model_cfg, train_cfg, norm).fit(&train, &val)?;
    let base = baseline(&train.iter().map(|s| s.label).collect::<Vec<_>>())?;
    let report = ExperimentReport {
        task,
        with_mf,
        seed,
        epochs_run: outcome.history.last_epoch(),
        best_epoch: outcome.history.best_epoch,
        best_val_loss: outcome.history.best_val_loss,
        test: evaluate(&outcome.checkpoint, &test)?,
        baseline: base,
        baseline_test: baseline_metrics(&base, task, &test)?,
    };
    Ok((report, outcome))
}
