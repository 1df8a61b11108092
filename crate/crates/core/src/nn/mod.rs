//! Graph network over enriched face graphs: a masked-pooling CNN surface
//! encoder, mean-aggregation message passing, mean/max graph pooling and a
//! three-layer head. Everything is f64 with hand-written reverse mode.

mod checkpoint;
mod data;
mod linalg;
mod metrics;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, BGCK_MAGIC, CHECKPOINT_VERSION};
pub use data::{load_graphs, prepare, Batch, LabeledGraph, Normalizer, Sample};
pub use metrics::{baseline, regression_metrics, classification_metrics, Baseline, Metrics, MAPE_EPS};
pub use model::{silu, silu_grad, Cache, Model, Tensor};
pub use train::{
    baseline_metrics, dataset_loss, evaluate, predict_labels, prepare_split, samples_for, raw_outputs, run_experiment, Adam, EpochRecord,
    ExperimentReport, History, TrainOutcome, Trainer,
};

use crate::brep::BrepError;
use crate::datagen::DatagenError;
use crate::featrec::FeatrecError;
use crate::step::StepError;
use crate::enrich::{EnrichError, GLOBAL_WIDTH, GRID_CHANNELS, MF_WIDTH};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Width of the per-face surface embedding.
pub const SURFACE_EMBED: usize = 64;
/// Width of the node input vector (surface embedding + MF slots).
pub const NODE_INPUT: usize = SURFACE_EMBED + MF_WIDTH;
/// Width of the pooled graph embedding.
pub const GRAPH_EMBED: usize = 64;
/// Width of the head input (graph embedding + globals).
pub const HEAD_INPUT: usize = GRAPH_EMBED + GLOBAL_WIDTH;

#[derive(Debug, Error)]
pub enum NnError {
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Brep(#[from] BrepError),
    #[error(transparent)]
    Featrec(#[from] FeatrecError),
    #[error(transparent)]
    Enrich(#[from] EnrichError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("width mismatch in {what}: expected {expected}, got {got}")]
    Width { what: &'static str, expected: usize, got: usize },
    #[error("empty graph")]
    EmptyGraph,
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFinite { loss: f64, epoch: usize, batch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("sample {0} has no label")]
    MissingLabel(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Regression on bending time in seconds.
    Time,
    /// Binary tool-collision classification.
    Collision,
}

impl Task {
    pub fn outputs(self) -> usize {
        match self {
            Task::Time => 1,
            Task::Collision => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Time => "time",
            Task::Collision => "collision",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "time" => Ok(Task::Time),
            "collision" => Ok(Task::Collision),
            o => Err(format!("unknown task {o:?} (time|collision)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub grid: usize,
    /// Convolution widths after the 7 input channels.
    pub conv_channels: [usize; 2],
    pub mp_layers: usize,
    pub hidden: usize,
    /// Hidden widths of the head; the head has `head.len() + 1` layers.
    pub head: [usize; 2],
    pub task: Task,
    /// When false, MF vectors are zeroed before training and evaluation.
    #[serde(default = "yes")]
    pub use_mf: bool,
    pub seed: u64,
}

fn yes() -> bool {
    true
}

impl ModelConfig {
    pub fn new(task: Task, grid: usize, seed: u64) -> Self {
        ModelConfig { grid, conv_channels: [32, SURFACE_EMBED], mp_layers: 2, hidden: 64, head: [64, 32], task, use_mf: true, seed }
    }

    pub fn outputs(&self) -> usize {
        self.task.outputs()
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.grid == 0 {
            return Err(NnError::Config("grid must be positive".into()));
        }
        if self.conv_channels[1] != SURFACE_EMBED {
            return Err(NnError::Width { what: "surface embedding", expected: SURFACE_EMBED, got: self.conv_channels[1] });
        }
        if self.conv_channels[0] == 0 || self.hidden == 0 || self.head.contains(&0) {
            return Err(NnError::Config("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        GRID_CHANNELS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub split_fractions: [f64; 3],
    pub loss: Loss,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(task: Task, seed: u64) -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 32,
            patience: 50,
            max_epochs: 1000,
            split_fractions: [0.8, 0.1, 0.1],
            loss: match task {
                Task::Time => Loss::Mse,
                Task::Collision => Loss::CrossEntropy,
            },
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(NnError::Config("patience, batch size and max epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::Config(format!("learning rate {}", self.learning_rate)));
        }
        let s: f64 = self.split_fractions.iter().sum();
        if (s - 1.0).abs() > 1e-9 || self.split_fractions.iter().any(|&f| f < 0.0) {
            return Err(NnError::Config(format!("split fractions {:?} must be non-negative and sum to 1", self.split_fractions)));
        }
        Ok(())
    }
}
