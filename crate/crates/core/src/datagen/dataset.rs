//! Corpus generation and the JSON Lines manifest.

use super::{derive_seed, realize, sample_spec, DatagenError, Part, Profile};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.jsonl";
const SPLIT_STREAM: u64 = 0x5B1;
const TARGET_STREAM: u64 = 0x7A6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (train|val|test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: usize,
    /// Relative to the manifest's directory.
    pub step_path: String,
    pub time_s: f64,
    pub collision: u8,
    pub split: Split,
}

impl ManifestRecord {
    pub fn gt_path(&self) -> String {
        match self.step_path.strip_suffix(".stp") {
            Some(stem) => format!("{stem}.gt.json"),
            None => format!("{}.gt.json", self.step_path),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetOptions {
    pub n: usize,
    pub seed: u64,
    /// Profiles assigned round-robin by part id.
    pub profiles: Vec<Profile>,
    pub out_dir: PathBuf,
}

/// (train, val, test) sizes for an 80/10/10 split.
pub fn split_counts(n: usize) -> (usize, usize, usize) {
    let val = (n as f64 * 0.1).round() as usize;
    let test = (n as f64 * 0.1).round() as usize;
    let val = val.min(n);
    let test = test.min(n - val);
    (n - val - test, val, test)
}

fn io_err(path: &Path, source: std::io::Error) -> DatagenError {
    DatagenError::Io { path: path.display().to_string(), source }
}

/// Samples specs for part `id` until the collision label matches `want`.
pub fn sample_part(seed: u64, profile: Profile, want: Option<u8>) -> Result<Part, DatagenError> {
    for attempt in 0..super::sample::MAX_ATTEMPTS as u64 {
        let spec = sample_spec(derive_seed(seed, attempt), profile)?;
        let part = match realize(&spec) {
            Ok(p) => p,
            Err(DatagenError::Unrealizable(_)) => continue,
            Err(e) => return Err(e),
        };
        if want.map_or(true, |w| part.truth.labels.collision == w) {
            return Ok(part);
        }
    }
    Err(DatagenError::Exhausted(super::sample::MAX_ATTEMPTS))
}

/// Writes `n` parts (STEP + ground truth JSON) and the manifest. Collision
/// classes are balanced exactly by assigning a seeded target to each id.
pub fn build_dataset(opts: &DatasetOptions) -> Result<Vec<ManifestRecord>, DatagenError> {
    if opts.profiles.is_empty() {
        return Err(DatagenError::Manifest("no profiles given".into()));
    }
    fs::create_dir_all(&opts.out_dir).map_err(|e| io_err(&opts.out_dir, e))?;
    let n = opts.n;

    let mut targets: Vec<u8> = (0..n).map(|i| u8::from(i >= n / 2)).collect();
    targets.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, TARGET_STREAM)));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, SPLIT_STREAM)));
    let (n_train, n_val, _) = split_counts(n);
    let mut splits = vec![Split::Test; n];
    for (rank, &id) in order.iter().enumerate() {
        splits[id] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }

    let mut records = Vec::with_capacity(n);
    for id in 0..n {
        let profile = opts.profiles[id % opts.profiles.len()];
        let part = sample_part(derive_seed(opts.seed, id as u64), profile, Some(targets[id]))?;
        let step_name = format!("part_{id:05}.stp");
        let step_path = opts.out_dir.join(&step_name);
        fs::write(&step_path, &part.step).map_err(|e| io_err(&step_path, e))?;
        let gt_path = opts.out_dir.join(format!("part_{id:05}.gt.json"));
        let gt = serde_json::to_vec_pretty(&part.truth).map_err(|e| DatagenError::Manifest(e.to_string()))?;
        fs::write(&gt_path, gt).map_err(|e| io_err(&gt_path, e))?;
        records.push(ManifestRecord {
            id,
            step_path: step_name,
            time_s: part.truth.labels.time_s,
            collision: part.truth.labels.collision,
            split: splits[id],
        });
    }
    write_manifest(&opts.out_dir.join(MANIFEST_NAME), &records)?;
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<(), DatagenError> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| DatagenError::Manifest(e.to_string()))?;
        writeln!(f, "{line}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>, DatagenError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatagenError::Manifest(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_arithmetic() {
        assert_eq!(split_counts(10), (8, 1, 1));
        assert_eq!(split_counts(1000), (800, 100, 100));
        assert_eq!(split_counts(1), (1, 0, 0));
    }
}
