//! Graphs to network inputs: loading, standardization and batching.

use super::{NnError, Task};
use crate::brep::resolve_solid;
use crate::datagen::{read_manifest, ManifestRecord, Split};
use crate::enrich::{assemble_graph, EnrichedGraph, GLOBAL_WIDTH, GRID_CHANNELS, MF_CONTINUOUS, MF_WIDTH};
use crate::featrec::recognize;
use crate::step::parse_step;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct LabeledGraph {
    pub id: usize,
    pub split: Split,
    pub graph: EnrichedGraph,
    /// Seconds for the time task, class index for collision.
    pub label: f64,
}

impl LabeledGraph {
    pub fn label_of(rec: &ManifestRecord, task: Task) -> f64 {
        match task {
            Task::Time => rec.time_s,
            Task::Collision => rec.collision as f64,
        }
    }
}

/// Parses, recognizes and enriches every part listed in a manifest, in manifest order.
pub fn load_graphs(manifest: &Path, grid: usize, with_mf: bool, task: Task) -> Result<Vec<LabeledGraph>, NnError> {
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for rec in read_manifest(manifest)? {
        let path = dir.join(&rec.step_path);
        let bytes = std::fs::read(&path).map_err(|source| NnError::Io { path: path.display().to_string(), source })?;
        let solid = resolve_solid(&parse_step(&bytes)?)?;
        let report = recognize(&solid)?;
        let mut graph = assemble_graph(&solid, &report, grid, with_mf)?;
        let label = LabeledGraph::label_of(&rec, task);
        graph.label = Some(label);
        out.push(LabeledGraph { id: rec.id, split: rec.split, graph, label });
    }
    Ok(out)
}

/// Standardization statistics fitted on the training split. Boolean MF
/// slots, normals and the mask pass through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub xyz_mean: [f64; 3],
    pub xyz_std: [f64; 3],
    pub mf_mean: [f64; MF_WIDTH],
    pub mf_std: [f64; MF_WIDTH],
    pub glob_mean: [f64; GLOBAL_WIDTH],
    pub glob_std: [f64; GLOBAL_WIDTH],
    /// Regression targets only; (0, 1) for classification.
    pub label_mean: f64,
    pub label_std: f64,
}

struct Moments {
    n: f64,
    sum: f64,
    sq: f64,
}

impl Moments {
    fn new() -> Self {
        Moments { n: 0.0, sum: 0.0, sq: 0.0 }
    }

    fn push(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sq += x * x;
    }

    fn mean_std(&self) -> (f64, f64) {
        if self.n == 0.0 {
            return (0.0, 1.0);
        }
        let m = self.sum / self.n;
        let var = (self.sq / self.n - m * m).max(0.0);
        let s = var.sqrt();
        (m, if s > 1e-12 * m.abs().max(1.0) { s } else { 1.0 })
    }
}

impl Normalizer {
    pub fn identity() -> Self {
        Normalizer {
            xyz_mean: [0.0; 3],
            xyz_std: [1.0; 3],
            mf_mean: [0.0; MF_WIDTH],
            mf_std: [1.0; MF_WIDTH],
            glob_mean: [0.0; GLOBAL_WIDTH],
            glob_std: [1.0; GLOBAL_WIDTH],
            label_mean: 0.0,
            label_std: 1.0,
        }
    }

    pub fn fit<'a>(graphs: impl IntoIterator<Item = &'a LabeledGraph>, task: Task) -> Self {
        let mut xyz: Vec<Moments> = (0..3).map(|_| Moments::new()).collect();
        let mut mf: Vec<Moments> = (0..MF_WIDTH).map(|_| Moments::new()).collect();
        let mut glob: Vec<Moments> = (0..GLOBAL_WIDTH).map(|_| Moments::new()).collect();
        let mut label = Moments::new();
        for lg in graphs {
            let g = &lg.graph;
            let p = g.grid * g.grid;
            for node in &g.nodes {
                let d = &node.uv_grid.data;
                for k in 0..p {
                    if d[6 * p + k] != 0.0 {
                        for (c, m) in xyz.iter_mut().enumerate() {
                            m.push(d[c * p + k]);
                        }
                    }
                }
                for &j in &MF_CONTINUOUS {
                    mf[j].push(node.mf[j]);
                }
            }
            for (m, &x) in glob.iter_mut().zip(&g.globals) {
                m.push(x);
            }
            label.push(lg.label);
        }
        let mut n = Normalizer::identity();
        for c in 0..3 {
            (n.xyz_mean[c], n.xyz_std[c]) = xyz[c].mean_std();
        }
        for &j in &MF_CONTINUOUS {
            (n.mf_mean[j], n.mf_std[j]) = mf[j].mean_std();
        }
        for c in 0..GLOBAL_WIDTH {
            (n.glob_mean[c], n.glob_std[c]) = glob[c].mean_std();
        }
        if task == Task::Time {
            (n.label_mean, n.label_std) = label.mean_std();
        }
        n
    }

    /// All statistics as one flat vector, in field order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::LEN);
        v.extend_from_slice(&self.xyz_mean);
        v.extend_from_slice(&self.xyz_std);
        v.extend_from_slice(&self.mf_mean);
        v.extend_from_slice(&self.mf_std);
        v.extend_from_slice(&self.glob_mean);
        v.extend_from_slice(&self.glob_std);
        v.push(self.label_mean);
        v.push(self.label_std);
        v
    }

    pub const LEN: usize = 6 + 2 * MF_WIDTH + 2 * GLOBAL_WIDTH + 2;

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        if v.len() != Self::LEN {
            return None;
        }
        let mut it = v.iter().copied();
        let mut take = |out: &mut [f64]| out.iter_mut().for_each(|o| *o = it.next().unwrap_or(0.0));
        let mut n = Normalizer::identity();
        take(&mut n.xyz_mean);
        take(&mut n.xyz_std);
        take(&mut n.mf_mean);
        take(&mut n.mf_std);
        take(&mut n.glob_mean);
        take(&mut n.glob_std);
        let mut tail = [0.0; 2];
        take(&mut tail);
        (n.label_mean, n.label_std) = (tail[0], tail[1]);
        Some(n)
    }

    pub fn denormalize_label(&self, y: f64) -> f64 {
        y * self.label_std + self.label_mean
    }
}

/// One graph laid out for the network. Grid pixels are row-major
/// `[node][pixel][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub nodes: usize,
    pub grid: usize,
    pub pixels: Vec<f64>,
    /// Per-pixel pooling weights `[node][pixel]`; each node's row sums to 1.
    pub pool: Vec<f64>,
    pub mf: Vec<f64>,
    pub globals: [f64; GLOBAL_WIDTH],
    pub neighbors: Vec<Vec<usize>>,
    /// Standardized regression target or class index.
    pub target: f64,
    /// Label in original units.
    pub label: f64,
}

/// Standardizes one graph. Masked-out samples stay zero.
pub fn prepare(graph: &EnrichedGraph, label: f64, norm: &Normalizer, task: Task) -> Result<Sample, NnError> {
    if graph.nodes.is_empty() {
        return Err(NnError::EmptyGraph);
    }
    let g = graph.grid;
    let p = g * g;
    let n = graph.nodes.len();
    let mut pixels = vec![0.0; n * p * GRID_CHANNELS];
    let mut pool = vec![0.0; n * p];
    let mut mf = vec![0.0; n * MF_WIDTH];
    for (i, node) in graph.nodes.iter().enumerate() {
        let d = &node.uv_grid.data;
        if d.len() != GRID_CHANNELS * p {
            return Err(NnError::Width { what: "uv grid", expected: GRID_CHANNELS * p, got: d.len() });
        }
        if node.mf.len() != MF_WIDTH {
            return Err(NnError::Width { what: "mf vector", expected: MF_WIDTH, got: node.mf.len() });
        }
        let mask_sum: f64 = d[6 * p..7 * p].iter().sum();
        for k in 0..p {
            let m = d[6 * p + k];
            let px = &mut pixels[(i * p + k) * GRID_CHANNELS..(i * p + k + 1) * GRID_CHANNELS];
            if m != 0.0 {
                for c in 0..3 {
                    px[c] = (d[c * p + k] - norm.xyz_mean[c]) / norm.xyz_std[c];
                    px[3 + c] = d[(3 + c) * p + k];
                }
                px[6] = m;
            }
            // With no valid sample the face pools uniformly over the (zero) grid.
            pool[i * p + k] = if mask_sum > 0.0 { m / mask_sum } else { 1.0 / p as f64 };
        }
        for j in 0..MF_WIDTH {
            mf[i * MF_WIDTH + j] = (node.mf[j] - norm.mf_mean[j]) / norm.mf_std[j];
        }
    }
    let mut neighbors = vec![Vec::new(); n];
    for e in &graph.edges {
        let [a, b] = *e;
        if a >= n || b >= n {
            return Err(NnError::Width { what: "edge endpoint", expected: n, got: a.max(b) });
        }
        if a != b {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
    }
    let mut globals = [0.0; GLOBAL_WIDTH];
    for c in 0..GLOBAL_WIDTH {
        globals[c] = (graph.globals[c] - norm.glob_mean[c]) / norm.glob_std[c];
    }
    let target = match task {
        Task::Time => (label - norm.label_mean) / norm.label_std,
        Task::Collision => label,
    };
    Ok(Sample { id: 0, nodes: n, grid: g, pixels, pool, mf, globals, neighbors, target, label })
}

/// Several samples stacked along the node axis.
#[derive(Debug, Clone)]
pub struct Batch {
    pub graphs: usize,
    pub nodes: usize,
    pub grid: usize,
    pub pixels: Vec<f64>,
    pub pool: Vec<f64>,
    pub mf: Vec<f64>,
    pub globals: Vec<f64>,
    /// Node range of graph `b` is `offsets[b]..offsets[b + 1]`.
    pub offsets: Vec<usize>,
    pub neighbors: Vec<Vec<usize>>,
    pub targets: Vec<f64>,
}

impl Batch {
    pub fn new(samples: &[&Sample]) -> Result<Self, NnError> {
        let grid = samples.first().map_or(0, |s| s.grid);
        let mut b = Batch {
            graphs: samples.len(),
            nodes: 0,
            grid,
            pixels: Vec::new(),
            pool: Vec::new(),
            mf: Vec::new(),
            globals: Vec::new(),
            offsets: vec![0],
            neighbors: Vec::new(),
            targets: Vec::new(),
        };
        for s in samples {
            if s.grid != grid {
                return Err(NnError::Width { what: "grid size", expected: grid, got: s.grid });
            }
            if s.nodes == 0 {
                return Err(NnError::EmptyGraph);
            }
            let base = b.nodes;
            b.pixels.extend_from_slice(&s.pixels);
            b.pool.extend_from_slice(&s.pool);
            b.mf.extend_from_slice(&s.mf);
            b.globals.extend_from_slice(&s.globals);
            b.neighbors.extend(s.neighbors.iter().map(|l| l.iter().map(|j| j + base).collect::<Vec<_>>()));
            b.targets.push(s.target);
            b.nodes += s.nodes;
            b.offsets.push(b.nodes);
        }
        Ok(b)
    }
}
