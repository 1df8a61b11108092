//! Parameters, forward pass and reverse-mode gradients.

use super::data::Batch;
use super::linalg::{add_bias, matmul_nn, matmul_nt, matmul_tn, sum_rows_into};
use super::{Loss, ModelConfig, NnError, GRAPH_EMBED, HEAD_INPUT, NODE_INPUT, SURFACE_EMBED};
use crate::enrich::{GLOBAL_WIDTH, GRID_CHANNELS, MF_WIDTH};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const KERNEL: usize = 9;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// x·σ(x).
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// A named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl Tensor {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct Dense {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Debug, Clone, Copy)]
struct MpLayer {
    w_self: usize,
    w_nbr: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    conv: [Dense; 2],
    mp: Vec<MpLayer>,
    pool: Dense,
    head: Vec<Dense>,
}

/// The network: configuration plus one flat parameter vector.
///
/// Convolution weights are laid out `[out][ky][kx][in]`, dense weights `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub tensors: Vec<Tensor>,
    pub params: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Cache {
    x1: Vec<f64>,
    z1: Vec<f64>,
    x2: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    /// Node inputs of each message-passing layer, then its output.
    h: Vec<Vec<f64>>,
    m: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    argmax: Vec<usize>,
    pooled: Vec<f64>,
    head_in: Vec<Vec<f64>>,
    head_z: Vec<Vec<f64>>,
    /// Pre-pooling graph embeddings, `[graph][64]`.
    pub graph_embedding: Vec<f64>,
    pub node_input_width: usize,
    pub head_input_width: usize,
}

impl Cache {
    /// Node inputs `[node][92]`: surface embedding followed by the MF vector.
    pub fn node_inputs(&self) -> &[f64] {
        &self.h[0]
    }
}

/// `table[p * 9 + k]` is the pixel read by kernel tap `k` at pixel `p`, if inside.
fn taps(g: usize) -> Vec<Option<usize>> {
    let mut t = Vec::with_capacity(g * g * KERNEL);
    for py in 0..g as isize {
        for px in 0..g as isize {
            for ky in -1..=1isize {
                for kx in -1..=1isize {
                    let (y, x) = (py + ky, px + kx);
                    let inside = y >= 0 && x >= 0 && y < g as isize && x < g as isize;
                    t.push(inside.then(|| (y * g as isize + x) as usize));
                }
            }
        }
    }
    t
}

fn im2col(src: &[f64], nodes: usize, p: usize, c: usize, taps: &[Option<usize>]) -> Vec<f64> {
    let mut out = vec![0.0; nodes * p * KERNEL * c];
    for f in 0..nodes {
        for q in 0..p {
            let row = &mut out[(f * p + q) * KERNEL * c..(f * p + q + 1) * KERNEL * c];
            for k in 0..KERNEL {
                if let Some(s) = taps[q * KERNEL + k] {
                    row[k * c..(k + 1) * c].copy_from_slice(&src[(f * p + s) * c..(f * p + s + 1) * c]);
                }
            }
        }
    }
    out
}

fn col2im(cols: &[f64], nodes: usize, p: usize, c: usize, taps: &[Option<usize>]) -> Vec<f64> {
    let mut out = vec![0.0; nodes * p * c];
    for f in 0..nodes {
        for q in 0..p {
            let row = &cols[(f * p + q) * KERNEL * c..(f * p + q + 1) * KERNEL * c];
            for k in 0..KERNEL {
                if let Some(s) = taps[q * KERNEL + k] {
                    let dst = &mut out[(f * p + s) * c..(f * p + s + 1) * c];
                    dst.iter_mut().zip(&row[k * c..(k + 1) * c]).for_each(|(d, v)| *d += v);
                }
            }
        }
    }
    out
}

fn mean_neighbors(h: &[f64], width: usize, nbrs: &[Vec<usize>]) -> Vec<f64> {
    let mut m = vec![0.0; h.len()];
    for (i, list) in nbrs.iter().enumerate() {
        if list.is_empty() {
            continue;
        }
        let inv = 1.0 / list.len() as f64;
        let row = &mut m[i * width..(i + 1) * width];
        for &j in list {
            row.iter_mut().zip(&h[j * width..(j + 1) * width]).for_each(|(r, v)| *r += v * inv);
        }
    }
    m
}

impl Model {
    /// Xavier-uniform weights from a ChaCha8 stream seeded by `config.seed`; zero biases.
    pub fn new(config: ModelConfig) -> Result<Self, NnError> {
        config.validate()?;
        let mut tensors = Vec::new();
        let mut total = 0;
        let mut add = |name: String, shape: Vec<usize>| {
            let t = Tensor { name, shape, offset: total };
            total += t.len();
            tensors.push(t);
        };
        let [c1, c2] = config.conv_channels;
        add("enc.conv1.w".into(), vec![c1, 3, 3, GRID_CHANNELS]);
        add("enc.conv1.b".into(), vec![c1]);
        add("enc.conv2.w".into(), vec![c2, 3, 3, c1]);
        add("enc.conv2.b".into(), vec![c2]);
        let mut width = NODE_INPUT;
        for l in 0..config.mp_layers {
            add(format!("mp{l}.self.w"), vec![config.hidden, width]);
            add(format!("mp{l}.nbr.w"), vec![config.hidden, width]);
            add(format!("mp{l}.b"), vec![config.hidden]);
            width = config.hidden;
        }
        add("pool.w".into(), vec![GRAPH_EMBED, 2 * width]);
        add("pool.b".into(), vec![GRAPH_EMBED]);
        let widths = [HEAD_INPUT, config.head[0], config.head[1], config.outputs()];
        for l in 0..3 {
            add(format!("head{l}.w"), vec![widths[l + 1], widths[l]]);
            add(format!("head{l}.b"), vec![widths[l + 1]]);
        }
        let mut params = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for t in &tensors {
            if t.shape.len() < 2 {
                continue;
            }
            let fan_out = t.shape[0];
            let fan_in: usize = t.shape[1..].iter().product();
            let kernel = if t.shape.len() == 4 { KERNEL } else { 1 };
            let limit = (6.0 / (fan_in + fan_out * kernel) as f64).sqrt();
            for x in &mut params[t.range()] {
                *x = rng.gen_range(-limit..limit);
            }
        }
        let model = Model { config, tensors, params };
        model.layout()?;
        Ok(model)
    }

    /// Rebuilds a model from a configuration and a full parameter vector.
    pub fn from_params(config: ModelConfig, params: Vec<f64>) -> Result<Self, NnError> {
        let mut m = Model::new(config)?;
        if params.len() != m.params.len() {
            return Err(NnError::Width { what: "parameter vector", expected: m.params.len(), got: params.len() });
        }
        m.params = params;
        Ok(m)
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn tensor_values(&self, name: &str) -> Option<&[f64]> {
        self.tensor(name).map(|t| &self.params[t.range()])
    }

    pub fn tensor_values_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let r = self.tensor(name)?.range();
        Some(&mut self.params[r])
    }

    fn offset(&self, name: &str) -> Result<usize, NnError> {
        self.tensor(name).map(|t| t.offset).ok_or_else(|| NnError::Config(format!("missing tensor {name}")))
    }

    fn layout(&self) -> Result<Layout, NnError> {
        let c = &self.config;
        let dense = |w: &str, b: &str, fan_in, fan_out| -> Result<Dense, NnError> {
            Ok(Dense { w: self.offset(w)?, b: self.offset(b)?, fan_in, fan_out })
        };
        let [c1, c2] = c.conv_channels;
        let conv = [
            dense("enc.conv1.w", "enc.conv1.b", KERNEL * GRID_CHANNELS, c1)?,
            dense("enc.conv2.w", "enc.conv2.b", KERNEL * c1, c2)?,
        ];
        let mut mp = Vec::new();
        let mut width = NODE_INPUT;
        for l in 0..c.mp_layers {
            mp.push(MpLayer {
                w_self: self.offset(&format!("mp{l}.self.w"))?,
                w_nbr: self.offset(&format!("mp{l}.nbr.w"))?,
                b: self.offset(&format!("mp{l}.b"))?,
                fan_in: width,
                fan_out: c.hidden,
            });
            width = c.hidden;
        }
        let pool = dense("pool.w", "pool.b", 2 * width, GRAPH_EMBED)?;
        let widths = [HEAD_INPUT, c.head[0], c.head[1], c.outputs()];
        let head = (0..3)
            .map(|l| dense(&format!("head{l}.w"), &format!("head{l}.b"), widths[l], widths[l + 1]))
            .collect::<Result<_, _>>()?;
        Ok(Layout { conv, mp, pool, head })
    }

    fn check_batch(&self, b: &Batch) -> Result<(), NnError> {
        if b.graphs == 0 || b.nodes == 0 {
            return Err(NnError::EmptyGraph);
        }
        if b.grid != self.config.grid {
            return Err(NnError::Width { what: "grid size", expected: self.config.grid, got: b.grid });
        }
        let p = b.grid * b.grid;
        let checks = [
            ("grid pixels", b.nodes * p * GRID_CHANNELS, b.pixels.len()),
            ("pooling weights", b.nodes * p, b.pool.len()),
            ("mf vectors", b.nodes * MF_WIDTH, b.mf.len()),
            ("globals", b.graphs * GLOBAL_WIDTH, b.globals.len()),
            ("offsets", b.graphs + 1, b.offsets.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(NnError::Width { what, expected, got });
            }
        }
        if (1..=b.graphs).any(|g| b.offsets[g] <= b.offsets[g - 1]) {
            return Err(NnError::EmptyGraph);
        }
        Ok(())
    }

    /// Outputs `[graph][out]`: one scalar per graph for regression, two logits for classification.
    pub fn forward(&self, b: &Batch) -> Result<(Vec<f64>, Cache), NnError> {
        self.check_batch(b)?;
        let lay = self.layout()?;
        let w = &self.params;
        let p = b.grid * b.grid;
        let n = b.nodes;
        let rows = n * p;
        let taps = taps(b.grid);
        let [c1, c2] = self.config.conv_channels;
        let mut cache = Cache::default();

        // surface encoder
        let x1 = im2col(&b.pixels, n, p, GRID_CHANNELS, &taps);
        let mut z1 = vec![0.0; rows * c1];
        let cv = lay.conv[0];
        matmul_nt(rows, cv.fan_in, c1, &x1, &w[cv.w..], 0.0, &mut z1);
        add_bias(&mut z1, &w[cv.b..cv.b + c1]);
        let a1: Vec<f64> = z1.iter().map(|&x| silu(x)).collect();
        let x2 = im2col(&a1, n, p, c1, &taps);
        drop(a1);
        let cv = lay.conv[1];
        let mut z2 = vec![0.0; rows * c2];
        matmul_nt(rows, cv.fan_in, c2, &x2, &w[cv.w..], 0.0, &mut z2);
        add_bias(&mut z2, &w[cv.b..cv.b + c2]);
        let a2: Vec<f64> = z2.iter().map(|&x| silu(x)).collect();
        let mut h0 = vec![0.0; n * NODE_INPUT];
        for f in 0..n {
            let row = &mut h0[f * NODE_INPUT..(f + 1) * NODE_INPUT];
            for q in 0..p {
                let wt = b.pool[f * p + q];
                if wt == 0.0 {
                    continue;
                }
                let src = &a2[(f * p + q) * c2..(f * p + q + 1) * c2];
                row[..SURFACE_EMBED].iter_mut().zip(src).for_each(|(r, v)| *r += wt * v);
            }
            row[SURFACE_EMBED..].copy_from_slice(&b.mf[f * MF_WIDTH..(f + 1) * MF_WIDTH]);
        }
        cache.node_input_width = NODE_INPUT;
        cache.x1 = x1;
        cache.z1 = z1;
        cache.x2 = x2;
        cache.z2 = z2;
        cache.a2 = a2;

        // message passing
        let mut h = h0;
        for l in &lay.mp {
            let m = mean_neighbors(&h, l.fan_in, &b.neighbors);
            let mut z = vec![0.0; n * l.fan_out];
            matmul_nt(n, l.fan_in, l.fan_out, &h, &w[l.w_self..], 0.0, &mut z);
            matmul_nt(n, l.fan_in, l.fan_out, &m, &w[l.w_nbr..], 1.0, &mut z);
            add_bias(&mut z, &w[l.b..l.b + l.fan_out]);
            let next: Vec<f64> = z.iter().map(|&x| silu(x)).collect();
            cache.h.push(h);
            cache.m.push(m);
            cache.z.push(z);
            h = next;
        }
        let width = lay.mp.last().map_or(NODE_INPUT, |l| l.fan_out);

        // graph pooling: [mean | max]
        let g = b.graphs;
        let mut pooled = vec![0.0; g * 2 * width];
        let mut argmax = vec![0usize; g * width];
        for gi in 0..g {
            let (s, e) = (b.offsets[gi], b.offsets[gi + 1]);
            let inv = 1.0 / (e - s) as f64;
            let out = &mut pooled[gi * 2 * width..(gi + 1) * 2 * width];
            for c in 0..width {
                let mut best = s;
                let mut sum = 0.0;
                for i in s..e {
                    let v = h[i * width + c];
                    sum += v;
                    if v > h[best * width + c] {
                        best = i;
                    }
                }
                out[c] = sum * inv;
                out[width + c] = h[best * width + c];
                argmax[gi * width + c] = best;
            }
        }
        cache.h.push(h);
        let pl = lay.pool;
        let mut emb = vec![0.0; g * GRAPH_EMBED];
        matmul_nt(g, pl.fan_in, GRAPH_EMBED, &pooled, &w[pl.w..], 0.0, &mut emb);
        add_bias(&mut emb, &w[pl.b..pl.b + GRAPH_EMBED]);
        cache.argmax = argmax;
        cache.pooled = pooled;

        // head
        let mut x = vec![0.0; g * HEAD_INPUT];
        for gi in 0..g {
            x[gi * HEAD_INPUT..gi * HEAD_INPUT + GRAPH_EMBED].copy_from_slice(&emb[gi * GRAPH_EMBED..(gi + 1) * GRAPH_EMBED]);
            x[gi * HEAD_INPUT + GRAPH_EMBED..(gi + 1) * HEAD_INPUT]
                .copy_from_slice(&b.globals[gi * GLOBAL_WIDTH..(gi + 1) * GLOBAL_WIDTH]);
        }
        cache.head_input_width = HEAD_INPUT;
        cache.graph_embedding = emb;
        let last = lay.head.len() - 1;
        for (k, d) in lay.head.iter().enumerate() {
            let mut z = vec![0.0; g * d.fan_out];
            matmul_nt(g, d.fan_in, d.fan_out, &x, &w[d.w..], 0.0, &mut z);
            add_bias(&mut z, &w[d.b..d.b + d.fan_out]);
            let next = if k == last { z.clone() } else { z.iter().map(|&v| silu(v)).collect() };
            cache.head_in.push(x);
            cache.head_z.push(z);
            x = next;
        }
        Ok((x, cache))
    }

    /// Gradient of the loss with respect to every parameter given `d_out = ∂L/∂outputs`.
    pub fn backward(&self, b: &Batch, cache: &Cache, d_out: &[f64]) -> Result<Vec<f64>, NnError> {
        let lay = self.layout()?;
        let w = &self.params;
        let mut grad = vec![0.0; w.len()];
        let g = b.graphs;
        let n = b.nodes;
        let p = b.grid * b.grid;
        let rows = n * p;
        let [c1, c2] = self.config.conv_channels;

        // head
        let mut dx = d_out.to_vec();
        let last = lay.head.len() - 1;
        for k in (0..lay.head.len()).rev() {
            let d = lay.head[k];
            let mut dz = dx;
            if k != last {
                dz.iter_mut().zip(&cache.head_z[k]).for_each(|(v, &z)| *v *= silu_grad(z));
            }
            matmul_tn(g, d.fan_out, d.fan_in, &dz, &cache.head_in[k], 1.0, &mut grad[d.w..]);
            sum_rows_into(&dz, &mut grad[d.b..d.b + d.fan_out]);
            let mut prev = vec![0.0; g * d.fan_in];
            matmul_nn(g, d.fan_out, d.fan_in, &dz, &w[d.w..], 0.0, &mut prev);
            dx = prev;
        }
        let mut d_emb = vec![0.0; g * GRAPH_EMBED];
        for gi in 0..g {
            d_emb[gi * GRAPH_EMBED..(gi + 1) * GRAPH_EMBED]
                .copy_from_slice(&dx[gi * HEAD_INPUT..gi * HEAD_INPUT + GRAPH_EMBED]);
        }

        // pooling
        let pl = lay.pool;
        matmul_tn(g, GRAPH_EMBED, pl.fan_in, &d_emb, &cache.pooled, 1.0, &mut grad[pl.w..]);
        sum_rows_into(&d_emb, &mut grad[pl.b..pl.b + GRAPH_EMBED]);
        let mut d_pooled = vec![0.0; g * pl.fan_in];
        matmul_nn(g, GRAPH_EMBED, pl.fan_in, &d_emb, &w[pl.w..], 0.0, &mut d_pooled);
        let width = pl.fan_in / 2;
        let mut dh = vec![0.0; n * width];
        for gi in 0..g {
            let (s, e) = (b.offsets[gi], b.offsets[gi + 1]);
            let inv = 1.0 / (e - s) as f64;
            for c in 0..width {
                let dm = d_pooled[gi * 2 * width + c] * inv;
                for i in s..e {
                    dh[i * width + c] += dm;
                }
                dh[cache.argmax[gi * width + c] * width + c] += d_pooled[gi * 2 * width + width + c];
            }
        }

        // message passing
        for (k, l) in lay.mp.iter().enumerate().rev() {
            let mut dz = dh;
            dz.iter_mut().zip(&cache.z[k]).for_each(|(v, &z)| *v *= silu_grad(z));
            matmul_tn(n, l.fan_out, l.fan_in, &dz, &cache.h[k], 1.0, &mut grad[l.w_self..]);
            matmul_tn(n, l.fan_out, l.fan_in, &dz, &cache.m[k], 1.0, &mut grad[l.w_nbr..]);
            sum_rows_into(&dz, &mut grad[l.b..l.b + l.fan_out]);
            let mut d_in = vec![0.0; n * l.fan_in];
            matmul_nn(n, l.fan_out, l.fan_in, &dz, &w[l.w_self..], 0.0, &mut d_in);
            let mut d_m = vec![0.0; n * l.fan_in];
            matmul_nn(n, l.fan_out, l.fan_in, &dz, &w[l.w_nbr..], 0.0, &mut d_m);
            for (i, list) in b.neighbors.iter().enumerate() {
                if list.is_empty() {
                    continue;
                }
                let inv = 1.0 / list.len() as f64;
                for &j in list {
                    for c in 0..l.fan_in {
                        d_in[j * l.fan_in + c] += d_m[i * l.fan_in + c] * inv;
                    }
                }
            }
            dh = d_in;
        }

        // surface encoder; MF inputs take no gradient
        let mut dz2 = vec![0.0; rows * c2];
        for f in 0..n {
            let de = &dh[f * NODE_INPUT..f * NODE_INPUT + SURFACE_EMBED];
            for q in 0..p {
                let wt = b.pool[f * p + q];
                if wt == 0.0 {
                    continue;
                }
                let r = f * p + q;
                for c in 0..c2 {
                    dz2[r * c2 + c] = wt * de[c] * silu_grad(cache.z2[r * c2 + c]);
                }
            }
        }
        let cv = lay.conv[1];
        matmul_tn(rows, c2, cv.fan_in, &dz2, &cache.x2, 1.0, &mut grad[cv.w..]);
        sum_rows_into(&dz2, &mut grad[cv.b..cv.b + c2]);
        let mut dx2 = vec![0.0; rows * cv.fan_in];
        matmul_nn(rows, c2, cv.fan_in, &dz2, &w[cv.w..], 0.0, &mut dx2);
        let taps = taps(b.grid);
        let mut dz1 = col2im(&dx2, n, p, c1, &taps);
        dz1.iter_mut().zip(&cache.z1).for_each(|(v, &z)| *v *= silu_grad(z));
        let cv = lay.conv[0];
        matmul_tn(rows, c1, cv.fan_in, &dz1, &cache.x1, 1.0, &mut grad[cv.w..]);
        sum_rows_into(&dz1, &mut grad[cv.b..cv.b + c1]);
        Ok(grad)
    }

    /// Mean loss over the batch and `∂L/∂outputs`.
    pub fn loss_of(&self, out: &[f64], targets: &[f64], loss: Loss) -> (f64, Vec<f64>) {
        let g = targets.len() as f64;
        match loss {
            Loss::Mse => {
                let k = self.config.outputs();
                let mut d = vec![0.0; out.len()];
                let mut l = 0.0;
                for (i, &t) in targets.iter().enumerate() {
                    let e = out[i * k] - t;
                    l += e * e;
                    d[i * k] = 2.0 * e / g;
                }
                (l / g, d)
            }
            Loss::CrossEntropy => {
                let k = self.config.outputs();
                let mut d = vec![0.0; out.len()];
                let mut l = 0.0;
                for (i, &t) in targets.iter().enumerate() {
                    let row = &out[i * k..(i + 1) * k];
                    let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = row.iter().map(|&v| (v - mx).exp()).sum();
                    let cls = t as usize;
                    l += z.ln() + mx - row[cls];
                    for c in 0..k {
                        let pc = (row[c] - mx).exp() / z;
                        d[i * k + c] = (pc - f64::from(u8::from(c == cls))) / g;
                    }
                }
                (l / g, d)
            }
        }
    }

    pub fn loss(&self, b: &Batch, loss: Loss) -> Result<f64, NnError> {
        let (out, _) = self.forward(b)?;
        Ok(self.loss_of(&out, &b.targets, loss).0)
    }

    pub fn loss_and_grads(&self, b: &Batch, loss: Loss) -> Result<(f64, Vec<f64>), NnError> {
        let (out, cache) = self.forward(b)?;
        let (l, d) = self.loss_of(&out, &b.targets, loss);
        if !l.is_finite() {
            return Err(NnError::NonFinite { loss: l, epoch: 0, batch: 0 });
        }
        Ok((l, self.backward(b, &cache, &d)?))
    }

    pub fn predict(&self, b: &Batch) -> Result<Vec<f64>, NnError> {
        Ok(self.forward(b)?.0)
    }
}
