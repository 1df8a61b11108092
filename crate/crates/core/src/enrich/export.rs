//! `BGR1` binary graph files.
//!
//! Layout, all integers u32 and all reals f32, little-endian:
//!
//! ```text
//! "BGR1" schema mf_layout grid n_nodes n_edges
//! globals[3] has_label(u32 0|1) label
//! n_nodes × { face_id kind_code uv_grid[7·G·G] mf[28] }
//! n_edges × { a b dihedral_code }
//! ```
//!
//! Kind codes: 0 plane, 1 cylinder, 2 sphere, 3 torus, 4 bspline.
//! Dihedral codes: 0 convex, 1 concave, 2 smooth.

use super::{EnrichError, EnrichedGraph, GraphNode, UvGrid, GLOBAL_WIDTH, GRID_CHANNELS, MF_WIDTH};
use std::io::{Read, Write};

pub const BGR1_MAGIC: &[u8; 4] = b"BGR1";

const KINDS: [&str; 5] = ["plane", "cylinder", "sphere", "torus", "bspline"];
const DIHEDRALS: [&str; 3] = ["convex", "concave", "smooth"];

fn code(table: &[&str], s: &str) -> Result<u32, EnrichError> {
    table
        .iter()
        .position(|k| *k == s)
        .map(|i| i as u32)
        .ok_or_else(|| EnrichError::Format(format!("unknown label {s:?}")))
}

fn put_u32(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_f32(out: &mut Vec<u8>, x: f64) {
    out.extend_from_slice(&(x as f32).to_le_bytes());
}

fn idx(x: usize) -> Result<u32, EnrichError> {
    u32::try_from(x).map_err(|_| EnrichError::Format(format!("{x} exceeds u32")))
}

pub fn write_bgr1<W: Write>(graph: &EnrichedGraph, mut w: W) -> Result<(), EnrichError> {
    let mut out = Vec::new();
    out.extend_from_slice(BGR1_MAGIC);
    for x in [graph.schema_version, graph.mf_layout_version] {
        put_u32(&mut out, x);
    }
    for x in [graph.grid, graph.nodes.len(), graph.edges.len()] {
        put_u32(&mut out, idx(x)?);
    }
    for g in graph.globals {
        put_f32(&mut out, g);
    }
    put_u32(&mut out, u32::from(graph.label.is_some()));
    put_f32(&mut out, graph.label.unwrap_or(0.0));
    let grid_len = GRID_CHANNELS * graph.grid * graph.grid;
    for n in &graph.nodes {
        if n.uv_grid.data.len() != grid_len || n.mf.len() != MF_WIDTH {
            return Err(EnrichError::Format(format!("node {} has the wrong width", n.face_id)));
        }
        put_u32(&mut out, idx(n.face_id)?);
        put_u32(&mut out, code(&KINDS, &n.surface_kind)?);
        n.uv_grid.data.iter().chain(&n.mf).for_each(|&x| put_f32(&mut out, x));
    }
    if graph.dihedrals.len() != graph.edges.len() {
        return Err(EnrichError::Format("dihedral count differs from edge count".into()));
    }
    for (e, d) in graph.edges.iter().zip(&graph.dihedrals) {
        put_u32(&mut out, idx(e[0])?);
        put_u32(&mut out, idx(e[1])?);
        put_u32(&mut out, code(&DIHEDRALS, d)?);
    }
    w.write_all(&out)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take4(&mut self) -> Result<[u8; 4], EnrichError> {
        let b = self
            .buf
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| EnrichError::Format(format!("truncated at byte {}", self.pos)))?;
        self.pos += 4;
        Ok([b[0], b[1], b[2], b[3]])
    }

    fn u32(&mut self) -> Result<u32, EnrichError> {
        Ok(u32::from_le_bytes(self.take4()?))
    }

    fn usize(&mut self) -> Result<usize, EnrichError> {
        Ok(self.u32()? as usize)
    }

    fn f32(&mut self) -> Result<f64, EnrichError> {
        Ok(f32::from_le_bytes(self.take4()?) as f64)
    }
}

/// Reads a `BGR1` file. Reals come back rounded to f32.
pub fn read_bgr1<R: Read>(mut r: R) -> Result<EnrichedGraph, EnrichError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.get(..4) != Some(BGR1_MAGIC.as_slice()) {
        return Err(EnrichError::Format("missing BGR1 magic".into()));
    }
    let mut c = Cursor { buf: &buf, pos: 4 };
    let schema_version = c.u32()?;
    let mf_layout_version = c.u32()?;
    let grid = c.usize()?;
    let n_nodes = c.usize()?;
    let n_edges = c.usize()?;
    let mut globals = [0.0; GLOBAL_WIDTH];
    for g in &mut globals {
        *g = c.f32()?;
    }
    let has_label = c.u32()? != 0;
    let label = c.f32()?;
    let grid_len = GRID_CHANNELS * grid * grid;
    let mut nodes = Vec::with_capacity(n_nodes.min(1 << 16));
    for _ in 0..n_nodes {
        let face_id = c.usize()?;
        let kind = KINDS.get(c.usize()?).ok_or_else(|| EnrichError::Format("bad surface kind code".into()))?;
        let data = (0..grid_len).map(|_| c.f32()).collect::<Result<Vec<_>, _>>()?;
        let mf = (0..MF_WIDTH).map(|_| c.f32()).collect::<Result<Vec<_>, _>>()?;
        nodes.push(GraphNode { face_id, surface_kind: kind.to_string(), uv_grid: UvGrid { size: grid, data }, mf });
    }
    let mut edges = Vec::with_capacity(n_edges.min(1 << 16));
    let mut dihedrals = Vec::with_capacity(n_edges.min(1 << 16));
    for _ in 0..n_edges {
        edges.push([c.usize()?, c.usize()?]);
        let d = DIHEDRALS.get(c.usize()?).ok_or_else(|| EnrichError::Format("bad dihedral code".into()))?;
        dihedrals.push(d.to_string());
    }
    if c.pos != buf.len() {
        return Err(EnrichError::Format(format!("{} trailing bytes", buf.len() - c.pos)));
    }
    Ok(EnrichedGraph {
        schema_version,
        mf_layout_version,
        grid,
        nodes,
        edges,
        dihedrals,
        globals,
        label: has_label.then_some(label),
    })
}
