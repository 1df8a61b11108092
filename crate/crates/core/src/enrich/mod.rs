//! Feature-enriched attributed adjacency graphs: per-face UV sample grids,
//! 28-slot manufacturing-feature vectors and whole-part globals.

mod export;

pub use export::{read_bgr1, write_bgr1, BGR1_MAGIC};

use crate::brep::{build_aag, face_domain, global_attributes, BrepError, BrepSolid};
use crate::featrec::{FeatrecError, FeatureReport, Role};
use crate::geom::SurfaceGeom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GRAPH_SCHEMA_VERSION: u32 = 1;
/// Version of the MF slot layout documented on [`mf_vector`].
pub const MF_LAYOUT_VERSION: u32 = 1;
pub const GRID_CHANNELS: usize = 7;
pub const DEFAULT_GRID: usize = 10;
pub const MF_WIDTH: usize = 28;
pub const GLOBAL_WIDTH: usize = 3;

/// MF slots holding continuous values (standardized before training).
pub const MF_CONTINUOUS: [usize; 17] = [5, 6, 7, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23];

#[derive(Debug, Error)]
pub enum EnrichError {
    #[error(transparent)]
    Brep(#[from] BrepError),
    #[error(transparent)]
    Featrec(#[from] FeatrecError),
    #[error("face {0} has an empty trimmed region")]
    EmptyFace(usize),
    #[error("grid size must be at least 1")]
    GridSize,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed graph data: {0}")]
    Format(String),
}

/// Channel-major `[7][G][G]` samples: x, y, z, nx, ny, nz, mask. Index
/// `i` runs along u and `j` along v.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UvGrid {
    pub size: usize,
    pub data: Vec<f64>,
}

impl UvGrid {
    pub fn zeros(size: usize) -> Self {
        UvGrid { size, data: vec![0.0; GRID_CHANNELS * size * size] }
    }

    pub fn at(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.size + i) * self.size + j]
    }

    fn set(&mut self, c: usize, i: usize, j: usize, x: f64) {
        self.data[(c * self.size + i) * self.size + j] = x;
    }

    pub fn mask_fraction(&self) -> f64 {
        let g = self.size;
        (0..g).flat_map(|i| (0..g).map(move |j| (i, j))).map(|(i, j)| self.at(6, i, j)).sum::<f64>() / (g * g) as f64
    }
}

/// Samples a face on a `g`×`g` grid of cell centres over its UV bounding
/// rectangle. Samples outside the trimmed region are all zero.
pub fn sample_uv_grid(solid: &BrepSolid, face: usize, g: usize) -> Result<UvGrid, EnrichError> {
    if g == 0 {
        return Err(EnrichError::GridSize);
    }
    let dom = face_domain(solid, face)?;
    if dom.signed_area().abs() <= 1e-12 {
        return Err(EnrichError::EmptyFace(face));
    }
    let f = &solid.faces[face];
    let mut grid = UvGrid::zeros(g);
    for i in 0..g {
        let u = dom.u_min + (i as f64 + 0.5) / g as f64 * dom.u_span();
        for j in 0..g {
            let v = dom.v_min + (j as f64 + 0.5) / g as f64 * dom.v_span();
            if !dom.contains(u, v) {
                continue;
            }
            let Ok((p, n)) = f.normal_uv(u, v) else { continue };
            for c in 0..3 {
                grid.set(c, i, j, p[c]);
                grid.set(3 + c, i, j, n[c]);
            }
            grid.set(6, i, j, 1.0);
        }
    }
    Ok(grid)
}

/// The 28-slot manufacturing-feature vector of a face:
///
/// | slots | content |
/// |---|---|
/// | 0–2 | role one-hot (top, bottom, side) |
/// | 3 | is cylindrical |
/// | 4 | convexity (+1 convex, −1 concave, 0 otherwise) |
/// | 5–7 | cylinder radius, axial length, arc angle |
/// | 8 | is bend face |
/// | 9 | bend orientation (±1) |
/// | 10–13 | inner radius, outer radius, bend length, bend angle |
/// | 14–18 | flange A min, median, max, mean, std |
/// | 19–23 | flange B min, median, max, mean, std |
/// | 24 | is hole wall |
/// | 25 | is side-hole wall |
/// | 26 | on outer contour |
/// | 27 | bend has a corner partner |
pub fn mf_vector(face: usize, report: &FeatureReport) -> [f64; MF_WIDTH] {
    let mut mf = [0.0; MF_WIDTH];
    match report.roles[face] {
        Role::Top => mf[0] = 1.0,
        Role::Bottom => mf[1] = 1.0,
        Role::Side => mf[2] = 1.0,
    }
    if let Some(c) = report.cylinder(face) {
        mf[3] = 1.0;
        mf[4] = if c.convex { 1.0 } else { -1.0 };
        mf[5] = c.radius;
        mf[6] = c.axial_length;
        mf[7] = c.arc_angle;
    }
    if let Some(k) = report.bend_of(face) {
        let b = &report.bends[k];
        mf[8] = 1.0;
        mf[9] = b.orientation as f64;
        mf[10] = b.inner_radius;
        mf[11] = b.outer_radius;
        mf[12] = b.length;
        mf[13] = b.bend_angle;
        mf[14..19].copy_from_slice(&b.flange_a.to_array());
        mf[19..24].copy_from_slice(&b.flange_b.to_array());
        mf[27] = if b.corner_partners.is_empty() { 0.0 } else { 1.0 };
    }
    if let Some(h) = report.holes.iter().find(|h| h.wall_faces.contains(&face)) {
        mf[24] = 1.0;
        mf[25] = if h.is_side_hole { 1.0 } else { 0.0 };
    }
    if report.outer_contour_face_ids.contains(&face) {
        mf[26] = 1.0;
    }
    mf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub face_id: usize,
    pub surface_kind: String,
    pub uv_grid: UvGrid,
    pub mf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedGraph {
    pub schema_version: u32,
    pub mf_layout_version: u32,
    pub grid: usize,
    pub nodes: Vec<GraphNode>,
    /// Face pairs (a < b), ordered.
    pub edges: Vec<[usize; 2]>,
    /// Dihedral class per edge; not consumed by the network.
    pub dihedrals: Vec<String>,
    /// Thickness, total area, bounding-box volume.
    pub globals: [f64; GLOBAL_WIDTH],
    pub label: Option<f64>,
}

impl EnrichedGraph {
    /// Zeroes every MF vector, leaving structure and grids untouched.
    pub fn without_mf(mut self) -> Self {
        for n in &mut self.nodes {
            n.mf.iter_mut().for_each(|x| *x = 0.0);
        }
        self
    }

    /// Raw values per node: 7·G·G grid values and 28 MF values.
    pub fn node_widths(&self) -> Vec<(usize, usize)> {
        self.nodes.iter().map(|n| (n.uv_grid.data.len(), n.mf.len())).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": self.schema_version,
            "mf_layout_version": self.mf_layout_version,
            "grid_shape": [GRID_CHANNELS, self.grid, self.grid],
            "nodes": self.nodes.iter().map(|n| serde_json::json!({
                "face_id": n.face_id,
                "surface_kind": n.surface_kind,
                "uv_grid": n.uv_grid.data,
                "mf": n.mf,
            })).collect::<Vec<_>>(),
            "edges": self.edges,
            "dihedrals": self.dihedrals,
            "globals": self.globals,
            "label": self.label,
        })
    }
}

/// Assembles the enriched graph with nodes ordered by face id.
pub fn assemble_graph(
    solid: &BrepSolid,
    report: &FeatureReport,
    g: usize,
    with_mf: bool,
) -> Result<EnrichedGraph, EnrichError> {
    let aag = build_aag(solid);
    let attrs = global_attributes(solid)?;
    let mut nodes = Vec::with_capacity(solid.faces.len());
    for (i, f) in solid.faces.iter().enumerate() {
        let kind = match &f.surface {
            SurfaceGeom::BSpline(_) => "bspline",
            s => s.kind().as_str(),
        };
        nodes.push(GraphNode {
            face_id: i,
            surface_kind: kind.to_string(),
            uv_grid: sample_uv_grid(solid, i, g)?,
            mf: mf_vector(i, report).to_vec(),
        });
    }
    let graph = EnrichedGraph {
        schema_version: GRAPH_SCHEMA_VERSION,
        mf_layout_version: MF_LAYOUT_VERSION,
        grid: g,
        nodes,
        edges: aag.edges.iter().map(|e| [e.a, e.b]).collect(),
        dihedrals: aag.edges.iter().map(|e| e.dihedral.as_str().to_string()).collect(),
        globals: attrs.to_array(),
        label: None,
    };
    Ok(if with_mf { graph } else { graph.without_mf() })
}
