//! Resolved boundary representation: topology, evaluable geometry, the face
//! adjacency graph and whole-solid measures.

mod aag;
mod attrs;
mod builder;
mod domain;
mod resolve;

pub use aag::{build_aag, AagEdge, Dihedral, FaceAdjacencyGraph};
pub use attrs::{
    bbox, euler_counts, face_area, flux, global_attributes, plane_pairs, thickness_from_pairs, EulerCounts,
    GlobalAttributes, PlanePair,
};
pub use builder::{box_solid, BrepBuilder, EdgeSpec};
pub use domain::{face_domain, loop_points, FaceDomain};
pub use resolve::resolve_solid;

use crate::geom::{CurveGeom, GeomError, SurfaceGeom, SurfaceKind, Vec3};
use serde::Serialize;
use std::f64::consts::TAU;
use thiserror::Error;

/// Segments used for a circular arc, whatever its sweep.
pub const ARC_SEGMENTS: usize = 64;
/// Segments used for a b-spline edge.
pub const SPLINE_SEGMENTS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrepError {
    #[error("expected exactly one MANIFOLD_SOLID_BREP, found {0}")]
    SolidCount(usize),
    #[error("edge #{edge} is used {uses} times; a closed 2-manifold needs exactly 2 opposite uses")]
    NonManifoldEdge { edge: u64, uses: usize },
    #[error("unsupported entity {entity_type} at #{id}")]
    Unsupported { id: u64, entity_type: String },
    #[error("malformed instance #{id}: {message}")]
    Malformed { id: u64, message: String },
    #[error("face {face}: {message}")]
    Domain { face: usize, message: String },
    #[error("sheet thickness undeterminable: no opposite parallel plane pair with overlapping projections")]
    ThicknessUndeterminable,
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// One use of an edge by a face loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EdgeUse {
    pub face: usize,
    /// True when the loop traverses the edge from `start` to `end`.
    pub forward: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub start: usize,
    pub end: usize,
    pub curve: CurveGeom,
    /// Whether start→end follows increasing curve parameter.
    pub same_sense: bool,
    pub uses: Vec<EdgeUse>,
}

impl Edge {
    pub fn is_closed(&self) -> bool {
        self.start == self.end
    }

    /// Curve parameters at the start and end vertex. For circles the end is
    /// unwrapped so that |end - start| is the swept angle.
    pub fn params(&self, vertices: &[Vec3]) -> (f64, f64) {
        let a = self.curve.param_of(&vertices[self.start]);
        let b = self.curve.param_of(&vertices[self.end]);
        match self.curve {
            CurveGeom::Circle { .. } => {
                let raw = if self.same_sense { b - a } else { a - b };
                let mut d = raw.rem_euclid(TAU);
                if self.is_closed() || d < 1e-12 {
                    d = TAU;
                }
                if self.same_sense {
                    (a, a + d)
                } else {
                    (a, a - d)
                }
            }
            _ => (a, b),
        }
    }

    /// Polyline from the start vertex to the end vertex (endpoints exact).
    pub fn sample(&self, vertices: &[Vec3]) -> Vec<Vec3> {
        let n = match self.curve {
            CurveGeom::Line { .. } => 1,
            CurveGeom::Circle { .. } => ARC_SEGMENTS,
            CurveGeom::BSpline(_) => SPLINE_SEGMENTS,
        };
        let (a, b) = self.params(vertices);
        let mut pts = Vec::with_capacity(n + 1);
        pts.push(vertices[self.start]);
        for i in 1..n {
            let t = a + (b - a) * i as f64 / n as f64;
            pts.push(self.curve.eval(t).unwrap_or(vertices[self.start]));
        }
        pts.push(vertices[self.end]);
        pts
    }

    /// Point and unit tangent (start→end direction) at the parametric midpoint.
    pub fn midpoint(&self, vertices: &[Vec3]) -> (Vec3, Vec3) {
        let (a, b) = self.params(vertices);
        let t = 0.5 * (a + b);
        let p = self.curve.eval(t).unwrap_or(vertices[self.start]);
        let mut tan = self.curve.tangent(t).unwrap_or_else(|_| vertices[self.end] - vertices[self.start]);
        if b < a {
            tan = -tan;
        }
        (p, tan.try_normalize(1e-300).unwrap_or(tan))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Coedge {
    pub edge: usize,
    pub forward: bool,
}

/// Closed loop of coedges, oriented counter-clockwise about the face's
/// effective normal for the outer loop and clockwise for inner loops.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Loop {
    pub coedges: Vec<Coedge>,
}

impl Loop {
    pub fn reversed(&self) -> Loop {
        Loop {
            coedges: self
                .coedges
                .iter()
                .rev()
                .map(|c| Coedge { edge: c.edge, forward: !c.forward })
                .collect(),
        }
    }

    /// Vertex indices in traversal order (the start vertex of each coedge).
    pub fn vertices(&self, edges: &[Edge]) -> Vec<usize> {
        self.coedges
            .iter()
            .map(|c| {
                let e = &edges[c.edge];
                if c.forward {
                    e.start
                } else {
                    e.end
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Face {
    pub surface: SurfaceGeom,
    /// False when the face normal opposes the surface's natural normal.
    pub sense: bool,
    pub outer: Loop,
    pub inners: Vec<Loop>,
}

impl Face {
    pub fn kind(&self) -> SurfaceKind {
        self.surface.kind()
    }

    pub fn loops(&self) -> impl Iterator<Item = &Loop> {
        std::iter::once(&self.outer).chain(self.inners.iter())
    }

    fn sign(&self) -> f64 {
        if self.sense {
            1.0
        } else {
            -1.0
        }
    }

    /// Outward unit normal at the surface point nearest to `p`.
    pub fn normal_at(&self, p: &Vec3) -> Vec3 {
        self.surface.normal_near(p) * self.sign()
    }

    /// Outward unit normal at parameters (u, v).
    pub fn normal_uv(&self, u: f64, v: f64) -> Result<(Vec3, Vec3), GeomError> {
        let (p, n) = self.surface.eval(u, v)?;
        Ok((p, n * self.sign()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BrepSolid {
    pub vertices: Vec<Vec3>,
    pub edges: Vec<Edge>,
    pub faces: Vec<Face>,
}

impl BrepSolid {
    /// Faces adjacent to `face` through any shared edge, excluding itself.
    pub fn neighbors(&self, face: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.faces[face]
            .loops()
            .flat_map(|l| l.coedges.iter())
            .flat_map(|c| self.edges[c.edge].uses.iter().map(|u| u.face))
            .filter(|&f| f != face)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Edges shared by faces `a` and `b`.
    pub fn shared_edges(&self, a: usize, b: usize) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.uses.iter().any(|u| u.face == a) && e.uses.iter().any(|u| u.face == b))
            .map(|(i, _)| i)
            .collect()
    }

    /// Vertex indices touched by a face's loops.
    pub fn face_vertices(&self, face: usize) -> Vec<usize> {
        let mut vs: Vec<usize> = self.faces[face]
            .loops()
            .flat_map(|l| l.coedges.iter())
            .flat_map(|c| [self.edges[c.edge].start, self.edges[c.edge].end])
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    /// Checks that each edge has exactly two uses of opposite direction.
    pub fn check_manifold(&self) -> Result<(), BrepError> {
        for (i, e) in self.edges.iter().enumerate() {
            let ok = e.uses.len() == 2 && e.uses[0].forward != e.uses[1].forward;
            if !ok {
                return Err(BrepError::NonManifoldEdge { edge: i as u64, uses: e.uses.len() });
            }
        }
        Ok(())
    }

    /// Recomputes `Edge::uses` from the face loops.
    pub fn rebuild_uses(&mut self) {
        for e in &mut self.edges {
            e.uses.clear();
        }
        for (fi, f) in self.faces.iter().enumerate() {
            for l in std::iter::once(&f.outer).chain(f.inners.iter()) {
                for c in &l.coedges {
                    self.edges[c.edge].uses.push(EdgeUse { face: fi, forward: c.forward });
                }
            }
        }
    }
}
