//! Incremental construction of closed solids from face boundary specs.

use super::domain::{loop_points, polygon_area, to_uv};
use super::{BrepError, BrepSolid, Coedge, Edge, Face, Loop};
use crate::geom::{rotate, CurveGeom, Frame, SurfaceGeom, Vec3};

const MERGE_TOL: f64 = 1e-6;

/// One boundary segment, given in the direction the loop traverses it.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeSpec {
    Line { a: Vec3, b: Vec3 },
    /// Counter-clockwise about `axis` from `a` through `sweep` radians to `b`.
    /// A full circle has `a == b` and `sweep = 2π`.
    Arc { center: Vec3, axis: Vec3, radius: f64, a: Vec3, b: Vec3, sweep: f64 },
}

impl EdgeSpec {
    pub fn start(&self) -> Vec3 {
        match self {
            EdgeSpec::Line { a, .. } | EdgeSpec::Arc { a, .. } => *a,
        }
    }

    pub fn end(&self) -> Vec3 {
        match self {
            EdgeSpec::Line { b, .. } | EdgeSpec::Arc { b, .. } => *b,
        }
    }

    pub fn midpoint(&self) -> Vec3 {
        match self {
            EdgeSpec::Line { a, b } => (a + b) * 0.5,
            EdgeSpec::Arc { center, axis, a, sweep, .. } => {
                center + rotate(&(a - center), &axis.normalize(), 0.5 * sweep)
            }
        }
    }

    pub fn reversed(&self) -> EdgeSpec {
        match self {
            EdgeSpec::Line { a, b } => EdgeSpec::Line { a: *b, b: *a },
            EdgeSpec::Arc { center, axis, radius, a, b, sweep } => {
                EdgeSpec::Arc { center: *center, axis: -axis, radius: *radius, a: *b, b: *a, sweep: *sweep }
            }
        }
    }
}

#[derive(Debug, Default)]
pub struct BrepBuilder {
    vertices: Vec<Vec3>,
    edges: Vec<Edge>,
    mids: Vec<Vec3>,
    faces: Vec<Face>,
}

impl BrepBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Index of the vertex at `p`, merging points closer than 1e-6 mm.
    pub fn vertex(&mut self, p: Vec3) -> usize {
        if let Some(i) = self.vertices.iter().position(|q| (q - p).norm() < MERGE_TOL) {
            return i;
        }
        self.vertices.push(p);
        self.vertices.len() - 1
    }

    fn edge(&mut self, spec: &EdgeSpec) -> Result<Coedge, BrepError> {
        let va = self.vertex(spec.start());
        let vb = self.vertex(spec.end());
        let mid = spec.midpoint();
        for (i, e) in self.edges.iter().enumerate() {
            let same_ends = (e.start == va && e.end == vb) || (e.start == vb && e.end == va);
            if !same_ends || (self.mids[i] - mid).norm() > MERGE_TOL {
                continue;
            }
            let forward = if va != vb {
                e.start == va
            } else {
                let (_, t) = e.midpoint(&self.vertices);
                let theirs = spec_tangent_at_mid(spec);
                t.dot(&theirs) > 0.0
            };
            return Ok(Coedge { edge: i, forward });
        }
        let curve = match spec {
            EdgeSpec::Line { a, b } => {
                let dir = (b - a)
                    .try_normalize(1e-12)
                    .ok_or_else(|| BrepError::Domain { face: self.faces.len(), message: "zero-length line".into() })?;
                CurveGeom::Line { origin: *a, dir }
            }
            EdgeSpec::Arc { center, axis, radius, a, .. } => {
                CurveGeom::Circle { frame: Frame::new(*center, *axis, a - center)?, radius: *radius }
            }
        };
        self.edges.push(Edge { start: va, end: vb, curve, same_sense: true, uses: Vec::new() });
        self.mids.push(mid);
        Ok(Coedge { edge: self.edges.len() - 1, forward: true })
    }

    fn make_loop(&mut self, specs: &[EdgeSpec]) -> Result<Loop, BrepError> {
        let coedges = specs.iter().map(|s| self.edge(s)).collect::<Result<Vec<_>, _>>()?;
        Ok(Loop { coedges })
    }

    fn orient(&self, surface: &SurfaceGeom, sense: bool, lp: Loop, outer: bool) -> Loop {
        let pts = loop_points(&self.vertices, &self.edges, &lp);
        let (uv, _) = to_uv(surface, &pts);
        let a = polygon_area(&uv) * if sense { 1.0 } else { -1.0 };
        if (a > 0.0) == outer {
            lp
        } else {
            lp.reversed()
        }
    }

    /// Adds a face. Loops are re-oriented as needed so that the outer loop is
    /// counter-clockwise and inner loops clockwise about the outward normal.
    pub fn add_face(
        &mut self,
        surface: SurfaceGeom,
        sense: bool,
        outer: &[EdgeSpec],
        inners: &[Vec<EdgeSpec>],
    ) -> Result<usize, BrepError> {
        let o = self.make_loop(outer)?;
        let o = self.orient(&surface, sense, o, true);
        let mut ins = Vec::with_capacity(inners.len());
        for spec in inners {
            let l = self.make_loop(spec)?;
            ins.push(self.orient(&surface, sense, l, false));
        }
        self.faces.push(Face { surface, sense, outer: o, inners: ins });
        Ok(self.faces.len() - 1)
    }

    pub fn build(self) -> Result<BrepSolid, BrepError> {
        let mut solid = BrepSolid { vertices: self.vertices, edges: self.edges, faces: self.faces };
        solid.rebuild_uses();
        solid.check_manifold()?;
        Ok(solid)
    }
}

fn spec_tangent_at_mid(spec: &EdgeSpec) -> Vec3 {
    match spec {
        EdgeSpec::Line { a, b } => b - a,
        EdgeSpec::Arc { center, axis, a, sweep, .. } => {
            let r = rotate(&(a - center), &axis.normalize(), 0.5 * sweep);
            axis.cross(&r)
        }
    }
}

/// Closed-form axis-aligned box `[lo, hi]`.
pub fn box_solid(lo: Vec3, hi: Vec3) -> Result<BrepSolid, BrepError> {
    let mut b = BrepBuilder::new();
    let c = |i: usize| {
        Vec3::new(
            if i & 1 == 0 { lo.x } else { hi.x },
            if i & 2 == 0 { lo.y } else { hi.y },
            if i & 4 == 0 { lo.z } else { hi.z },
        )
    };
    let quads: [([usize; 4], Vec3, f64); 6] = [
        ([0, 2, 6, 4], -Vec3::x(), lo.x),
        ([1, 3, 7, 5], Vec3::x(), hi.x),
        ([0, 1, 5, 4], -Vec3::y(), lo.y),
        ([2, 3, 7, 6], Vec3::y(), hi.y),
        ([0, 1, 3, 2], -Vec3::z(), lo.z),
        ([4, 5, 7, 6], Vec3::z(), hi.z),
    ];
    for (idx, n, _) in quads {
        let origin = c(idx[0]);
        let frame = Frame::from_axis(origin, n)?;
        let specs: Vec<EdgeSpec> =
            (0..4).map(|k| EdgeSpec::Line { a: c(idx[k]), b: c(idx[(k + 1) % 4]) }).collect();
        b.add_face(SurfaceGeom::Plane { frame }, true, &specs, &[])?;
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_is_closed_manifold() {
        let s = box_solid(Vec3::zeros(), Vec3::new(2.0, 3.0, 4.0)).unwrap();
        assert_eq!((s.vertices.len(), s.edges.len(), s.faces.len()), (8, 12, 6));
    }

    #[test]
    fn reversed_arc_has_same_midpoint() {
        let arc = EdgeSpec::Arc {
            center: Vec3::zeros(),
            axis: Vec3::z(),
            radius: 1.0,
            a: Vec3::x(),
            b: Vec3::y(),
            sweep: std::f64::consts::FRAC_PI_2,
        };
        assert!((arc.midpoint() - arc.reversed().midpoint()).norm() < 1e-12);
    }
}
