//! Trimmed parameter domains of faces.

use super::{BrepError, BrepSolid, Edge, Face, Loop};
use crate::geom::{SurfaceGeom, Vec3};
use std::f64::consts::{PI, TAU};

/// A face's loops mapped into its surface's (u, v) plane. Angular u is
/// unwrapped continuously, so a full-period face spans exactly 2π.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceDomain {
    /// Closed polygons (last point not repeated); index 0 is the outer loop.
    pub loops: Vec<Vec<[f64; 2]>>,
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl FaceDomain {
    pub fn u_span(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn v_span(&self) -> f64 {
        self.v_max - self.v_min
    }

    /// Even-odd test against all loops.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        let mut inside = false;
        for poly in &self.loops {
            let n = poly.len();
            let mut j = n - 1;
            for i in 0..n {
                let (a, b) = (poly[i], poly[j]);
                if (a[1] > v) != (b[1] > v) {
                    let x = a[0] + (v - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                    if u < x {
                        inside = !inside;
                    }
                }
                j = i;
            }
        }
        inside
    }

    /// Signed area of the trimmed region in parameter units (outer positive
    /// when loops are counter-clockwise in uv).
    pub fn signed_area(&self) -> f64 {
        self.loops.iter().map(|l| polygon_area(l)).sum()
    }
}

pub(crate) fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

/// Tessellated loop in traversal order; the closing point is not repeated.
pub fn loop_points(vertices: &[Vec3], edges: &[Edge], lp: &Loop) -> Vec<Vec3> {
    let mut pts = Vec::new();
    for c in &lp.coedges {
        let mut seg = edges[c.edge].sample(vertices);
        if !c.forward {
            seg.reverse();
        }
        seg.pop();
        pts.extend(seg);
    }
    pts
}

/// Maps a closed 3-d polyline onto the surface's parameter plane. Returns the
/// polygon and the net change of u around the loop (0 for a loop that closes
/// in uv, ±2π for one that winds around a periodic direction).
pub(crate) fn to_uv(surface: &SurfaceGeom, pts: &[Vec3]) -> (Vec<[f64; 2]>, f64) {
    let periodic = surface.u_periodic();
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    for p in pts {
        let (mut u, v) = surface.invert(p);
        if periodic {
            if let Some(prev) = out.last() {
                u += TAU * ((prev[0] - u) / TAU).round();
            }
        }
        out.push([u, v]);
    }
    let mut winding = 0.0;
    if periodic && out.len() > 1 {
        let (first, last) = (out[0][0], out[out.len() - 1][0]);
        winding = TAU * ((last - first) / TAU).round();
    }
    (out, winding)
}

pub(crate) fn domain_of(vertices: &[Vec3], edges: &[Edge], face: &Face, face_id: usize) -> Result<FaceDomain, BrepError> {
    let mut loops = Vec::new();
    for (k, lp) in face.loops().enumerate() {
        let pts = loop_points(vertices, edges, lp);
        if pts.len() < 2 {
            return Err(BrepError::Domain { face: face_id, message: format!("loop {k} is degenerate") });
        }
        let (mut uv, winding) = to_uv(&face.surface, &pts);
        if winding.abs() > PI {
            return Err(BrepError::Domain {
                face: face_id,
                message: "loop winds around the periodic direction without a seam".into(),
            });
        }
        if k > 0 && face.surface.u_periodic() {
            // Bring inner loops into the same period as the outer loop.
            let outer: &Vec<[f64; 2]> = &loops[0];
            let (lo, hi) = u_bounds(outer);
            let mid = 0.5 * (lo + hi);
            let c = uv.iter().map(|p| p[0]).sum::<f64>() / uv.len() as f64;
            let shift = TAU * ((mid - c) / TAU).round();
            for p in &mut uv {
                p[0] += shift;
            }
        }
        loops.push(uv);
    }
    let (u_min, u_max) = u_bounds(&loops[0]);
    let (v_min, v_max) = loops[0]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[1]), b.max(p[1])));
    Ok(FaceDomain { loops, u_min, u_max, v_min, v_max })
}

fn u_bounds(poly: &[[f64; 2]]) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[0]), b.max(p[0])))
}

/// Parameter domain of face `face`.
pub fn face_domain(solid: &BrepSolid, face: usize) -> Result<FaceDomain, BrepError> {
    domain_of(&solid.vertices, &solid.edges, &solid.faces[face], face)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_odd_with_hole() {
        let d = FaceDomain {
            loops: vec![
                vec![[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0]],
                vec![[1.0, 1.0], [1.0, 3.0], [3.0, 3.0], [3.0, 1.0]],
            ],
            u_min: 0.0,
            u_max: 4.0,
            v_min: 0.0,
            v_max: 4.0,
        };
        assert!(d.contains(0.5, 0.5));
        assert!(!d.contains(2.0, 2.0));
        assert!(!d.contains(5.0, 2.0));
        assert!((d.signed_area() - 12.0).abs() < 1e-12);
    }
}
