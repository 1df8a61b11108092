//! Whole-solid measures: areas, flux, bounding box, thickness, Euler counts.

use super::domain::{domain_of, FaceDomain};
use super::{BrepError, BrepSolid, Coedge, Face};
use crate::geom::quadrature::gauss_legendre_on;
use crate::geom::{CurveGeom, Frame, SurfaceGeom, Vec3};
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

const GAUSS_N: usize = 32;
const OVERLAP_SAMPLES: usize = 16;
const THICKNESS_BIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlobalAttributes {
    pub thickness: f64,
    pub total_area: f64,
    pub bbox_volume: f64,
}

impl GlobalAttributes {
    pub fn to_array(&self) -> [f64; 3] {
        [self.thickness, self.total_area, self.bbox_volume]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EulerCounts {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub inner_loops: usize,
}

impl EulerCounts {
    /// V − E + F.
    pub fn chi(&self) -> i64 {
        self.vertices as i64 - self.edges as i64 + self.faces as i64
    }

    /// Genus from V − E + F − (L − F) = 2 − 2g, or None when the parity is off.
    pub fn genus(&self) -> Option<i64> {
        let lhs = self.chi() - self.inner_loops as i64;
        if (2 - lhs) % 2 != 0 || lhs > 2 {
            None
        } else {
            Some((2 - lhs) / 2)
        }
    }
}

pub fn euler_counts(solid: &BrepSolid) -> EulerCounts {
    EulerCounts {
        vertices: solid.vertices.len(),
        edges: solid.edges.len(),
        faces: solid.faces.len(),
        inner_loops: solid.faces.iter().map(|f| f.inners.len()).sum(),
    }
}

fn project(frame: &Frame, p: &Vec3) -> [f64; 2] {
    let d = p - frame.origin;
    [d.dot(&frame.x), d.dot(&frame.y)]
}

/// ∮ ½(x dy − y dx) over one coedge, in the plane's own 2-d coordinates.
fn green_plane(solid: &BrepSolid, frame: &Frame, c: &Coedge) -> f64 {
    let e = &solid.edges[c.edge];
    let (s, t) = if c.forward { (e.start, e.end) } else { (e.end, e.start) };
    match &e.curve {
        CurveGeom::Circle { frame: cf, radius } if cf.z.cross(&frame.z).norm() < 1e-9 => {
            let (a, b) = e.params(&solid.vertices);
            let mut delta = if c.forward { b - a } else { a - b };
            if cf.z.dot(&frame.z) < 0.0 {
                delta = -delta;
            }
            let c2 = project(frame, &cf.origin);
            let p0 = project(frame, &solid.vertices[s]);
            let p1 = project(frame, &solid.vertices[t]);
            0.5 * (radius * radius * delta + c2[0] * (p1[1] - p0[1]) - c2[1] * (p1[0] - p0[0]))
        }
        _ => {
            let mut pts = e.sample(&solid.vertices);
            if !c.forward {
                pts.reverse();
            }
            pts.windows(2)
                .map(|w| {
                    let (a, b) = (project(frame, &w[0]), project(frame, &w[1]));
                    0.5 * (a[0] * b[1] - b[0] * a[1])
                })
                .sum()
        }
    }
}

fn plane_signed_area(solid: &BrepSolid, face: &Face, frame: &Frame) -> f64 {
    face.loops().flat_map(|l| l.coedges.iter()).map(|c| green_plane(solid, frame, c)).sum()
}

fn area_element(surface: &SurfaceGeom, u: f64, v: f64) -> f64 {
    match surface {
        SurfaceGeom::Plane { .. } => 1.0,
        SurfaceGeom::Cylinder { radius, .. } => *radius,
        SurfaceGeom::Sphere { radius, .. } => radius * radius * v.cos().abs(),
        SurfaceGeom::Torus { major_radius, minor_radius, .. } => minor_radius * (major_radius + minor_radius * v.cos()).abs(),
        SurfaceGeom::BSpline(s) => s.eval_derivs(u, v).map(|(_, a, b)| a.cross(&b).norm()).unwrap_or(0.0),
    }
}

/// Gauss–Legendre quadrature of `f(u, v)·dA` over the trimmed region.
fn masked_quadrature(face: &Face, dom: &FaceDomain, mut f: impl FnMut(f64, f64, f64)) {
    let us = gauss_legendre_on(GAUSS_N, dom.u_min, dom.u_max);
    let vs = gauss_legendre_on(GAUSS_N, dom.v_min, dom.v_max);
    for &(u, wu) in &us {
        for &(v, wv) in &vs {
            if dom.contains(u, v) {
                f(u, v, wu * wv * area_element(&face.surface, u, v));
            }
        }
    }
}

/// Area of face `f` in mm².
pub fn face_area(solid: &BrepSolid, f: usize) -> Result<f64, BrepError> {
    let face = &solid.faces[f];
    match &face.surface {
        SurfaceGeom::Plane { frame } => Ok(plane_signed_area(solid, face, frame).abs()),
        SurfaceGeom::Cylinder { radius, .. } => {
            let dom = domain_of(&solid.vertices, &solid.edges, face, f)?;
            Ok(radius * dom.signed_area().abs())
        }
        _ => {
            let dom = domain_of(&solid.vertices, &solid.edges, face, f)?;
            let mut total = 0.0;
            masked_quadrature(face, &dom, |_, _, w| total += w);
            Ok(total)
        }
    }
}

/// ∫ n dA over the whole boundary; zero for a closed, consistently oriented shell.
pub fn flux(solid: &BrepSolid) -> Result<Vec3, BrepError> {
    let mut total = Vec3::zeros();
    for (fi, face) in solid.faces.iter().enumerate() {
        match &face.surface {
            SurfaceGeom::Plane { frame } => total += frame.z * plane_signed_area(solid, face, frame),
            SurfaceGeom::Cylinder { frame, radius } => {
                let dom = domain_of(&solid.vertices, &solid.edges, face, fi)?;
                let (mut sx, mut sy) = (0.0, 0.0);
                for poly in &dom.loops {
                    for i in 0..poly.len() {
                        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
                        let dv = b[1] - a[1];
                        let du = b[0] - a[0];
                        if du.abs() < 1e-14 {
                            sx += dv * a[0].sin();
                            sy -= dv * a[0].cos();
                        } else {
                            sx += dv / du * (a[0].cos() - b[0].cos());
                            sy -= dv / du * (b[0].sin() - a[0].sin());
                        }
                    }
                }
                total += (frame.x * sx + frame.y * sy) * *radius;
            }
            _ => {
                let dom = domain_of(&solid.vertices, &solid.edges, face, fi)?;
                let mut acc = Vec3::zeros();
                masked_quadrature(face, &dom, |u, v, w| {
                    if let Ok((_, n)) = face.normal_uv(u, v) {
                        acc += n * w;
                    }
                });
                total += acc;
            }
        }
    }
    Ok(total)
}

fn arc_contains(a: f64, b: f64, t: f64) -> bool {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let k = ((t - lo) / TAU).floor();
    let t = t - k * TAU;
    t <= hi + 1e-12
}

/// Axis-aligned bounding box of the boundary. Exact for lines and circles.
pub fn bbox(solid: &BrepSolid) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    let mut add = |p: &Vec3| {
        lo = lo.inf(p);
        hi = hi.sup(p);
    };
    for v in &solid.vertices {
        add(v);
    }
    for e in &solid.edges {
        match &e.curve {
            CurveGeom::Line { .. } => {}
            CurveGeom::Circle { frame, .. } => {
                let (a, b) = e.params(&solid.vertices);
                for k in 0..3 {
                    let t0 = frame.y[k].atan2(frame.x[k]);
                    for t in [t0, t0 + PI] {
                        if arc_contains(a, b, t) {
                            if let Ok(p) = e.curve.eval(t) {
                                add(&p);
                            }
                        }
                    }
                }
            }
            CurveGeom::BSpline(_) => e.sample(&solid.vertices).iter().for_each(&mut add),
        }
    }
    (lo, hi)
}

/// Two planar faces with opposite normals, `b` lying behind `a` (inside the
/// material) at `distance`, whose projections overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanePair {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    /// min(area a, area b).
    pub weight: f64,
}

fn interior_samples(face: &Face, dom: &FaceDomain, n: usize) -> Vec<Vec3> {
    let mut pts = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let u = dom.u_min + (i as f64 + 0.5) / n as f64 * dom.u_span();
            let v = dom.v_min + (j as f64 + 0.5) / n as f64 * dom.v_span();
            if dom.contains(u, v) {
                if let Ok((p, _)) = face.surface.eval(u, v) {
                    pts.push(p);
                }
            }
        }
    }
    pts
}

/// All opposite-normal planar face pairs with overlapping projections.
pub fn plane_pairs(solid: &BrepSolid) -> Result<Vec<PlanePair>, BrepError> {
    struct P {
        id: usize,
        frame: Frame,
        normal: Vec3,
        dom: FaceDomain,
        area: f64,
        samples: Vec<Vec3>,
    }
    let mut planes = Vec::new();
    for (i, f) in solid.faces.iter().enumerate() {
        if let SurfaceGeom::Plane { frame } = &f.surface {
            let dom = domain_of(&solid.vertices, &solid.edges, f, i)?;
            let samples = interior_samples(f, &dom, OVERLAP_SAMPLES);
            let normal = if f.sense { frame.z } else { -frame.z };
            planes.push(P { id: i, frame: *frame, normal, dom, area: face_area(solid, i)?, samples });
        }
    }
    let overlaps = |a: &P, b: &P| {
        b.samples.iter().any(|p| {
            let q = project(&a.frame, p);
            a.dom.contains(q[0], q[1])
        })
    };
    let mut out = Vec::new();
    for (i, a) in planes.iter().enumerate() {
        for b in &planes[i + 1..] {
            if a.normal.dot(&b.normal) > -(1.0 - 1e-9) {
                continue;
            }
            let d = (a.frame.origin - b.frame.origin).dot(&a.normal);
            if d <= 1e-9 {
                continue;
            }
            if overlaps(a, b) || overlaps(b, a) {
                out.push(PlanePair { a: a.id, b: b.id, distance: d, weight: a.area.min(b.area) });
            }
        }
    }
    Ok(out)
}

/// Area-weighted mode of plane-pair distances, binned at 1e-3 mm.
pub fn thickness_from_pairs(pairs: &[PlanePair]) -> Result<f64, BrepError> {
    let mut bins: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
    for p in pairs {
        let key = (p.distance / THICKNESS_BIN).round() as i64;
        let e = bins.entry(key).or_insert((0.0, 0.0, 0));
        e.0 += p.weight;
        e.1 += p.distance;
        e.2 += 1;
    }
    let mut best: Option<(i64, f64)> = None;
    for (&k, &(w, _, _)) in &bins {
        // Ascending keys: a strictly larger weight is needed to replace, so ties keep the thinner bin.
        if best.map_or(true, |(_, bw)| w > bw * (1.0 + 1e-9)) {
            best = Some((k, w));
        }
    }
    let (k, _) = best.ok_or(BrepError::ThicknessUndeterminable)?;
    let (_, sum, n) = bins[&k];
    Ok(sum / n as f64)
}

pub fn global_attributes(solid: &BrepSolid) -> Result<GlobalAttributes, BrepError> {
    let thickness = thickness_from_pairs(&plane_pairs(solid)?)?;
    let mut total_area = 0.0;
    for f in 0..solid.faces.len() {
        total_area += face_area(solid, f)?;
    }
    let (lo, hi) = bbox(solid);
    let d = hi - lo;
    Ok(GlobalAttributes { thickness, total_area, bbox_volume: d.x * d.y * d.z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brep::builder::box_solid;

    #[test]
    fn plate_closed_forms() {
        let s = box_solid(Vec3::zeros(), Vec3::new(100.0, 50.0, 2.0)).unwrap();
        let g = global_attributes(&s).unwrap();
        assert!((g.thickness - 2.0).abs() < 1e-12);
        assert!((g.total_area - 10600.0).abs() < 1e-9);
        assert!((g.bbox_volume - 10000.0).abs() < 1e-9);
        assert!(flux(&s).unwrap().norm() < 1e-9);
        let c = euler_counts(&s);
        assert_eq!((c.chi(), c.genus()), (2, Some(0)));
    }

    #[test]
    fn cube_thickness_is_its_side() {
        let s = box_solid(Vec3::zeros(), Vec3::repeat(50.0)).unwrap();
        assert!((global_attributes(&s).unwrap().thickness - 50.0).abs() < 1e-12);
    }

    #[test]
    fn empty_pairs_are_an_error() {
        assert_eq!(thickness_from_pairs(&[]), Err(BrepError::ThicknessUndeterminable));
    }
}
