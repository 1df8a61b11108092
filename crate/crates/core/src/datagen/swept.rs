//! Profile sweeps: flanges joined by tangent arcs, extruded along y.

use super::{sample_fractions, Built, BuiltBend, DatagenError, FlangeDepth, GtHole, HoleHost, PartSpec};
use crate::brep::{BrepBuilder, EdgeSpec};
use crate::geom::{Frame, SurfaceGeom, Vec3};
use nalgebra::Vector2;
use std::f64::consts::{PI, TAU};

pub(crate) type V2 = Vector2<f64>;

pub(crate) fn rot2(v: V2, a: f64) -> V2 {
    let (s, c) = a.sin_cos();
    V2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Profile coordinates (x, z) at width position y.
pub(crate) fn lift(p: V2, y: f64) -> Vec3 {
    Vec3::new(p.x, y, p.y)
}

pub(super) fn dir3(v: V2) -> Vec3 {
    Vec3::new(v.x, 0.0, v.y)
}

#[derive(Debug, Clone)]
pub(crate) struct Flange2 {
    /// Lower-surface start point.
    pub lo0: V2,
    pub heading: V2,
    pub left: V2,
    pub depth: FlangeDepth,
}

impl Flange2 {
    pub fn lo_end(&self, frac: f64) -> V2 {
        self.lo0 + self.heading * self.depth.at(frac)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Bend2 {
    pub center: V2,
    pub direction: i8,
    pub angle: f64,
    pub lower_radius: f64,
    pub upper_radius: f64,
    pub lo_a: V2,
}

/// The side profile of a swept part. Upper surface = lower + t·left.
#[derive(Debug, Clone)]
pub(crate) struct Chain {
    pub t: f64,
    pub flanges: Vec<Flange2>,
    pub bends: Vec<Bend2>,
}

pub(crate) fn chain(spec: &PartSpec) -> Chain {
    let t = spec.thickness;
    let mut p = V2::zeros();
    let mut phi: f64 = 0.0;
    let mut flanges = Vec::new();
    let mut bends = Vec::new();
    for (k, depth) in spec.flanges.iter().enumerate() {
        let heading = V2::new(phi.cos(), phi.sin());
        let left = V2::new(-phi.sin(), phi.cos());
        let f = Flange2 { lo0: p, heading, left, depth: *depth };
        let end = f.lo_end(0.0);
        flanges.push(f);
        if let Some(b) = spec.bends.get(k) {
            let r = b.inner_radius;
            let (center, lower_radius, upper_radius) = if b.direction > 0 {
                (end + left * (t + r), r + t, r)
            } else {
                (end - left * r, r, r + t)
            };
            let signed = b.angle * b.direction as f64;
            let lo_b = center + rot2(end - center, signed);
            bends.push(Bend2 { center, direction: b.direction, angle: b.angle, lower_radius, upper_radius, lo_a: end });
            p = lo_b;
            phi += signed;
        }
    }
    Chain { t, flanges, bends }
}

impl Chain {
    fn up(&self, p: V2, left: V2) -> V2 {
        p + left * self.t
    }

    /// Mid-surface polyline of each profile element (flange, bend, flange, …).
    pub fn midline_elements(&self) -> Vec<Vec<V2>> {
        let mut out = Vec::new();
        for (k, f) in self.flanges.iter().enumerate() {
            let h = self.t * 0.5;
            let d = f.depth.at(0.0).max(f.depth.at(1.0));
            out.push(vec![f.lo0 + f.left * h, f.lo0 + f.heading * d + f.left * h]);
            if let Some(b) = self.bends.get(k) {
                let r_mid = 0.5 * (b.lower_radius + b.upper_radius);
                let start = b.lo_a + f.left * h - b.center;
                let start = start.normalize() * r_mid;
                let n = 16;
                let signed = b.angle * b.direction as f64;
                out.push((0..=n).map(|i| b.center + rot2(start, signed * i as f64 / n as f64)).collect());
            }
        }
        out
    }
}

fn seg_dist2(p: V2, q: V2, a: V2, b: V2) -> f64 {
    let p3 = Vec3::new(p.x, p.y, 0.0);
    let q3 = Vec3::new(q.x, q.y, 0.0);
    let a3 = Vec3::new(a.x, a.y, 0.0);
    let b3 = Vec3::new(b.x, b.y, 0.0);
    crate::geom::segment_distance(&p3, &q3, &a3, &b3)
}

/// Minimum mid-surface distance between profile elements at least three apart.
pub(crate) fn min_clearance(c: &Chain) -> f64 {
    let els = c.midline_elements();
    let mut best = f64::INFINITY;
    for i in 0..els.len() {
        for j in i + 3..els.len() {
            for a in els[i].windows(2) {
                for b in els[j].windows(2) {
                    best = best.min(seg_dist2(a[0], a[1], b[0], b[1]));
                }
            }
        }
    }
    best
}

struct Ctx {
    b: BrepBuilder,
    areas: Vec<f64>,
}

impl Ctx {
    fn face(
        &mut self,
        surface: SurfaceGeom,
        sense: bool,
        outer: &[EdgeSpec],
        inners: &[Vec<EdgeSpec>],
        area: f64,
    ) -> Result<usize, DatagenError> {
        let id = self.b.add_face(surface, sense, outer, inners)?;
        self.areas.push(area);
        Ok(id)
    }
}

pub(super) fn line(a: Vec3, b: Vec3) -> EdgeSpec {
    EdgeSpec::Line { a, b }
}

pub(super) fn circle(center: Vec3, axis: Vec3, radius: f64, start_dir: Vec3) -> EdgeSpec {
    let a = center + start_dir * radius;
    EdgeSpec::Arc { center, axis, radius, a, b: a, sweep: TAU }
}

/// Quad face loop through a → b at y = 0 and back at y = W.
pub(super) fn strip(a0: Vec3, b0: Vec3, a1: Vec3, b1: Vec3) -> Vec<EdgeSpec> {
    vec![line(a0, b0), line(b0, b1), line(b1, a1), line(a1, a0)]
}

pub(crate) fn build(spec: &PartSpec, width: f64) -> Result<Built, DatagenError> {
    let c = chain(spec);
    let t = c.t;
    let n = c.bends.len();
    let w = width;
    let ylo = |p: V2| lift(p, 0.0);
    let yhi = |p: V2| lift(p, w);
    let mut cx = Ctx { b: BrepBuilder::new(), areas: Vec::new() };

    let shell_holes: Vec<_> = spec.holes.iter().filter(|h| !h.side).collect();
    let side_holes: Vec<_> = spec.holes.iter().filter(|h| h.side).collect();

    // Arc edge specs of bend k on one surface at width y, traversed a → b.
    let bend_arc = |b: &Bend2, upper: bool, y: f64, left_before: V2| -> EdgeSpec {
        let (a, radius) = if upper { (b.lo_a + left_before * t, b.upper_radius) } else { (b.lo_a, b.lower_radius) };
        let signed = b.angle * b.direction as f64;
        let end = b.center + rot2(a - b.center, signed);
        EdgeSpec::Arc {
            center: lift(b.center, y),
            axis: Vec3::new(0.0, -(b.direction as f64), 0.0),
            radius,
            a: lift(a, y),
            b: lift(end, y),
            sweep: b.angle,
        }
    };

    let mut upper = Vec::new();
    let mut lower = Vec::new();
    let mut built_bends = Vec::new();
    for upper_side in [true, false] {
        for k in 0..=n {
            let f = &c.flanges[k];
            let off = if upper_side { f.left * t } else { V2::zeros() };
            let (p0, p1_lo, p1_hi) = (f.lo0 + off, f.lo_end(0.0) + off, f.lo_end(1.0) + off);
            let frame = Frame::new(lift(p0, 0.0), dir3(f.left), dir3(f.heading))?;
            let mut inners = Vec::new();
            let mut hole_area = 0.0;
            for h in shell_holes.iter().filter(|h| h.flange == k) {
                let rho = 0.5 * h.diameter;
                let centre = lift(f.lo0 + f.heading * h.along + off, h.across);
                inners.push(vec![circle(centre, dir3(f.left), rho, dir3(f.heading))]);
                hole_area += PI * rho * rho;
            }
            let area = 0.5 * (f.depth.at(0.0) + f.depth.at(1.0)) * w - hole_area;
            let id = cx.face(
                SurfaceGeom::Plane { frame },
                upper_side,
                &strip(ylo(p0), ylo(p1_lo), yhi(p0), yhi(p1_hi)),
                &inners,
                area,
            )?;
            if upper_side { upper.push(id) } else { lower.push(id) }

            if let Some(b) = c.bends.get(k) {
                let arc0 = bend_arc(b, upper_side, 0.0, f.left);
                let arc1 = bend_arc(b, upper_side, w, f.left);
                let radius = if upper_side { b.upper_radius } else { b.lower_radius };
                let frame = Frame::new(lift(b.center, 0.0), Vec3::y(), arc0.start() - lift(b.center, 0.0))?;
                let concave = (b.direction > 0) == upper_side;
                let outer = vec![arc0.clone(), line(arc0.end(), arc1.end()), arc1.reversed(), line(arc1.start(), arc0.start())];
                let id = cx.face(SurfaceGeom::Cylinder { frame, radius }, !concave, &outer, &[], radius * b.angle * w)?;
                if upper_side { upper.push(id) } else { lower.push(id) }
            }
        }
    }

    // End caps.
    let f0 = &c.flanges[0];
    let cap0 = strip(ylo(f0.lo0), ylo(f0.lo0 + f0.left * t), yhi(f0.lo0), yhi(f0.lo0 + f0.left * t));
    let frame0 = Frame::new(lift(f0.lo0, 0.0), -dir3(f0.heading), dir3(f0.left))?;
    cx.face(SurfaceGeom::Plane { frame: frame0 }, true, &cap0, &[], t * w)?;
    let fl = &c.flanges[n];
    let (e0, e1) = (fl.lo_end(0.0), fl.lo_end(1.0));
    let cap1 = strip(ylo(e0), ylo(e0 + fl.left * t), yhi(e1), yhi(e1 + fl.left * t));
    let slant = lift(e1, w) - lift(e0, 0.0);
    let mut normal = dir3(fl.left).cross(&slant).normalize();
    if normal.dot(&dir3(fl.heading)) < 0.0 {
        normal = -normal;
    }
    let frame1 = Frame::new(lift(e0, 0.0), normal, dir3(fl.left))?;
    cx.face(SurfaceGeom::Plane { frame: frame1 }, true, &cap1, &[], t * slant.norm())?;

    // Profile faces at y = 0 and y = W.
    for (y, frac, normal) in [(0.0, 0.0, -Vec3::y()), (w, 1.0, Vec3::y())] {
        let mut loop_specs = Vec::new();
        let mut area = 0.0;
        for k in 0..=n {
            let f = &c.flanges[k];
            loop_specs.push(line(lift(f.lo0, y), lift(f.lo_end(frac), y)));
            area += f.depth.at(frac) * t;
            if let Some(b) = c.bends.get(k) {
                loop_specs.push(bend_arc(b, false, y, f.left));
                area += 0.5 * b.angle * (b.lower_radius.powi(2) - b.upper_radius.powi(2)).abs();
            }
        }
        let fe = &c.flanges[n];
        loop_specs.push(line(lift(fe.lo_end(frac), y), lift(c.up(fe.lo_end(frac), fe.left), y)));
        for k in (0..=n).rev() {
            let f = &c.flanges[k];
            loop_specs.push(line(lift(c.up(f.lo_end(frac), f.left), y), lift(c.up(f.lo0, f.left), y)));
            if k > 0 {
                loop_specs.push(bend_arc(&c.bends[k - 1], true, y, c.flanges[k - 1].left).reversed());
            }
        }
        let mut specs = loop_specs;
        specs.push(line(lift(c.up(f0.lo0, f0.left), y), lift(f0.lo0, y)));
        let mut inners = Vec::new();
        for h in &side_holes {
            let f = &c.flanges[h.flange];
            let rho = 0.5 * h.diameter;
            let centre = lift(f.lo0 + f.heading * h.along + f.left * (0.5 * t), y);
            inners.push(vec![circle(centre, Vec3::y(), rho, dir3(f.heading))]);
            area -= PI * rho * rho;
        }
        let frame = Frame::new(Vec3::new(0.0, y, 0.0), normal, Vec3::x())?;
        cx.face(SurfaceGeom::Plane { frame }, true, &specs, &inners, area)?;
    }

    let mut holes = Vec::new();
    for h in &shell_holes {
        let f = &c.flanges[h.flange];
        let rho = 0.5 * h.diameter;
        let cl = lift(f.lo0 + f.heading * h.along, h.across);
        let cu = cl + dir3(f.left) * t;
        let x = dir3(f.heading);
        let bottom = circle(cl, dir3(f.left), rho, x);
        let top = circle(cu, -dir3(f.left), rho, x);
        let al = cl + x * rho;
        let au = cu + x * rho;
        let frame = Frame::new(cl, dir3(f.left), x)?;
        let id = cx.face(
            SurfaceGeom::Cylinder { frame, radius: rho },
            false,
            &[bottom, line(al, au), top, line(au, al)],
            &[],
            TAU * rho * t,
        )?;
        holes.push(GtHole { wall_faces: vec![id], host: HoleHost::Shell, diameter: Some(h.diameter), is_side_hole: false });
    }
    for h in &side_holes {
        let f = &c.flanges[h.flange];
        let rho = 0.5 * h.diameter;
        let c0 = lift(f.lo0 + f.heading * h.along + f.left * (0.5 * t), 0.0);
        let c1 = c0 + Vec3::y() * w;
        let x = dir3(f.heading);
        let (a0, a1) = (c0 + x * rho, c1 + x * rho);
        let frame = Frame::new(c0, Vec3::y(), x)?;
        let id = cx.face(
            SurfaceGeom::Cylinder { frame, radius: rho },
            false,
            &[circle(c0, Vec3::y(), rho, x), line(a0, a1), circle(c1, -Vec3::y(), rho, x), line(a1, a0)],
            &[],
            TAU * rho * w,
        )?;
        holes.push(GtHole { wall_faces: vec![id], host: HoleHost::Side, diameter: Some(h.diameter), is_side_hole: true });
    }

    for (k, b) in c.bends.iter().enumerate() {
        let fb = &c.flanges[k];
        let fa = &c.flanges[k + 1];
        let samples = |f: &Flange2| -> Vec<f64> { sample_fractions().iter().map(|&s| f.depth.at(s)).collect() };
        let inner_side_pieces = if b.direction > 0 { &upper } else { &lower };
        built_bends.push(BuiltBend {
            upper_face: upper[2 * k + 1],
            lower_face: lower[2 * k + 1],
            direction: b.direction,
            inner_radius: spec.bends[k].inner_radius,
            angle: b.angle,
            length: w,
            before: (inner_side_pieces[2 * k], samples(fb)),
            after: (inner_side_pieces[2 * k + 2], samples(fa)),
            axis: [lift(b.center, 0.0), lift(b.center, w)],
            shares_vertex_with: Vec::new(),
        });
    }

    let h = spec.holes.len();
    let solid = cx.b.build()?;
    Ok(Built {
        solid,
        upper,
        lower,
        face_areas: cx.areas,
        bends: built_bends,
        holes,
        vertex_count: 8 * n + 8 + 2 * h,
        edge_count: 12 * n + 12 + 3 * h,
    })
}
