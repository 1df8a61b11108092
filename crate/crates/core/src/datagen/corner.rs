//! Corner template: two bends folded up from adjacent edges of a base plate.

use super::swept::{line, rot2, strip, V2};
use super::{Built, BuiltBend, DatagenError, PartSpec};
use crate::brep::{BrepBuilder, EdgeSpec};
use crate::featrec::sample_fractions;
use crate::geom::{Frame, SurfaceGeom, Vec3};

/// One folded arm. Profile coordinates (s, z): s runs across the bend line,
/// `w` along it.
struct Arm {
    s_dir: Vec3,
    w_dir: Vec3,
    base_len: f64,
    /// Extrusion length along `w_dir`.
    length: f64,
    t: f64,
    r: f64,
    angle: f64,
    depth: f64,
}

impl Arm {
    fn map(&self, p: V2, w: f64) -> Vec3 {
        self.s_dir * p.x + Vec3::z() * p.y + self.w_dir * w
    }

    fn dir(&self, v: V2) -> Vec3 {
        self.s_dir * v.x + Vec3::z() * v.y
    }

    fn center(&self) -> V2 {
        V2::new(self.base_len, self.t + self.r)
    }

    /// Tangency points (lower, upper) at the bend start and end.
    fn a(&self) -> (V2, V2) {
        (V2::new(self.base_len, 0.0), V2::new(self.base_len, self.t))
    }

    fn b(&self) -> (V2, V2) {
        let c = self.center();
        let (lo, up) = self.a();
        (c + rot2(lo - c, self.angle), c + rot2(up - c, self.angle))
    }

    fn heading(&self) -> V2 {
        V2::new(self.angle.cos(), self.angle.sin())
    }

    fn left(&self) -> V2 {
        V2::new(-self.angle.sin(), self.angle.cos())
    }

    fn e(&self) -> (V2, V2) {
        let (lo, up) = self.b();
        (lo + self.heading() * self.depth, up + self.heading() * self.depth)
    }

    fn arc(&self, upper: bool, w: f64) -> EdgeSpec {
        let (alo, aup) = self.a();
        let (blo, bup) = self.b();
        let (a, b, radius) = if upper { (aup, bup, self.r) } else { (alo, blo, self.r + self.t) };
        EdgeSpec::Arc {
            center: self.map(self.center(), w),
            axis: self.s_dir.cross(&Vec3::z()),
            radius,
            a: self.map(a, w),
            b: self.map(b, w),
            sweep: self.angle,
        }
    }

    fn section_area(&self) -> f64 {
        0.5 * self.angle * ((self.r + self.t).powi(2) - self.r.powi(2)) + self.depth * self.t
    }

    /// Bend and flange section at `w`, from the lower tangency point back to the upper one.
    fn section(&self, w: f64) -> Vec<EdgeSpec> {
        let (blo, bup) = self.b();
        let (elo, eup) = self.e();
        vec![
            self.arc(false, w),
            line(self.map(blo, w), self.map(elo, w)),
            line(self.map(elo, w), self.map(eup, w)),
            line(self.map(eup, w), self.map(bup, w)),
            self.arc(true, w).reversed(),
        ]
    }
}

pub(crate) fn build(spec: &PartSpec, base_x: f64, base_y: f64) -> Result<Built, DatagenError> {
    if spec.bends.len() != 2 || spec.flanges.len() != 2 {
        return Err(DatagenError::Unrealizable("corner template needs two bends and two flanges".into()));
    }
    let t = spec.thickness;
    let arms = [
        Arm {
            s_dir: Vec3::x(),
            w_dir: Vec3::y(),
            base_len: base_x,
            length: base_y,
            t,
            r: spec.bends[0].inner_radius,
            angle: spec.bends[0].angle,
            depth: spec.flanges[0].min(),
        },
        Arm {
            s_dir: Vec3::y(),
            w_dir: Vec3::x(),
            base_len: base_y,
            length: base_x,
            t,
            r: spec.bends[1].inner_radius,
            angle: spec.bends[1].angle,
            depth: spec.flanges[1].min(),
        },
    ];
    for (k, b) in spec.bends.iter().enumerate() {
        if b.direction != 1 || !(b.angle > 0.0 && b.angle <= std::f64::consts::FRAC_PI_2 + 1e-12) {
            return Err(DatagenError::Unrealizable(format!("corner bend {k} must fold up by at most 90 degrees")));
        }
    }

    let mut bld = BrepBuilder::new();
    let mut areas = Vec::new();
    let mut face = |bld: &mut BrepBuilder, s: SurfaceGeom, sense: bool, outer: &[EdgeSpec], area: f64| {
        areas.push(area);
        bld.add_face(s, sense, outer, &[])
    };
    let (x, y) = (base_x, base_y);
    let p = |a: f64, b: f64, c: f64| Vec3::new(a, b, c);

    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for up in [true, false] {
        let z = if up { t } else { 0.0 };
        let frame = Frame::new(p(0.0, 0.0, z), Vec3::z(), Vec3::x())?;
        let base = vec![
            line(p(0.0, 0.0, z), p(x, 0.0, z)),
            line(p(x, 0.0, z), p(x, y, z)),
            line(p(x, y, z), p(0.0, y, z)),
            line(p(0.0, y, z), p(0.0, 0.0, z)),
        ];
        let id = face(&mut bld, SurfaceGeom::Plane { frame }, up, &base, x * y)?;
        let pieces = if up { &mut upper } else { &mut lower };
        pieces.push(id);
        for arm in &arms {
            let w = arm.length;
            let arc0 = arm.arc(up, 0.0);
            let arc1 = arm.arc(up, w);
            let radius = if up { arm.r } else { arm.r + t };
            let centre = arm.map(arm.center(), 0.0);
            let frame = Frame::new(centre, arm.w_dir, arc0.start() - centre)?;
            let outer = vec![arc0.clone(), line(arc0.end(), arc1.end()), arc1.reversed(), line(arc1.start(), arc0.start())];
            let id = face(&mut bld, SurfaceGeom::Cylinder { frame, radius }, !up, &outer, radius * arm.angle * w)?;
            pieces.push(id);

            let (blo, bup) = arm.b();
            let (elo, eup) = arm.e();
            let (b, e) = if up { (bup, eup) } else { (blo, elo) };
            let frame = Frame::new(arm.map(b, 0.0), arm.dir(arm.left()), arm.dir(arm.heading()))?;
            let outer = strip(arm.map(b, 0.0), arm.map(e, 0.0), arm.map(b, w), arm.map(e, w));
            let id = face(&mut bld, SurfaceGeom::Plane { frame }, up, &outer, arm.depth * w)?;
            pieces.push(id);
        }
    }
    for arm in &arms {
        let (elo, eup) = arm.e();
        let w = arm.length;
        let frame = Frame::new(arm.map(elo, 0.0), arm.dir(arm.heading()), arm.dir(arm.left()))?;
        let outer = strip(arm.map(elo, 0.0), arm.map(eup, 0.0), arm.map(elo, w), arm.map(eup, w));
        face(&mut bld, SurfaceGeom::Plane { frame }, true, &outer, t * w)?;
    }
    // Full profiles at w = 0, then the partial ones at the far end.
    for arm in &arms {
        let (alo, aup) = arm.a();
        let mut outer = vec![line(arm.map(V2::zeros(), 0.0), arm.map(alo, 0.0))];
        outer.extend(arm.section(0.0));
        outer.push(line(arm.map(aup, 0.0), arm.map(V2::new(0.0, t), 0.0)));
        outer.push(line(arm.map(V2::new(0.0, t), 0.0), arm.map(V2::zeros(), 0.0)));
        let frame = Frame::new(Vec3::zeros(), -arm.w_dir, arm.s_dir)?;
        face(&mut bld, SurfaceGeom::Plane { frame }, true, &outer, arm.base_len * t + arm.section_area())?;
    }
    for arm in &arms {
        let w = arm.length;
        let (alo, aup) = arm.a();
        let mut outer = arm.section(w);
        outer.push(line(arm.map(aup, w), arm.map(alo, w)));
        let frame = Frame::new(arm.map(alo, w), arm.w_dir, arm.s_dir)?;
        face(&mut bld, SurfaceGeom::Plane { frame }, true, &outer, arm.section_area())?;
    }

    let solid = bld.build()?;
    let bends = arms
        .iter()
        .enumerate()
        .map(|(k, arm)| {
            let c0 = arm.map(arm.center(), 0.0);
            BuiltBend {
                upper_face: upper[1 + 2 * k],
                lower_face: lower[1 + 2 * k],
                direction: 1,
                inner_radius: arm.r,
                angle: arm.angle,
                length: arm.length,
                before: (upper[0], vec![arm.base_len; sample_fractions().len()]),
                after: (upper[2 + 2 * k], vec![arm.depth; sample_fractions().len()]),
                axis: [c0, c0 + arm.w_dir * arm.length],
                shares_vertex_with: vec![1 - k],
            }
        })
        .collect();
    Ok(Built { solid, upper, lower, face_areas: areas, bends, holes: Vec::new(), vertex_count: 24, edge_count: 38 })
}
