use super::{sample_fractions, BendFeature, CylFeature, FeatrecError, FlangeStats, Role, FLANGE_SAMPLES};
use crate::brep::{loop_points, BrepSolid, Dihedral, FaceAdjacencyGraph};
use crate::geom::{segment_distance, SurfaceGeom, Vec3};

/// Minimum number of rays that must reach the outer loop.
const MIN_VALID_RAYS: usize = 8;
const RAY_EPS: f64 = 1e-7;

fn planar_smooth_neighbors(solid: &BrepSolid, aag: &FaceAdjacencyGraph, roles: &[Role], face: usize) -> Vec<usize> {
    let mut out: Vec<usize> = aag
        .edges
        .iter()
        .filter(|e| e.dihedral == Dihedral::Smooth && (e.a == face || e.b == face))
        .map(|e| if e.a == face { e.b } else { e.a })
        .filter(|&g| roles[g] != Role::Side && matches!(solid.faces[g].surface, SurfaceGeom::Plane { .. }))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Pairs coaxial cylinders on opposite shells whose radii differ by the
/// sheet thickness and which are tangent to planar shell faces on both ends.
pub fn recognize_bends(
    solid: &BrepSolid,
    aag: &FaceAdjacencyGraph,
    cylinders: &[CylFeature],
    roles: &[Role],
    thickness: f64,
) -> Result<Vec<BendFeature>, FeatrecError> {
    let mut found: Vec<(&CylFeature, &CylFeature)> = Vec::new();
    for (i, a) in cylinders.iter().enumerate() {
        for b in &cylinders[i + 1..] {
            let (ra, rb) = (roles[a.face], roles[b.face]);
            if ra == Role::Side || rb == Role::Side || ra == rb || !a.coaxial(b) {
                continue;
            }
            if ((a.radius - b.radius).abs() - thickness).abs() > 1e-6 * thickness {
                continue;
            }
            let (inner, outer) = if a.radius < b.radius { (a, b) } else { (b, a) };
            if planar_smooth_neighbors(solid, aag, roles, inner.face).len() < 2
                || planar_smooth_neighbors(solid, aag, roles, outer.face).len() < 2
            {
                continue;
            }
            found.push((inner, outer));
        }
    }
    found.sort_by_key(|(i, _)| i.face);

    let mut bends = Vec::with_capacity(found.len());
    for (k, (inner, outer)) in found.into_iter().enumerate() {
        let sides = planar_smooth_neighbors(solid, aag, roles, inner.face);
        let (fa, fb) = (sides[0], sides[1]);
        let stats = |f: usize| -> Result<FlangeStats, FeatrecError> {
            let xs = flange_stats(solid, inner, f);
            if xs.len() < MIN_VALID_RAYS {
                return Err(FeatrecError::FlangeRays { bend: k, face: f, valid: xs.len() });
            }
            Ok(FlangeStats::from_samples(&xs).expect("non-empty"))
        };
        bends.push(BendFeature {
            inner_face: inner.face,
            outer_face: outer.face,
            inner_radius: inner.radius,
            outer_radius: outer.radius,
            length: inner.axial_length,
            bend_angle: inner.arc_angle,
            orientation: if roles[inner.face] == Role::Top { 1 } else { -1 },
            side_a_face: fa,
            side_b_face: fb,
            flange_a: stats(fa)?,
            flange_b: stats(fb)?,
            corner_partners: Vec::new(),
            axis: inner.axis_segment(),
        });
    }
    Ok(bends)
}

/// Flange lengths along a bend: rays cast in the flange plane from the
/// tangency line, perpendicular to the axis and away from the bend, to the
/// first crossing of the flange face's outer loop. Returns the valid samples.
pub fn flange_stats(solid: &BrepSolid, inner: &CylFeature, flange_face: usize) -> Vec<f64> {
    let face = &solid.faces[flange_face];
    let SurfaceGeom::Plane { frame } = &face.surface else {
        return Vec::new();
    };
    let n = frame.z;
    let a = inner.axis_dir;
    let Some(mut d) = a.cross(&n).try_normalize(1e-12) else {
        return Vec::new();
    };
    let outer = loop_points(&solid.vertices, &solid.edges, &face.outer);
    let foot = |q: Vec3| q - n * (q - frame.origin).dot(&n);
    let o_mid = foot(inner.axis_point + a * (0.5 * (inner.v_range.0 + inner.v_range.1)));
    let towards: f64 = outer.iter().map(|p| (p - o_mid).dot(&d)).sum();
    if towards < 0.0 {
        d = -d;
    }
    let (v0, v1) = inner.v_range;
    let mut out = Vec::with_capacity(FLANGE_SAMPLES);
    for frac in sample_fractions() {
        let o = foot(inner.axis_point + a * (v0 + (v1 - v0) * frac));
        let mut best = f64::INFINITY;
        let m = outer.len();
        for i in 0..m {
            let (p, q) = (outer[i] - o, outer[(i + 1) % m] - o);
            let (xp, yp) = (p.dot(&d), p.dot(&a));
            let (xq, yq) = (q.dot(&d), q.dot(&a));
            if (yp > 0.0) == (yq > 0.0) {
                continue;
            }
            let s = xp + (xq - xp) * (0.0 - yp) / (yq - yp);
            if s > RAY_EPS && s < best {
                best = s;
            }
        }
        if best.is_finite() {
            out.push(best);
        }
    }
    out
}

/// Marks bends whose cylinders share a vertex or whose axis segments come
/// closer than twice the thickness. The relation is symmetric.
pub fn recognize_bend_corners(solid: &BrepSolid, bends: &mut [BendFeature], thickness: f64) {
    let verts: Vec<Vec<usize>> = bends
        .iter()
        .map(|b| {
            let mut v = solid.face_vertices(b.inner_face);
            v.extend(solid.face_vertices(b.outer_face));
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    for i in 0..bends.len() {
        let mut partners = Vec::new();
        for j in 0..bends.len() {
            if i == j {
                continue;
            }
            let (p, q) = (&bends[i].axis, &bends[j].axis);
            let close = segment_distance(&p[0], &p[1], &q[0], &q[1]) < 2.0 * thickness;
            if close || verts[i].iter().any(|v| verts[j].binary_search(v).is_ok()) {
                partners.push(j);
            }
        }
        bends[i].corner_partners = partners;
    }
}
