//! Rule-based sheet-metal feature recognition.
//!
//! Three stages: surfaces are abstracted into planes, cylinders and
//! freeform patches; faces are labelled top, bottom or side; bends, holes,
//! bend corners and the outer contour are then read off the labelled solid.

mod bends;
mod fit;
mod holes;

pub use bends::{flange_stats, recognize_bend_corners, recognize_bends};
pub use fit::{fit_cylinder, CylinderFit, MIN_FIT_SAMPLES};
pub use holes::{outer_contour, outer_contour_cycles, recognize_holes};

use crate::brep::{
    build_aag, face_area, face_domain, plane_pairs, thickness_from_pairs, BrepError, BrepSolid, Dihedral,
    FaceAdjacencyGraph, PlanePair,
};
use crate::geom::{SurfaceGeom, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const BEND_ANGLE_CONVENTION: &str =
    "bend_angle is the arc angle of the inner cylinder in rad; a right-angle fold is pi/2, flat is 0";
pub const FLANGE_LENGTH_CONVENTION: &str =
    "flange length is measured in the flange plane from the bend tangency line to the outer loop; holes are ignored";

/// Relative tolerance for matching a shell-face partner at sheet thickness.
pub const SHELL_GAP_TOL: f64 = 0.05;
/// Grid resolution per direction when sampling freeform faces.
pub const FREEFORM_SAMPLES: usize = 32;
/// Number of flange-length samples along a bend.
pub const FLANGE_SAMPLES: usize = 16;

/// Sample positions along a bend, as fractions of its length.
pub fn sample_fractions() -> Vec<f64> {
    (0..FLANGE_SAMPLES).map(|k| (k as f64 + 0.5) / FLANGE_SAMPLES as f64).collect()
}

#[derive(Debug, Error)]
pub enum FeatrecError {
    #[error(transparent)]
    Brep(#[from] BrepError),
    #[error("not a sheet-metal part: {0}")]
    MalformedSheet(String),
    #[error("bend {bend}: only {valid} of 16 flange rays on face {face} hit the outer loop")]
    FlangeRays { bend: usize, face: usize, valid: usize },
    #[error("cylinder fit needs at least 9 samples, got {0}")]
    TooFewSamples(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Top,
    Bottom,
    Side,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Top => "top",
            Role::Bottom => "bottom",
            Role::Side => "side",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceClass {
    Plane,
    Cylinder,
    Freeform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylFeature {
    pub face: usize,
    pub radius: f64,
    pub axial_length: f64,
    pub arc_angle: f64,
    pub convex: bool,
    pub axis_point: Vec3,
    pub axis_dir: Vec3,
    /// Axial extent of the face relative to `axis_point`.
    pub v_range: (f64, f64),
}

impl CylFeature {
    pub fn axis_segment(&self) -> [Vec3; 2] {
        [self.axis_point + self.axis_dir * self.v_range.0, self.axis_point + self.axis_dir * self.v_range.1]
    }

    /// Same axis line within 1e-6 rad and 1e-3 mm.
    pub fn coaxial(&self, other: &CylFeature) -> bool {
        if self.axis_dir.cross(&other.axis_dir).norm() > 1e-6 {
            return false;
        }
        let d = other.axis_point - self.axis_point;
        (d - self.axis_dir * d.dot(&self.axis_dir)).norm() < 1e-3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlangeStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl FlangeStats {
    pub fn from_samples(xs: &[f64]) -> Option<FlangeStats> {
        if xs.is_empty() {
            return None;
        }
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
        let mean = s.iter().sum::<f64>() / n as f64;
        let var = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let all_equal = s[n - 1] - s[0] <= 1e-9 * s[0].abs().max(1.0);
        Some(FlangeStats {
            min: s[0],
            median,
            max: s[n - 1],
            mean: if all_equal { s[0] } else { mean },
            std: if all_equal { 0.0 } else { var.sqrt() },
        })
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.min, self.median, self.max, self.mean, self.std]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BendFeature {
    pub inner_face: usize,
    pub outer_face: usize,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub length: f64,
    pub bend_angle: f64,
    /// +1 when the inner (concave) cylinder lies in the top shell.
    pub orientation: i8,
    pub side_a_face: usize,
    pub side_b_face: usize,
    pub flange_a: FlangeStats,
    pub flange_b: FlangeStats,
    pub corner_partners: Vec<usize>,
    pub axis: [Vec3; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoleHost {
    Shell,
    Side,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoleFeature {
    pub wall_faces: Vec<usize>,
    pub host: HoleHost,
    /// Set when the wall is a single cylinder.
    pub diameter: Option<f64>,
    pub is_side_hole: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureReport {
    pub schema_version: u32,
    pub units: &'static str,
    pub bend_angle_convention: &'static str,
    pub flange_length_convention: &'static str,
    pub thickness: f64,
    pub roles: Vec<Role>,
    pub surfaces: Vec<SurfaceClass>,
    pub cylinders: Vec<CylFeature>,
    pub bends: Vec<BendFeature>,
    pub holes: Vec<HoleFeature>,
    pub outer_contour_face_ids: Vec<usize>,
    /// Ordered B-rep edge cycles between the top shell and the contour faces.
    pub outer_contour_cycles: Vec<Vec<usize>>,
}

impl FeatureReport {
    pub fn cylinder(&self, face: usize) -> Option<&CylFeature> {
        self.cylinders.iter().find(|c| c.face == face)
    }

    pub fn bend_of(&self, face: usize) -> Option<usize> {
        self.bends.iter().position(|b| b.inner_face == face || b.outer_face == face)
    }

    pub fn is_hole_wall(&self, face: usize) -> bool {
        self.holes.iter().any(|h| h.wall_faces.contains(&face))
    }
}

/// Abstracts every face's surface. Analytic cylinders are read directly;
/// b-spline faces are sampled and tested with [`fit_cylinder`].
pub fn classify_surfaces(solid: &BrepSolid) -> Result<(Vec<SurfaceClass>, Vec<CylFeature>), FeatrecError> {
    let mut classes = Vec::with_capacity(solid.faces.len());
    let mut cyls = Vec::new();
    for (i, face) in solid.faces.iter().enumerate() {
        match &face.surface {
            SurfaceGeom::Plane { .. } => classes.push(SurfaceClass::Plane),
            SurfaceGeom::Cylinder { frame, radius } => {
                let dom = face_domain(solid, i)?;
                classes.push(SurfaceClass::Cylinder);
                cyls.push(CylFeature {
                    face: i,
                    radius: *radius,
                    axial_length: dom.v_span(),
                    arc_angle: dom.u_span().min(std::f64::consts::TAU),
                    convex: face.sense,
                    axis_point: frame.origin,
                    axis_dir: frame.z,
                    v_range: (dom.v_min, dom.v_max),
                });
            }
            SurfaceGeom::BSpline(_) => match freeform_cylinder(solid, i)? {
                Some(c) => {
                    classes.push(SurfaceClass::Cylinder);
                    cyls.push(c);
                }
                None => classes.push(SurfaceClass::Freeform),
            },
            SurfaceGeom::Sphere { .. } | SurfaceGeom::Torus { .. } => classes.push(SurfaceClass::Freeform),
        }
    }
    Ok((classes, cyls))
}

fn freeform_cylinder(solid: &BrepSolid, i: usize) -> Result<Option<CylFeature>, FeatrecError> {
    let face = &solid.faces[i];
    let dom = face_domain(solid, i)?;
    let n = FREEFORM_SAMPLES;
    let mut inside = (Vec::new(), Vec::new());
    let mut all = (Vec::new(), Vec::new());
    for a in 0..n {
        for b in 0..n {
            let u = dom.u_min + (a as f64 + 0.5) / n as f64 * dom.u_span();
            let v = dom.v_min + (b as f64 + 0.5) / n as f64 * dom.v_span();
            let Ok((p, nn)) = face.normal_uv(u, v) else { continue };
            if dom.contains(u, v) {
                inside.0.push(p);
                inside.1.push(nn);
            }
            all.0.push(p);
            all.1.push(nn);
        }
    }
    let (pts, nrm) = if inside.0.len() >= MIN_FIT_SAMPLES { inside } else { all };
    let CylinderFit::Cylinder { axis_point, axis_dir, radius, .. } = fit_cylinder(&pts, &nrm)? else {
        return Ok(None);
    };
    let mut convex_votes = 0i64;
    let mut angles = Vec::with_capacity(pts.len());
    let e1 = (pts[0] - axis_point - axis_dir * (pts[0] - axis_point).dot(&axis_dir)).normalize();
    let e2 = axis_dir.cross(&e1);
    let (mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (p, nn) in pts.iter().zip(&nrm) {
        let d = p - axis_point;
        let radial = d - axis_dir * d.dot(&axis_dir);
        convex_votes += if nn.dot(&radial) > 0.0 { 1 } else { -1 };
        angles.push(radial.dot(&e2).atan2(radial.dot(&e1)));
    }
    // Axial and angular extents from the boundary, which the interior samples undershoot.
    for v in solid.face_vertices(i) {
        let d = solid.vertices[v] - axis_point;
        v0 = v0.min(d.dot(&axis_dir));
        v1 = v1.max(d.dot(&axis_dir));
    }
    let boundary = crate::brep::loop_points(&solid.vertices, &solid.edges, &face.outer);
    for p in &boundary {
        let d = p - axis_point;
        let radial = d - axis_dir * d.dot(&axis_dir);
        angles.push(radial.dot(&e2).atan2(radial.dot(&e1)));
    }
    Ok(Some(CylFeature {
        face: i,
        radius,
        axial_length: v1 - v0,
        arc_angle: angular_extent(&mut angles),
        convex: convex_votes > 0,
        axis_point,
        axis_dir,
        v_range: (v0, v1),
    }))
}

/// 2π minus the largest gap between sorted angles.
fn angular_extent(angles: &mut [f64]) -> f64 {
    use std::f64::consts::TAU;
    if angles.len() < 2 {
        return 0.0;
    }
    angles.sort_by(f64::total_cmp);
    let mut gap = angles[0] + TAU - angles[angles.len() - 1];
    for w in angles.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    TAU - gap
}

/// Labels each face top, bottom or side.
///
/// Shell faces are those with a partner across the sheet: an opposite planar
/// face at the sheet thickness with overlapping projection, or a coaxial
/// cylinder of opposite convexity whose radius differs by the thickness
/// (the convex one being larger), both within 5 %. Shell faces are grouped
/// into shells over smooth edges; exactly two are required. The shell
/// holding the largest-area face is top, ties going to the smaller face id.
pub fn label_faces(
    solid: &BrepSolid,
    aag: &FaceAdjacencyGraph,
    pairs: &[PlanePair],
    cylinders: &[CylFeature],
    thickness: f64,
) -> Result<Vec<Role>, FeatrecError> {
    let nf = solid.faces.len();
    let tol = SHELL_GAP_TOL * thickness;
    let mut shell = vec![false; nf];
    for p in pairs {
        if (p.distance - thickness).abs() <= tol {
            shell[p.a] = true;
            shell[p.b] = true;
        }
    }
    for (i, a) in cylinders.iter().enumerate() {
        for b in &cylinders[i + 1..] {
            if a.convex == b.convex || !a.coaxial(b) {
                continue;
            }
            let (cv, cc) = if a.convex { (a, b) } else { (b, a) };
            let gap = cv.radius - cc.radius;
            let overlap = overlap_1d(a.v_range, shift_range(b, a));
            if (gap - thickness).abs() <= tol && overlap {
                shell[a.face] = true;
                shell[b.face] = true;
            }
        }
    }

    // Components of shell faces over smooth edges.
    let mut comp = vec![usize::MAX; nf];
    let mut adj = vec![Vec::new(); nf];
    for e in &aag.edges {
        if e.dihedral == Dihedral::Smooth && shell[e.a] && shell[e.b] {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
    }
    let mut ncomp = 0;
    for s in 0..nf {
        if !shell[s] || comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = ncomp;
        while let Some(f) = stack.pop() {
            for &g in &adj[f] {
                if comp[g] == usize::MAX {
                    comp[g] = ncomp;
                    stack.push(g);
                }
            }
        }
        ncomp += 1;
    }
    if ncomp != 2 {
        return Err(FeatrecError::MalformedSheet(format!("expected two shells, found {ncomp}")));
    }
    let mut best: Option<(f64, usize)> = None;
    for f in (0..nf).filter(|&f| shell[f]) {
        let a = face_area(solid, f)?;
        best = match best {
            Some((ba, bf)) if !(a > ba * (1.0 + 1e-9)) => Some((ba, bf)),
            _ => Some((a, f)),
        };
    }
    let top = comp[best.expect("two shells").1];
    Ok((0..nf)
        .map(|f| {
            if !shell[f] {
                Role::Side
            } else if comp[f] == top {
                Role::Top
            } else {
                Role::Bottom
            }
        })
        .collect())
}

/// `b`'s axial range expressed relative to `a`'s axis point.
fn shift_range(b: &CylFeature, a: &CylFeature) -> (f64, f64) {
    let off = (b.axis_point - a.axis_point).dot(&a.axis_dir);
    let s = b.axis_dir.dot(&a.axis_dir).signum();
    let (x, y) = (off + s * b.v_range.0, off + s * b.v_range.1);
    (x.min(y), x.max(y))
}

fn overlap_1d(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0.max(b.0) < a.1.min(b.1)
}

/// Runs all three recognition stages.
pub fn recognize(solid: &BrepSolid) -> Result<FeatureReport, FeatrecError> {
    let aag = build_aag(solid);
    let pairs = plane_pairs(solid)?;
    let thickness = thickness_from_pairs(&pairs)?;
    let (surfaces, cylinders) = classify_surfaces(solid)?;
    let roles = label_faces(solid, &aag, &pairs, &cylinders, thickness)?;
    let mut bends = recognize_bends(solid, &aag, &cylinders, &roles, thickness)?;
    recognize_bend_corners(solid, &mut bends, thickness);
    let holes = recognize_holes(solid, &roles, &cylinders);
    let contour = outer_contour(&roles, &holes);
    let cycles = outer_contour_cycles(solid, &roles, &contour);
    Ok(FeatureReport {
        schema_version: REPORT_SCHEMA_VERSION,
        units: "mm, rad",
        bend_angle_convention: BEND_ANGLE_CONVENTION,
        flange_length_convention: FLANGE_LENGTH_CONVENTION,
        thickness,
        roles,
        surfaces,
        cylinders,
        bends,
        holes,
        outer_contour_face_ids: contour,
        outer_contour_cycles: cycles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_constant_and_affine() {
        let s = FlangeStats::from_samples(&[44.0; 16]).unwrap();
        assert_eq!(s.to_array(), [44.0, 44.0, 44.0, 44.0, 0.0]);
        let xs: Vec<f64> = (0..4).map(|k| k as f64).collect();
        let s = FlangeStats::from_samples(&xs).unwrap();
        assert_eq!((s.min, s.median, s.max, s.mean), (0.0, 1.5, 3.0, 1.5));
        assert!((s.std - 1.25f64.sqrt()).abs() < 1e-15);
        assert!(FlangeStats::from_samples(&[]).is_none());
    }

    #[test]
    fn extent_wraps() {
        let mut a = vec![3.0, -3.0, 3.1];
        assert!((angular_extent(&mut a) - (std::f64::consts::TAU - 6.0)).abs() < 1e-12);
        let mut b: Vec<f64> = (0..=10).map(|k| 0.1 * k as f64).collect();
        assert!((angular_extent(&mut b) - 1.0).abs() < 1e-12);
    }
}
