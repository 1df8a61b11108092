//! Named reference parts used by tests, examples and the CLI.

use super::{realize, BendSpec, DatagenError, FlangeDepth, HoleSpec, Layout, Part, PartSpec, Profile};
use crate::brep::{box_solid, face_domain, BrepSolid};
use crate::geom::{clamped_uniform_knots, de_boor, BSplineSurface, Frame, SurfaceGeom, Vec3};
use nalgebra::DMatrix;
use std::f64::consts::FRAC_PI_2;

fn swept(profile: Profile, t: f64, width: f64, flanges: &[f64], bends: Vec<BendSpec>, holes: Vec<HoleSpec>) -> PartSpec {
    PartSpec {
        seed: 0,
        profile,
        thickness: t,
        layout: Layout::Swept { width },
        flanges: flanges.iter().map(|&d| FlangeDepth::Constant { depth: d }).collect(),
        bends,
        holes,
    }
}

/// 100 × 50 × 2 plate.
pub fn plate() -> Result<Part, DatagenError> {
    realize(&swept(Profile::Plain, 2.0, 50.0, &[100.0], Vec::new(), Vec::new()))
}

/// Right-angle bracket: t = 2, inner radius 4, 44 mm flanges, width 30.
pub fn l_bracket() -> Result<Part, DatagenError> {
    let bend = BendSpec { direction: 1, inner_radius: 4.0, angle: FRAC_PI_2 };
    realize(&swept(Profile::Plain, 2.0, 30.0, &[44.0, 44.0], vec![bend], Vec::new()))
}

/// Two same-direction right-angle bends: flanges 40, 60, 40; t = 2, r = 4, width 50.
pub fn u_channel() -> Result<Part, DatagenError> {
    let bend = BendSpec { direction: 1, inner_radius: 4.0, angle: FRAC_PI_2 };
    realize(&swept(Profile::Plain, 2.0, 50.0, &[40.0, 60.0, 40.0], vec![bend, bend], Vec::new()))
}

/// Plate with a Ø10 through hole at its centre.
pub fn plate_with_hole() -> Result<Part, DatagenError> {
    let hole = HoleSpec { flange: 0, along: 50.0, across: 25.0, diameter: 10.0, side: false };
    realize(&swept(Profile::Holes, 2.0, 50.0, &[100.0], Vec::new(), vec![hole]))
}

/// 4 mm plate with a Ø1.6 hole drilled through its width at mid-thickness.
pub fn plate_with_side_hole() -> Result<Part, DatagenError> {
    let hole = HoleSpec { flange: 0, along: 50.0, across: 0.0, diameter: 1.6, side: true };
    realize(&swept(Profile::Holes, 4.0, 50.0, &[100.0], Vec::new(), vec![hole]))
}

/// Solid 50 mm cube (not sheet metal).
pub fn cube() -> Result<BrepSolid, DatagenError> {
    Ok(box_solid(Vec3::zeros(), Vec3::new(50.0, 50.0, 50.0))?)
}

/// Non-rational cubic × linear B-spline approximating the cylinder patch
/// `frame`, `radius`, angles u0..u0+sweep, axial v0..v1 (least squares on
/// dense arc samples).
pub fn bspline_cylinder_patch(frame: &Frame, radius: f64, u0: f64, sweep: f64, v0: f64, v1: f64) -> BSplineSurface {
    let (deg, n_ctrl, n_samp) = (3usize, 24usize, 240usize);
    let knots = clamped_uniform_knots(n_ctrl, deg);
    let unit = |j: usize| -> Vec<Vec3> { (0..n_ctrl).map(|i| if i == j { Vec3::x() } else { Vec3::zeros() }).collect() };
    let bases: Vec<Vec<Vec3>> = (0..n_ctrl).map(unit).collect();
    let mut a = DMatrix::zeros(n_samp, n_ctrl);
    let mut b = DMatrix::zeros(n_samp, 3);
    for s in 0..n_samp {
        let t = s as f64 / (n_samp - 1) as f64;
        for (j, basis) in bases.iter().enumerate() {
            a[(s, j)] = de_boor(deg, &knots, basis, t).x;
        }
        let ang = u0 + sweep * t;
        let p = frame.x * (radius * ang.cos()) + frame.y * (radius * ang.sin());
        for c in 0..3 {
            b[(s, c)] = p[c];
        }
    }
    let ctrl = a.svd(true, true).solve(&b, 1e-14).expect("full-rank basis");
    let control = (0..n_ctrl)
        .map(|i| {
            let p = Vec3::new(ctrl[(i, 0)], ctrl[(i, 1)], ctrl[(i, 2)]);
            vec![frame.origin + p + frame.z * v0, frame.origin + p + frame.z * v1]
        })
        .collect();
    BSplineSurface { u_degree: deg, v_degree: 1, control, u_knots: knots, v_knots: vec![0.0, 0.0, 1.0, 1.0] }
}

/// The L-bracket with both bend faces replaced by B-spline approximations.
pub fn l_bracket_bspline() -> Result<BrepSolid, DatagenError> {
    let mut solid = l_bracket()?.solid;
    for i in 0..solid.faces.len() {
        let SurfaceGeom::Cylinder { frame, radius } = solid.faces[i].surface.clone() else { continue };
        let dom = face_domain(&solid, i)?;
        let pad = 1e-3;
        let (u0, u1) = (dom.u_min - pad, dom.u_max + pad);
        let (v0, v1) = (dom.v_min - pad, dom.v_max + pad);
        let patch = bspline_cylinder_patch(&frame, radius, u0, u1 - u0, v0, v1);
        let um = 0.5 * (u0 + u1);
        let outward = frame.x * um.cos() + frame.y * um.sin();
        let outward = if solid.faces[i].sense { outward } else { -outward };
        let surf = SurfaceGeom::BSpline(patch);
        let (_, natural) = surf.eval(0.5, 0.5)?;
        solid.faces[i].sense = natural.dot(&outward) > 0.0;
        solid.faces[i].surface = surf;
    }
    Ok(solid)
}
