//! Analytic surfaces and curves, evaluated in model coordinates (mm, rad).

mod bspline;
pub mod quadrature;

pub use bspline::{clamped_uniform_knots, compress_knots, de_boor, expand_knots, BSplineCurve, BSplineSurface};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("parameter {value} outside knot range [{min}, {max}]")]
    ParameterOutOfRange { value: f64, min: f64, max: f64 },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
}

/// Right-handed orthonormal placement (the AXIS2_PLACEMENT_3D of the file).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub origin: Vec3,
    pub x: Vec3,
    pub y: Vec3,
    pub z: Vec3,
}

impl Frame {
    /// Builds a frame from an axis and a reference direction; the reference is
    /// projected onto the plane normal to `axis`.
    pub fn new(origin: Vec3, axis: Vec3, ref_dir: Vec3) -> Result<Self, GeomError> {
        let z = axis
            .try_normalize(1e-300)
            .ok_or_else(|| GeomError::Degenerate("zero-length axis".into()))?;
        let x = (ref_dir - z * ref_dir.dot(&z))
            .try_normalize(1e-12)
            .ok_or_else(|| GeomError::Degenerate("reference direction parallel to axis".into()))?;
        Ok(Frame { origin, x, y: z.cross(&x), z })
    }

    /// Frame with the given axis and an arbitrary but deterministic x direction.
    pub fn from_axis(origin: Vec3, axis: Vec3) -> Result<Self, GeomError> {
        let z = axis
            .try_normalize(1e-300)
            .ok_or_else(|| GeomError::Degenerate("zero-length axis".into()))?;
        let hint = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        Frame::new(origin, z, hint)
    }

    pub fn world() -> Self {
        Frame { origin: Vec3::zeros(), x: Vec3::x(), y: Vec3::y(), z: Vec3::z() }
    }

    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        let d = p - self.origin;
        Vec3::new(d.dot(&self.x), d.dot(&self.y), d.dot(&self.z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceGeom {
    /// u, v along frame x, y; natural normal frame z.
    Plane { frame: Frame },
    /// u angular (rad) from frame x about frame z, v axial (mm).
    Cylinder { frame: Frame, radius: f64 },
    /// u longitude, v latitude.
    Sphere { frame: Frame, radius: f64 },
    /// u about the axis, v around the tube.
    Torus { frame: Frame, major_radius: f64, minor_radius: f64 },
    BSpline(BSplineSurface),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    Plane,
    Cylinder,
    Sphere,
    Torus,
    Bspline,
}

impl SurfaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SurfaceKind::Plane => "plane",
            SurfaceKind::Cylinder => "cylinder",
            SurfaceKind::Sphere => "sphere",
            SurfaceKind::Torus => "torus",
            SurfaceKind::Bspline => "bspline",
        }
    }
}

impl SurfaceGeom {
    pub fn kind(&self) -> SurfaceKind {
        match self {
            SurfaceGeom::Plane { .. } => SurfaceKind::Plane,
            SurfaceGeom::Cylinder { .. } => SurfaceKind::Cylinder,
            SurfaceGeom::Sphere { .. } => SurfaceKind::Sphere,
            SurfaceGeom::Torus { .. } => SurfaceKind::Torus,
            SurfaceGeom::BSpline(_) => SurfaceKind::Bspline,
        }
    }

    /// True when the u parameter is an angle with period 2π.
    pub fn u_periodic(&self) -> bool {
        matches!(
            self,
            SurfaceGeom::Cylinder { .. } | SurfaceGeom::Sphere { .. } | SurfaceGeom::Torus { .. }
        )
    }

    /// Point and natural unit normal at (u, v). Face orientation is applied by the caller.
    pub fn eval(&self, u: f64, v: f64) -> Result<(Vec3, Vec3), GeomError> {
        match self {
            SurfaceGeom::Plane { frame } => Ok((frame.origin + frame.x * u + frame.y * v, frame.z)),
            SurfaceGeom::Cylinder { frame, radius } => {
                let radial = frame.x * u.cos() + frame.y * u.sin();
                Ok((frame.origin + radial * *radius + frame.z * v, radial))
            }
            SurfaceGeom::Sphere { frame, radius } => {
                let radial = frame.x * u.cos() + frame.y * u.sin();
                let n = radial * v.cos() + frame.z * v.sin();
                Ok((frame.origin + n * *radius, n))
            }
            SurfaceGeom::Torus { frame, major_radius, minor_radius } => {
                let radial = frame.x * u.cos() + frame.y * u.sin();
                let n = radial * v.cos() + frame.z * v.sin();
                Ok((frame.origin + radial * *major_radius + n * *minor_radius, n))
            }
            SurfaceGeom::BSpline(s) => {
                let (p, su, sv) = s.eval_derivs(u, v)?;
                let n = su
                    .cross(&sv)
                    .try_normalize(1e-300)
                    .ok_or_else(|| GeomError::Degenerate("singular b-spline normal".into()))?;
                Ok((p, n))
            }
        }
    }

    /// Parameters of the point of the surface closest to `p`. The angular
    /// parameter of periodic surfaces is returned in (-π, π].
    pub fn invert(&self, p: &Vec3) -> (f64, f64) {
        match self {
            SurfaceGeom::Plane { frame } => {
                let l = frame.to_local(p);
                (l.x, l.y)
            }
            SurfaceGeom::Cylinder { frame, .. } => {
                let l = frame.to_local(p);
                (l.y.atan2(l.x), l.z)
            }
            SurfaceGeom::Sphere { frame, .. } => {
                let l = frame.to_local(p);
                let rho = (l.x * l.x + l.y * l.y).sqrt();
                (l.y.atan2(l.x), l.z.atan2(rho))
            }
            SurfaceGeom::Torus { frame, major_radius, .. } => {
                let l = frame.to_local(p);
                let rho = (l.x * l.x + l.y * l.y).sqrt();
                (l.y.atan2(l.x), l.z.atan2(rho - major_radius))
            }
            SurfaceGeom::BSpline(s) => s.invert(p),
        }
    }

    /// Natural unit normal at the surface point nearest to `p`.
    pub fn normal_near(&self, p: &Vec3) -> Vec3 {
        let (u, v) = self.invert(p);
        match self.eval(u, v) {
            Ok((_, n)) => n,
            Err(_) => Vec3::zeros(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveGeom {
    /// p(t) = origin + t·dir, dir unit.
    Line { origin: Vec3, dir: Vec3 },
    /// p(t) = origin + r(cos t·x + sin t·y), counter-clockwise about frame z.
    Circle { frame: Frame, radius: f64 },
    BSpline(BSplineCurve),
}

impl CurveGeom {
    pub fn kind_str(&self) -> &'static str {
        match self {
            CurveGeom::Line { .. } => "line",
            CurveGeom::Circle { .. } => "circle",
            CurveGeom::BSpline(_) => "bspline",
        }
    }

    pub fn eval(&self, t: f64) -> Result<Vec3, GeomError> {
        match self {
            CurveGeom::Line { origin, dir } => Ok(origin + dir * t),
            CurveGeom::Circle { frame, radius } => {
                Ok(frame.origin + (frame.x * t.cos() + frame.y * t.sin()) * *radius)
            }
            CurveGeom::BSpline(c) => c.eval(t),
        }
    }

    /// Unit tangent in the direction of increasing parameter.
    pub fn tangent(&self, t: f64) -> Result<Vec3, GeomError> {
        match self {
            CurveGeom::Line { dir, .. } => Ok(*dir),
            CurveGeom::Circle { frame, .. } => Ok(frame.y * t.cos() - frame.x * t.sin()),
            CurveGeom::BSpline(c) => {
                let (_, d) = c.eval_deriv(t)?;
                d.try_normalize(1e-300)
                    .ok_or_else(|| GeomError::Degenerate("zero b-spline tangent".into()))
            }
        }
    }

    /// Parameter of the curve point closest to `p`.
    pub fn param_of(&self, p: &Vec3) -> f64 {
        match self {
            CurveGeom::Line { origin, dir } => (p - origin).dot(dir),
            CurveGeom::Circle { frame, .. } => {
                let l = frame.to_local(p);
                l.y.atan2(l.x)
            }
            CurveGeom::BSpline(c) => c.invert(p),
        }
    }
}

/// Wraps an angle into [0, 2π).
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Rotates `v` about the unit `axis` by `angle` (Rodrigues).
pub fn rotate(v: &Vec3, axis: &Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(v) * s + axis * axis.dot(v) * (1.0 - c)
}

/// Minimum distance between segments [p0,p1] and [q0,q1].
pub fn segment_distance(p0: &Vec3, p1: &Vec3, q0: &Vec3, q1: &Vec3) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let (s, t);
    if a <= 1e-300 && e <= 1e-300 {
        return r.norm();
    }
    if a <= 1e-300 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-300 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-12 * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn plane_identity() {
        let s = SurfaceGeom::Plane { frame: Frame::world() };
        let (p, n) = s.eval(1.0, 2.0).unwrap();
        assert_eq!(p, Vec3::new(1.0, 2.0, 0.0));
        assert_eq!(n, Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn cylinder_point_and_outward_normal() {
        let s = SurfaceGeom::Cylinder { frame: Frame::world(), radius: 5.0 };
        let (p, n) = s.eval(FRAC_PI_2, 3.0).unwrap();
        assert!((p - Vec3::new(0.0, 5.0, 3.0)).norm() < 1e-12);
        assert!((n - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn invert_recovers_parameters() {
        let frame = Frame::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(1.0, 1.0, 0.0), Vec3::z()).unwrap();
        let surfaces = [
            SurfaceGeom::Plane { frame },
            SurfaceGeom::Cylinder { frame, radius: 4.0 },
            SurfaceGeom::Sphere { frame, radius: 4.0 },
            SurfaceGeom::Torus { frame, major_radius: 6.0, minor_radius: 2.0 },
        ];
        for s in &surfaces {
            let (p, _) = s.eval(0.7, 0.4).unwrap();
            let (u, v) = s.invert(&p);
            assert!((u - 0.7).abs() < 1e-12 && (v - 0.4).abs() < 1e-12, "{:?}", s.kind());
        }
    }

    #[test]
    fn segment_distance_cases() {
        let d = segment_distance(
            &Vec3::new(0.0, 0.0, 0.0),
            &Vec3::new(1.0, 0.0, 0.0),
            &Vec3::new(0.5, 1.0, 2.0),
            &Vec3::new(0.5, -1.0, 2.0),
        );
        assert!((d - 2.0).abs() < 1e-12);
        let parallel = segment_distance(
            &Vec3::zeros(),
            &Vec3::new(0.0, 10.0, 0.0),
            &Vec3::new(100.0, 0.0, 0.0),
            &Vec3::new(100.0, 10.0, 0.0),
        );
        assert!((parallel - 100.0).abs() < 1e-12);
        let end_to_end = segment_distance(
            &Vec3::zeros(),
            &Vec3::new(1.0, 0.0, 0.0),
            &Vec3::new(2.0, 0.0, 0.0),
            &Vec3::new(3.0, 0.0, 0.0),
        );
        assert!((end_to_end - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotate_quarter_turn() {
        let r = rotate(&Vec3::x(), &Vec3::z(), FRAC_PI_2);
        assert!((r - Vec3::y()).norm() < 1e-15);
    }
}
