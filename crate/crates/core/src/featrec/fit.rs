//! Least-squares cylinder fit from sampled points and normals.

use super::FeatrecError;
use crate::geom::Vec3;
use nalgebra::{Matrix3, Matrix3x1, SymmetricEigen, Vector3};
use serde::Serialize;

/// Minimum number of samples accepted by [`fit_cylinder`].
pub const MIN_FIT_SAMPLES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum CylinderFit {
    Cylinder { axis_point: Vec3, axis_dir: Vec3, radius: f64, rms: f64 },
    /// All normals parallel.
    Planar,
    /// Circle fit residual too large for a cylinder.
    Rejected { rms: f64 },
}

/// Fits a cylinder to surface samples. The axis is the normal-covariance
/// eigenvector of smallest eigenvalue; the section is a Kåsa circle fit
/// refined by Gauss-Newton on the geometric residual.
pub fn fit_cylinder(points: &[Vec3], normals: &[Vec3]) -> Result<CylinderFit, FeatrecError> {
    if points.len() < MIN_FIT_SAMPLES || normals.len() != points.len() {
        return Err(FeatrecError::TooFewSamples(points.len().min(normals.len())));
    }
    let mut m = Matrix3::zeros();
    for n in normals {
        m += n * n.transpose();
    }
    let eig = SymmetricEigen::new(m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l1, l2) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if l1 < 1e-6 * l2 {
        return Ok(CylinderFit::Planar);
    }
    let mut axis: Vec3 = eig.eigenvectors.column(order[0]).into_owned().normalize();
    // Deterministic sign: largest component positive.
    let imax = axis.iamax();
    if axis[imax] < 0.0 {
        axis = -axis;
    }
    let e1 = axis.cross(&if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() }).normalize();
    let e2 = axis.cross(&e1);

    let centroid = points.iter().fold(Vec3::zeros(), |a, p| a + p) / points.len() as f64;
    let xy: Vec<(f64, f64)> = points.iter().map(|p| ((p - centroid).dot(&e1), (p - centroid).dot(&e2))).collect();

    // Kåsa: x² + y² = 2ax + 2by + c.
    let mut ata = Matrix3::zeros();
    let mut atb = Matrix3x1::zeros();
    for &(x, y) in &xy {
        let row = Vector3::new(2.0 * x, 2.0 * y, 1.0);
        ata += row * row.transpose();
        atb += row * (x * x + y * y);
    }
    let Some(sol) = ata.lu().solve(&atb) else {
        return Ok(CylinderFit::Rejected { rms: f64::INFINITY });
    };
    let (mut a, mut b) = (sol[0], sol[1]);
    let mut r = (sol[2] + a * a + b * b).max(0.0).sqrt();

    for _ in 0..20 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Matrix3x1::zeros();
        for &(x, y) in &xy {
            let (dx, dy) = (x - a, y - b);
            let d = (dx * dx + dy * dy).sqrt();
            if d < 1e-300 {
                continue;
            }
            let j = Vector3::new(-dx / d, -dy / d, -1.0);
            let res = d - r;
            jtj += j * j.transpose();
            jtr += j * res;
        }
        let Some(step) = jtj.lu().solve(&(-jtr)) else { break };
        a += step[0];
        b += step[1];
        r += step[2];
        if step.norm() < 1e-14 * r.abs().max(1.0) {
            break;
        }
    }
    let rms =
        (xy.iter().map(|&(x, y)| ((x - a).hypot(y - b) - r).powi(2)).sum::<f64>() / xy.len() as f64).sqrt();
    if !(r > 0.0) || rms >= 1e-3 * r {
        return Ok(CylinderFit::Rejected { rms });
    }
    Ok(CylinderFit::Cylinder { axis_point: centroid + e1 * a + e2 * b, axis_dir: axis, radius: r, rms })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyl_samples(r: f64) -> (Vec<Vec3>, Vec<Vec3>) {
        let mut p = Vec::new();
        let mut n = Vec::new();
        for i in 0..8 {
            for j in 0..4 {
                let u = 0.2 * i as f64;
                let radial = Vec3::new(u.cos(), u.sin(), 0.0);
                p.push(radial * r + Vec3::z() * j as f64);
                n.push(radial);
            }
        }
        (p, n)
    }

    #[test]
    fn exact_cylinder() {
        let (p, n) = cyl_samples(5.0);
        match fit_cylinder(&p, &n).unwrap() {
            CylinderFit::Cylinder { axis_point, axis_dir, radius, .. } => {
                assert!((radius - 5.0).abs() < 1e-9);
                assert!((axis_dir - Vec3::z()).norm() < 1e-9);
                assert!(axis_point.xy().norm() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn plane_is_planar() {
        let p: Vec<Vec3> = (0..12).map(|i| Vec3::new(i as f64, (i * i) as f64, 0.0)).collect();
        let n = vec![Vec3::z(); 12];
        assert_eq!(fit_cylinder(&p, &n).unwrap(), CylinderFit::Planar);
    }

    #[test]
    fn too_few() {
        assert!(fit_cylinder(&[Vec3::zeros(); 3], &[Vec3::z(); 3]).is_err());
    }
}
