//! Non-rational B-spline curves and surfaces.

use super::{GeomError, Vec3};
use serde::{Deserialize, Serialize};

/// Knot vectors are stored expanded (multiplicities already applied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineCurve {
    pub degree: usize,
    pub control: Vec<Vec3>,
    pub knots: Vec<f64>,
}

/// Control net indexed `control[i][j]`, i along u, j along v.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineSurface {
    pub u_degree: usize,
    pub v_degree: usize,
    pub control: Vec<Vec<Vec3>>,
    pub u_knots: Vec<f64>,
    pub v_knots: Vec<f64>,
}

/// Expands (multiplicity, value) pairs into a flat knot vector.
pub fn expand_knots(mults: &[usize], values: &[f64]) -> Vec<f64> {
    mults
        .iter()
        .zip(values)
        .flat_map(|(&m, &k)| std::iter::repeat(k).take(m))
        .collect()
}

/// Compresses a flat knot vector into (multiplicity, value) pairs.
pub fn compress_knots(knots: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let mut mults = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for &k in knots {
        match values.last() {
            Some(&last) if last == k => *mults.last_mut().unwrap() += 1,
            _ => {
                values.push(k);
                mults.push(1);
            }
        }
    }
    (mults, values)
}

/// Uniform clamped knot vector on [0, 1].
pub fn clamped_uniform_knots(n_ctrl: usize, degree: usize) -> Vec<f64> {
    let spans = n_ctrl - degree;
    let mut k = vec![0.0; degree + 1];
    for i in 1..spans {
        k.push(i as f64 / spans as f64);
    }
    k.extend(std::iter::repeat(1.0).take(degree + 1));
    k
}

fn domain(knots: &[f64], degree: usize, n_ctrl: usize) -> (f64, f64) {
    (knots[degree], knots[n_ctrl])
}

fn check_range(t: f64, lo: f64, hi: f64) -> Result<f64, GeomError> {
    let tol = 1e-9 * (hi - lo).abs().max(1.0);
    if t < lo - tol || t > hi + tol || t.is_nan() {
        return Err(GeomError::ParameterOutOfRange { value: t, min: lo, max: hi });
    }
    Ok(t.clamp(lo, hi))
}

/// Knot span index containing `t` (last non-degenerate span at the upper end).
fn find_span(n_ctrl: usize, degree: usize, t: f64, knots: &[f64]) -> usize {
    let n = n_ctrl - 1;
    if t >= knots[n + 1] {
        return n;
    }
    if t <= knots[degree] {
        return degree;
    }
    let (mut low, mut high) = (degree, n + 1);
    let mut mid = (low + high) / 2;
    while t < knots[mid] || t >= knots[mid + 1] {
        if t < knots[mid] {
            high = mid;
        } else {
            low = mid;
        }
        mid = (low + high) / 2;
    }
    mid
}

/// Basis functions and their derivatives up to order `nd` on `span`
/// (Cox–de Boor recursion carried through the triangular table).
fn basis_derivs(span: usize, t: f64, degree: usize, knots: &[f64], nd: usize) -> Vec<Vec<f64>> {
    let p = degree;
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = if ndu[j][r] != 0.0 { ndu[r][j - 1] / ndu[j][r] } else { 0.0 };
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![vec![0.0; p + 1]; nd + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let mut a = vec![vec![0.0; p + 1]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=nd.min(p) {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                let rk = rk as usize;
                a[s2][0] = if ndu[pk + 1][rk] != 0.0 { a[s1][0] / ndu[pk + 1][rk] } else { 0.0 };
                d = a[s2][0] * ndu[rk][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if (r as isize - 1) <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = if ndu[pk + 1][idx] != 0.0 {
                    (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx]
                } else {
                    0.0
                };
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = if ndu[pk + 1][r] != 0.0 { -a[s1][k - 1] / ndu[pk + 1][r] } else { 0.0 };
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for k in 1..=nd.min(p) {
        for j in 0..=p {
            ders[k][j] *= factor;
        }
        factor *= (p - k) as f64;
    }
    ders
}

/// de Boor's corner-cutting evaluation of a curve point.
pub fn de_boor(degree: usize, knots: &[f64], control: &[Vec3], t: f64) -> Vec3 {
    let p = degree;
    let k = find_span(control.len(), p, t, knots);
    let mut d: Vec<Vec3> = (0..=p).map(|j| control[j + k - p]).collect();
    for r in 1..=p {
        for j in (r..=p).rev() {
            let i = j + k - p;
            let denom = knots[i + p + 1 - r] - knots[i];
            let alpha = if denom != 0.0 { (t - knots[i]) / denom } else { 0.0 };
            d[j] = d[j - 1] * (1.0 - alpha) + d[j] * alpha;
        }
    }
    d[p]
}

impl BSplineCurve {
    pub fn validate(&self) -> Result<(), GeomError> {
        if self.control.len() <= self.degree || self.knots.len() != self.control.len() + self.degree + 1 {
            return Err(GeomError::Degenerate(format!(
                "b-spline curve with {} control points, degree {}, {} knots",
                self.control.len(),
                self.degree,
                self.knots.len()
            )));
        }
        Ok(())
    }

    pub fn domain(&self) -> (f64, f64) {
        domain(&self.knots, self.degree, self.control.len())
    }

    pub fn eval(&self, t: f64) -> Result<Vec3, GeomError> {
        let (lo, hi) = self.domain();
        let t = check_range(t, lo, hi)?;
        Ok(de_boor(self.degree, &self.knots, &self.control, t))
    }

    pub fn eval_deriv(&self, t: f64) -> Result<(Vec3, Vec3), GeomError> {
        let (lo, hi) = self.domain();
        let t = check_range(t, lo, hi)?;
        let span = find_span(self.control.len(), self.degree, t, &self.knots);
        let ders = basis_derivs(span, t, self.degree, &self.knots, 1);
        let mut p = Vec3::zeros();
        let mut d = Vec3::zeros();
        for j in 0..=self.degree {
            let c = self.control[span - self.degree + j];
            p += c * ders[0][j];
            d += c * ders[1][j];
        }
        Ok((p, d))
    }

    pub fn invert(&self, p: &Vec3) -> f64 {
        let (lo, hi) = self.domain();
        let n = 64;
        let mut best = (f64::INFINITY, lo);
        for i in 0..=n {
            let t = lo + (hi - lo) * i as f64 / n as f64;
            let d = (de_boor(self.degree, &self.knots, &self.control, t) - p).norm_squared();
            if d < best.0 {
                best = (d, t);
            }
        }
        let mut t = best.1;
        for _ in 0..30 {
            let Ok((q, d)) = self.eval_deriv(t) else { break };
            let dd = d.norm_squared();
            if dd <= 1e-300 {
                break;
            }
            let step = (q - p).dot(&d) / dd;
            let next = (t - step).clamp(lo, hi);
            if (next - t).abs() < 1e-15 * (hi - lo).max(1.0) {
                t = next;
                break;
            }
            t = next;
        }
        t
    }
}

impl BSplineSurface {
    pub fn validate(&self) -> Result<(), GeomError> {
        let nu = self.control.len();
        let nv = self.control.first().map_or(0, |r| r.len());
        let ok = nu > self.u_degree
            && nv > self.v_degree
            && self.control.iter().all(|r| r.len() == nv)
            && self.u_knots.len() == nu + self.u_degree + 1
            && self.v_knots.len() == nv + self.v_degree + 1;
        if !ok {
            return Err(GeomError::Degenerate(format!(
                "b-spline surface net {}x{} with degrees ({}, {}) and {}/{} knots",
                nu,
                nv,
                self.u_degree,
                self.v_degree,
                self.u_knots.len(),
                self.v_knots.len()
            )));
        }
        Ok(())
    }

    pub fn u_domain(&self) -> (f64, f64) {
        domain(&self.u_knots, self.u_degree, self.control.len())
    }

    pub fn v_domain(&self) -> (f64, f64) {
        domain(&self.v_knots, self.v_degree, self.control[0].len())
    }

    /// Point by de Boor recursion: first along v on each contributing row, then along u.
    pub fn eval_point(&self, u: f64, v: f64) -> Result<Vec3, GeomError> {
        let (u0, u1) = self.u_domain();
        let (v0, v1) = self.v_domain();
        let u = check_range(u, u0, u1)?;
        let v = check_range(v, v0, v1)?;
        let rows: Vec<Vec3> = self
            .control
            .iter()
            .map(|row| de_boor(self.v_degree, &self.v_knots, row, v))
            .collect();
        Ok(de_boor(self.u_degree, &self.u_knots, &rows, u))
    }

    /// Point and first partial derivatives.
    pub fn eval_derivs(&self, u: f64, v: f64) -> Result<(Vec3, Vec3, Vec3), GeomError> {
        let (u0, u1) = self.u_domain();
        let (v0, v1) = self.v_domain();
        let u = check_range(u, u0, u1)?;
        let v = check_range(v, v0, v1)?;
        let (p, q) = (self.u_degree, self.v_degree);
        let su = find_span(self.control.len(), p, u, &self.u_knots);
        let sv = find_span(self.control[0].len(), q, v, &self.v_knots);
        let nu = basis_derivs(su, u, p, &self.u_knots, 1);
        let nv = basis_derivs(sv, v, q, &self.v_knots, 1);
        let mut s = Vec3::zeros();
        let mut du = Vec3::zeros();
        let mut dv = Vec3::zeros();
        for i in 0..=p {
            for j in 0..=q {
                let c = self.control[su - p + i][sv - q + j];
                s += c * (nu[0][i] * nv[0][j]);
                du += c * (nu[1][i] * nv[0][j]);
                dv += c * (nu[0][i] * nv[1][j]);
            }
        }
        Ok((s, du, dv))
    }

    /// Closest-point parameters: coarse grid seed refined by Gauss–Newton.
    pub fn invert(&self, p: &Vec3) -> (f64, f64) {
        let (u0, u1) = self.u_domain();
        let (v0, v1) = self.v_domain();
        let n = 16;
        let mut best = (f64::INFINITY, u0, v0);
        for i in 0..=n {
            for j in 0..=n {
                let u = u0 + (u1 - u0) * i as f64 / n as f64;
                let v = v0 + (v1 - v0) * j as f64 / n as f64;
                if let Ok(q) = self.eval_point(u, v) {
                    let d = (q - p).norm_squared();
                    if d < best.0 {
                        best = (d, u, v);
                    }
                }
            }
        }
        let (mut u, mut v) = (best.1, best.2);
        for _ in 0..40 {
            let Ok((q, su, sv)) = self.eval_derivs(u, v) else { break };
            let r = q - p;
            let (a, b, c) = (su.dot(&su), su.dot(&sv), sv.dot(&sv));
            let (g1, g2) = (r.dot(&su), r.dot(&sv));
            let det = a * c - b * b;
            if det.abs() <= 1e-300 {
                break;
            }
            let du = (c * g1 - b * g2) / det;
            let dv = (a * g2 - b * g1) / det;
            let nu = (u - du).clamp(u0, u1);
            let nv = (v - dv).clamp(v0, v1);
            let moved = (nu - u).abs() + (nv - v).abs();
            u = nu;
            v = nv;
            if moved < 1e-15 {
                break;
            }
        }
        (u, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_surface() -> BSplineSurface {
        let control = (0..5)
            .map(|i| {
                (0..4)
                    .map(|j| Vec3::new(i as f64, j as f64, ((i * j) as f64).sin()))
                    .collect()
            })
            .collect();
        BSplineSurface {
            u_degree: 3,
            v_degree: 2,
            control,
            u_knots: clamped_uniform_knots(5, 3),
            v_knots: clamped_uniform_knots(4, 2),
        }
    }

    #[test]
    fn basis_contraction_matches_de_boor() {
        let s = sample_surface();
        s.validate().unwrap();
        for &(u, v) in &[(0.0, 0.0), (0.13, 0.77), (0.5, 0.5), (1.0, 1.0), (0.99, 0.01)] {
            let a = s.eval_point(u, v).unwrap();
            let (b, _, _) = s.eval_derivs(u, v).unwrap();
            assert!((a - b).norm() < 1e-12, "({u},{v})");
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        let s = sample_surface();
        let (u, v, h) = (0.37, 0.61, 1e-6);
        let (_, su, sv) = s.eval_derivs(u, v).unwrap();
        let fu = (s.eval_point(u + h, v).unwrap() - s.eval_point(u - h, v).unwrap()) / (2.0 * h);
        let fv = (s.eval_point(u, v + h).unwrap() - s.eval_point(u, v - h).unwrap()) / (2.0 * h);
        assert!((su - fu).norm() < 1e-6);
        assert!((sv - fv).norm() < 1e-6);
    }

    #[test]
    fn out_of_range_parameter_is_error() {
        let s = sample_surface();
        assert!(matches!(s.eval_point(1.5, 0.5), Err(GeomError::ParameterOutOfRange { .. })));
    }

    #[test]
    fn curve_derivative_and_inversion() {
        let c = BSplineCurve {
            degree: 2,
            control: vec![Vec3::zeros(), Vec3::new(1.0, 2.0, 0.0), Vec3::new(3.0, 2.0, 1.0), Vec3::new(4.0, 0.0, 0.0)],
            knots: clamped_uniform_knots(4, 2),
        };
        c.validate().unwrap();
        let (p, d) = c.eval_deriv(0.3).unwrap();
        let h = 1e-6;
        let fd = (c.eval(0.3 + h).unwrap() - c.eval(0.3 - h).unwrap()) / (2.0 * h);
        assert!((d - fd).norm() < 1e-6);
        assert!((c.invert(&p) - 0.3).abs() < 1e-9);
    }

    #[test]
    fn knot_compression_roundtrip() {
        let k = vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0];
        let (m, v) = compress_knots(&k);
        assert_eq!(m, vec![3, 1, 3]);
        assert_eq!(expand_knots(&m, &v), k);
    }
}
