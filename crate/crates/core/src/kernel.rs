//! Sector-kernel functional `Q(x) = ∫_{x+S_α} y₁y₂|y|⁻⁴ ω(y) dy`, the
//! velocity `(−x₁Q, x₂Q)` and the gradient of `Q` by boundary-ray integrals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Field, SupportBox};
use crate::geometry::{clip_polygon, signed_area, BilinearQuad, HalfPlane, Point};
use crate::numerics::{integrate_adaptive, triangle_rule, CompensatedSum, GaussLegendre, QuadError};

/// Default hybrid tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

const MAX_TRI_DEPTH: u32 = 8;
const MAX_CELL_DEPTH: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("support of omega reaches the vertical axis (n1 = {n1})")]
    SupportViolation { n1: f64 },
    #[error("query point ({x1}, {x2}) is outside the closed first quadrant")]
    InvalidPoint { x1: f64, x2: f64 },
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("inverse bilinear map failed in cell {cell}")]
    InverseMap { cell: usize },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// The sector `x + S_α = {y : y₁ ≥ x₁, x₂ ≤ y₂ ≤ x₂ + α(y₁ − x₁)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorSpec {
    pub alpha: f64,
    pub apex: Point,
}

impl SectorSpec {
    pub fn half_planes(&self) -> [HalfPlane; 3] {
        let [x1, x2] = self.apex;
        [
            HalfPlane::new([1.0, 0.0], -x1),
            HalfPlane::new([0.0, 1.0], -x2),
            HalfPlane::new([self.alpha, -1.0], x2 - self.alpha * x1),
        ]
    }

    pub fn contains(&self, y: Point) -> bool {
        self.half_planes().iter().all(|h| h.eval(y) >= 0.0)
    }
}

/// `y₁y₂/|y|⁴`.
#[inline]
pub fn kernel_weight(y: Point) -> f64 {
    let r2 = y[0] * y[0] + y[1] * y[1];
    y[0] * y[1] / (r2 * r2)
}

/// One active cell. `zquad` and `map` live in coordinates divided by the
/// power of two `scale`; the kernel is homogeneous of degree −2, so area
/// integrals are unchanged by the rescaling and cells near the origin never
/// under- or overflow.
#[derive(Debug, Clone)]
struct Cell {
    index: usize,
    quad: [Point; 4],
    zquad: [Point; 4],
    scale: f64,
    map: BilinearQuad,
    omega: [f64; 4],
    constant: bool,
    bbox: [f64; 4],
    /// Absolute-tolerance floor per unit of scaled area.
    floor_per_area: f64,
    full: f64,
}

fn power_of_two_scale(bbox: &[f64; 4]) -> f64 {
    let m = bbox[1].abs().max(bbox[3].abs()).max(f64::MIN_POSITIVE);
    2f64.powi(m.log2().floor() as i32)
}

impl Cell {
    #[inline]
    fn omega_ref(&self, s: f64, t: f64) -> f64 {
        let w = &self.omega;
        (1.0 - s) * (1.0 - t) * w[0] + s * (1.0 - t) * w[1] + s * t * w[2] + (1.0 - s) * t * w[3]
    }

    #[inline]
    fn omega_at(&self, z: Point) -> Result<f64, KernelError> {
        if self.constant {
            return Ok(self.omega[0]);
        }
        let (s, t) = self.map.inverse(z).ok_or(KernelError::InverseMap { cell: self.index })?;
        Ok(self.omega_ref(s, t))
    }

    /// Integrand at the scaled point `z`.
    fn integrand(&self, z: Point) -> Result<f64, KernelError> {
        Ok(kernel_weight(z) * self.omega_at(z)?)
    }

    #[inline]
    fn to_scaled(&self, y: Point) -> Point {
        [y[0] / self.scale, y[1] / self.scale]
    }

    /// Parameter interval on which the scaled ray `o + τ d`, τ ≥ 0, lies
    /// inside the (convex, counter-clockwise) scaled cell.
    fn ray_interval(&self, o: Point, d: Point) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        for i in 0..4 {
            let a = self.zquad[i];
            let b = self.zquad[(i + 1) % 4];
            // Inward normal of a CCW edge.
            let n = [-(b[1] - a[1]), b[0] - a[0]];
            let num = n[0] * (o[0] - a[0]) + n[1] * (o[1] - a[1]);
            let den = n[0] * d[0] + n[1] * d[1];
            if den == 0.0 {
                if num < 0.0 {
                    return None;
                }
            } else {
                let t = -num / den;
                if den > 0.0 {
                    lo = lo.max(t);
                } else {
                    hi = hi.min(t);
                }
            }
        }
        (hi > lo).then_some((lo, hi))
    }
}

/// Precomputed kernel data for one immutable field snapshot.
#[derive(Debug, Clone)]
pub struct SectorKernel {
    alpha: f64,
    tol: f64,
    cells: Vec<Cell>,
    support: Option<SupportBox>,
}

fn tensor_cell_integral(cell: &Cell, tol: f64) -> f64 {
    let rule = GaussLegendre::cached(5);
    let eval = |s0: f64, t0: f64, h: f64| -> f64 {
        let mut acc = CompensatedSum::new();
        for (xs, ws) in rule.nodes.iter().zip(&rule.weights) {
            let s = s0 + 0.5 * h * (xs + 1.0);
            for (xt, wt) in rule.nodes.iter().zip(&rule.weights) {
                let t = t0 + 0.5 * h * (xt + 1.0);
                let y = cell.map.map(s, t);
                acc.add(ws * wt * kernel_weight(y) * cell.omega_ref(s, t) * cell.map.jacobian(s, t));
            }
        }
        acc.value() * 0.25 * h * h
    };
    fn recurse(
        eval: &dyn Fn(f64, f64, f64) -> f64,
        s0: f64,
        t0: f64,
        h: f64,
        coarse: f64,
        depth: u32,
        tol: f64,
        area_scale: f64,
    ) -> f64 {
        let hh = 0.5 * h;
        let parts = [
            eval(s0, t0, hh),
            eval(s0 + hh, t0, hh),
            eval(s0, t0 + hh, hh),
            eval(s0 + hh, t0 + hh, hh),
        ];
        let fine = parts.iter().copied().collect::<CompensatedSum>().value();
        if (fine - coarse).abs() <= tol * (fine.abs() + area_scale * h * h) || depth >= MAX_CELL_DEPTH {
            return fine;
        }
        let offs = [(0.0, 0.0), (hh, 0.0), (0.0, hh), (hh, hh)];
        offs.iter()
            .zip(parts)
            .map(|(&(ds, dt), p)| recurse(eval, s0 + ds, t0 + dt, hh, p, depth + 1, tol, area_scale))
            .collect::<CompensatedSum>()
            .value()
    }
    let area = signed_area(&cell.zquad);
    let coarse = eval(0.0, 0.0, 1.0);
    recurse(&eval, 0.0, 0.0, 1.0, coarse, 0, tol, area * cell.floor_per_area)
}

impl SectorKernel {
    pub fn new(field: &Field, alpha: f64, tol: f64) -> Result<Self, KernelError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(KernelError::InvalidParameter(format!("alpha = {alpha}")));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(KernelError::InvalidParameter(format!("tol = {tol}")));
        }
        let mut cells = Vec::new();
        let mut support: Option<SupportBox> = None;
        for c in 0..field.n_cells() {
            let omega = field.cell_corner_omega(c);
            if omega.iter().all(|&w| w == 0.0) {
                continue;
            }
            let quad = field.cell_quad(c);
            let mut bbox = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
            for p in &quad {
                bbox[0] = bbox[0].min(p[0]);
                bbox[1] = bbox[1].max(p[0]);
                bbox[2] = bbox[2].min(p[1]);
                bbox[3] = bbox[3].max(p[1]);
            }
            let sb = support.get_or_insert(SupportBox { n1: bbox[0], n2: bbox[1], m: bbox[3] });
            sb.n1 = sb.n1.min(bbox[0]);
            sb.n2 = sb.n2.max(bbox[1]);
            sb.m = sb.m.max(bbox[3]);
            let scale = power_of_two_scale(&bbox);
            let zquad = quad.map(|p| [p[0] / scale, p[1] / scale]);
            cells.push(Cell {
                index: c,
                quad,
                zquad,
                scale,
                map: BilinearQuad::new(&zquad),
                omega,
                constant: field.cell_omega.is_some(),
                bbox,
                floor_per_area: 0.0,
                full: 0.0,
            });
        }
        if let Some(sb) = support {
            if !(sb.n1 > 0.0) {
                return Err(KernelError::SupportViolation { n1: sb.n1 });
            }
        }
        // Areas relative to the support's own power-of-two scale.
        let g = support.map(|sb| power_of_two_scale(&[sb.n1, sb.n2, 0.0, sb.m])).unwrap_or(1.0);
        let total_area: f64 = cells
            .iter()
            .map(|c| signed_area(&c.quad.map(|p| [p[0] / g, p[1] / g])))
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        for cell in &mut cells {
            let r = cell.scale / g;
            cell.floor_per_area = r * r / total_area;
        }
        let totals: Vec<f64> = cells.par_iter().map(|cell| tensor_cell_integral(cell, tol)).collect();
        for (cell, v) in cells.iter_mut().zip(totals) {
            cell.full = v;
        }
        Ok(Self { alpha, tol, cells, support })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn support(&self) -> Option<SupportBox> {
        self.support
    }

    fn check_point(x: Point) -> Result<(), KernelError> {
        if !(x[0] >= 0.0 && x[1] >= 0.0 && x[0].is_finite() && x[1].is_finite()) {
            return Err(KernelError::InvalidPoint { x1: x[0], x2: x[1] });
        }
        Ok(())
    }

    /// `Q(x)`.
    pub fn q(&self, x: Point) -> Result<f64, KernelError> {
        Self::check_point(x)?;
        let planes = SectorSpec { alpha: self.alpha, apex: x }.half_planes();
        let mut acc = CompensatedSum::new();
        let mut poly: Vec<Point> = Vec::with_capacity(8);
        let mut tmp: Vec<Point> = Vec::with_capacity(8);
        for cell in &self.cells {
            if cell.bbox[1] <= x[0] || cell.bbox[3] <= x[1] {
                continue;
            }
            let mut all_in = true;
            let mut outside = false;
            for h in &planes {
                let mut n_in = 0;
                let mut n_out = 0;
                for p in &cell.quad {
                    let v = h.eval(*p);
                    if v >= 0.0 {
                        n_in += 1;
                    }
                    if v <= 0.0 {
                        n_out += 1;
                    }
                }
                if n_out == 4 {
                    outside = true;
                    break;
                }
                if n_in < 4 {
                    all_in = false;
                }
            }
            if outside {
                continue;
            }
            if all_in {
                acc.add(cell.full);
                continue;
            }
            poly.clear();
            poly.extend_from_slice(&cell.quad);
            for h in &planes {
                clip_polygon(&poly, h, &mut tmp);
                std::mem::swap(&mut poly, &mut tmp);
                if poly.len() < 3 {
                    break;
                }
            }
            if poly.len() < 3 {
                continue;
            }
            for p in poly.iter_mut() {
                *p = cell.to_scaled(*p);
            }
            let area = signed_area(&poly);
            let cell_area = signed_area(&cell.zquad);
            if area <= 64.0 * f64::EPSILON * cell_area {
                continue;
            }
            acc.add(self.polygon_integral(cell, &poly)?);
        }
        Ok(acc.value())
    }

    fn polygon_integral(&self, cell: &Cell, poly: &[Point]) -> Result<f64, KernelError> {
        let n = poly.len() as f64;
        let c = poly.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0] / n, a[1] + p[1] / n]);
        let mut acc = CompensatedSum::new();
        for i in 0..poly.len() {
            let tri = [c, poly[i], poly[(i + 1) % poly.len()]];
            let area = 0.5 * crate::geometry::cross(tri[0], tri[1], tri[2]);
            if area <= 0.0 {
                continue;
            }
            let coarse = tri_rule(cell, &tri, area)?;
            acc.add(self.tri_adaptive(cell, &tri, area, coarse, 0)?);
        }
        Ok(acc.value())
    }

    fn tri_adaptive(&self, cell: &Cell, tri: &[Point; 3], area: f64, coarse: f64, depth: u32) -> Result<f64, KernelError> {
        let mid = |a: Point, b: Point| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let (m01, m12, m20) = (mid(tri[0], tri[1]), mid(tri[1], tri[2]), mid(tri[2], tri[0]));
        let kids = [
            [tri[0], m01, m20],
            [m01, tri[1], m12],
            [m20, m12, tri[2]],
            [m12, m20, m01],
        ];
        let a4 = 0.25 * area;
        let mut vals = [0.0; 4];
        for (v, k) in vals.iter_mut().zip(&kids) {
            *v = tri_rule(cell, k, a4)?;
        }
        let fine = vals.iter().copied().collect::<CompensatedSum>().value();
        let allowance = self.tol * (fine.abs() + area * cell.floor_per_area);
        if (fine - coarse).abs() <= allowance || depth >= MAX_TRI_DEPTH {
            return Ok(fine);
        }
        let mut acc = CompensatedSum::new();
        for (k, v) in kids.iter().zip(vals) {
            acc.add(self.tri_adaptive(cell, k, a4, v, depth + 1)?);
        }
        Ok(acc.value())
    }

    /// `(−x₁Q, x₂Q)`.
    pub fn velocity(&self, x: Point) -> Result<Point, KernelError> {
        let q = self.q(x)?;
        Ok([-x[0] * q, x[1] * q])
    }

    fn ray_integral(&self, o: Point, d: Point) -> Result<f64, KernelError> {
        let diag = match self.support {
            Some(sb) => (sb.n2 - sb.n1).hypot(sb.m).max(f64::MIN_POSITIVE),
            None => return Ok(0.0),
        };
        let dn = d[0].hypot(d[1]);
        let mut acc = CompensatedSum::new();
        for cell in &self.cells {
            if cell.bbox[1] <= o[0] {
                continue;
            }
            // With t = scale·s the segment integral is (1/scale)∫ K(z(s)) ds.
            let l = cell.scale;
            let zo = cell.to_scaled(o);
            let Some((s0, s1)) = cell.ray_interval(zo, d) else { continue };
            let seg = (s1 - s0) * dn * l;
            let mut failure = None;
            let mut f = |s: f64| {
                let z = [zo[0] + s * d[0], zo[1] + s * d[1]];
                cell.integrand(z).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    0.0
                })
            };
            let est = GaussLegendre::cached(8).integrate(&mut f, s0, s1);
            let tol = self.tol * (est.abs() + seg / diag * l);
            let v = integrate_adaptive(&mut f, s0, s1, tol)?;
            if let Some(e) = failure {
                return Err(e);
            }
            acc.add(v.value / l);
        }
        Ok(acc.value())
    }

    /// `(∂₁Q, ∂₂Q)` from the boundary-ray identities
    /// `∂₁Q = −α∫₀^∞ K(x₁+τ, x₂+ατ) dτ` and
    /// `∂₂Q = ∫₀^∞ [K(x₁+τ, x₂+ατ) − K(x₁+τ, x₂)] dτ`.
    pub fn grad_q(&self, x: Point) -> Result<Point, KernelError> {
        Self::check_point(x)?;
        let slanted = self.ray_integral(x, [1.0, self.alpha])?;
        let flat = self.ray_integral(x, [1.0, 0.0])?;
        Ok([-self.alpha * slanted, slanted - flat])
    }

    /// `Q` at many points, evaluated concurrently; results are in input order.
    pub fn q_many(&self, xs: &[Point]) -> Result<Vec<f64>, KernelError> {
        xs.par_iter().map(|&x| self.q(x)).collect()
    }

    pub fn velocity_many(&self, xs: &[Point]) -> Result<Vec<Point>, KernelError> {
        xs.par_iter().map(|&x| self.velocity(x)).collect()
    }
}

fn tri_rule(cell: &Cell, tri: &[Point; 3], area: f64) -> Result<f64, KernelError> {
    let mut acc = 0.0;
    for (b, w) in triangle_rule() {
        let y = [
            b[0] * tri[0][0] + b[1] * tri[1][0] + b[2] * tri[2][0],
            b[0] * tri[0][1] + b[1] * tri[1][1] + b[2] * tri[2][1],
        ];
        acc += w * cell.integrand(y)?;
    }
    Ok(acc * area)
}

/// `Q(x)` for a single query.
pub fn eval_q(field: &Field, x: Point, alpha: f64, tol: f64) -> Result<f64, KernelError> {
    SectorKernel::new(field, alpha, tol)?.q(x)
}

/// `u(x) = (−x₁Q, x₂Q)` for a single query.
pub fn eval_velocity(field: &Field, x: Point, alpha: f64, tol: f64) -> Result<Point, KernelError> {
    SectorKernel::new(field, alpha, tol)?.velocity(x)
}

/// `∇Q(x)` for a single query.
pub fn eval_grad_q(field: &Field, x: Point, alpha: f64, tol: f64) -> Result<Point, KernelError> {
    SectorKernel::new(field, alpha, tol)?.grad_q(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_adaptive;

    fn strip(omega: f64) -> Field {
        // Covers [1, 2] x [0, 6] so the whole sector slice at x = (1, 0), α = 1 lies inside.
        let xs: Vec<f64> = (0..=8).map(|i| 1.0 + i as f64 / 8.0).collect();
        let ys: Vec<f64> = (0..=24).map(|j| j as f64 / 4.0).collect();
        Field::tensor(&xs, &ys, |_| omega, |_| 0.0)
    }

    #[test]
    fn zero_field_gives_zero() {
        let f = strip(0.0);
        assert_eq!(eval_q(&f, [1.3, 0.2], 1.0, 1e-8).unwrap(), 0.0);
        assert_eq!(eval_grad_q(&f, [1.3, 0.2], 1.0, 1e-8).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn unit_strip_matches_reduced_integral() {
        let f = strip(1.0);
        let q = eval_q(&f, [1.0, 0.0], 1.0, 1e-10).unwrap();
        // ∫ y₁y₂/|y|⁴ dy₂ over [0, y₁−1] = ½y₁[1/y₁² − 1/(y₁² + (y₁−1)²)].
        let g = |s: f64| 0.5 * s * (1.0 / (s * s) - 1.0 / (s * s + (s - 1.0) * (s - 1.0)));
        let want = integrate_adaptive(g, 1.0, 2.0, 1e-14).unwrap().value;
        assert!((q - want).abs() < 1e-9, "{q} vs {want}");
        assert!((want - 0.029_481_948_975_508_58).abs() < 1e-13);
    }

    #[test]
    fn velocity_vanishes_on_axes_components() {
        let f = strip(1.0);
        let k = SectorKernel::new(&f, 1.0, 1e-8).unwrap();
        assert_eq!(k.velocity([0.7, 0.0]).unwrap()[1], 0.0);
        assert_eq!(k.velocity([0.0, 0.4]).unwrap()[0], 0.0);
    }

    #[test]
    fn invalid_point_is_rejected() {
        let k = SectorKernel::new(&strip(1.0), 1.0, 1e-8).unwrap();
        assert!(matches!(k.q([-0.1, 0.0]), Err(KernelError::InvalidPoint { .. })));
    }

    #[test]
    fn sector_membership() {
        let s = SectorSpec { alpha: 2.0, apex: [1.0, 1.0] };
        assert!(s.contains([2.0, 2.9]));
        assert!(!s.contains([2.0, 3.1]));
        assert!(!s.contains([0.9, 1.0]));
    }
}
