//! Planar polygon helpers: half-plane clipping, areas, bilinear cells.

/// A point in the plane.
pub type Point = [f64; 2];

/// Half-plane `{y : n·y + c >= 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub normal: [f64; 2],
    pub offset: f64,
}

impl HalfPlane {
    pub fn new(normal: [f64; 2], offset: f64) -> Self {
        Self { normal, offset }
    }

    #[inline]
    pub fn eval(&self, y: Point) -> f64 {
        self.normal[0] * y[0] + self.normal[1] * y[1] + self.offset
    }

    fn intersect(&self, a: Point, b: Point, fa: f64, fb: f64) -> Point {
        let t = fa / (fa - fb);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }
}

/// Sutherland–Hodgman clip of a polygon against one half-plane.
pub fn clip_polygon(poly: &[Point], hp: &HalfPlane, out: &mut Vec<Point>) {
    out.clear();
    let n = poly.len();
    if n == 0 {
        return;
    }
    for i in 0..n {
        let cur = poly[i];
        let prev = poly[(i + n - 1) % n];
        let fc = hp.eval(cur);
        let fp = hp.eval(prev);
        if fc >= 0.0 {
            if fp < 0.0 {
                out.push(hp.intersect(prev, cur, fp, fc));
            }
            out.push(cur);
        } else if fp >= 0.0 {
            out.push(hp.intersect(prev, cur, fp, fc));
        }
    }
}

/// Signed shoelace area (positive for counter-clockwise order).
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * acc
}

#[inline]
pub fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Smallest corner orientation of a quadrilateral, measured in units of the
/// squared longest edge so that it stays meaningful at any length scale.
/// Positive iff the quad is strictly convex and counter-clockwise.
pub fn quad_min_corner_turn(q: &[Point; 4]) -> f64 {
    let mut scale: f64 = 0.0;
    for i in 0..4 {
        let a = q[i];
        let b = q[(i + 1) % 4];
        scale = scale.max((b[0] - a[0]).abs()).max((b[1] - a[1]).abs());
    }
    if scale == 0.0 || !scale.is_finite() {
        return f64::NAN;
    }
    let mut worst = f64::INFINITY;
    let o = q[0];
    let r: Vec<Point> = q.iter().map(|p| [(p[0] - o[0]) / scale, (p[1] - o[1]) / scale]).collect();
    for i in 0..4 {
        let prev = r[(i + 3) % 4];
        let cur = r[i];
        let next = r[(i + 1) % 4];
        worst = worst.min(cross(cur, next, prev));
    }
    worst
}

/// Bilinear map of the unit square onto a quadrilateral with corners
/// `p00, p10, p11, p01` (counter-clockwise).
#[derive(Debug, Clone, Copy)]
pub struct BilinearQuad {
    pub p00: Point,
    a: Point,
    b: Point,
    c: Point,
}

impl BilinearQuad {
    pub fn new(q: &[Point; 4]) -> Self {
        let [p00, p10, p11, p01] = *q;
        Self {
            p00,
            a: [p10[0] - p00[0], p10[1] - p00[1]],
            b: [p01[0] - p00[0], p01[1] - p00[1]],
            c: [p11[0] - p10[0] - p01[0] + p00[0], p11[1] - p10[1] - p01[1] + p00[1]],
        }
    }

    #[inline]
    pub fn map(&self, s: f64, t: f64) -> Point {
        [
            self.p00[0] + self.a[0] * s + self.b[0] * t + self.c[0] * s * t,
            self.p00[1] + self.a[1] * s + self.b[1] * t + self.c[1] * s * t,
        ]
    }

    /// Jacobian determinant at reference point (s, t).
    #[inline]
    pub fn jacobian(&self, s: f64, t: f64) -> f64 {
        let dxs = [self.a[0] + self.c[0] * t, self.a[1] + self.c[1] * t];
        let dxt = [self.b[0] + self.c[0] * s, self.b[1] + self.c[1] * s];
        dxs[0] * dxt[1] - dxs[1] * dxt[0]
    }

    /// Newton inverse of the bilinear map. Converges for points inside or
    /// near a convex cell; returns `None` if the iteration stalls.
    pub fn inverse(&self, y: Point) -> Option<(f64, f64)> {
        let (mut s, mut t) = (0.5, 0.5);
        let scale = self.a[0].abs().max(self.a[1].abs()).max(self.b[0].abs()).max(self.b[1].abs());
        for _ in 0..30 {
            let p = self.map(s, t);
            let rx = p[0] - y[0];
            let ry = p[1] - y[1];
            let j11 = self.a[0] + self.c[0] * t;
            let j21 = self.a[1] + self.c[1] * t;
            let j12 = self.b[0] + self.c[0] * s;
            let j22 = self.b[1] + self.c[1] * s;
            let det = j11 * j22 - j12 * j21;
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let ds = (j22 * rx - j12 * ry) / det;
            let dt = (-j21 * rx + j11 * ry) / det;
            s -= ds;
            t -= dt;
            if rx.abs().max(ry.abs()) <= 1e-12 * scale && ds.abs().max(dt.abs()) < 1e-12 {
                return Some((s, t));
            }
        }
        let p = self.map(s, t);
        let res = (p[0] - y[0]).abs().max((p[1] - y[1]).abs());
        (res <= 1e-10 * scale).then_some((s, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_square_by_diagonal_halves_area() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let mut out = Vec::new();
        clip_polygon(&sq, &HalfPlane::new([1.0, -1.0], 0.0), &mut out);
        assert!((signed_area(&out) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bilinear_inverse_round_trips() {
        let q = BilinearQuad::new(&[[1.0, 0.0], [2.2, 0.1], [2.0, 1.3], [0.9, 1.0]]);
        for &(s, t) in &[(0.1, 0.2), (0.7, 0.9), (0.0, 1.0), (0.5, 0.5)] {
            let (s2, t2) = q.inverse(q.map(s, t)).unwrap();
            assert!((s - s2).abs() < 1e-12 && (t - t2).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_turn_detects_nonconvex_quads() {
        let good = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let dart = [[0.0, 0.0], [1.0, 0.0], [0.2, 0.2], [0.0, 1.0]];
        assert!(quad_min_corner_turn(&good) > 0.0);
        assert!(quad_min_corner_turn(&dart) < 0.0);
        let tiny = good.map(|p| [p[0] * 1e-300, p[1] * 1e-300]);
        assert!(quad_min_corner_turn(&tiny) > 0.0);
    }
}
