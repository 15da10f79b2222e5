//! Lagrangian marker lattice carrying vorticity and density.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{quad_min_corner_turn, signed_area, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("cell {cell} is tangled (corner turn {turn:e})")]
    Tangled { cell: usize, turn: f64 },
    #[error("marker {marker} left the open quadrant at ({x1}, {x2})")]
    OffQuadrant { marker: usize, x1: f64, x2: f64 },
    #[error("marker {marker} carries a non-finite or negative value")]
    BadValue { marker: usize },
    #[error("lattice shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub position: Point,
    pub initial_position: Point,
    pub omega: f64,
    pub rho: f64,
}

/// Axis-aligned bound `[n1, n2] x [0, m]` on the support of ω and ρ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub n1: f64,
    pub n2: f64,
    pub m: f64,
}

/// Structured `(nx+1) x (ny+1)` marker lattice with `nx * ny` quadrilateral
/// cells. Cell `(i, j)` has corners `(i,j), (i+1,j), (i+1,j+1), (i,j+1)`.
///
/// ω is bilinear on each cell in reference coordinates, unless
/// `cell_omega` is set, in which case it is constant per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub nx: usize,
    pub ny: usize,
    pub markers: Vec<Marker>,
    pub cell_omega: Option<Vec<f64>>,
}

impl Field {
    /// Build a lattice from a node generator `(i, j) -> (position, omega, rho)`.
    pub fn structured<F>(nx: usize, ny: usize, mut node: F) -> Self
    where
        F: FnMut(usize, usize) -> (Point, f64, f64),
    {
        let mut markers = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let (p, omega, rho) = node(i, j);
                markers.push(Marker { position: p, initial_position: p, omega, rho });
            }
        }
        Self { nx, ny, markers, cell_omega: None }
    }

    /// Tensor lattice over the given node coordinates with ω and ρ sampled
    /// from closures.
    pub fn tensor<W, R>(xs: &[f64], ys: &[f64], omega: W, rho: R) -> Self
    where
        W: Fn(Point) -> f64,
        R: Fn(Point) -> f64,
    {
        Self::structured(xs.len() - 1, ys.len() - 1, |i, j| {
            let p = [xs[i], ys[j]];
            (p, omega(p), rho(p))
        })
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn cell_nodes(&self, c: usize) -> [usize; 4] {
        let (i, j) = (c % self.nx, c / self.nx);
        let k = self.node_index(i, j);
        let w = self.nx + 1;
        [k, k + 1, k + 1 + w, k + w]
    }

    #[inline]
    pub fn cell_quad(&self, c: usize) -> [Point; 4] {
        self.cell_nodes(c).map(|k| self.markers[k].position)
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        signed_area(&self.cell_quad(c))
    }

    /// Corner values of ω on cell `c` (constant if `cell_omega` is set).
    #[inline]
    pub fn cell_corner_omega(&self, c: usize) -> [f64; 4] {
        match &self.cell_omega {
            Some(v) => [v[c]; 4],
            None => self.cell_nodes(c).map(|k| self.markers[k].omega),
        }
    }

    fn cell_is_active(&self, c: usize) -> bool {
        let om = self.cell_corner_omega(c);
        om.iter().any(|&w| w > 0.0)
            || self.cell_nodes(c).iter().any(|&k| self.markers[k].rho > 0.0)
    }

    /// Bounding box of every cell on which ω or ρ is nonzero. `None` when
    /// both vanish identically.
    pub fn support_box(&self) -> Option<SupportBox> {
        let mut sb: Option<SupportBox> = None;
        for c in 0..self.n_cells() {
            if !self.cell_is_active(c) {
                continue;
            }
            for p in self.cell_quad(c) {
                let b = sb.get_or_insert(SupportBox { n1: p[0], n2: p[0], m: p[1] });
                b.n1 = b.n1.min(p[0]);
                b.n2 = b.n2.max(p[0]);
                b.m = b.m.max(p[1]);
            }
        }
        sb
    }

    /// Check the lattice invariants: markers in the quadrant, finite
    /// nonnegative values, every cell strictly convex and positively oriented.
    pub fn validate(&self) -> Result<(), FieldError> {
        if self.markers.len() != (self.nx + 1) * (self.ny + 1) {
            return Err(FieldError::Shape(format!(
                "{} markers for a {}x{} lattice",
                self.markers.len(),
                self.nx,
                self.ny
            )));
        }
        if let Some(v) = &self.cell_omega {
            if v.len() != self.n_cells() {
                return Err(FieldError::Shape(format!("{} cell values for {} cells", v.len(), self.n_cells())));
            }
        }
        for (k, m) in self.markers.iter().enumerate() {
            let [x1, x2] = m.position;
            if !(x1.is_finite() && x2.is_finite()) || x1 <= 0.0 || x2 < 0.0 {
                return Err(FieldError::OffQuadrant { marker: k, x1, x2 });
            }
            if !(m.omega.is_finite() && m.omega >= 0.0 && m.rho.is_finite() && (0.0..=1.0).contains(&m.rho)) {
                return Err(FieldError::BadValue { marker: k });
            }
        }
        for c in 0..self.n_cells() {
            let turn = quad_min_corner_turn(&self.cell_quad(c));
            if !(turn > 0.0) {
                return Err(FieldError::Tangled { cell: c, turn });
            }
        }
        Ok(())
    }

    pub fn omega_max(&self) -> f64 {
        self.markers.iter().fold(0.0, |a, m| a.max(m.omega))
    }

    /// Shortest cell edge in the lattice.
    pub fn min_cell_width(&self) -> f64 {
        let mut w = f64::INFINITY;
        for c in 0..self.n_cells() {
            let q = self.cell_quad(c);
            for i in 0..4 {
                let a = q[i];
                let b = q[(i + 1) % 4];
                w = w.min((b[0] - a[0]).hypot(b[1] - a[1]));
            }
        }
        w
    }

    /// Shortest edge incident to each marker.
    pub fn local_widths(&self) -> Vec<f64> {
        let mut w = vec![f64::INFINITY; self.markers.len()];
        for c in 0..self.n_cells() {
            let nodes = self.cell_nodes(c);
            for i in 0..4 {
                let (ka, kb) = (nodes[i], nodes[(i + 1) % 4]);
                let a = self.markers[ka].position;
                let b = self.markers[kb].position;
                let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                w[ka] = w[ka].min(len);
                w[kb] = w[kb].min(len);
            }
        }
        w
    }

    pub fn positions(&self) -> Vec<Point> {
        self.markers.iter().map(|m| m.position).collect()
    }

    /// Copy of the field with marker positions and ω replaced.
    pub fn with_state(&self, positions: &[Point], omega: &[f64]) -> Field {
        let mut f = self.clone();
        for ((m, &p), &w) in f.markers.iter_mut().zip(positions).zip(omega) {
            m.position = p;
            m.omega = w;
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_lattice() -> Field {
        let xs = [1.0, 1.5, 2.0];
        let ys = [0.0, 0.5, 1.0];
        Field::tensor(&xs, &ys, |p| if p[0] > 1.9 { 1.0 } else { 0.0 }, |_| 0.0)
    }

    #[test]
    fn support_box_covers_cells_touching_positive_nodes() {
        let f = unit_lattice();
        let sb = f.support_box().unwrap();
        assert_eq!(sb, SupportBox { n1: 1.5, n2: 2.0, m: 1.0 });
    }

    #[test]
    fn validate_flags_tangling() {
        let mut f = unit_lattice();
        f.validate().unwrap();
        f.markers[4].position = [2.5, 0.5];
        assert!(matches!(f.validate(), Err(FieldError::Tangled { .. })));
    }

    #[test]
    fn validate_flags_axis_collision() {
        let mut f = unit_lattice();
        f.markers[0].position = [0.0, 0.0];
        assert!(matches!(f.validate(), Err(FieldError::OffQuadrant { marker: 0, .. })));
    }
}
