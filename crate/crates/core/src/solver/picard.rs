//! Fixed-point iteration for the Lagrangian flow map on a fixed time grid.
//!
//! The iterate `Φᵏ(z, tₙ)` is stored on the initial lattice at uniform time
//! nodes. Given `Φᵏ`, vorticity is carried along by
//! `ω(Φ(z,t),t) = ω₀(z) + ∫₀ᵗ ρ₀(z)/Φ₁(z,s) ds`, the velocity at `Φᵏ(z,tₙ)` is
//! evaluated with the deformed lattice (whose per-cell interpolation inverts
//! the bilinear cell maps) and `Φᵏ⁺¹ = z + ∫₀ᵗ u(Φᵏ(z,s), s) ds`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::marker_velocity;
use crate::field::{Field, FieldError};
use crate::geometry::Point;
use crate::kernel::KernelError;

/// Default admissible radius as a fraction of the support's distance to the
/// vertical axis.
pub const DEFAULT_ZETA_FRACTION: f64 = 0.9;

#[derive(Debug, Error)]
pub enum PicardError {
    #[error("iteration is not contracting: ratios {ratios:?}")]
    NotContraction { ratios: Vec<f64> },
    #[error("flow map left the ball of radius {zeta} around the identity (distance {deviation})")]
    ZetaExceeded { deviation: f64, zeta: f64, iteration: usize },
    #[error("no convergence after {iterations} iterations (last distance {last})")]
    NotConverged { iterations: usize, last: f64 },
    #[error("marker {marker} on the horizontal axis moved off it")]
    AxisLeft { marker: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PicardConfig {
    pub t_final: f64,
    /// Radius of the admissible ball around the identity; `None` means
    /// [`DEFAULT_ZETA_FRACTION`] of the distance from the support to the
    /// vertical axis.
    pub zeta: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub time_intervals: usize,
    pub kernel_tol: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self { t_final: 0.01, zeta: None, tol: 1e-8, max_iter: 30, time_intervals: 8, kernel_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMap {
    pub times: Vec<f64>,
    /// `positions[n][k] = Φ(z_k, t_n)`.
    pub positions: Vec<Vec<Point>>,
    pub omega: Vec<Vec<f64>>,
    /// `d(Φᵏ⁺¹, Φᵏ)` per iteration.
    pub distances: Vec<f64>,
    /// `d(Φ, id)` of the final iterate.
    pub deviation: f64,
    pub zeta: f64,
}

impl FlowMap {
    pub fn iterations(&self) -> usize {
        self.distances.len()
    }

    pub fn final_positions(&self) -> &[Point] {
        self.positions.last().expect("at least one time node")
    }

    /// Successive distance ratios.
    pub fn ratios(&self) -> Vec<f64> {
        self.distances.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// Geometric mean of the first `n` ratios.
    pub fn fitted_ratio(&self, n: usize) -> Option<f64> {
        let r = self.ratios();
        if r.len() < n || n == 0 || r[..n].iter().any(|x| !(*x > 0.0)) {
            return None;
        }
        Some((r[..n].iter().map(|x| x.ln()).sum::<f64>() / n as f64).exp())
    }
}

/// Cumulative integrals `∫₀^{tₙ} f` on uniform nodes, exact for cubics.
pub fn cumulative_quad(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * h * (values[i - 1] + values[i]);
        }
        return out;
    }
    for i in 0..n - 1 {
        let seg = if i == 0 {
            9.0 * values[0] + 19.0 * values[1] - 5.0 * values[2] + values[3]
        } else if i == n - 2 {
            values[n - 4] - 5.0 * values[n - 3] + 19.0 * values[n - 2] + 9.0 * values[n - 1]
        } else {
            -values[i - 1] + 13.0 * values[i] + 13.0 * values[i + 1] - values[i + 2]
        };
        out[i + 1] = out[i] + h * seg / 24.0;
    }
    out
}

/// Sup of the difference plus sup of its difference quotients over lattice
/// edges, both maximised over time nodes.
pub fn flow_distance(field0: &Field, a: &[Vec<Point>], b: &[Vec<Point>]) -> f64 {
    let z = field0.positions();
    let (nx, ny) = (field0.nx, field0.ny);
    let mut value = 0.0f64;
    let mut grad = 0.0f64;
    for (pa, pb) in a.iter().zip(b) {
        let d: Vec<Point> = pa.iter().zip(pb).map(|(x, y)| [x[0] - y[0], x[1] - y[1]]).collect();
        for v in &d {
            value = value.max(v[0].hypot(v[1]));
        }
        for j in 0..=ny {
            for i in 0..=nx {
                let k = field0.node_index(i, j);
                let mut edge = |k2: usize| {
                    let len = (z[k2][0] - z[k][0]).hypot(z[k2][1] - z[k][1]);
                    let dd = [d[k2][0] - d[k][0], d[k2][1] - d[k][1]];
                    grad = grad.max(dd[0].hypot(dd[1]) / len);
                };
                if i < nx {
                    edge(field0.node_index(i + 1, j));
                }
                if j < ny {
                    edge(field0.node_index(i, j + 1));
                }
            }
        }
    }
    value + grad
}

/// Run the fixed-point iteration to tolerance.
pub fn picard_flowmap(field0: &Field, alpha: f64, config: &PicardConfig) -> Result<FlowMap, PicardError> {
    if !(config.t_final > 0.0) || config.time_intervals == 0 || config.max_iter == 0 || !(config.tol > 0.0) {
        return Err(PicardError::Config("t_final > 0, tol > 0, time_intervals ≥ 1 and max_iter ≥ 1 are required".into()));
    }
    field0.validate()?;
    let zeta = match config.zeta {
        Some(z) => z,
        None => field0.support_box().map(|b| DEFAULT_ZETA_FRACTION * b.n1).unwrap_or(f64::INFINITY),
    };
    if let Some(sb) = field0.support_box() {
        if !(zeta < sb.n1) {
            return Err(PicardError::Config(format!("zeta = {zeta} must be below the support distance {}", sb.n1)));
        }
    }
    let nt = config.time_intervals;
    let h = config.t_final / nt as f64;
    let times: Vec<f64> = (0..=nt).map(|n| n as f64 * h).collect();
    let z = field0.positions();
    let nm = z.len();
    let w0: Vec<f64> = field0.markers.iter().map(|m| m.omega).collect();
    let rho: Vec<f64> = field0.markers.iter().map(|m| m.rho).collect();
    let identity: Vec<Vec<Point>> = vec![z.clone(); nt + 1];

    let mut phi = identity.clone();
    let mut omega = vec![w0.clone(); nt + 1];
    let mut distances = Vec::new();
    for _ in 0..config.max_iter {
        // ω along the current iterate.
        for k in 0..nm {
            if rho[k] == 0.0 {
                continue;
            }
            let g: Vec<f64> = (0..=nt).map(|n| rho[k] / phi[n][k][0]).collect();
            let acc = cumulative_quad(&g, h);
            for n in 0..=nt {
                omega[n][k] = w0[k] + acc[n];
            }
        }
        let mut u = Vec::with_capacity(nt + 1);
        for n in 0..=nt {
            let f = field0.with_state(&phi[n], &omega[n]);
            f.validate()?;
            u.push(marker_velocity(&f, alpha, config.kernel_tol)?);
        }
        let mut next = identity.clone();
        for k in 0..nm {
            for c in 0..2 {
                let g: Vec<f64> = (0..=nt).map(|n| u[n][k][c]).collect();
                let acc = cumulative_quad(&g, h);
                for n in 0..=nt {
                    next[n][k][c] = z[k][c] + acc[n];
                }
            }
        }
        for k in 0..nm {
            if z[k][1] == 0.0 && next.iter().any(|p| p[k][1] != 0.0) {
                return Err(PicardError::AxisLeft { marker: k });
            }
        }
        let d = flow_distance(field0, &next, &phi);
        phi = next;
        distances.push(d);
        let deviation = flow_distance(field0, &phi, &identity);
        if deviation > zeta {
            return Err(PicardError::ZetaExceeded { deviation, zeta, iteration: distances.len() });
        }
        if d < config.tol {
            return Ok(FlowMap { times, positions: phi, omega, distances, deviation, zeta });
        }
        let ratios: Vec<f64> = distances.windows(2).map(|w| w[1] / w[0]).collect();
        if ratios.len() >= 3 && ratios[ratios.len() - 3..].iter().all(|r| *r >= 1.0) {
            return Err(PicardError::NotContraction { ratios });
        }
    }
    Err(PicardError::NotConverged { iterations: distances.len(), last: distances.last().copied().unwrap_or(f64::NAN) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_quad_is_exact_for_cubics() {
        let h = 0.1;
        let v: Vec<f64> = (0..=10).map(|i| (i as f64 * h).powi(3) - 2.0 * (i as f64 * h)).collect();
        let acc = cumulative_quad(&v, h);
        for (i, a) in acc.iter().enumerate() {
            let t = i as f64 * h;
            assert!((a - (t.powi(4) / 4.0 - t * t)).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_data_converges_to_identity() {
        let xs = [1.0, 1.5, 2.0];
        let ys = [0.0, 0.5, 1.0];
        let f = Field::tensor(&xs, &ys, |_| 0.0, |_| 0.0);
        let m = picard_flowmap(&f, 1.0, &PicardConfig::default()).unwrap();
        assert_eq!(m.iterations(), 1);
        assert_eq!(m.final_positions(), f.positions().as_slice());
    }
}
