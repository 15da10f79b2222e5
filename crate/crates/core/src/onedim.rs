//! One-dimensional analogue `ω_t + u ω_x = ρ/x`, `u = −x ∫ₓ^∞ ω(y)/y dy`,
//! and its singular steady state `ω = x^{−1/2}`, `ρ = c`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OneDimError {
    #[error("nodes must be positive and strictly increasing")]
    BadNodes,
    #[error("omega and rho must have one value per node")]
    Shape,
    #[error("query point {x} is outside [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },
    #[error("tail exponent {0} gives a divergent tail")]
    DivergentTail(f64),
    #[error("grid must lie within [0.01, 100]")]
    GridRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile1D {
    pub x: Vec<f64>,
    pub omega: Vec<f64>,
    pub rho: Vec<f64>,
}

impl Profile1D {
    pub fn new(x: Vec<f64>, omega: Vec<f64>, rho: Vec<f64>) -> Result<Self, OneDimError> {
        if x.is_empty() || !(x[0] > 0.0) || x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(OneDimError::BadNodes);
        }
        if omega.len() != x.len() || rho.len() != x.len() {
            return Err(OneDimError::Shape);
        }
        Ok(Self { x, omega, rho })
    }

    /// Sample `ω` and `ρ` at the given nodes.
    pub fn sample(x: Vec<f64>, omega: impl Fn(f64) -> f64, rho: impl Fn(f64) -> f64) -> Result<Self, OneDimError> {
        let w = x.iter().map(|&v| omega(v)).collect();
        let r = x.iter().map(|&v| rho(v)).collect();
        Self::new(x, w, r)
    }
}

/// `n+1` nodes with logarithmically uniform spacing on `[a, b]`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    let mut g: Vec<f64> = (0..=n).map(|i| (la + (lb - la) * i as f64 / n as f64).exp()).collect();
    g[0] = a;
    g[n] = b;
    g
}

/// `u(x) = −x ∫ₓ^∞ ω/y`: trapezoid over the nodes from `x` to the last
/// node, plus the tail of `ω(x_max)(y/x_max)^e` beyond it when an exponent
/// `e < 0` is supplied.
pub fn velocity_1d(profile: &Profile1D, x: f64, tail_exponent: Option<f64>) -> Result<f64, OneDimError> {
    let xs = &profile.x;
    let (lo, hi) = (xs[0], *xs.last().expect("nonempty"));
    if !(x >= lo && x <= hi) {
        return Err(OneDimError::OutOfRange { x, lo, hi });
    }
    if let Some(e) = tail_exponent {
        if !(e < 0.0) {
            return Err(OneDimError::DivergentTail(e));
        }
    }
    let f = |i: usize| profile.omega[i] / xs[i];
    let i0 = xs.partition_point(|&v| v <= x);
    let mut acc = 0.0;
    if i0 < xs.len() {
        let j = i0 - 1;
        let s = (x - xs[j]) / (xs[i0] - xs[j]);
        let wx = profile.omega[j] + s * (profile.omega[i0] - profile.omega[j]);
        acc += 0.5 * (xs[i0] - x) * (wx / x + f(i0));
        for i in i0..xs.len() - 1 {
            acc += 0.5 * (xs[i + 1] - xs[i]) * (f(i) + f(i + 1));
        }
    }
    if let Some(e) = tail_exponent {
        let last = xs.len() - 1;
        acc += -profile.omega[last] / e;
    }
    Ok(-x * acc)
}

/// `max |u ω_x − c/x|` over the grid for `ω = x^{−1/2}`, `u = −2x^{1/2}`.
pub fn steady_residual(x_grid: &[f64], c: f64) -> Result<f64, OneDimError> {
    if x_grid.iter().any(|&x| !(0.01..=100.0).contains(&x)) {
        return Err(OneDimError::GridRange);
    }
    Ok(x_grid
        .iter()
        .map(|&x| {
            let u = -2.0 * x.sqrt();
            let wx = -0.5 * x.powf(-1.5);
            (u * wx - c / x).abs()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_velocity() {
        let p = Profile1D::sample(log_grid(0.5, 50.0, 200_000), |y| y.powf(-0.5), |_| 1.0).unwrap();
        let u = velocity_1d(&p, 0.5, Some(-0.5)).unwrap();
        assert!((u + 2.0 * 0.5f64.sqrt()).abs() < 1e-8, "{u}");
    }

    #[test]
    fn divergent_tail_rejected() {
        let p = Profile1D::sample(vec![1.0, 2.0], |_| 1.0, |_| 1.0).unwrap();
        assert_eq!(velocity_1d(&p, 1.0, Some(0.0)), Err(OneDimError::DivergentTail(0.0)));
    }

    #[test]
    fn residual_vanishes_for_unit_constant() {
        let g = log_grid(0.01, 100.0, 1000);
        assert!(steady_residual(&g, 1.0).unwrap() < 1e-12);
        assert!((steady_residual(&g, 2.0).unwrap() - 100.0).abs() < 1e-10);
    }
}
