//! Barrier machinery: the angular kernel `G`, the integrals `ℱ₀`, `F̃₀`,
//! `F₀`, `F₁`, their uniform bounds `M₀`, `M₁`, the barrier abscissa `b(t)`
//! and the crossing inequality.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::numerics::{composite_gauss, grid_golden_min, integrate_adaptive, QuadError};

/// Additive constant in `F₁`: `½∫₁⁴ y⁻¹ dy = ln 4 / 2`.
pub const F1_CONSTANT: f64 = std::f64::consts::LN_2;

/// Slack applied to every strict inequality.
pub const STRICT_SLACK: f64 = 1e-9;

const QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// How a barrier integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// Globally adaptive Gauss–Kronrod to the given absolute tolerance.
    Adaptive(f64),
    /// Composite 10-point Gauss–Legendre with this many equal panels.
    Gauss(usize),
}

impl Default for Rule {
    fn default() -> Self {
        Rule::Adaptive(QUAD_TOL)
    }
}

fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rule: Rule) -> Result<f64, BarrierError> {
    match rule {
        Rule::Adaptive(tol) => Ok(integrate_adaptive(f, a, b, tol)?.value),
        Rule::Gauss(panels) => Ok(composite_gauss(f, a, b, panels, 10)),
    }
}

/// `G(σ, α, η) = ½[1/(σ²+η²) − 1/(σ²+(α(σ−1)+η)²)]`.
#[inline]
pub fn g_kernel(sigma: f64, alpha: f64, eta: f64) -> f64 {
    let s2 = sigma * sigma;
    let r = alpha * (sigma - 1.0) + eta;
    0.5 * (1.0 / (s2 + eta * eta) - 1.0 / (s2 + r * r))
}

fn check_x1(x1: f64) -> Result<(), BarrierError> {
    if !(x1 > 0.0 && x1 <= 1.0) {
        return Err(BarrierError::Domain(format!("x1 = {x1} must lie in (0, 1]")));
    }
    Ok(())
}

/// `∫₁^{1/x₁} σ^{1−p} G(σ, α, η) dσ`, integrated in `τ = ln σ`.
fn power_integral(eta: f64, x1: f64, alpha: f64, p: f64, rule: Rule) -> Result<f64, BarrierError> {
    check_x1(x1)?;
    let upper = -x1.ln();
    if upper == 0.0 {
        return Ok(0.0);
    }
    integrate(
        |tau| {
            let s = tau.exp();
            s.powf(2.0 - p) * g_kernel(s, alpha, eta)
        },
        0.0,
        upper,
        rule,
    )
}

/// `ℱ₀(η, x₁, α, p₀) = ∫₁^{1/x₁} σ^{1−p₀} G dσ`.
pub fn calf0(eta: f64, x1: f64, alpha: f64, p0: f64) -> Result<f64, BarrierError> {
    calf0_with(eta, x1, alpha, p0, Rule::default())
}

pub fn calf0_with(eta: f64, x1: f64, alpha: f64, p0: f64, rule: Rule) -> Result<f64, BarrierError> {
    power_integral(eta, x1, alpha, p0, rule)
}

/// `lim_{x₁→0} ℱ₀ = ∫₁^∞ σ^{1−p₀} G dσ`, with `σ = (1−s)⁻²`.
pub fn calf0_limit(eta: f64, alpha: f64, p0: f64) -> Result<f64, BarrierError> {
    Ok(integrate_adaptive(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - s;
            let sigma = 1.0 / (w * w);
            sigma.powf(1.0 - p0) * g_kernel(sigma, alpha, eta) * 2.0 / (w * w * w)
        },
        0.0,
        1.0,
        QUAD_TOL,
    )?
    .value)
}

/// `∫_a^b σ G dσ`.
fn sigma_g(eta: f64, a: f64, b: f64, alpha: f64, rule: Rule) -> Result<f64, BarrierError> {
    integrate(|s| s * g_kernel(s, alpha, eta), a, b, rule)
}

/// `F̃₀(η, x₁, α, p₀) = x₁^{p₀} ∫_{1/x₁}^{2/x₁} σ G dσ`.
pub fn tilf0(eta: f64, x1: f64, alpha: f64, p0: f64) -> Result<f64, BarrierError> {
    tilf0_with(eta, x1, alpha, p0, Rule::default())
}

pub fn tilf0_with(eta: f64, x1: f64, alpha: f64, p0: f64, rule: Rule) -> Result<f64, BarrierError> {
    check_x1(x1)?;
    Ok(x1.powf(p0) * sigma_g(eta, 1.0 / x1, 2.0 / x1, alpha, rule)?)
}

/// `F₀ = ℱ₀ + F̃₀`.
pub fn f0(eta: f64, x1: f64, alpha: f64, p0: f64) -> Result<f64, BarrierError> {
    f0_with(eta, x1, alpha, p0, Rule::default())
}

pub fn f0_with(eta: f64, x1: f64, alpha: f64, p0: f64, rule: Rule) -> Result<f64, BarrierError> {
    Ok(calf0_with(eta, x1, alpha, p0, rule)? + tilf0_with(eta, x1, alpha, p0, rule)?)
}

/// `F₁ = ∫₁^{1/x₁} σ^{1−p₁} G dσ + ln 4 / 2`.
pub fn f1(eta: f64, x1: f64, alpha: f64, p1: f64) -> Result<f64, BarrierError> {
    f1_with(eta, x1, alpha, p1, Rule::default())
}

pub fn f1_with(eta: f64, x1: f64, alpha: f64, p1: f64, rule: Rule) -> Result<f64, BarrierError> {
    Ok(power_integral(eta, x1, alpha, p1, rule)? + F1_CONSTANT)
}

/// Minimiser of the lower bound `M₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct M0Value {
    pub value: f64,
    pub eta: f64,
    pub x1: f64,
}

/// `M₀(α) = min_{η∈[0,2α]} min{∫₁²σG, min_{x₁∈[½,1]} ∫_{1/x₁}^{2/x₁} σG}`.
pub fn m0(alpha: f64) -> M0Value {
    m0_with(alpha, 1)
}

/// `M₀` with every grid refined by `refine` (1 = default resolution).
pub fn m0_with(alpha: f64, refine: usize) -> M0Value {
    let panels = 4 * refine;
    let n_eta = 2000 * refine;
    let n_x1 = 500 * refine;
    let b = move |eta: f64, x1: f64| composite_gauss(|s| s * g_kernel(s, alpha, eta), 1.0 / x1, 2.0 / x1, panels, 10);
    let inner = move |eta: f64| grid_golden_min(|x1| b(eta, x1), 0.5, 1.0, n_x1);
    // Coarse scan over η in parallel, reduced in index order.
    let h = 2.0 * alpha / n_eta as f64;
    let scan: Vec<(f64, f64, f64)> = (0..=n_eta)
        .into_par_iter()
        .map(|i| {
            let eta = if i == n_eta { 2.0 * alpha } else { h * i as f64 };
            let (x1, v) = inner(eta);
            (eta, x1, v)
        })
        .collect();
    let mut best_i = 0;
    for (i, s) in scan.iter().enumerate() {
        if s.2 < scan[best_i].2 {
            best_i = i;
        }
    }
    let lo = if best_i == 0 { 0.0 } else { scan[best_i - 1].0 };
    let hi = if best_i == n_eta { 2.0 * alpha } else { scan[best_i + 1].0 };
    let (eta, _) = crate::numerics::golden_section_min(|e| inner(e).1, lo, hi, 1e-12);
    let (x1, v) = inner(eta);
    let (e0, x0, v0) = scan[best_i];
    if v0 <= v {
        M0Value { value: v0, eta: e0, x1: x0 }
    } else {
        M0Value { value: v, eta, x1 }
    }
}

/// `M₁(α) = ∫₁^∞ σ^{½}(α²(σ−1)+4α²)(σ−1)/(σ²(σ²+α²(σ−1)²)) dσ + ln 4 / 2`.
///
/// Independent of `p₁`. The tail is mapped by `σ = (1−s)⁻²`, which turns the
/// `σ^{−3/2}` decay into a bounded integrand.
pub fn m1(alpha: f64) -> f64 {
    m1_with(alpha, Rule::default()).expect("M1 integrand is bounded")
}

pub fn m1_with(alpha: f64, rule: Rule) -> Result<f64, BarrierError> {
    let a2 = alpha * alpha;
    let f = |s: f64| {
        if s >= 1.0 {
            // Limit of the mapped integrand: 2α²/(1+α²)·(1−s)⁰ leading order.
            return 2.0 * a2 / (1.0 + a2);
        }
        let w = 1.0 - s;
        let sigma = 1.0 / (w * w);
        let d = sigma - 1.0;
        let v = sigma.sqrt() * (a2 * d + 4.0 * a2) * d / (sigma * sigma * (sigma * sigma + a2 * d * d));
        v * 2.0 / (w * w * w)
    };
    Ok(integrate(f, 0.0, 1.0, rule)? + F1_CONSTANT)
}

/// Which constant drives the barrier ODE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TStarMode {
    /// κ = ℱ₀(0, ½, α, p₀).
    Lemma,
    /// κ = M₀(α).
    #[default]
    ControlTheorem,
}

impl std::str::FromStr for TStarMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lemma" => Ok(Self::Lemma),
            "control-theorem" => Ok(Self::ControlTheorem),
            other => Err(format!("unknown T* mode `{other}` (expected lemma | control-theorem)")),
        }
    }
}

/// Model and barrier constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: f64,
    pub p0: f64,
    pub p1: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub delta: f64,
    pub b0: f64,
    pub mcap: f64,
}

impl Params {
    /// Check the structural constraints on the constants.
    pub fn validate(&self) -> Result<(), BarrierError> {
        let fail = |m: &str| Err(BarrierError::Domain(m.to_string()));
        if !(self.alpha > 0.0) {
            return fail("alpha must be positive");
        }
        if (self.p0 + self.p1 - 1.0).abs() > 4.0 * f64::EPSILON {
            return fail("p0 + p1 must equal 1");
        }
        if !(self.p0 > 0.0 && self.p0 < 0.5) {
            return fail("p0 must lie in (0, 1/2)");
        }
        if !(self.delta > 0.0 && self.delta < 0.25) {
            return fail("delta must lie in (0, 1/4)");
        }
        if !(self.b0 > 0.0 && self.b0 < self.delta) {
            return fail("b0 must lie in (0, delta)");
        }
        if !(self.phi0 > 0.0 && self.phi0 < self.phi1) {
            return fail("need 0 < phi0 < phi1");
        }
        if !(self.phi0 < self.mcap && self.mcap < self.phi1) {
            return fail("need phi0 < Mcap < phi1");
        }
        Ok(())
    }

    pub fn t1(&self) -> f64 {
        1.0 / (2.0 * (self.mcap + 1.0))
    }

    pub fn t2(&self) -> f64 {
        self.phi1 - self.mcap
    }
}

/// `κ` for the chosen mode.
pub fn kappa(params: &Params, mode: TStarMode) -> Result<f64, BarrierError> {
    match mode {
        TStarMode::Lemma => calf0(0.0, 0.5, params.alpha, params.p0),
        TStarMode::ControlTheorem => Ok(m0(params.alpha).value),
    }
}

/// `T* = b₀^{p₀} / (p₀ φ₀ κ)`.
pub fn t_star_with_kappa(params: &Params, kappa: f64) -> f64 {
    params.b0.powf(params.p0) / (params.p0 * params.phi0 * kappa)
}

pub fn t_star(params: &Params, mode: TStarMode) -> Result<f64, BarrierError> {
    Ok(t_star_with_kappa(params, kappa(params, mode)?))
}

/// Closed-form `b(t) = (b₀^{p₀} − p₀φ₀κt)^{1/p₀}`.
pub fn solve_b_with_kappa(params: &Params, kappa: f64, t: f64) -> Result<f64, BarrierError> {
    let ts = t_star_with_kappa(params, kappa);
    if !(t >= 0.0) || t > ts {
        return Err(BarrierError::Domain(format!("t = {t} outside [0, T* = {ts}]")));
    }
    if t == 0.0 {
        return Ok(params.b0);
    }
    let base = (params.b0.powf(params.p0) - params.p0 * params.phi0 * kappa * t).max(0.0);
    Ok(base.powf(1.0 / params.p0))
}

pub fn solve_b(params: &Params, t: f64, mode: TStarMode) -> Result<f64, BarrierError> {
    solve_b_with_kappa(params, kappa(params, mode)?, t)
}

/// Classical RK4 integration of `ḃ = −φ₀κ b^{1−p₀}` on `[0, t_end]`;
/// returns `(t, b)` at every step.
pub fn integrate_b_rk4(params: &Params, kappa: f64, t_end: f64, steps: usize) -> Vec<(f64, f64)> {
    let rhs = |b: f64| -params.phi0 * kappa * b.max(0.0).powf(1.0 - params.p0);
    let h = t_end / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut b = params.b0;
    out.push((0.0, b));
    for k in 0..steps {
        let k1 = rhs(b);
        let k2 = rhs(b + 0.5 * h * k1);
        let k3 = rhs(b + 0.5 * h * k2);
        let k4 = rhs(b + h * k3);
        b += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push((h * (k + 1) as f64, b));
    }
    out
}

/// Barrier abscissa at a given time with the region `D_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierState {
    pub t: f64,
    pub b: f64,
    pub b0: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl BarrierState {
    pub fn at(params: &Params, kappa: f64, t: f64) -> Result<Self, BarrierError> {
        Ok(Self { t, b: solve_b_with_kappa(params, kappa, t)?, b0: params.b0, alpha: params.alpha, delta: params.delta })
    }

    /// `g(x₁, t) = 2α(x₁ − b(t))`.
    pub fn g(&self, x1: f64) -> f64 {
        2.0 * self.alpha * (x1 - self.b)
    }

    /// Height of the roof of `D_t` above `x₁` (negative when the band is empty).
    pub fn roof(&self, x1: f64) -> f64 {
        if x1 <= self.delta {
            self.g(x1)
        } else {
            2.0 * self.alpha * (x1 - self.b0)
        }
    }

    /// Membership in `D_t`. A branch whose roof is negative is empty.
    pub fn contains(&self, x: Point) -> bool {
        let [x1, x2] = x;
        (0.0..=4.0).contains(&x1) && x2 >= 0.0 && x2 <= self.roof(x1)
    }
}

/// Outcome of the crossing-inequality scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub holds: bool,
    /// First failing grid point `(η, x₁)` in scan order.
    pub witness: Option<(f64, f64)>,
    /// Smallest margin `(η/2α)ℱ₀(η,x₁) − [ℱ₀(0,½) − ℱ₀(η,x₁)]` over the grid.
    pub worst_margin: f64,
    pub worst_at: (f64, f64),
    /// `ℱ₀(0,½) − ℱ₀(η,x₁)` and `(η/2α)ℱ₀(η,x₁)` at the worst point.
    pub worst_lhs: f64,
    pub worst_rhs: f64,
    /// Whether the fast sufficient condition (checked at η = 0, its most
    /// restrictive angle) holds.
    pub precheck: bool,
    pub precheck_lhs: f64,
    pub precheck_rhs: f64,
}

/// Grid size used by [`check_crossing`] along each axis.
pub const CROSSING_GRID: usize = 200;

/// Scan `ℱ₀(0,½) − ℱ₀(η,x₁) < (η/2α)ℱ₀(η,x₁)` over `η ∈ [0,2α]`,
/// `x₁ ∈ (0, 2δ]`.
pub fn check_crossing(params: &Params) -> Result<CrossingReport, BarrierError> {
    check_crossing_grid(params, CROSSING_GRID)
}

pub fn check_crossing_grid(params: &Params, n: usize) -> Result<CrossingReport, BarrierError> {
    check_crossing_with(params, n, Rule::default())
}

/// Crossing scan on an `n x n` grid with the given quadrature rule.
pub fn check_crossing_with(params: &Params, n: usize, rule: Rule) -> Result<CrossingReport, BarrierError> {
    let (alpha, p0, delta) = (params.alpha, params.p0, params.delta);
    if !(delta > 0.0 && 2.0 * delta <= 1.0) {
        return Err(BarrierError::Domain(format!("delta = {delta}")));
    }
    let reference = calf0_with(0.0, 0.5, alpha, p0, rule)?;
    let rows: Vec<Result<Vec<(f64, f64, f64, f64, f64)>, BarrierError>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let eta = 2.0 * alpha * i as f64 / (n - 1) as f64;
            (1..=n)
                .map(|j| {
                    let x1 = 2.0 * delta * j as f64 / n as f64;
                    let f = calf0_with(eta, x1, alpha, p0, rule)?;
                    let (lhs, rhs) = (reference - f, eta / (2.0 * alpha) * f);
                    Ok((eta, x1, rhs - lhs, lhs, rhs))
                })
                .collect()
        })
        .collect();
    let mut witness = None;
    let mut worst = (f64::INFINITY, (0.0, 0.0), 0.0, 0.0);
    for row in rows {
        for (eta, x1, m, lhs, rhs) in row? {
            if m <= STRICT_SLACK && witness.is_none() {
                witness = Some((eta, x1));
            }
            if m < worst.0 {
                worst = (m, (eta, x1), lhs, rhs);
            }
        }
    }
    let (lhs, rhs) = crossing_precheck(params, 0.0)?;
    Ok(CrossingReport {
        holds: witness.is_none(),
        witness,
        worst_margin: worst.0,
        worst_at: worst.1,
        worst_lhs: worst.2,
        worst_rhs: worst.3,
        precheck: lhs + STRICT_SLACK < rhs,
        precheck_lhs: lhs,
        precheck_rhs: rhs,
    })
}

/// Both sides of the sufficient condition
/// `(2α)²∫₁^∞ σ^{1−p₀}/(σ²(σ²+η²)) < ∫₁^{1/(2δ)} σ^{1−p₀}α²(σ−1)²/((σ²+α²)(σ²+α²σ²))`.
pub fn crossing_precheck(params: &Params, eta: f64) -> Result<(f64, f64), BarrierError> {
    let (alpha, p0) = (params.alpha, params.p0);
    let a2 = alpha * alpha;
    let lhs = integrate_adaptive(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - s;
            let sigma = 1.0 / (w * w);
            sigma.powf(1.0 - p0) / (sigma * sigma * (sigma * sigma + eta * eta)) * 2.0 / (w * w * w)
        },
        0.0,
        1.0,
        QUAD_TOL,
    )?
    .value
        * 4.0
        * a2;
    let upper = 1.0 / (2.0 * params.delta);
    let rhs = integrate_adaptive(
        |tau| {
            let s = tau.exp();
            let d = s - 1.0;
            s * s.powf(1.0 - p0) * a2 * d * d / ((s * s + a2) * (s * s + a2 * s * s))
        },
        0.0,
        upper.ln(),
        QUAD_TOL,
    )?
    .value;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_reference_values() {
        assert_eq!(g_kernel(1.0, 1.7, 0.3), 0.0);
        assert!((g_kernel(2.0, 1.0, 0.0) - 0.025).abs() < 1e-16);
    }

    #[test]
    fn f0_and_f1_match_high_precision_values() {
        let v = f0(0.0, 0.5, 1.0, 0.1).unwrap();
        assert!((v - 0.121_767_812_376_075_28).abs() < 1e-11, "{v}");
        let w = f1(0.0, 0.25, 1.0, 0.9).unwrap();
        assert!((w - 0.751_101_103_964_704_5).abs() < 1e-11, "{w}");
        assert_eq!(f1(0.4, 1.0, 1.0, 0.7).unwrap(), F1_CONSTANT);
        assert_eq!(calf0(0.4, 1.0, 1.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn bounds_reference_values() {
        let m = m0(1.0);
        assert!((m.value - 0.029_150_725_319_694_702).abs() < 1e-10, "{m:?}");
        assert!((m1(1.0) - 2.112_361_751_934_552_8).abs() < 1e-10);
    }

    #[test]
    fn domain_errors() {
        assert!(calf0(0.0, 0.0, 1.0, 0.1).is_err());
        assert!(f1(0.0, 1.5, 1.0, 0.9).is_err());
    }

    fn sample_params() -> Params {
        Params { alpha: 1.0, p0: 0.1, p1: 0.9, phi0: 1.0, phi1: 3.0, delta: 0.1, b0: 0.05, mcap: 2.0 }
    }

    #[test]
    fn barrier_endpoints() {
        let p = sample_params();
        let kappa = 0.03;
        assert_eq!(solve_b_with_kappa(&p, kappa, 0.0).unwrap(), p.b0);
        let ts = t_star_with_kappa(&p, kappa);
        assert!(solve_b_with_kappa(&p, kappa, ts).unwrap() < 1e-12);
        assert!(solve_b_with_kappa(&p, kappa, ts * 1.0001).is_err());
    }

    #[test]
    fn region_membership() {
        let p = sample_params();
        let s = BarrierState::at(&p, 0.03, 0.0).unwrap();
        assert!(s.contains([0.08, 0.05]));
        assert!(!s.contains([0.04, 0.0]));
        assert!(s.contains([0.05, 0.0]));
        assert!(!s.contains([0.08, 0.07]));
        assert!(s.contains([3.0, 5.0]));
        assert!(!s.contains([4.5, 0.0]));
    }
}
