//! Parameter certification and suitably prepared initial data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{
    self, calf0, check_crossing, m0, m0_with, m1, m1_with, t_star_with_kappa, BarrierError, CrossingReport, Params,
    Rule, STRICT_SLACK,
};
use crate::field::Field;
use crate::geometry::Point;

/// Tolerance used for equality and non-strict conditions in reports.
pub const REPORT_TOL: f64 = 1e-12;

/// Fraction of `min{T₁, T₂}` targeted by the constructed `T*`.
const T_STAR_FRACTION: f64 = 0.9;

/// Fraction of the admissible `p₀` range `M₀/(M₀+M₁)` that is used.
const P0_FRACTION: f64 = 0.99;

/// Fallback `φ₀` as a fraction of `√(φ₀φ₁)`.
const PHI0_FRACTION: f64 = 0.9;

const MAX_HALVINGS: usize = 60;

/// Abscissae of the right cutoff ramp and of the checked ρ₀ = 1 region.
pub const RIGHT_RAMP: (f64, f64) = (3.5, 3.875);

/// Relative height of the roof collar above `x₂ = 2αx₁`.
pub const ROOF_COLLAR: f64 = 0.125;

/// Minimum number of cells across each cutoff collar.
pub const MIN_COLLAR_CELLS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("infeasible: check `{check}` failed ({detail})")]
    Infeasible { check: String, detail: String },
    #[error("mesh too coarse: {0}")]
    MeshTooCoarse(String),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
}

/// One certified inequality `lhs < rhs`.
///
/// `margin` is the relative gap `(rhs − lhs)/max(|lhs|, |rhs|)`; for the
/// equality `p₀ + p₁ = 1` it is `1 − |lhs − rhs|/ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl Check {
    pub fn less(name: &str, lhs: f64, rhs: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        Self { name: name.to_string(), lhs, rhs, margin: (rhs - lhs) / scale }
    }

    pub fn equal(name: &str, lhs: f64, rhs: f64) -> Self {
        Self { name: name.to_string(), lhs, rhs, margin: 1.0 - (lhs - rhs).abs() / f64::EPSILON }
    }

    pub fn holds(&self) -> bool {
        self.margin > STRICT_SLACK
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phi0Source {
    Hint,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCertificate {
    pub params: Params,
    pub m0: f64,
    pub m0_argmin: (f64, f64),
    pub m1: f64,
    pub t1: f64,
    pub t2: f64,
    /// `T*` with `κ = M₀`.
    pub t_star: f64,
    /// `T*` with `κ = ℱ₀(0, ½)`.
    pub t_star_lemma: f64,
    pub kappa_lemma: f64,
    pub phi0_source: Phi0Source,
    pub b0_halvings: u32,
    pub crossing: CrossingReport,
    pub checks: Vec<Check>,
}

impl FeasibilityCertificate {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(Check::holds)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Independent values entering the checks.
struct Inputs {
    m0: f64,
    m1: f64,
    kappa_lemma: f64,
    crossing: CrossingReport,
}

fn build_checks(p: &Params, inp: &Inputs) -> (Vec<Check>, f64, f64, f64, f64) {
    let t1 = p.t1();
    let t2 = p.t2();
    let tmin = t1.min(t2);
    let ts_ct = t_star_with_kappa(p, inp.m0);
    let ts_lemma = t_star_with_kappa(p, inp.kappa_lemma);
    let cr = &inp.crossing;
    let checks = vec![
        Check::equal("ConstantConditions:p0+p1=1", p.p0 + p.p1, 1.0),
        Check::less("ConstantConditions:0<p0", 0.0, p.p0),
        Check::less("ConstantConditions:p0<1/2", p.p0, 0.5),
        Check::less("ConstantConditions:0<delta", 0.0, p.delta),
        Check::less("ConstantConditions:delta<1/4", p.delta, 0.25),
        Check::less("ConstantConditions:0<b0", 0.0, p.b0),
        Check::less("ConstantConditions:b0<delta", p.b0, p.delta),
        Check::less("ConstantConditions:0<phi0", 0.0, p.phi0),
        Check::less("ConstantConditions:phi0<phi1", p.phi0, p.phi1),
        Check::less("ConstantConditions:phi0<Mcap", p.phi0, p.mcap),
        Check::less("ConstantConditions:Mcap<phi1", p.mcap, p.phi1),
        Check::less("exponents:M1*p0<M0*p1", inp.m1 * p.p0, inp.m0 * p.p1),
        Check::less("cond1:lower", 1.0 / (inp.m0 * (1.0 - p.p0)), p.phi0 * p.phi1),
        Check::less("cond1:upper", p.phi0 * p.phi1, 1.0 / (inp.m1 * p.p0)),
        Check::less("cond2:control-theorem", ts_ct, tmin),
        Check::less("cond2:lemma", ts_lemma, tmin),
        Check::less("crossing", cr.worst_lhs, cr.worst_rhs),
    ];
    (checks, t1, t2, ts_ct, ts_lemma)
}

/// `φ₁` from the midpoint rule `(1/(2φ₀))(1/(M₀(1−p₀)) + 1/(M₁p₀))`.
pub fn phi1_midpoint(phi0: f64, p0: f64, m0: f64, m1: f64) -> f64 {
    (1.0 / (2.0 * phi0)) * (1.0 / (m0 * (1.0 - p0)) + 1.0 / (m1 * p0))
}

fn assemble(alpha: f64, p0: f64, delta: f64, phi0: f64, b0: f64, m0v: f64, m1v: f64) -> Params {
    let phi1 = phi1_midpoint(phi0, p0, m0v, m1v);
    Params { alpha, p0, p1: 1.0 - p0, phi0, phi1, delta, b0, mcap: 0.5 * (phi0 + phi1) }
}

/// Smallest `k` with `b₀ = (δ/2)·2⁻ᵏ` meeting `T* < min{T₁,T₂}` at
/// `T* ≤ 0.9·min{T₁,T₂}` for the smaller of the two κ.
fn b0_by_halving(p: &Params, kappa: f64) -> Option<(f64, u32)> {
    let tmin = p.t1().min(p.t2());
    if !(tmin > 0.0) {
        return None;
    }
    let target = T_STAR_FRACTION * tmin;
    let ln_target_b = (target * p.p0 * p.phi0 * kappa).ln() / p.p0;
    let start = 0.5 * p.delta;
    let mut k = ((start.ln() - ln_target_b) / std::f64::consts::LN_2).ceil().max(0.0) as i32 - 1;
    k = k.max(0);
    loop {
        if k > 1020 {
            return None;
        }
        let b0 = start * 2f64.powi(-k);
        if !b0.is_normal() {
            return None;
        }
        let trial = Params { b0, ..*p };
        if t_star_with_kappa(&trial, kappa) <= target {
            return Some((b0, k as u32));
        }
        k += 1;
    }
}

/// Deterministic construction of constants satisfying every hypothesis of
/// the control argument, followed by an independent re-verification.
pub fn find_feasible_params(alpha: f64, phi0_hint: f64) -> Result<FeasibilityCertificate, ScenarioError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ScenarioError::Barrier(BarrierError::Domain(format!("alpha = {alpha}"))));
    }
    let m0v = m0(alpha);
    let m1v = m1(alpha);
    let p0 = P0_FRACTION * m0v.value / (m0v.value + m1v);

    let mut delta = 0.125;
    let mut crossing = None;
    for _ in 0..MAX_HALVINGS {
        let trial = Params { alpha, p0, p1: 1.0 - p0, phi0: 1.0, phi1: 2.0, delta, b0: 0.5 * delta, mcap: 1.5 };
        let report = check_crossing(&trial)?;
        if report.holds {
            crossing = Some(report);
            break;
        }
        delta *= 0.5;
    }
    let crossing = crossing.ok_or_else(|| ScenarioError::Infeasible {
        check: "crossing".into(),
        detail: format!("no delta >= {delta:e} satisfies the crossing inequality"),
    })?;

    let kappa_lemma = calf0(0.0, 0.5, alpha, p0)?;
    let kappa = kappa_lemma.min(m0v.value);
    let k_prod = 0.5 * (1.0 / (m0v.value * (1.0 - p0)) + 1.0 / (m1v * p0));

    let try_phi0 = |phi0: f64| -> Option<(Params, u32)> {
        if !(phi0 > 0.0 && phi0 * phi0 < k_prod) {
            return None;
        }
        let p = assemble(alpha, p0, delta, phi0, 0.0, m0v.value, m1v);
        b0_by_halving(&p, kappa).map(|(b0, k)| (Params { b0, ..p }, k))
    };
    let (params, halvings, source) = match try_phi0(phi0_hint) {
        Some((p, k)) => (p, k, Phi0Source::Hint),
        None => {
            let fallback = PHI0_FRACTION * k_prod.sqrt();
            let (p, k) = try_phi0(fallback).ok_or_else(|| ScenarioError::Infeasible {
                check: "cond2".into(),
                detail: "b0 meeting T* < min(T1, T2) is not representable".into(),
            })?;
            (p, k, Phi0Source::Fallback)
        }
    };

    let inputs = Inputs { m0: m0v.value, m1: m1v, kappa_lemma, crossing: crossing.clone() };
    let (checks, t1, t2, t_star, t_star_lemma) = build_checks(&params, &inputs);
    let cert = FeasibilityCertificate {
        params,
        m0: m0v.value,
        m0_argmin: (m0v.eta, m0v.x1),
        m1: m1v,
        t1,
        t2,
        t_star,
        t_star_lemma,
        kappa_lemma,
        phi0_source: source,
        b0_halvings: halvings,
        crossing,
        checks,
    };
    if let Some(bad) = cert.checks.iter().find(|c| !c.holds()) {
        return Err(ScenarioError::Infeasible { check: bad.name.clone(), detail: format!("{bad:?}") });
    }
    let verified = verify_certificate(&cert)?;
    if let Some(bad) = verified.iter().find(|c| !c.holds()) {
        return Err(ScenarioError::Infeasible {
            check: format!("verifier:{}", bad.name),
            detail: format!("{bad:?}"),
        });
    }
    Ok(cert)
}

/// Recompute every check from scratch with refined and differently built
/// quadratures: M₀ on doubled grids, M₁ and ℱ₀ by composite Gauss rules, the
/// crossing scan with composite Gauss.
pub fn verify_certificate(cert: &FeasibilityCertificate) -> Result<Vec<Check>, ScenarioError> {
    let p = &cert.params;
    let m0v = m0_with(p.alpha, 2).value;
    let m1v = m1_with(p.alpha, Rule::Gauss(400))?;
    let kappa_lemma = barrier::calf0_with(0.0, 0.5, p.alpha, p.p0, Rule::Gauss(64))?;
    let crossing = barrier::check_crossing_with(p, barrier::CROSSING_GRID, Rule::Gauss(64))?;
    let (checks, ..) = build_checks(p, &Inputs { m0: m0v, m1: m1v, kappa_lemma, crossing });
    Ok(checks)
}

/// Constants sharing a certificate's `α, p₀, p₁, δ` but with a chosen `φ₀`
/// and `b₀`; `φ₁` and `𝓜` follow the same midpoint rules, so the first
/// control condition still holds, while `T* < min{T₁,T₂}` is not enforced.
pub fn demonstration_params(cert: &FeasibilityCertificate, phi0: f64, b0: f64) -> Result<Params, ScenarioError> {
    let c = &cert.params;
    let p = assemble(c.alpha, c.p0, c.delta, phi0, b0, cert.m0, cert.m1);
    p.validate()?;
    Ok(p)
}

/// The region `D₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionD0 {
    pub b0: f64,
    pub delta: f64,
    pub alpha: f64,
}

impl RegionD0 {
    pub fn new(p: &Params) -> Self {
        Self { b0: p.b0, delta: p.delta, alpha: p.alpha }
    }

    pub fn contains(&self, x: Point) -> bool {
        let [x1, x2] = x;
        if x2 < 0.0 {
            return false;
        }
        if self.b0 < x1 && x1 <= self.delta {
            x2 <= 2.0 * self.alpha * (x1 - self.b0)
        } else if self.delta < x1 && x1 < 4.0 {
            x2 <= 2.0 * self.alpha * x1
        } else {
            false
        }
    }
}

/// Lattice resolution for prepared data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub nx: usize,
    pub ny: usize,
}

/// C¹ smoothstep on `[0, 1]`, clamped outside.
#[inline]
pub fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Cutoff `s(x)`: 1 on `D₀ ∩ {x₁ ≤ 3.5}`, 0 for `x₁ ≤ b₀/2`, `x₁ ≥ 3.875`
/// and above `x₂ = 2.25αx₁`.
pub fn cutoff(p: &Params, x: Point) -> f64 {
    let [x1, x2] = x;
    if x1 <= 0.0 {
        return 0.0;
    }
    let half = 0.5 * p.b0;
    let left = smoothstep((x1 - half) / half);
    let right = 1.0 - smoothstep((x1 - RIGHT_RAMP.0) / (RIGHT_RAMP.1 - RIGHT_RAMP.0));
    let top = 1.0 - smoothstep((x2 / (p.alpha * x1) - 2.0) / (2.0 * ROOF_COLLAR));
    left * right * top
}

/// Default amplitude `√(φ₀φ₁)` of the enclosed vorticity.
pub fn canonical_amplitude(p: &Params) -> f64 {
    (p.phi0 * p.phi1).sqrt()
}

/// Profile `w` with `√(φ₀φ₁)·w` the enclosed vorticity: `x^{−1/2}` on
/// `x < 1`, then a C¹ exponential relaxation to
/// `v∞ = (1 + √(φ₀/φ₁))/2`.
pub fn profile(p: &Params, x1: f64) -> f64 {
    profile_scaled(p, canonical_amplitude(p), x1)
}

/// As [`profile`] for amplitude `a`, relaxing to `(1 + φ₀/a)/2`.
pub fn profile_scaled(p: &Params, a: f64, x1: f64) -> f64 {
    if x1 < 1.0 {
        return 1.0 / x1.sqrt();
    }
    let v_inf = 0.5 * (1.0 + p.phi0 / a);
    v_inf + (1.0 - v_inf) * (-(x1 - 1.0) / (2.0 * (1.0 - v_inf))).exp()
}

pub fn omega0(p: &Params, x: Point) -> f64 {
    omega0_scaled(p, canonical_amplitude(p), x)
}

pub fn omega0_scaled(p: &Params, a: f64, x: Point) -> f64 {
    cutoff(p, x) * a * profile_scaled(p, a, x[0])
}

pub fn rho0(p: &Params, x: Point) -> f64 {
    cutoff(p, x).clamp(0.0, 1.0)
}

fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    let r = (b / a).ln() / n as f64;
    (0..=n).map(|i| if i == n { b } else { a * (r * i as f64).exp() }).collect()
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 }).collect()
}

fn append(nodes: &mut Vec<f64>, seg: Vec<f64>) {
    nodes.extend(seg.into_iter().skip(1));
}

/// Node abscissae: uniform across `[b₀/2, b₀]`, geometric on `[b₀, 1]`,
/// uniform on `[1, 3.5]`, across the right ramp and on `[3.875, 4.5]`.
pub fn x1_nodes(p: &Params, nx: usize) -> Result<Vec<f64>, ScenarioError> {
    let n_left = MIN_COLLAR_CELLS.max(nx / 16);
    let n_right = MIN_COLLAR_CELLS.max(nx / 16);
    let n_tail = 1.max(nx / 32);
    let fixed = n_left + n_right + n_tail;
    if nx < fixed + 2 {
        return Err(ScenarioError::MeshTooCoarse(format!(
            "nx = {nx} leaves fewer than {MIN_COLLAR_CELLS} cells across a collar"
        )));
    }
    let rest = nx - fixed;
    let n_geo = ((rest as f64 * 0.6).round() as usize).clamp(1, rest - 1);
    let n_mid = rest - n_geo;
    let mut xs = uniform(0.5 * p.b0, p.b0, n_left);
    append(&mut xs, geometric(p.b0, 1.0, n_geo));
    append(&mut xs, uniform(1.0, RIGHT_RAMP.0, n_mid));
    append(&mut xs, uniform(RIGHT_RAMP.0, RIGHT_RAMP.1, n_right));
    append(&mut xs, uniform(RIGHT_RAMP.1, 4.5, n_tail));
    Ok(xs)
}

/// Row fractions of the local height `2(1+ROOF_COLLAR)αx₁`.
pub fn row_fractions(ny: usize) -> Result<Vec<f64>, ScenarioError> {
    let n_top = MIN_COLLAR_CELLS.max(ny / 8);
    if ny < n_top + 2 {
        return Err(ScenarioError::MeshTooCoarse(format!(
            "ny = {ny} leaves fewer than {MIN_COLLAR_CELLS} rows across the roof collar"
        )));
    }
    let roof = 1.0 / (1.0 + ROOF_COLLAR);
    let mut fr = uniform(0.0, roof, ny - n_top);
    append(&mut fr, uniform(roof, 1.0, n_top));
    Ok(fr)
}

fn collar_cells(nodes: &[f64], a: f64, b: f64) -> usize {
    nodes.windows(2).filter(|w| w[0] >= a * (1.0 - 1e-12) && w[1] <= b * (1.0 + 1e-12)).count()
}

/// Suitably prepared data on a lattice whose columns are vertical and whose
/// rows are rays from the origin, so each cutoff collar is resolved at every
/// length scale.
pub fn build_initial_data(p: &Params, mesh: &MeshSpec) -> Result<Field, ScenarioError> {
    build_initial_data_scaled(p, mesh, canonical_amplitude(p))
}

/// As [`build_initial_data`] with vorticity amplitude `a ∈ (φ₀, φ₁)`
/// in place of `√(φ₀φ₁)`.
pub fn build_initial_data_scaled(p: &Params, mesh: &MeshSpec, a: f64) -> Result<Field, ScenarioError> {
    p.validate()?;
    if !(a > p.phi0 && a < p.phi1) {
        return Err(ScenarioError::Infeasible {
            check: "amplitude".into(),
            detail: format!("amplitude {a} outside ({}, {})", p.phi0, p.phi1),
        });
    }
    let xs = x1_nodes(p, mesh.nx)?;
    let fr = row_fractions(mesh.ny)?;
    let left = collar_cells(&xs, 0.5 * p.b0, p.b0);
    let right = collar_cells(&xs, RIGHT_RAMP.0, RIGHT_RAMP.1);
    let top = collar_cells(&fr, 1.0 / (1.0 + ROOF_COLLAR), 1.0);
    if left.min(right).min(top) < MIN_COLLAR_CELLS {
        return Err(ScenarioError::MeshTooCoarse(format!("collar cells left/right/top = {left}/{right}/{top}")));
    }
    let height = 2.0 * (1.0 + ROOF_COLLAR) * p.alpha;
    Ok(Field::structured(xs.len() - 1, fr.len() - 1, |i, j| {
        let x = [xs[i], fr[j] * height * xs[i]];
        (x, omega0_scaled(p, a, x), rho0(p, x))
    }))
}

/// Result of one line of the preparedness check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineResult {
    pub name: String,
    pub holds: bool,
    pub inspected: usize,
    /// Worst margin; relative gap for strict inequalities, tolerance minus
    /// deviation for equalities and non-strict bounds.
    pub worst_margin: f64,
    pub worst_marker: Option<usize>,
    pub worst_at: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedReport {
    pub pass: bool,
    pub lines: Vec<LineResult>,
}

impl PreparedReport {
    pub fn line(&self, name: &str) -> Option<&LineResult> {
        self.lines.iter().find(|l| l.name == name)
    }
}

struct LineAcc {
    name: &'static str,
    inspected: usize,
    worst: Option<(f64, usize, Point)>,
}

impl LineAcc {
    fn new(name: &'static str) -> Self {
        Self { name, inspected: 0, worst: None }
    }

    fn push(&mut self, margin: f64, k: usize, x: Point) {
        self.inspected += 1;
        let replace = match self.worst {
            None => true,
            Some((m, ..)) => margin < m || (margin.is_nan() && !m.is_nan()),
        };
        if replace {
            self.worst = Some((margin, k, x));
        }
    }

    fn finish(self) -> LineResult {
        let (m, k, x) = match self.worst {
            Some((m, k, x)) => (m, Some(k), Some(x)),
            None => (f64::INFINITY, None, None),
        };
        LineResult { name: self.name.into(), holds: m > 0.0, inspected: self.inspected, worst_margin: m, worst_marker: k, worst_at: x }
    }
}

fn rel_gap(lhs: f64, rhs: f64) -> f64 {
    (rhs - lhs) / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
}

pub const LINE_LOWER_POWER: &str = "lower:phi0*x1^-p0<omega";
pub const LINE_LOWER_CONST: &str = "lower:phi0<omega";
pub const LINE_UPPER_POWER: &str = "upper:omega<phi1*x1^-p1";
pub const LINE_UPPER_CONST: &str = "upper:omega<phi1";
pub const LINE_RHO_ONE: &str = "rho=1";
pub const LINE_SUPPORT: &str = "support";
pub const LINE_NONNEG: &str = "nonnegative";
pub const LINE_RHO_LE_ONE: &str = "rho<=1";

/// Check the prepared-data conditions on every node of `field`.
///
/// `ρ₀ = 1` is checked on `D₀ ∩ {x₁ ≤ 3.5}`, since a continuous ρ₀ with
/// support inside `(0, 4)` cannot equal 1 on all of `D₀`.
pub fn verify_prepared(field: &Field, p: &Params) -> PreparedReport {
    let d0 = RegionD0::new(p);
    let mut lp = LineAcc::new(LINE_LOWER_POWER);
    let mut lc = LineAcc::new(LINE_LOWER_CONST);
    let mut up = LineAcc::new(LINE_UPPER_POWER);
    let mut uc = LineAcc::new(LINE_UPPER_CONST);
    let mut r1 = LineAcc::new(LINE_RHO_ONE);
    let mut sp = LineAcc::new(LINE_SUPPORT);
    let mut nn = LineAcc::new(LINE_NONNEG);
    let mut rl = LineAcc::new(LINE_RHO_LE_ONE);
    for (k, m) in field.markers.iter().enumerate() {
        let x = m.position;
        let (x1, w, r) = (x[0], m.omega, m.rho);
        nn.push(w.min(r) + REPORT_TOL, k, x);
        rl.push(1.0 + REPORT_TOL - r, k, x);
        if w != 0.0 || r != 0.0 {
            // Distance of a supported node to the excluded set {x₁ ≤ 0} ∪ {x₁ ≥ 4}.
            sp.push(x1.min(4.0 - x1), k, x);
        }
        if !d0.contains(x) {
            continue;
        }
        if x1 < 1.0 {
            lp.push(rel_gap(p.phi0 * x1.powf(-p.p0), w), k, x);
            up.push(rel_gap(w, p.phi1 * x1.powf(-p.p1)), k, x);
        } else {
            if x1 < 3.0 {
                lc.push(rel_gap(p.phi0, w), k, x);
            }
            uc.push(rel_gap(w, p.phi1), k, x);
        }
        if x1 <= RIGHT_RAMP.0 {
            r1.push(REPORT_TOL - (r - 1.0).abs(), k, x);
        }
    }
    let lines: Vec<LineResult> = [lp, lc, up, uc, r1, sp, nn, rl].into_iter().map(LineAcc::finish).collect();
    PreparedReport { pass: lines.iter().all(|l| l.holds), lines }
}
