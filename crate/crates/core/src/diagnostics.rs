//! Control conditions, support envelope, continuation integral, trajectory
//! checks and blowup-rate fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{BarrierState, Params};
use crate::field::Field;
use crate::geometry::Point;
use crate::kernel::{KernelError, SectorKernel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("record is empty")]
    EmptyRecord,
    #[error("insufficient horizon: reached t = {reached}, need {needed}")]
    InsufficientHorizon { reached: f64, needed: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub const CTRL_LOWER_POWER: &str = "lower:phi0*x1^-p0<omega";
pub const CTRL_LOWER_CONST: &str = "lower:phi0<omega";
pub const CTRL_UPPER_POWER: &str = "upper:omega<phi1*x1^-p1";
pub const CTRL_UPPER_CONST: &str = "upper:omega<phi1";

/// One control line evaluated over the markers in its region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlLine {
    pub name: String,
    pub region: String,
    pub holds: bool,
    pub inspected: usize,
    pub violations: usize,
    /// Violations at markers within one local cell width of the roof of `D_t`.
    pub boundary_violations: usize,
    /// Worst relative gap `(rhs − lhs)/max(|lhs|,|rhs|)`; `+∞` when vacuous.
    pub worst_margin: f64,
    pub worst_marker: Option<usize>,
    pub worst_at: Option<Point>,
}

/// A violating marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub omega: f64,
    pub condition: String,
    pub near_roof: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub t: f64,
    pub b: f64,
    pub lines: Vec<ControlLine>,
    pub inspected: usize,
    pub near_roof: usize,
    pub witnesses: Vec<Witness>,
}

impl ControlReport {
    pub fn holds(&self) -> bool {
        self.lines.iter().all(|l| l.holds)
    }

    pub fn violations(&self) -> usize {
        self.lines.iter().map(|l| l.violations).sum()
    }

    pub fn boundary_violations(&self) -> usize {
        self.lines.iter().map(|l| l.boundary_violations).sum()
    }

    pub fn line(&self, name: &str) -> Option<&ControlLine> {
        self.lines.iter().find(|l| l.name == name)
    }

    pub fn summary(&self) -> ControlSummary {
        ControlSummary {
            holds: self.holds(),
            inspected: self.inspected,
            violations: self.violations(),
            boundary_violations: self.boundary_violations(),
            worst_margin: self.lines.iter().map(|l| l.worst_margin).fold(f64::INFINITY, f64::min),
        }
    }
}

/// Compact per-sample summary stored in run records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSummary {
    pub holds: bool,
    pub inspected: usize,
    pub violations: usize,
    pub boundary_violations: usize,
    pub worst_margin: f64,
}

const MAX_WITNESSES: usize = 1000;

fn rel_gap(lhs: f64, rhs: f64) -> f64 {
    (rhs - lhs) / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
}

/// Evaluate the four control lines at every marker inside `D_t`.
/// Equality is a violation.
pub fn check_control(field: &Field, bstate: &BarrierState, params: &Params) -> ControlReport {
    let widths = field.local_widths();
    let specs: [(&str, &str); 4] = [
        (CTRL_LOWER_POWER, "D_t & x1<1"),
        (CTRL_LOWER_CONST, "D_t & 1<=x1<2"),
        (CTRL_UPPER_POWER, "D_t & x1<1"),
        (CTRL_UPPER_CONST, "D_t & 1<=x1<4"),
    ];
    let mut lines: Vec<ControlLine> = specs
        .iter()
        .map(|(n, r)| ControlLine {
            name: n.to_string(),
            region: r.to_string(),
            holds: true,
            inspected: 0,
            violations: 0,
            boundary_violations: 0,
            worst_margin: f64::INFINITY,
            worst_marker: None,
            worst_at: None,
        })
        .collect();
    let mut witnesses = Vec::new();
    let mut inspected = 0;
    let mut near = 0;
    for (k, m) in field.markers.iter().enumerate() {
        let x = m.position;
        if !bstate.contains(x) {
            continue;
        }
        inspected += 1;
        let near_roof = bstate.roof(x[0]) - x[1] < widths[k];
        if near_roof {
            near += 1;
        }
        let (x1, w) = (x[0], m.omega);
        let mut apply = |idx: usize, margin: f64| {
            let line = &mut lines[idx];
            line.inspected += 1;
            if margin < line.worst_margin || line.worst_marker.is_none() {
                line.worst_margin = margin;
                line.worst_marker = Some(k);
                line.worst_at = Some(x);
            }
            if !(margin > 0.0) {
                line.holds = false;
                line.violations += 1;
                if near_roof {
                    line.boundary_violations += 1;
                }
                if witnesses.len() < MAX_WITNESSES {
                    witnesses.push(Witness {
                        t: bstate.t,
                        x1,
                        x2: x[1],
                        omega: w,
                        condition: line.name.clone(),
                        near_roof,
                    });
                }
            }
        };
        if x1 < 1.0 {
            apply(0, rel_gap(params.phi0 * x1.powf(-params.p0), w));
            apply(2, rel_gap(w, params.phi1 * x1.powf(-params.p1)));
        } else {
            if x1 < 2.0 {
                apply(1, rel_gap(params.phi0, w));
            }
            if x1 < 4.0 {
                apply(3, rel_gap(w, params.phi1));
            }
        }
    }
    ControlReport { t: bstate.t, b: bstate.b, lines, inspected, near_roof: near, witnesses }
}

/// `sup ω` over markers with `x₁ ≤ k`, from a running-maximum profile
/// `[(x₁, sup_{x₁' ≤ x₁} ω)]` sorted by `x₁`.
pub fn strip_sup(profile: &[[f64; 2]], k: f64) -> f64 {
    let mut sup = 0.0;
    for &[x1, s] in profile {
        if x1 > k {
            break;
        }
        sup = s;
    }
    sup
}

/// Breakpoints of `k ↦ sup{ω : x₁ ≤ k}` for a field.
pub fn strip_profile(field: &Field) -> Vec<[f64; 2]> {
    let mut pts: Vec<(f64, f64)> = field.markers.iter().map(|m| (m.position[0], m.omega)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<[f64; 2]> = Vec::new();
    let mut run = f64::NEG_INFINITY;
    for (x1, w) in pts {
        if w > run {
            run = w;
            out.push([x1, w]);
        }
    }
    out
}

/// Minimal view of a run sample used by the diagnostics.
pub trait SampleView {
    fn t(&self) -> f64;
    fn omega_max(&self) -> f64;
    fn n1(&self) -> f64;
    fn n2(&self) -> f64;
    fn strip(&self) -> &[[f64; 2]];
}

/// Trapezoid integral of `sup{ω : x₁ ≤ k}` over the recorded samples; the
/// value after each sample.
pub fn bkm_series<S: SampleView>(samples: &[S], k: f64) -> Result<Vec<f64>, DiagnosticsError> {
    if !(k > 0.0) {
        return Err(DiagnosticsError::Invalid(format!("k = {k}")));
    }
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    for (i, s) in samples.iter().enumerate() {
        if i > 0 {
            let p = &samples[i - 1];
            acc += 0.5 * (s.t() - p.t()) * (strip_sup(s.strip(), k) + strip_sup(p.strip(), k));
        }
        out.push(acc);
    }
    Ok(out)
}

pub fn bkm_integral<S: SampleView>(samples: &[S], k: f64) -> Result<f64, DiagnosticsError> {
    let s = bkm_series(samples, k)?;
    s.last().copied().ok_or(DiagnosticsError::EmptyRecord)
}

/// Result of comparing the recorded `n₁(t)` with the envelope ODE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub holds: bool,
    pub envelope: Vec<f64>,
    pub first_violation: Option<usize>,
    pub slack: f64,
}

/// RK4 integration of `ṅ₁ = −2c(t) n₁ log(n₂/n₁)` with `c` piecewise linear
/// between samples; `substeps` RK4 steps per sample interval.
pub fn envelope_ode(times: &[f64], omega_sup: &[f64], n1_0: f64, n2: f64, substeps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut n = n1_0;
    out.push(n);
    let rhs = |c: f64, n: f64| -2.0 * c * n * (n2 / n).ln();
    for i in 1..times.len() {
        let (t0, t1) = (times[i - 1], times[i]);
        let (c0, c1) = (omega_sup[i - 1], omega_sup[i]);
        let h = (t1 - t0) / substeps as f64;
        for s in 0..substeps {
            let c_at = |tau: f64| c0 + (c1 - c0) * tau;
            let a = s as f64 / substeps as f64;
            let da = 1.0 / substeps as f64;
            let k1 = rhs(c_at(a), n);
            let k2 = rhs(c_at(a + 0.5 * da), n + 0.5 * h * k1);
            let k3 = rhs(c_at(a + 0.5 * da), n + 0.5 * h * k2);
            let k4 = rhs(c_at(a + da), n + h * k3);
            n += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.push(n);
    }
    out
}

/// Check `n₁(t) ≥ envelope(t) − slack` at every sample, where the envelope
/// starts from the initial support and uses `n₂` of the initial field.
pub fn support_envelope<S: SampleView>(samples: &[S], field0: &Field, slack: f64) -> Result<EnvelopeReport, DiagnosticsError> {
    if samples.is_empty() {
        return Err(DiagnosticsError::EmptyRecord);
    }
    let sb = field0.support_box().ok_or(DiagnosticsError::Invalid("initial field has empty support".into()))?;
    let times: Vec<f64> = samples.iter().map(|s| s.t()).collect();
    let sup: Vec<f64> = samples.iter().map(|s| s.omega_max()).collect();
    let envelope = envelope_ode(&times, &sup, sb.n1, sb.n2, 64);
    let first = samples.iter().zip(&envelope).position(|(s, e)| s.n1() < e - slack);
    Ok(EnvelopeReport { holds: first.is_none(), envelope, first_violation: first, slack })
}

/// Closed form of the envelope for constant `c`: `n₁ = n₂ (n₁(0)/n₂)^{e^{2ct}}`.
pub fn envelope_closed_form(n1_0: f64, n2: f64, c: f64, t: f64) -> f64 {
    n2 * ((n1_0 / n2).ln() * (2.0 * c * t).exp()).exp()
}

/// Per-sample marker extremes used by the trajectory lemmas.
pub trait TrajectoryView: SampleView {
    /// Smallest current `x₁` among markers that started at `x₁ > 3`.
    fn min_x1_right(&self) -> f64;
    /// Largest current `x₁` among markers that started at `x₁ < b₀`.
    fn max_x1_left(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaT1Report {
    pub holds: bool,
    pub t1: f64,
    pub horizon: f64,
    pub min_x1: f64,
    pub position_witness: Option<(f64, f64)>,
    pub velocity_bound: f64,
    pub max_minus_u1: f64,
    pub velocity_witness: Option<Point>,
}

/// Markers starting at `x₁ > 3` stay at `x₁ ≥ 5/2` up to `T₁`, and
/// `−u₁ ≤ 𝓜 + T₁` at 20 random points with `x₁ ≥ 2` of the initial field.
pub fn lemma_t1_check<S: TrajectoryView>(
    samples: &[S],
    field0: &Field,
    params: &Params,
    tol: f64,
    seed: u64,
) -> Result<LemmaT1Report, DiagnosticsError> {
    if samples.is_empty() {
        return Err(DiagnosticsError::EmptyRecord);
    }
    let t1 = params.t1();
    let mut min_x1 = f64::INFINITY;
    let mut position_witness = None;
    for s in samples.iter().filter(|s| s.t() <= t1) {
        let x = s.min_x1_right();
        min_x1 = min_x1.min(x);
        if x < 2.5 && position_witness.is_none() {
            position_witness = Some((s.t(), x));
        }
    }
    let kernel = SectorKernel::new(field0, params.alpha, tol)?;
    let sb = field0.support_box();
    let x2_max = sb.map(|b| b.m).unwrap_or(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = params.mcap + t1;
    let mut worst = 0.0f64;
    let mut velocity_witness = None;
    for _ in 0..20 {
        let x = [rng.gen_range(2.0..4.5), rng.gen_range(0.0..x2_max)];
        let u = kernel.velocity(x)?;
        worst = worst.max(-u[0]);
        if -u[0] > bound && velocity_witness.is_none() {
            velocity_witness = Some(x);
        }
    }
    Ok(LemmaT1Report {
        holds: position_witness.is_none() && velocity_witness.is_none(),
        t1,
        horizon: samples.last().map(|s| s.t()).unwrap_or(0.0),
        min_x1,
        position_witness,
        velocity_bound: bound,
        max_minus_u1: worst,
        velocity_witness,
    })
}

/// Markers that started left of `b₀` stay left of `b(t)`.
pub fn left_markers_check<S: TrajectoryView>(samples: &[S], b_of_t: impl Fn(f64) -> f64) -> Option<(f64, f64, f64)> {
    samples.iter().find_map(|s| {
        let b = b_of_t(s.t());
        let x = s.max_x1_left();
        (x >= b).then_some((s.t(), x, b))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    pub trend: bool,
    pub message: String,
    /// `max ω / (φ₀ b(t)^{−p₀})` per sample.
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    /// Fitted exponent `γ` in `max ω ∝ (T* − t)^{−γ}`.
    pub exponent: Option<f64>,
    /// Exponent predicted by the lower barrier: 1.
    pub predicted_exponent: f64,
}

/// Ratios of the recorded `max ω` to the barrier prediction
/// `φ₀/(b₀^{p₀} − p₀φ₀κt)` and the fitted power of `T* − t`.
pub fn blowup_fit<S: SampleView>(samples: &[S], params: &Params, kappa: f64) -> Result<BlowupFit, DiagnosticsError> {
    let first = samples.first().ok_or(DiagnosticsError::EmptyRecord)?;
    let last = samples.last().expect("nonempty");
    let ratios = barrier_ratio_series(samples, params, kappa);
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    if last.omega_max() <= first.omega_max() {
        return Ok(BlowupFit {
            trend: false,
            message: "no blowup trend".into(),
            ratios,
            min_ratio,
            exponent: None,
            predicted_exponent: 1.0,
        });
    }
    let t_star = params.b0.powf(params.p0) / (params.p0 * params.phi0 * kappa);
    if last.t() < 0.9 * t_star {
        return Err(DiagnosticsError::InsufficientHorizon { reached: last.t(), needed: 0.9 * t_star });
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.t() < t_star && s.omega_max() > 0.0)
        .map(|s| ((t_star - s.t()).ln(), s.omega_max().ln()))
        .collect();
    let exponent = linear_slope(&pts).map(|s| -s);
    Ok(BlowupFit { trend: true, message: "growth".into(), ratios, min_ratio, exponent, predicted_exponent: 1.0 })
}

fn linear_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `max ω(t) / (φ₀ b(t)^{−p₀})` per sample.
pub fn barrier_ratio_series<S: SampleView>(samples: &[S], params: &Params, kappa: f64) -> Vec<f64> {
    samples
        .iter()
        .map(|s| {
            let base = params.b0.powf(params.p0) - params.p0 * params.phi0 * kappa * s.t();
            s.omega_max() * base.max(0.0) / params.phi0
        })
        .collect()
}

/// Witness rows as CSV.
pub fn witnesses_csv(witnesses: &[Witness]) -> String {
    let mut out = String::from("t,x1,x2,omega,condition,near_roof\n");
    for w in witnesses {
        out.push_str(&format!("{},{},{},{},{},{}\n", w.t, w.x1, w.x2, w.omega, w.condition, w.near_roof));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_matches_closed_form() {
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
        let sup = vec![1.3; times.len()];
        let env = envelope_ode(&times, &sup, 0.2, 4.0, 64);
        for (t, e) in times.iter().zip(&env) {
            assert!((e - envelope_closed_form(0.2, 4.0, 1.3, *t)).abs() < 1e-8);
        }
    }

    #[test]
    fn strip_sup_reads_running_max() {
        let prof = vec![[0.1, 1.0], [0.5, 3.0], [2.0, 4.0]];
        assert_eq!(strip_sup(&prof, 0.05), 0.0);
        assert_eq!(strip_sup(&prof, 1.0), 3.0);
        assert_eq!(strip_sup(&prof, 10.0), 4.0);
    }
}
