//! Lagrangian time stepping of the marker lattice.

pub mod picard;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{self, BarrierError, BarrierState, Params, TStarMode};
use crate::diagnostics::{self, ControlSummary, SampleView, TrajectoryView, Witness};
use crate::field::{Field, FieldError, Marker};
use crate::geometry::Point;
use crate::kernel::{KernelError, SectorKernel};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("step rejected at t = {t}: {source}")]
    HardStop {
        t: f64,
        #[source]
        source: FieldError,
        state: Box<SimState>,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Lattice plus clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub field: Field,
    pub t: f64,
    pub dt_last: f64,
    pub omega_max: f64,
    pub step_count: u64,
}

impl SimState {
    pub fn new(field: Field) -> Result<Self, SolverError> {
        field.validate()?;
        let omega_max = field.omega_max();
        Ok(Self { field, t: 0.0, dt_last: 0.0, omega_max, step_count: 0 })
    }
}

/// Velocity at every marker of the current lattice.
pub fn marker_velocity(field: &Field, alpha: f64, tol: f64) -> Result<Vec<Point>, KernelError> {
    if field.markers.iter().all(|m| m.omega == 0.0) && field.cell_omega.is_none() {
        return Ok(vec![[0.0, 0.0]; field.markers.len()]);
    }
    SectorKernel::new(field, alpha, tol)?.velocity_many(&field.positions())
}

fn source(markers: &[Marker], pos: &[Point]) -> Vec<f64> {
    markers.iter().zip(pos).map(|(m, p)| m.rho / p[0]).collect()
}

fn stage_guard(t: f64, state: &SimState, pos: &[Point]) -> Result<(), SolverError> {
    if let Some((k, p)) = pos.iter().enumerate().find(|(_, p)| !(p[0] > 0.0 && p[1] >= 0.0 && p[0].is_finite() && p[1].is_finite())) {
        return Err(SolverError::HardStop {
            t,
            source: FieldError::OffQuadrant { marker: k, x1: p[0], x2: p[1] },
            state: Box::new(state.clone()),
        });
    }
    Ok(())
}

fn axpy(base: &[Point], h: f64, v: &[Point]) -> Vec<Point> {
    base.iter().zip(v).map(|(b, v)| [b[0] + h * v[0], b[1] + h * v[1]]).collect()
}

fn axpy_s(base: &[f64], h: f64, v: &[f64]) -> Vec<f64> {
    base.iter().zip(v).map(|(b, v)| b + h * v).collect()
}

/// One classical RK4 step of `(Ẋ, ω̇) = (u(X), ρ/X₁)` with a fresh kernel at
/// each stage. `u1` is the velocity at the current positions.
pub fn step_with(state: &SimState, u1: &[Point], dt: f64, alpha: f64, tol: f64) -> Result<SimState, SolverError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SolverError::Config(format!("dt = {dt}")));
    }
    let f0 = &state.field;
    let x0 = f0.positions();
    let w0: Vec<f64> = f0.markers.iter().map(|m| m.omega).collect();
    let s1 = source(&f0.markers, &x0);

    let x2 = axpy(&x0, 0.5 * dt, u1);
    stage_guard(state.t, state, &x2)?;
    let w2 = axpy_s(&w0, 0.5 * dt, &s1);
    let f2 = f0.with_state(&x2, &w2);
    let u2 = marker_velocity(&f2, alpha, tol)?;
    let s2 = source(&f0.markers, &x2);

    let x3 = axpy(&x0, 0.5 * dt, &u2);
    stage_guard(state.t, state, &x3)?;
    let w3 = axpy_s(&w0, 0.5 * dt, &s2);
    let f3 = f0.with_state(&x3, &w3);
    let u3 = marker_velocity(&f3, alpha, tol)?;
    let s3 = source(&f0.markers, &x3);

    let x4 = axpy(&x0, dt, &u3);
    stage_guard(state.t, state, &x4)?;
    let w4 = axpy_s(&w0, dt, &s3);
    let f4 = f0.with_state(&x4, &w4);
    let u4 = marker_velocity(&f4, alpha, tol)?;
    let s4 = source(&f0.markers, &x4);

    let h = dt / 6.0;
    let xn: Vec<Point> = (0..x0.len())
        .map(|k| {
            [
                x0[k][0] + h * (u1[k][0] + 2.0 * u2[k][0] + 2.0 * u3[k][0] + u4[k][0]),
                x0[k][1] + h * (u1[k][1] + 2.0 * u2[k][1] + 2.0 * u3[k][1] + u4[k][1]),
            ]
        })
        .collect();
    let wn: Vec<f64> = (0..x0.len()).map(|k| w0[k] + h * (s1[k] + 2.0 * s2[k] + 2.0 * s3[k] + s4[k])).collect();
    let field = f0.with_state(&xn, &wn);
    if let Err(e) = field.validate() {
        return Err(SolverError::HardStop { t: state.t, source: e, state: Box::new(state.clone()) });
    }
    let omega_max = field.omega_max();
    Ok(SimState { field, t: state.t + dt, dt_last: dt, omega_max, step_count: state.step_count + 1 })
}

/// One RK4 step of length `dt`.
pub fn step(state: &SimState, dt: f64, alpha: f64, tol: f64) -> Result<SimState, SolverError> {
    let u1 = marker_velocity(&state.field, alpha, tol)?;
    step_with(state, &u1, dt, alpha, tol)
}

/// Adaptive step `cfl · min(width/|u|, max(ω,1)/(ρ/x₁))` over all markers;
/// `∞` when nothing moves or grows.
pub fn stable_dt(field: &Field, u: &[Point], cfl: f64) -> f64 {
    let widths = field.local_widths();
    let mut dt = f64::INFINITY;
    for ((m, v), w) in field.markers.iter().zip(u).zip(&widths) {
        let speed = v[0].hypot(v[1]);
        if speed > 0.0 {
            dt = dt.min(w / speed);
        }
        let growth = m.rho / m.position[0];
        if growth > 0.0 {
            dt = dt.min(m.omega.max(1.0) / growth);
        }
    }
    cfl * dt
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub cfl: f64,
    /// Stop at `stop_fraction · T*`.
    pub stop_fraction: f64,
    pub omega_cap: f64,
    pub t_star_mode: TStarMode,
    pub stop_on_violation: bool,
    pub max_steps: u64,
    /// Optional absolute end time (the run stops at the earlier of this and
    /// `stop_fraction · T*`).
    pub t_end: Option<f64>,
    pub dt_max: Option<f64>,
    pub sample_every: u64,
    pub kernel_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            stop_fraction: 0.98,
            omega_cap: 1e8,
            t_star_mode: TStarMode::default(),
            stop_on_violation: false,
            max_steps: 200,
            t_end: None,
            dt_max: None,
            sample_every: 1,
            kernel_tol: crate::kernel::DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    StopTime,
    OmegaCap,
    ControlViolation,
    MaxSteps,
    Tangled,
    AxisCollision,
}

/// Diagnostics captured at a recorded step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub omega_max: f64,
    pub n1: f64,
    pub n2: f64,
    pub b: f64,
    /// Running trapezoid integral of `max ω` over every step.
    pub bkm: f64,
    pub control: ControlSummary,
    /// Largest `u₁` over markers; never positive for nonnegative ω.
    pub max_u1: f64,
    /// Smallest `u₂` over markers; never negative for nonnegative ω.
    pub min_u2: f64,
    pub min_x1_right: f64,
    pub max_x1_left: f64,
    pub min_cell_width: f64,
    /// Breakpoints `(x₁, sup{ω : x₁' ≤ x₁})`.
    pub strip: Vec<[f64; 2]>,
}

impl SampleView for Sample {
    fn t(&self) -> f64 {
        self.t
    }
    fn omega_max(&self) -> f64 {
        self.omega_max
    }
    fn n1(&self) -> f64 {
        self.n1
    }
    fn n2(&self) -> f64 {
        self.n2
    }
    fn strip(&self) -> &[[f64; 2]] {
        &self.strip
    }
}

impl TrajectoryView for Sample {
    fn min_x1_right(&self) -> f64 {
        self.min_x1_right
    }
    fn max_x1_left(&self) -> f64 {
        self.max_x1_left
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub params: Params,
    pub kappa: f64,
    pub t_star: f64,
    pub t_stop: f64,
    pub samples: Vec<Sample>,
    pub witnesses: Vec<Witness>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub final_state: SimState,
    pub stop: StopReason,
    pub stop_detail: Option<String>,
}

fn sample(state: &SimState, u: &[Point], bstate: &BarrierState, params: &Params, bkm: f64) -> (Sample, Vec<Witness>) {
    let f = &state.field;
    let ctrl = diagnostics::check_control(f, bstate, params);
    let sb = f.support_box();
    let (n1, n2) = sb.map(|b| (b.n1, b.n2)).unwrap_or((f64::NAN, f64::NAN));
    let mut min_x1_right = f64::INFINITY;
    let mut max_x1_left = f64::NEG_INFINITY;
    for m in &f.markers {
        if m.initial_position[0] > 3.0 {
            min_x1_right = min_x1_right.min(m.position[0]);
        }
        if m.initial_position[0] < params.b0 {
            max_x1_left = max_x1_left.max(m.position[0]);
        }
    }
    let s = Sample {
        step: state.step_count,
        t: state.t,
        dt: state.dt_last,
        omega_max: state.omega_max,
        n1,
        n2,
        b: bstate.b,
        bkm,
        control: ctrl.summary(),
        max_u1: u.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max),
        min_u2: u.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min),
        min_x1_right,
        max_x1_left,
        min_cell_width: f.min_cell_width(),
        strip: diagnostics::strip_profile(f),
    };
    (s, ctrl.witnesses)
}

/// Advance until the stop time, the ω cap, a control violation (if
/// configured), a hard stop or the step budget.
pub fn run(state0: SimState, params: &Params, config: &RunConfig) -> Result<RunOutcome, SolverError> {
    run_from(state0, params, config, 0.0)
}

/// As [`run`], continuing a running continuation integral `bkm0`.
pub fn run_from(state0: SimState, params: &Params, config: &RunConfig, bkm0: f64) -> Result<RunOutcome, SolverError> {
    if !(config.cfl > 0.0) || !(config.stop_fraction > 0.0 && config.stop_fraction <= 1.0) || config.sample_every == 0 {
        return Err(SolverError::Config("cfl > 0, 0 < stop_fraction ≤ 1 and sample_every ≥ 1 are required".into()));
    }
    params.validate()?;
    let alpha = params.alpha;
    let kappa = barrier::kappa(params, config.t_star_mode)?;
    let t_star = barrier::t_star_with_kappa(params, kappa);
    let mut t_stop = config.stop_fraction * t_star;
    if let Some(te) = config.t_end {
        t_stop = t_stop.min(te);
    }
    let mut state = state0;
    let mut bkm = bkm0;
    let mut samples = Vec::new();
    let mut witnesses = Vec::new();
    let mut u = marker_velocity(&state.field, alpha, config.kernel_tol)?;
    let mut steps_taken = 0u64;
    let (stop, detail) = loop {
        let bstate = BarrierState::at(params, kappa, state.t.min(t_star))?;
        let recorded = steps_taken.is_multiple_of(config.sample_every);
        let (s, w) = sample(&state, &u, &bstate, params, bkm);
        let violated = !s.control.holds;
        if recorded || violated {
            samples.push(s);
            witnesses.extend(w);
        }
        if violated && config.stop_on_violation {
            break (StopReason::ControlViolation, None);
        }
        if state.t >= t_stop {
            break (StopReason::StopTime, None);
        }
        if state.omega_max >= config.omega_cap {
            break (StopReason::OmegaCap, None);
        }
        if steps_taken >= config.max_steps {
            break (StopReason::MaxSteps, None);
        }
        let mut dt = stable_dt(&state.field, &u, config.cfl);
        if let Some(m) = config.dt_max {
            dt = dt.min(m);
        }
        if !dt.is_finite() || state.t + dt >= t_stop {
            dt = t_stop - state.t;
        }
        let next = match step_with(&state, &u, dt, alpha, config.kernel_tol) {
            Ok(n) => n,
            Err(SolverError::HardStop { source, .. }) => {
                let reason = match source {
                    FieldError::Tangled { .. } => StopReason::Tangled,
                    _ => StopReason::AxisCollision,
                };
                break (reason, Some(source.to_string()));
            }
            Err(e) => return Err(e),
        };
        let next_t = if state.t + dt >= t_stop { t_stop } else { next.t };
        bkm += 0.5 * dt * (state.omega_max + next.omega_max);
        state = SimState { t: next_t, ..next };
        u = marker_velocity(&state.field, alpha, config.kernel_tol)?;
        steps_taken += 1;
    };
    if samples.last().map(|s| s.step) != Some(state.step_count) {
        let bstate = BarrierState::at(params, kappa, state.t.min(t_star))?;
        let (s, w) = sample(&state, &u, &bstate, params, bkm);
        samples.push(s);
        witnesses.extend(w);
    }
    Ok(RunOutcome {
        record: RunRecord { params: *params, kappa, t_star, t_stop, samples, witnesses },
        final_state: state,
        stop,
        stop_detail: detail,
    })
}

/// Time-series CSV of a record.
pub fn record_csv(record: &RunRecord) -> String {
    let mut out = String::from(
        "step,t,dt,omega_max,n1,n2,b_t,bkm,violations,boundary_violations,max_u1,min_u2,min_x1_right,max_x1_left,min_cell_width\n",
    );
    for s in &record.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.step,
            s.t,
            s.dt,
            s.omega_max,
            s.n1,
            s.n2,
            s.b,
            s.bkm,
            s.control.violations,
            s.control.boundary_violations,
            s.max_u1,
            s.min_u2,
            s.min_x1_right,
            s.max_x1_left,
            s.min_cell_width
        );
    }
    out
}

/// Snapshot CSV: `#` header lines, then one row per marker.
pub fn snapshot_csv(state: &SimState, bkm: f64, extra_header: &[String]) -> String {
    let mut out = String::new();
    for h in extra_header {
        let _ = writeln!(out, "# {h}");
    }
    let _ = writeln!(out, "# nx={} ny={}", state.field.nx, state.field.ny);
    let _ = writeln!(out, "# t={} dt_last={} step={} bkm={}", state.t, state.dt_last, state.step_count, bkm);
    out.push_str("id,x1,x2,x1_0,x2_0,omega,rho\n");
    for (k, m) in state.field.markers.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            k, m.position[0], m.position[1], m.initial_position[0], m.initial_position[1], m.omega, m.rho
        );
    }
    out
}

fn header_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.split_whitespace().find_map(|tok| tok.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

fn parse<T: std::str::FromStr>(s: Option<&str>, what: &str) -> Result<T, SolverError> {
    s.and_then(|v| v.parse().ok()).ok_or_else(|| SolverError::Snapshot(format!("missing or invalid {what}")))
}

/// Parse a snapshot written by [`snapshot_csv`]; returns the state and the
/// running continuation integral.
pub fn read_snapshot(text: &str) -> Result<(SimState, f64), SolverError> {
    let mut nx = None;
    let mut ny = None;
    let mut t = None;
    let mut dt_last = None;
    let mut step = None;
    let mut bkm = None;
    let mut markers = Vec::new();
    let mut seen_columns = false;
    for line in text.lines() {
        if let Some(h) = line.strip_prefix('#') {
            nx = nx.or(header_value(h, "nx"));
            ny = ny.or(header_value(h, "ny"));
            t = t.or(header_value(h, "t"));
            dt_last = dt_last.or(header_value(h, "dt_last"));
            step = step.or(header_value(h, "step"));
            bkm = bkm.or(header_value(h, "bkm"));
            continue;
        }
        if !seen_columns {
            if line.trim() != "id,x1,x2,x1_0,x2_0,omega,rho" {
                return Err(SolverError::Snapshot(format!("unexpected column line {line:?}")));
            }
            seen_columns = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(SolverError::Snapshot(format!("row {line:?}")));
        }
        let v: Vec<f64> = cols[1..]
            .iter()
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| SolverError::Snapshot(format!("row {line:?}: {e}")))?;
        markers.push(Marker { position: [v[0], v[1]], initial_position: [v[2], v[3]], omega: v[4], rho: v[5] });
    }
    let field = Field { nx: parse(nx, "nx")?, ny: parse(ny, "ny")?, markers, cell_omega: None };
    field.validate()?;
    let omega_max = field.omega_max();
    let state = SimState {
        field,
        t: parse(t, "t")?,
        dt_last: parse(dt_last, "dt_last")?,
        omega_max,
        step_count: parse(step, "step")?,
    };
    Ok((state, parse(bkm, "bkm")?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob() -> Field {
        let xs: Vec<f64> = (0..=6).map(|i| 1.0 + i as f64 * 0.25).collect();
        let ys: Vec<f64> = (0..=4).map(|j| j as f64 * 0.25).collect();
        Field::tensor(
            &xs,
            &ys,
            |p| {
                let r = ((p[0] - 1.75).powi(2) + (p[1] - 0.5).powi(2)).sqrt();
                (1.0 - r).max(0.0)
            },
            |_| 0.0,
        )
    }

    #[test]
    fn snapshot_round_trips() {
        let s = SimState::new(blob()).unwrap();
        let text = snapshot_csv(&s, 0.125, &["config=abc".into()]);
        let (back, bkm) = read_snapshot(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(bkm, 0.125);
    }

    #[test]
    fn zero_density_keeps_omega() {
        let s = SimState::new(blob()).unwrap();
        let n = step(&s, 1e-3, 1.0, 1e-8).unwrap();
        for (a, b) in s.field.markers.iter().zip(&n.field.markers) {
            assert_eq!(a.omega, b.omega);
        }
    }
}
