use std::path::{Path, PathBuf};

use serde::Serialize;
use sectorflow_core::barrier::{self, BarrierState};
use sectorflow_core::diagnostics::{self, BlowupFit, ControlReport, EnvelopeReport, LemmaT1Report};
use sectorflow_core::onedim::{self, Profile1D};
use sectorflow_core::scenario::{self, Check, FeasibilityCertificate, MeshSpec, PreparedReport, ScenarioError};
use sectorflow_core::solver::picard::{self, FlowMap, PicardConfig, PicardError, DEFAULT_ZETA_FRACTION};
use sectorflow_core::solver::{self, RunConfig, RunOutcome, SimState, SolverError, StopReason};
use sectorflow_core::{Field, Params};

use crate::config::{ParamsMode, SimConfig};
use crate::error::CliError;
use crate::output::{self, columns, json_hash, Curve, Header, OutputDir};

fn scenario_error(stage: &str, e: ScenarioError) -> CliError {
    match e {
        ScenarioError::Infeasible { check, detail } => CliError::infeasible(stage, format!("check `{check}` failed: {detail}")),
        ScenarioError::MeshTooCoarse(m) => CliError::Usage(format!("{stage}: mesh too coarse: {m}")),
        ScenarioError::Barrier(b) => CliError::numerical(stage, b),
    }
}

#[derive(Serialize)]
struct CertificateFile<'a> {
    certificate: &'a FeasibilityCertificate,
    reverification: &'a [Check],
}

/// Certify constants for `alpha` and write them to `out`.
pub fn cmd_params(alpha: f64, phi0_hint: f64, out: &Path) -> Result<FeasibilityCertificate, CliError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CliError::Usage(format!("alpha must be positive, got {alpha}")));
    }
    if !(phi0_hint > 0.0 && phi0_hint.is_finite()) {
        return Err(CliError::Usage(format!("phi0_hint must be positive, got {phi0_hint}")));
    }
    let cert = scenario::find_feasible_params(alpha, phi0_hint).map_err(|e| scenario_error("params", e))?;
    let checks = scenario::verify_certificate(&cert).map_err(|e| scenario_error("params", e))?;
    if let Some(bad) = checks.iter().find(|c| !c.holds()) {
        return Err(CliError::infeasible("params", format!("re-verification of `{}` failed (margin {:e})", bad.name, bad.margin)));
    }
    let header = Header {
        config_sha256: json_hash(&serde_json::json!({ "alpha": alpha, "phi0_hint": phi0_hint })),
        certificate_sha256: json_hash(&cert),
    };
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = out.file_name().ok_or_else(|| CliError::Usage(format!("{} is not a file path", out.display())))?;
    let mut od = OutputDir::create(dir, header)?;
    od.json(&name.to_string_lossy(), &CertificateFile { certificate: &cert, reverification: &checks })?;
    Ok(cert)
}

/// Constants, initial data and preparedness for a configuration.
pub struct Prepared {
    pub certificate: FeasibilityCertificate,
    pub params: Params,
    pub field: Field,
    pub report: PreparedReport,
    pub header: Header,
}

fn run_params(cfg: &SimConfig, cert: &FeasibilityCertificate) -> Result<Params, CliError> {
    match cfg.params_mode {
        ParamsMode::Certificate => Ok(cert.params),
        ParamsMode::Demonstration => {
            scenario::demonstration_params(cert, cfg.demo_phi0, cfg.demo_b0).map_err(|e| scenario_error("params", e))
        }
    }
}

fn header_for(cfg: &SimConfig, cert: &FeasibilityCertificate) -> Header {
    Header { config_sha256: json_hash(&cfg.hashed_view()), certificate_sha256: json_hash(cert) }
}

fn prepare_with(cfg: &SimConfig, nx: usize, ny: usize, amplitude: Option<f64>) -> Result<Prepared, CliError> {
    cfg.validate()?;
    let certificate = scenario::find_feasible_params(cfg.alpha, cfg.phi0_hint).map_err(|e| scenario_error("params", e))?;
    let params = run_params(cfg, &certificate)?;
    let mesh = MeshSpec { nx, ny };
    let field = match amplitude {
        Some(a) => scenario::build_initial_data_scaled(&params, &mesh, a),
        None => scenario::build_initial_data(&params, &mesh),
    }
    .map_err(|e| scenario_error("prepare", e))?;
    let report = scenario::verify_prepared(&field, &params);
    let header = header_for(cfg, &certificate);
    Ok(Prepared { certificate, params, field, report, header })
}

pub fn prepare(cfg: &SimConfig) -> Result<Prepared, CliError> {
    prepare_with(cfg, cfg.grid.nx, cfg.grid.ny, cfg.amplitude)
}

#[derive(Serialize)]
struct PreparedFile<'a> {
    params: &'a Params,
    report: &'a PreparedReport,
}

fn write_prepared(od: &mut OutputDir, p: &Prepared) -> Result<(), CliError> {
    od.json("certificate.json", &CertificateFile { certificate: &p.certificate, reverification: &p.certificate.checks })?;
    od.json("prepared_report.json", &PreparedFile { params: &p.params, report: &p.report })?;
    let state = SimState::new(p.field.clone()).map_err(|e| CliError::numerical("prepare", e))?;
    od.text("snapshot_initial.csv", &solver::snapshot_csv(&state, 0.0, &[]))?;
    Ok(())
}

fn fail_prepared(p: &Prepared, od: &OutputDir) -> CliError {
    let failing: Vec<&str> = p.report.lines.iter().filter(|l| !l.holds).map(|l| l.name.as_str()).collect();
    CliError::infeasible("prepare", format!("preparedness lines failed: {}", failing.join(", "))).with_written(od.written())
}

pub struct PrepareSummary {
    pub prepared: Prepared,
    pub files: Vec<PathBuf>,
}

/// Build and verify the initial data; write certificate, report and snapshot.
pub fn cmd_prepare(cfg: &SimConfig) -> Result<PrepareSummary, CliError> {
    let p = prepare(cfg)?;
    let mut od = OutputDir::create(&cfg.output_dir, p.header.clone())?;
    write_prepared(&mut od, &p)?;
    if !p.report.pass {
        return Err(fail_prepared(&p, &od));
    }
    Ok(PrepareSummary { files: od.written().to_vec(), prepared: p })
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub t: f64,
    pub b: f64,
    pub prepared: Option<PreparedReport>,
    pub control: ControlReport,
}

/// Control conditions (and preparedness at `t = 0`) of a snapshot.
pub fn cmd_check(cfg: &SimConfig, snapshot: &Path) -> Result<CheckReport, CliError> {
    cfg.validate()?;
    let text = std::fs::read_to_string(snapshot).map_err(|e| CliError::io(snapshot, e))?;
    let (state, _) = solver::read_snapshot(&text).map_err(|e| CliError::Usage(format!("{}: {e}", snapshot.display())))?;
    let cert = scenario::find_feasible_params(cfg.alpha, cfg.phi0_hint).map_err(|e| scenario_error("params", e))?;
    let params = run_params(cfg, &cert)?;
    let kappa = barrier::kappa(&params, cfg.t_star_mode).map_err(|e| CliError::numerical("check", e))?;
    let t_star = barrier::t_star_with_kappa(&params, kappa);
    let bstate = BarrierState::at(&params, kappa, state.t.min(t_star)).map_err(|e| CliError::numerical("check", e))?;
    let control = diagnostics::check_control(&state.field, &bstate, &params);
    let prepared = (state.t == 0.0).then(|| scenario::verify_prepared(&state.field, &params));
    let report = CheckReport { t: state.t, b: bstate.b, prepared, control };
    let mut od = OutputDir::create(&cfg.output_dir, header_for(cfg, &cert))?;
    od.json("check_report.json", &report)?;
    od.text("check_witnesses.csv", &diagnostics::witnesses_csv(&report.control.witnesses))?;
    let prepared_ok = report.prepared.as_ref().map(|r| r.pass).unwrap_or(true);
    if !report.control.holds() || !prepared_ok {
        return Err(CliError::infeasible(
            "check",
            format!("{} control violations, preparedness {}", report.control.violations(), prepared_ok),
        )
        .with_written(od.written()));
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlHistory {
    pub violations: usize,
    pub boundary_violations: usize,
    pub first_violation_t: Option<f64>,
    pub b_at_first_violation: Option<f64>,
    pub min_cell_width_at_first_violation: Option<f64>,
    /// First time with `b(t) < 2·min cell width`.
    pub resolution_threshold_t: Option<f64>,
    pub violations_before_resolution: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SignChecks {
    pub max_u1: f64,
    pub min_u2: f64,
    pub n2_nonincreasing: bool,
    pub omega_max_nondecreasing: bool,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub params: Params,
    pub params_mode: ParamsMode,
    pub rho_zero: bool,
    pub stop_reason: StopReason,
    pub stop_detail: Option<String>,
    pub steps: u64,
    pub t_final: f64,
    pub t_star: f64,
    pub t_stop: f64,
    pub kappa: f64,
    pub omega_max_initial: f64,
    pub omega_max_final: f64,
    pub bkm_k4: f64,
    pub control: ControlHistory,
    pub signs: SignChecks,
    pub envelope: Option<EnvelopeReport>,
    pub lemma_t1: Option<LemmaT1Report>,
    pub left_markers_hold: bool,
    pub left_markers_witness: Option<(f64, f64, f64)>,
    pub blowup: Option<BlowupFit>,
    pub blowup_message: String,
}

pub struct RunSummary {
    pub outcome: RunOutcome,
    pub report: RunReport,
    pub field0: Field,
    pub files: Vec<PathBuf>,
}

fn control_history(outcome: &RunOutcome) -> ControlHistory {
    let s = &outcome.record.samples;
    let first = s.iter().find(|x| !x.control.holds);
    let res = s.iter().find(|x| x.b < 2.0 * x.min_cell_width).map(|x| x.t);
    ControlHistory {
        violations: s.iter().map(|x| x.control.violations).sum(),
        boundary_violations: s.iter().map(|x| x.control.boundary_violations).sum(),
        first_violation_t: first.map(|x| x.t),
        b_at_first_violation: first.map(|x| x.b),
        min_cell_width_at_first_violation: first.map(|x| x.min_cell_width),
        resolution_threshold_t: res,
        violations_before_resolution: s
            .iter()
            .filter(|x| res.map(|r| x.t < r).unwrap_or(true))
            .map(|x| x.control.violations)
            .sum(),
    }
}

fn sign_checks(outcome: &RunOutcome) -> SignChecks {
    let s = &outcome.record.samples;
    SignChecks {
        max_u1: s.iter().map(|x| x.max_u1).fold(f64::NEG_INFINITY, f64::max),
        min_u2: s.iter().map(|x| x.min_u2).fold(f64::INFINITY, f64::min),
        n2_nonincreasing: s.windows(2).all(|w| w[1].n2 <= w[0].n2),
        omega_max_nondecreasing: s.windows(2).all(|w| w[1].omega_max >= w[0].omega_max),
    }
}

fn axis_profile(field: &Field) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = field
        .markers
        .iter()
        .filter(|m| m.initial_position[1] == 0.0 && m.omega > 0.0)
        .map(|m| (m.position[0], m.omega))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

fn barrier_curve(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let n = 200;
    let (a, b) = (lo.ln(), hi.ln());
    (0..=n).map(|i| (a + (b - a) * i as f64 / n as f64).exp()).map(|x| (x, f(x))).collect()
}

fn series_csv(outcome: &RunOutcome) -> String {
    let mut s = String::from("t,b_t,n1,omega_max,bkm\n");
    for x in &outcome.record.samples {
        s.push_str(&format!("{},{},{},{},{}\n", x.t, x.b, x.n1, x.omega_max, x.bkm));
    }
    s
}

fn write_plots(od: &mut OutputDir, cfg: &SimConfig, params: &Params, field0: &Field, outcome: &RunOutcome) -> Result<(), CliError> {
    let initial = axis_profile(field0);
    let fin = axis_profile(&outcome.final_state.field);
    let b_final = outcome.record.samples.last().map(|s| s.b).unwrap_or(params.b0).max(f64::MIN_POSITIVE);
    let lower = barrier_curve(b_final, 1.0, |x| params.phi0 * x.powf(-params.p0));
    let upper = barrier_curve(b_final, 1.0, |x| params.phi1 * x.powf(-params.p1));
    let bt: Vec<(f64, f64)> = outcome.record.samples.iter().map(|s| (s.t, s.b)).collect();
    let wt: Vec<(f64, f64)> = outcome.record.samples.iter().map(|s| (s.t, s.omega_max)).collect();
    od.text("plot/omega_axis_initial.dat", &columns(["x1", "omega"], &initial))?;
    od.text("plot/omega_axis_final.dat", &columns(["x1", "omega"], &fin))?;
    od.text("plot/lower_barrier.dat", &columns(["x1", "phi0*x1^-p0"], &lower))?;
    od.text("plot/upper_barrier.dat", &columns(["x1", "phi1*x1^-p1"], &upper))?;
    od.text("plot/b_of_t.dat", &columns(["t", "b"], &bt))?;
    od.text("plot/omega_max.dat", &columns(["t", "omega_max"], &wt))?;
    if cfg.svg {
        let curves = [
            Curve { label: "omega(x1,0) initial", color: "#1f77b4", points: &initial },
            Curve { label: "omega(x1,0) final", color: "#d62728", points: &fin },
            Curve { label: "phi0 x1^-p0", color: "#2ca02c", points: &lower },
            Curve { label: "phi1 x1^-p1", color: "#9467bd", points: &upper },
        ];
        od.svg("plot/barriers.svg", &output::loglog_svg("vorticity on the axis and barriers", &curves))?;
    }
    Ok(())
}

/// Full pipeline: certify, prepare, verify, run, diagnose and emit artifacts.
pub fn cmd_run(cfg: &SimConfig) -> Result<RunSummary, CliError> {
    let p = prepare(cfg)?;
    let mut od = OutputDir::create(&cfg.output_dir, p.header.clone())?;
    write_prepared(&mut od, &p)?;
    if !p.report.pass {
        return Err(fail_prepared(&p, &od));
    }
    let mut field0 = p.field.clone();
    if cfg.rho_zero {
        for m in &mut field0.markers {
            m.rho = 0.0;
        }
    }
    let rc = RunConfig {
        cfl: cfg.cfl,
        stop_fraction: cfg.stop_fraction,
        omega_cap: cfg.omega_cap,
        t_star_mode: cfg.t_star_mode,
        stop_on_violation: cfg.stop_on_violation,
        max_steps: cfg.max_steps,
        t_end: cfg.t_end,
        dt_max: None,
        sample_every: cfg.sample_every,
        kernel_tol: cfg.kernel_tol,
    };
    let written = od.written().to_vec();
    let state = SimState::new(field0.clone()).map_err(|e| CliError::numerical("run", e).with_written(&written))?;
    let outcome = solver::run(state, &p.params, &rc).map_err(|e| match e {
        SolverError::Config(m) => CliError::Usage(m),
        other => CliError::numerical("run", other).with_written(&written),
    })?;
    let report = diagnose(cfg, &p.params, &field0, &outcome, &od)?;

    od.text("record.csv", &solver::record_csv(&outcome.record))?;
    od.text("series.csv", &series_csv(&outcome))?;
    od.text("witnesses.csv", &diagnostics::witnesses_csv(&outcome.record.witnesses))?;
    let last_bkm = outcome.record.samples.last().map(|s| s.bkm).unwrap_or(0.0);
    od.text("snapshot_final.csv", &solver::snapshot_csv(&outcome.final_state, last_bkm, &[]))?;
    write_plots(&mut od, cfg, &p.params, &field0, &outcome)?;
    od.json("report.json", &report)?;

    if matches!(outcome.stop, StopReason::Tangled | StopReason::AxisCollision) {
        return Err(CliError::numerical(
            "run",
            format!("{:?}: {}", outcome.stop, outcome.stop_detail.clone().unwrap_or_default()),
        )
        .with_written(od.written()));
    }
    Ok(RunSummary { outcome, report, field0, files: od.written().to_vec() })
}

fn diagnose(cfg: &SimConfig, params: &Params, field0: &Field, outcome: &RunOutcome, od: &OutputDir) -> Result<RunReport, CliError> {
    let samples = &outcome.record.samples;
    let fail = |e: diagnostics::DiagnosticsError| CliError::numerical("diagnostics", e).with_written(od.written());
    let bkm_k4 = diagnostics::bkm_integral(samples, 4.0).map_err(fail)?;
    let envelope = diagnostics::support_envelope(samples, field0, 1e-9).ok();
    let lemma_t1 = diagnostics::lemma_t1_check(samples, field0, params, cfg.kernel_tol, cfg.seed).ok();
    let kappa = outcome.record.kappa;
    let t_star = outcome.record.t_star;
    let left = diagnostics::left_markers_check(samples, |t| {
        barrier::solve_b_with_kappa(params, kappa, t.min(t_star)).unwrap_or(0.0)
    });
    let (blowup, blowup_message) = match diagnostics::blowup_fit(samples, params, kappa) {
        Ok(f) => {
            let m = f.message.clone();
            (Some(f), m)
        }
        Err(e) => (None, e.to_string()),
    };
    let first = samples.first().map(|s| s.omega_max).unwrap_or(0.0);
    Ok(RunReport {
        params: *params,
        params_mode: cfg.params_mode,
        rho_zero: cfg.rho_zero,
        stop_reason: outcome.stop,
        stop_detail: outcome.stop_detail.clone(),
        steps: outcome.final_state.step_count,
        t_final: outcome.final_state.t,
        t_star,
        t_stop: outcome.record.t_stop,
        kappa,
        omega_max_initial: first,
        omega_max_final: outcome.final_state.omega_max,
        bkm_k4,
        control: control_history(outcome),
        signs: sign_checks(outcome),
        envelope,
        lemma_t1,
        left_markers_hold: left.is_none(),
        left_markers_witness: left,
        blowup,
        blowup_message,
    })
}

#[derive(Debug, Serialize)]
pub struct PicardReport {
    pub t_final: f64,
    pub zeta: f64,
    pub iterations_t: usize,
    pub iterations_half: usize,
    pub distances_t: Vec<f64>,
    pub distances_half: Vec<f64>,
    pub ratio_t: Option<f64>,
    pub ratio_half: Option<f64>,
    /// `ratio_half / ratio_t`; about `1/2` when the contraction constant is linear in `T`.
    pub ratio_of_ratios: Option<f64>,
    pub fitted_over: usize,
}

pub struct PicardSummary {
    pub report: PicardReport,
    pub map_t: FlowMap,
    pub map_half: FlowMap,
    pub field0: Field,
    pub params: Params,
}

fn picard_error(e: PicardError, t: f64) -> CliError {
    match e {
        PicardError::NotContraction { ratios } => CliError::numerical(
            "picard",
            format!("not a contraction at T = {t} (ratios {ratios:?}); retry with a smaller T such as {}", t / 2.0),
        ),
        PicardError::Config(m) => CliError::Usage(m),
        other => CliError::numerical("picard", other),
    }
}

/// Flow-map iteration at `T` and `T/2` with the per-iteration distances.
pub fn cmd_picard(cfg: &SimConfig) -> Result<PicardSummary, CliError> {
    let ps = &cfg.picard;
    let p = prepare_with(cfg, ps.grid.nx, ps.grid.ny, Some(ps.amplitude))?;
    let mut od = OutputDir::create(&cfg.output_dir, p.header.clone())?;
    od.json("picard_prepared.json", &PreparedFile { params: &p.params, report: &p.report })?;
    if !p.report.pass {
        return Err(fail_prepared(&p, &od));
    }
    let zeta = ps.zeta.unwrap_or_else(|| p.field.support_box().map(|b| DEFAULT_ZETA_FRACTION * b.n1).unwrap_or(f64::INFINITY));
    let base = PicardConfig {
        t_final: ps.t_final,
        zeta: Some(zeta),
        tol: ps.tol,
        max_iter: ps.max_iter,
        time_intervals: ps.time_intervals,
        kernel_tol: ps.kernel_tol,
    };
    let alpha = p.params.alpha;
    let map_t = picard::picard_flowmap(&p.field, alpha, &base)
        .map_err(|e| picard_error(e, ps.t_final).with_written(od.written()))?;
    let half_cfg = PicardConfig { t_final: 0.5 * ps.t_final, ..base };
    let map_half = picard::picard_flowmap(&p.field, alpha, &half_cfg)
        .map_err(|e| picard_error(e, 0.5 * ps.t_final).with_written(od.written()))?;
    let n = map_t.ratios().len().min(map_half.ratios().len()).min(3);
    let ratio_t = map_t.fitted_ratio(n);
    let ratio_half = map_half.fitted_ratio(n);
    let report = PicardReport {
        t_final: ps.t_final,
        zeta,
        iterations_t: map_t.iterations(),
        iterations_half: map_half.iterations(),
        distances_t: map_t.distances.clone(),
        distances_half: map_half.distances.clone(),
        ratio_t,
        ratio_half,
        ratio_of_ratios: ratio_t.zip(ratio_half).map(|(a, b)| b / a),
        fitted_over: n,
    };
    let mut table = String::from("iteration,distance_T,distance_T_half\n");
    for i in 0..map_t.iterations().max(map_half.iterations()) {
        let f = |v: &[f64]| v.get(i).map(|x| x.to_string()).unwrap_or_default();
        table.push_str(&format!("{},{},{}\n", i + 1, f(&map_t.distances), f(&map_half.distances)));
    }
    od.text("picard.csv", &table)?;
    od.json("picard_report.json", &report)?;
    Ok(PicardSummary { report, map_t, map_half, field0: p.field, params: p.params })
}

#[derive(Debug, Serialize)]
pub struct OneDimReport {
    pub residual_c1: f64,
    pub residual_c2: f64,
    pub residual_c2_expected: f64,
    pub velocity_max_rel_error: f64,
}

/// Residual of the singular steady state and the power-law velocity check.
pub fn cmd_onedim(cfg: &SimConfig) -> Result<OneDimReport, CliError> {
    let grid = onedim::log_grid(0.01, 100.0, 2000);
    let r1 = onedim::steady_residual(&grid, 1.0).map_err(|e| CliError::internal("onedim", e))?;
    let r2 = onedim::steady_residual(&grid, 2.0).map_err(|e| CliError::internal("onedim", e))?;
    let nodes = onedim::log_grid(0.5, 50.0, 100_000);
    let prof = Profile1D::sample(nodes, |y| y.powf(-0.5), |_| 1.0).map_err(|e| CliError::internal("onedim", e))?;
    let mut err = 0.0f64;
    for i in 0..=20 {
        let x = 0.5 * 10f64.powf(i as f64 / 20.0);
        let u = onedim::velocity_1d(&prof, x, Some(-0.5)).map_err(|e| CliError::internal("onedim", e))?;
        err = err.max((u + 2.0 * x.sqrt()).abs() / (2.0 * x.sqrt()));
    }
    let report = OneDimReport { residual_c1: r1, residual_c2: r2, residual_c2_expected: 1.0 / grid[0], velocity_max_rel_error: err };
    let header = Header { config_sha256: json_hash(&cfg.hashed_view()), certificate_sha256: "none".into() };
    let mut od = OutputDir::create(&cfg.output_dir, header)?;
    od.json("onedim.json", &report)?;
    Ok(report)
}
