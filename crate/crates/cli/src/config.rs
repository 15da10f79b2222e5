use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sectorflow_core::TStarMode;

use crate::error::CliError;

/// Which constants drive `prepare`, `run` and `picard`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ParamsMode {
    /// The certified constants.
    Certificate,
    /// Certified `α, p₀, p₁, δ` with `demo_phi0` and `demo_b0`.
    Demonstration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardSection {
    pub t_final: f64,
    pub zeta: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub time_intervals: usize,
    pub kernel_tol: f64,
    pub grid: GridConfig,
    /// Vorticity amplitude of the prepared data.
    pub amplitude: f64,
}

impl Default for PicardSection {
    fn default() -> Self {
        Self {
            t_final: 0.01,
            zeta: None,
            tol: 1e-8,
            max_iter: 30,
            time_intervals: 8,
            kernel_tol: 1e-10,
            grid: GridConfig { nx: 12, ny: 8 },
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub alpha: f64,
    pub phi0_hint: f64,
    pub params_mode: ParamsMode,
    pub demo_phi0: f64,
    pub demo_b0: f64,
    /// Vorticity amplitude of the prepared data; `None` is `√(φ₀φ₁)`.
    pub amplitude: Option<f64>,
    pub grid: GridConfig,
    pub cfl: f64,
    pub stop_fraction: f64,
    pub omega_cap: f64,
    pub sample_every: u64,
    pub max_steps: u64,
    pub t_end: Option<f64>,
    pub kernel_tol: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub t_star_mode: TStarMode,
    pub stop_on_violation: bool,
    /// Replace `ρ₀` by zero after preparation.
    pub rho_zero: bool,
    pub svg: bool,
    pub picard: PicardSection,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 24, ny: 16 }
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            phi0_hint: 0.1,
            params_mode: ParamsMode::Demonstration,
            demo_phi0: 0.1,
            demo_b0: 0.0625,
            amplitude: None,
            grid: GridConfig::default(),
            cfl: 0.4,
            stop_fraction: 0.98,
            omega_cap: 1e8,
            sample_every: 1,
            max_steps: 12,
            t_end: None,
            kernel_tol: 1e-8,
            seed: 7,
            output_dir: PathBuf::from("out"),
            t_star_mode: TStarMode::ControlTheorem,
            stop_on_violation: false,
            rho_zero: false,
            svg: false,
            picard: PicardSection::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        positive("alpha", self.alpha)?;
        positive("phi0_hint", self.phi0_hint)?;
        positive("demo_phi0", self.demo_phi0)?;
        positive("demo_b0", self.demo_b0)?;
        if let Some(a) = self.amplitude {
            positive("amplitude", a)?;
        }
        positive("cfl", self.cfl)?;
        positive("omega_cap", self.omega_cap)?;
        positive("kernel_tol", self.kernel_tol)?;
        if let Some(t) = self.t_end {
            positive("t_end", t)?;
        }
        if !(self.stop_fraction > 0.0 && self.stop_fraction <= 1.0) {
            return Err(CliError::Usage(format!("stop_fraction must lie in (0, 1], got {}", self.stop_fraction)));
        }
        if self.grid.nx == 0 || self.grid.ny == 0 || self.picard.grid.nx == 0 || self.picard.grid.ny == 0 {
            return Err(CliError::Usage("grid sizes must be positive".into()));
        }
        if self.sample_every == 0 || self.max_steps == 0 {
            return Err(CliError::Usage("sample_every and max_steps must be positive".into()));
        }
        positive("picard.t_final", self.picard.t_final)?;
        positive("picard.tol", self.picard.tol)?;
        positive("picard.kernel_tol", self.picard.kernel_tol)?;
        positive("picard.amplitude", self.picard.amplitude)?;
        if let Some(z) = self.picard.zeta {
            positive("picard.zeta", z)?;
        }
        if self.picard.max_iter == 0 || self.picard.time_intervals == 0 {
            return Err(CliError::Usage("picard.max_iter and picard.time_intervals must be positive".into()));
        }
        Ok(())
    }

    /// The configuration with the output location removed; hashed into every
    /// output header so that identical physics gives identical files.
    pub fn hashed_view(&self) -> SimConfig {
        SimConfig { output_dir: PathBuf::new(), ..self.clone() }
    }
}
