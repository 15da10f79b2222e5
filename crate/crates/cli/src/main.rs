use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sectorflow_cli::error::EXIT_USAGE;
use sectorflow_cli::{commands, CliError, ParamsMode, SimConfig};
use sectorflow_core::TStarMode;

#[derive(Parser)]
#[command(name = "sectorflow", version, about = "Sector-kernel vorticity/density laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify constants and write the certificate.
    Params {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        phi0_hint: f64,
        #[arg(long, default_value = "certificate.json")]
        out: PathBuf,
    },
    /// Build and verify prepared initial data.
    Prepare(ConfigArgs),
    /// Check a snapshot against the control conditions.
    Check {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Run the full pipeline.
    Run(ConfigArgs),
    /// Flow-map iteration at T and T/2.
    Picard {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        zeta: Option<f64>,
    },
    /// Steady-state residual of the one-dimensional analogue.
    Onedim(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    phi0_hint: Option<f64>,
    #[arg(long, value_enum)]
    params_mode: Option<ParamsMode>,
    #[arg(long)]
    demo_phi0: Option<f64>,
    #[arg(long)]
    demo_b0: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    stop_fraction: Option<f64>,
    #[arg(long)]
    omega_cap: Option<f64>,
    #[arg(long)]
    sample_every: Option<u64>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    kernel_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// "lemma" or "control-theorem".
    #[arg(long)]
    t_star_mode: Option<TStarMode>,
    #[arg(long)]
    stop_on_violation: bool,
    #[arg(long)]
    rho_zero: bool,
    #[arg(long)]
    svg: bool,
}

impl ConfigArgs {
    fn resolve(self) -> Result<SimConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => SimConfig::load(p)?,
            None => SimConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(alpha, phi0_hint, params_mode, demo_phi0, demo_b0, cfl, stop_fraction, omega_cap, sample_every, max_steps, kernel_tol, seed, output_dir, t_star_mode);
        if self.amplitude.is_some() {
            c.amplitude = self.amplitude;
        }
        if self.t_end.is_some() {
            c.t_end = self.t_end;
        }
        if let Some(n) = self.nx {
            c.grid.nx = n;
        }
        if let Some(n) = self.ny {
            c.grid.ny = n;
        }
        c.stop_on_violation |= self.stop_on_violation;
        c.rho_zero |= self.rho_zero;
        c.svg |= self.svg;
        c.validate()?;
        Ok(c)
    }
}

fn dispatch(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Params { alpha, phi0_hint, out } => {
            let cert = commands::cmd_params(alpha, phi0_hint, &out)?;
            Ok(format!(
                "certificate written to {} (p0 = {}, b0 = {:e}, T* = {})",
                out.display(),
                cert.params.p0,
                cert.params.b0,
                cert.t_star
            ))
        }
        Command::Prepare(a) => {
            let s = commands::cmd_prepare(&a.resolve()?)?;
            Ok(format!("prepared data verified; {} files written", s.files.len()))
        }
        Command::Check { config, snapshot } => {
            let r = commands::cmd_check(&config.resolve()?, &snapshot)?;
            Ok(format!("t = {}: {} markers inspected, no violations", r.t, r.control.inspected))
        }
        Command::Run(a) => {
            let s = commands::cmd_run(&a.resolve()?)?;
            Ok(format!(
                "run stopped ({:?}) at t = {} after {} steps; {} control violations; {}",
                s.report.stop_reason, s.report.t_final, s.report.steps, s.report.control.violations, s.report.blowup_message
            ))
        }
        Command::Picard { config, t_final, zeta } => {
            let mut c = config.resolve()?;
            if let Some(t) = t_final {
                c.picard.t_final = t;
            }
            if zeta.is_some() {
                c.picard.zeta = zeta;
            }
            c.validate()?;
            let s = commands::cmd_picard(&c)?;
            Ok(format!(
                "converged in {} / {} iterations; ratio(T/2)/ratio(T) = {:?}",
                s.report.iterations_t, s.report.iterations_half, s.report.ratio_of_ratios
            ))
        }
        Command::Onedim(a) => {
            let r = commands::cmd_onedim(&a.resolve()?)?;
            Ok(format!("residual c=1: {:e}; c=2: {}", r.residual_c1, r.residual_c2))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli.command) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
