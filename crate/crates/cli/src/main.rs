use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lodedamage_cli::{
    calibrate, emit, invariants_row, locus, locus_table, simulate, yield_surface_table, CliError, Format, RunConfig,
};

/// Material-point simulator for an elastoplastic ductile-damage model with
/// stress triaxiality and Lode angle corrections.
#[derive(Debug, Parser)]
#[command(name = "lodedamage", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print sigma_m, sigma_eq, eta, chi, theta and theta0 of a stress tensor.
    Invariants {
        /// Components 11 22 33 12 23 13 (tensor shear components).
        #[arg(num_args = 6, allow_negative_numbers = true, required = true)]
        components: Vec<f64>,
    },
    /// Run a load path and write one record per step.
    Simulate(Common),
    /// Normalised yield radius over the Lode angle parameter.
    YieldSurface(Common),
    /// Fracture strain over a grid of triaxiality and Lode angle parameter.
    Locus(Common),
    /// Fit the hardening law or the fracture locus power law.
    Calibrate(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Material preset: al2024, yield_demo, uncorrected or classical.
    #[arg(long)]
    preset: Option<String>,
    /// Number of load increments (simulate).
    #[arg(long)]
    steps: Option<usize>,
}

impl Common {
    fn config(&self) -> anyhow::Result<RunConfig> {
        match &self.config {
            Some(path) => RunConfig::load(path),
            None => Ok(RunConfig::default()),
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    let (common, kind) = match command {
        Command::Invariants { components } => {
            emit(&invariants_row(&components)?, None)?;
            return Ok(());
        }
        Command::Simulate(c) => (c, "simulate"),
        Command::YieldSurface(c) => (c, "yield-surface"),
        Command::Locus(c) => (c, "locus"),
        Command::Calibrate(c) => (c, "calibrate"),
    };
    let cfg = common.config()?;
    let params = cfg.material(common.preset.as_deref())?;
    let format = common.format.or(cfg.format).unwrap_or_default();
    let out = common.out.clone().or_else(|| cfg.out.clone());

    match kind {
        "simulate" => {
            let spec = cfg.path_spec(common.steps)?;
            let sim = simulate(&params, &spec)?;
            emit(&sim.table.render(format)?, out.as_deref())?;
            // Keep standard output clean when it carries the records.
            if out.is_some() {
                print!("{}", sim.summary);
            } else {
                eprint!("{}", sim.summary);
            }
            if let Some(e) = sim.failure {
                return Err(e.into());
            }
        }
        "yield-surface" => emit(&yield_surface_table(&params, &cfg.yield_surface)?.render(format)?, out.as_deref())?,
        "locus" => {
            let table = locus(&params, &cfg.locus)?;
            emit(&locus_table(&params, &table).render(format)?, out.as_deref())?;
        }
        _ => {
            let points = cfg.fit_points()?;
            emit(&calibrate(&params, cfg.fit.kind, &points)?.render(format)?, out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
