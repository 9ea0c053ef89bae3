use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use threewave_cli::output::num;
use threewave_cli::{
    run_equilibrium, run_simulate, run_stability, run_sweep, run_verify, Failure, Manifest,
    RunConfig,
};

const DEFAULT_OUT: &str = "out";

#[derive(Parser)]
#[command(
    name = "threewave",
    version,
    about = "Thermalization of a multimode cavity under three-wave mixing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the kinetic equation; writes trajectory.csv and manifest.json.
    Simulate(RunArgs),
    /// Bose-Einstein table at the energy of the initial state; writes equilibrium.csv.
    Equilibrium(RunArgs),
    /// Relaxation rates at that equilibrium; writes kappa.csv.
    Stability(RunArgs),
    /// Run the invariant checks and print a pass/fail table.
    Verify(RunArgs),
    /// One simulation per entry of the config's `sweep` axis, plus summary.csv.
    Sweep(RunArgs),
    /// Print the built-in configuration used when --config is absent.
    DefaultConfig,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration. Defaults to the built-in 800-mode run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tau_end: Option<f64>,
    #[arg(long)]
    record_every: Option<f64>,
}

impl RunArgs {
    fn resolve(&self) -> Result<(RunConfig, PathBuf), Failure> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(t) = self.tau_end {
            cfg.tau_end = t;
        }
        if let Some(r) = self.record_every {
            cfg.record_every = r;
        }
        cfg.prepare()?;
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Ok((cfg, out))
    }
}

fn report(m: &Manifest, out: &Path) {
    println!("u_ini        {}", num(m.u_ini));
    println!("beta_exact   {}", num(m.beta_exact));
    println!("beta_approx  {}", num(m.beta_approx));
    if let Some(e) = &m.equilibrium {
        println!("beta_table   {}", num(e.beta));
    }
    if let Some(d) = &m.energy_drift {
        println!("max drift    {:.3e}", d.max_relative);
    }
    if let Some(f) = &m.terminal_fit {
        println!(
            "fitted beta  {} (R^2 = {:.12}, {} modes)",
            num(f.beta),
            f.r_squared,
            f.modes_used
        );
    }
    println!("wrote {} in {:.2} s", out.display(), m.wall_clock_seconds);
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(a) => {
            let (cfg, out) = a.resolve()?;
            report(&run_simulate(&cfg, &out)?, &out);
        }
        Command::Equilibrium(a) => {
            let (cfg, out) = a.resolve()?;
            report(&run_equilibrium(&cfg, &out)?, &out);
        }
        Command::Stability(a) => {
            let (cfg, out) = a.resolve()?;
            report(&run_stability(&cfg, &out)?, &out);
        }
        Command::Verify(a) => {
            let (cfg, _) = a.resolve()?;
            let r = run_verify(&cfg)?;
            print!("{}", r.render());
            if !r.passed() {
                return Err(Failure::Checks {
                    failed: r.failed(),
                    total: r.checks.len(),
                });
            }
        }
        Command::Sweep(a) => {
            let (cfg, out) = a.resolve()?;
            let runs = run_sweep(&cfg, &out)?;
            for r in &runs {
                println!("{}: ok", r.name);
            }
            println!(
                "wrote {}",
                out.join(threewave_cli::output::SUMMARY_FILE).display()
            );
        }
        Command::DefaultConfig => println!("{}", RunConfig::default().to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
