//! The `simulate`, `equilibrium`, `stability` and `sweep` operations.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use threewave::equilibrium::{
    beta_from_integral_energy, bose_einstein, fit_temperature, solve_beta, EquilibriumMethod,
    TemperatureFit,
};
use threewave::kinetics::{integrate_with_observer, IntegrationStats, ThreeWaveKinetics};
use threewave::model::PopulationState;
use threewave::stability::kappa;

use crate::config::{Experiment, RunConfig};
use crate::output::{
    create_dir, write_json, write_mode_table, write_summary, SummaryRow, TrajectoryWriter,
    EQUILIBRIUM_FILE, EQUILIBRIUM_HEADER, ERROR_FILE, KAPPA_FILE, KAPPA_HEADER, MANIFEST_FILE,
    SUMMARY_FILE, TRAJECTORY_FILE,
};
use crate::Failure;

/// Relative tolerance on the energy balance when solving for beta.
pub const BETA_TOL: f64 = 1e-13;

/// Modes below this occupation are left out of temperature fits.
pub const FIT_MIN_OCCUPATION: f64 = 1e-40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyDrift {
    pub max_relative: f64,
    pub final_relative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumInfo {
    pub method: EquilibriumMethod,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub u_ini: f64,
    /// Solves the exact energy balance on the configured ladder.
    pub beta_exact: f64,
    /// Continuum estimate `pi / sqrt(6 u_ini)`.
    pub beta_approx: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_drift: Option<EnergyDrift>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integration: Option<IntegrationStats>,
    /// Temperature fitted to the state at `tau_end`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_fit: Option<TemperatureFit>,
    pub wall_clock_seconds: f64,
}

impl Manifest {
    fn new(command: &'static str, cfg: &RunConfig, exp: &Experiment) -> Result<Self, Failure> {
        let cfg_err = |e: threewave::Error| Failure::Config(e.into());
        let beta_exact = solve_beta(exp.u_ini, &exp.ladder, BETA_TOL)
            .map_err(cfg_err)?
            .beta;
        Ok(Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config: cfg.echo(),
            u_ini: exp.u_ini,
            beta_exact,
            beta_approx: beta_from_integral_energy(exp.u_ini).map_err(cfg_err)?,
            equilibrium: None,
            energy_drift: None,
            integration: None,
            terminal_fit: None,
            wall_clock_seconds: 0.0,
        })
    }

    fn finish(mut self, dir: &Path, started: Instant) -> Result<Self, Failure> {
        self.wall_clock_seconds = started.elapsed().as_secs_f64();
        write_json(&dir.join(MANIFEST_FILE), &self).map_err(Failure::Io)?;
        Ok(self)
    }
}

/// Integrates the configuration and writes `trajectory.csv` and
/// `manifest.json` into `out`.
pub fn run_simulate(cfg: &RunConfig, out: &Path) -> Result<Manifest, Failure> {
    let started = Instant::now();
    let exp = cfg.prepare()?;
    let mut manifest = Manifest::new("simulate", cfg, &exp)?;
    create_dir(out).map_err(Failure::Io)?;

    let path = out.join(TRAJECTORY_FILE);
    let io_err =
        |e: std::io::Error| Failure::Io(anyhow::anyhow!("writing {}: {e}", path.display()));
    let mut writer = TrajectoryWriter::create(&path).map_err(io_err)?;
    let kinetics = ThreeWaveKinetics::new(&exp.model, &exp.ladder)
        .map_err(|e| Failure::Config(e.into()))?
        .with_summation(exp.settings.summation);
    let u0 = exp.initial.energy();
    let mut write_result = Ok(());
    let mut max_drift = 0.0f64;
    let mut last = Vec::new();
    let stats = integrate_with_observer(
        &kinetics,
        exp.initial.clone(),
        cfg.tau_end,
        &exp.settings,
        |tau, y, _| {
            if write_result.is_ok() {
                write_result = writer.record(tau, y);
            }
            let u: f64 = y.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
            max_drift = max_drift.max(((u - u0) / u0).abs());
            last.clear();
            last.extend_from_slice(y);
        },
    )
    .map_err(|e| Failure::Integration(e.into()))?;
    write_result
        .and_then(|()| writer.finish())
        .map_err(io_err)?;

    let terminal = PopulationState::new(last).map_err(|e| Failure::Integration(e.into()))?;
    let u_end = terminal.energy();
    manifest.energy_drift = Some(EnergyDrift {
        max_relative: max_drift,
        final_relative: (u_end - u0) / u0,
    });
    manifest.integration = Some(stats);
    manifest.terminal_fit = fit_temperature(&terminal, FIT_MIN_OCCUPATION).ok();
    manifest.finish(out, started)
}

/// Writes the Bose–Einstein table `mode,n_B,inv_n_plus_1` for the
/// configured energy.
pub fn run_equilibrium(cfg: &RunConfig, out: &Path) -> Result<Manifest, Failure> {
    let started = Instant::now();
    let exp = cfg.prepare()?;
    let mut manifest = Manifest::new("equilibrium", cfg, &exp)?;
    let beta = match cfg.equilibrium_method {
        EquilibriumMethod::ExactSum => manifest.beta_exact,
        EquilibriumMethod::IntegralApprox => manifest.beta_approx,
    };
    let n_b = bose_einstein(beta, &exp.ladder).map_err(|e| Failure::Config(e.into()))?;
    let inv: Vec<f64> = exp
        .ladder
        .modes()
        .map(|k| (beta * k as f64).exp())
        .collect();
    create_dir(out).map_err(Failure::Io)?;
    write_mode_table(
        &out.join(EQUILIBRIUM_FILE),
        EQUILIBRIUM_HEADER,
        &[n_b.as_slice(), &inv],
    )
    .map_err(Failure::Io)?;
    manifest.equilibrium = Some(EquilibriumInfo {
        method: cfg.equilibrium_method,
        beta,
    });
    manifest.finish(out, started)
}

/// Writes the relaxation rates `mode,kappa` at the exact equilibrium.
pub fn run_stability(cfg: &RunConfig, out: &Path) -> Result<Manifest, Failure> {
    let started = Instant::now();
    let exp = cfg.prepare()?;
    let manifest = Manifest::new("stability", cfg, &exp)?;
    let spectrum = kappa(manifest.beta_exact, &exp.model, &exp.ladder)
        .map_err(|e| Failure::Config(e.into()))?;
    create_dir(out).map_err(Failure::Io)?;
    write_mode_table(&out.join(KAPPA_FILE), KAPPA_HEADER, &[&spectrum.kappa])
        .map_err(Failure::Io)?;
    manifest.finish(out, started)
}

#[derive(Debug)]
pub struct SweepRun {
    pub name: String,
    pub row: SummaryRow,
    pub result: Result<Manifest, Failure>,
}

/// Runs `simulate` for every entry of the sweep axis, each in its own
/// subdirectory, then writes `summary.csv`. Runs execute in parallel; the
/// summary keeps the order of the axis.
pub fn run_sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<SweepRun>, Failure> {
    cfg.prepare()?;
    let runs = cfg.sweep_runs()?;
    create_dir(out).map_err(Failure::Io)?;
    let results: Vec<SweepRun> = runs
        .into_par_iter()
        .map(|(name, run_cfg)| {
            let dir = out.join(&name);
            let result = run_simulate(&run_cfg, &dir);
            let row = summary_row(&run_cfg, &result);
            if let Err(e) = &result {
                let _ = create_dir(&dir);
                let _ = fs::write(dir.join(ERROR_FILE), format!("{e}\n"));
            }
            SweepRun { name, row, result }
        })
        .collect();
    let rows: Vec<SummaryRow> = results.iter().map(|r| r.row.clone()).collect();
    write_summary(&out.join(SUMMARY_FILE), &rows).map_err(Failure::Io)?;
    let failed = results.iter().filter(|r| r.result.is_err()).count();
    if failed > 0 {
        return Err(Failure::Sweep {
            failed,
            total: results.len(),
        });
    }
    Ok(results)
}

fn summary_row(cfg: &RunConfig, result: &Result<Manifest, Failure>) -> SummaryRow {
    let k_ini = cfg.initial.k_ini();
    match result {
        Ok(m) => {
            let fitted = m.terminal_fit.map_or(f64::NAN, |f| f.beta);
            SummaryRow {
                k_ini,
                beta_exact: m.beta_exact,
                beta_approx: m.beta_approx,
                beta_fitted: fitted,
                rel_err_fit: ((fitted - m.beta_exact) / m.beta_exact).abs(),
            }
        }
        Err(_) => {
            // Keep whatever is derivable from the configuration alone.
            let (beta_exact, beta_approx) = cfg
                .prepare()
                .ok()
                .and_then(|exp| Manifest::new("sweep", cfg, &exp).ok())
                .map_or((f64::NAN, f64::NAN), |m| (m.beta_exact, m.beta_approx));
            SummaryRow {
                k_ini,
                beta_exact,
                beta_approx,
                beta_fitted: f64::NAN,
                rel_err_fit: f64::NAN,
            }
        }
    }
}
