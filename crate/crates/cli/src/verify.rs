//! Invariant checks run by `threewave verify` against a configuration.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use threewave::equilibrium::{bose_einstein, check_be_identities, solve_beta};
use threewave::kinetics::{
    finite_difference_diag, integrate, jacobian_diag, rate_scale, rhs, QuadraticKinetics,
    RateEquation,
};
use threewave::model::{ModeLadder, QuadraticCoupling};
use threewave::stability::kappa;

use crate::commands::BETA_TOL;
use crate::config::{Experiment, RunConfig};
use crate::Failure;

pub const STATIONARITY_TOL: f64 = 1e-12;
pub const DRIFT_TOL: f64 = 1e-9;
pub const IDENTITY_TOL: f64 = 1e-12;
pub const KAPPA_JACOBIAN_TOL: f64 = 1e-10;
pub const FINITE_DIFFERENCE_TOL: f64 = 1e-5;

/// Longest horizon integrated by the energy check.
const DRIFT_HORIZON: f64 = 20.0;
const FIXED_BETAS: [f64; 3] = [0.1, 0.2342, 1.0];
const QUADRATIC_SAMPLES: usize = 100;
const QUADRATIC_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    /// Measured quantity compared with `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub note: String,
}

impl Check {
    fn bound(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        let status = if value <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            name: name.into(),
            status,
            value,
            tolerance,
            note: String::new(),
        }
    }

    fn skipped(name: impl Into<String>, note: &str) -> Self {
        Self {
            name: name.into(),
            status: Status::Skip,
            value: f64::NAN,
            tolerance: f64::NAN,
            note: note.to_owned(),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failed(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| c.status == Status::Fail)
            .count()
    }

    pub fn passed(&self) -> bool {
        self.failed() == 0
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "{:<44} {:<6} {:>11} {:>11}  note\n",
            "check", "status", "value", "tolerance"
        );
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skip => "SKIP",
            };
            let fmt = |v: f64| {
                if v.is_nan() {
                    "-".to_owned()
                } else {
                    format!("{v:.3e}")
                }
            };
            let _ = writeln!(
                s,
                "{:<44} {:<6} {:>11} {:>11}  {}",
                c.name,
                status,
                fmt(c.value),
                fmt(c.tolerance),
                c.note
            );
        }
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), self.failed());
        s
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max(relative_gap(*x, *y)))
}

/// Runs every invariant check for the configured cavity.
pub fn run_verify(cfg: &RunConfig) -> Result<VerifyReport, Failure> {
    let exp = cfg.prepare()?;
    let fail = |e: threewave::Error| Failure::Integration(e.into());
    let beta_exact = solve_beta(exp.u_ini, &exp.ladder, BETA_TOL)
        .map_err(|e| Failure::Config(e.into()))?
        .beta;
    let mut checks = Vec::new();

    for beta in std::iter::once(beta_exact).chain(FIXED_BETAS) {
        checks.push(stationarity(&exp, beta).map_err(fail)?);
    }
    checks.push(energy_conservation(cfg, &exp).map_err(fail)?);
    checks.push(identities());
    checks.extend(jacobian_checks(&exp, beta_exact).map_err(fail)?);
    checks.push(quadratic_null(&exp.ladder));
    Ok(VerifyReport { checks })
}

fn stationarity(exp: &Experiment, beta: f64) -> threewave::Result<Check> {
    let n_b = bose_einstein(beta, &exp.ladder)?;
    let residual = rhs(&n_b, &exp.model, &exp.ladder)?.max_abs();
    let tol = STATIONARITY_TOL * rate_scale(&n_b, &exp.model);
    Ok(Check::bound(
        format!("stationarity at beta = {beta:.6}"),
        residual,
        tol,
    ))
}

fn energy_conservation(cfg: &RunConfig, exp: &Experiment) -> threewave::Result<Check> {
    let horizon = cfg.tau_end.min(DRIFT_HORIZON);
    let traj = integrate(
        &cfg.initial,
        &exp.model,
        &exp.ladder,
        horizon,
        &exp.settings,
    )?;
    let negative = traj
        .states
        .iter()
        .flat_map(|s| s.as_slice())
        .any(|&v| v < 0.0);
    let mut c = Check::bound(
        format!("energy conservation to tau = {horizon}"),
        traj.max_relative_energy_drift(),
        DRIFT_TOL,
    );
    if negative {
        c.status = Status::Fail;
        c.note = "negative occupation recorded".into();
    }
    Ok(c)
}

/// Both Bose–Einstein identity residuals over beta in [0.05, 5] and
/// 1 <= k < j <= 100.
fn identities() -> Check {
    let mut worst = 0.0f64;
    for b in 1..=100 {
        let beta = 0.05 * b as f64;
        for j in 2..=100 {
            for k in 1..j {
                match check_be_identities(beta, j, k) {
                    Ok(r) => worst = worst.max(r.sum.abs()).max(r.difference.abs()),
                    Err(_) => worst = f64::INFINITY,
                }
            }
        }
    }
    Check::bound("Bose-Einstein identities", worst, IDENTITY_TOL)
}

fn jacobian_checks(exp: &Experiment, beta: f64) -> threewave::Result<Vec<Check>> {
    let n_b = bose_einstein(beta, &exp.ladder)?;
    let diag = jacobian_diag(&n_b, &exp.model, &exp.ladder)?;
    let fd = finite_difference_diag(&n_b, &exp.model, &exp.ladder, 1e-6)?;
    let spectrum = kappa(beta, &exp.model, &exp.ladder)?;
    let neg: Vec<f64> = diag.iter().map(|d| -d).collect();
    let mut out = vec![
        Check::bound(
            "jacobian diagonal vs finite difference",
            max_gap(&diag, &fd),
            FINITE_DIFFERENCE_TOL,
        ),
        Check::bound(
            "kappa vs negated jacobian diagonal",
            max_gap(&spectrum.kappa, &neg),
            KAPPA_JACOBIAN_TOL,
        ),
    ];
    out.push(if exp.model.is_zero() {
        Check::skipped("kappa positive", "zero coupling")
    } else {
        let min = spectrum.min();
        Check {
            name: "kappa positive".into(),
            status: if min > 0.0 {
                Status::Pass
            } else {
                Status::Fail
            },
            value: min,
            tolerance: 0.0,
            note: "value is min kappa".into(),
        }
    });
    Ok(out)
}

/// Quadratic coupling with dense random `g` on random states: every rate
/// must be exactly zero.
fn quadratic_null(ladder: &ModeLadder) -> Check {
    let n = ladder.n_modes();
    let mut rng = ChaCha8Rng::seed_from_u64(QUADRATIC_SEED);
    let g: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let kinetics = QuadraticCoupling::new(g).and_then(|g| QuadraticKinetics::new(g, *ladder));
    let Ok(kinetics) = kinetics else {
        return Check::bound("quadratic coupling null rate", f64::INFINITY, 0.0);
    };
    let mut y = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut worst = 0.0f64;
    for _ in 0..QUADRATIC_SAMPLES {
        for v in y.iter_mut() {
            *v = rng.gen_range(0.0..10.0);
        }
        kinetics.rates(&y, &mut out);
        worst = out.iter().fold(worst, |m, v| m.max(v.abs()));
    }
    Check::bound("quadratic coupling null rate", worst, 0.0)
        .with_note(format!("{QUADRATIC_SAMPLES} random states"))
}
