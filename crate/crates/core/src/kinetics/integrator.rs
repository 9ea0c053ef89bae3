//! Adaptive embedded explicit Runge–Kutta integration.
//!
//! Steps are controlled on a mixed error norm
//! `max_i |err_i| / (abs_tol + rel_tol * max(|y_i|, |y_new_i|))`. Occupations
//! must stay physical: a step that drives any component below `-abs_tol` is
//! rejected and retried at half the step, and components in `[-abs_tol, 0)`
//! after an accepted step are clamped to zero. Components below
//! [`UNDERFLOW_FLOOR`] are flushed to zero.
//!
//! Every Runge–Kutta stage is a linear combination of rate vectors, so linear
//! invariants of the flow (the reduced energy here) are preserved up to
//! rounding and the clamping above.

use serde::{Deserialize, Serialize};

use super::{RateEquation, Summation, ThreeWaveKinetics};
use crate::model::state::reduced_energy;
use crate::model::{CouplingModel, InitialCondition, ModeLadder, PopulationState};
use crate::{Error, Result};

/// Occupations below this are set to zero after each accepted step.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Fraction of the real stability interval a step may use.
const STIFFNESS_SAFETY: f64 = 0.8;

/// Accepted steps between refreshes of the stiffness estimate.
const STIFFNESS_REFRESH: usize = 10;

/// An embedded pair: `b` advances the solution, `b_err = b - b_hat` estimates
/// the local error.
#[derive(Debug)]
pub struct ButcherTableau {
    pub name: &'static str,
    pub c: &'static [f64],
    pub a: &'static [&'static [f64]],
    pub b: &'static [f64],
    pub b_err: &'static [f64],
    /// Order of the lower-order member, used for the step-size exponent.
    pub error_order: u32,
    /// First-same-as-last: the last stage is evaluated at the new solution.
    pub fsal: bool,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.c.len()
    }

    /// Stability function `R(z)` of the advancing method on `y' = z y`.
    pub fn stability_function(&self, z: f64) -> f64 {
        let mut stage = vec![0.0; self.stages()];
        for s in 0..self.stages() {
            let acc: f64 = self.a[s].iter().zip(&stage).map(|(a, y)| a * y).sum();
            stage[s] = 1.0 + z * acc;
        }
        1.0 + z * self.b.iter().zip(&stage).map(|(b, y)| b * y).sum::<f64>()
    }

    /// Length `x` of the real interval `[-x, 0]` on which `|R(z)| <= 1`.
    pub fn real_stability_boundary(&self) -> f64 {
        let mut x = 0.0;
        let dx = 1e-3;
        while self.stability_function(-(x + dx)).abs() <= 1.0 {
            x += dx;
            if x > 100.0 {
                break;
            }
        }
        x
    }
}

pub static DOPRI5: ButcherTableau = ButcherTableau {
    name: "dopri5",
    c: &[0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0],
    a: &[
        &[],
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
        ],
        &[
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
        ],
        &[
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ],
    b: &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ],
    b_err: &[
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ],
    error_order: 4,
    fsal: true,
};

pub static CASH_KARP: ButcherTableau = ButcherTableau {
    name: "cash_karp",
    c: &[0.0, 1.0 / 5.0, 3.0 / 10.0, 3.0 / 5.0, 1.0, 7.0 / 8.0],
    a: &[
        &[],
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0],
        &[-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0],
        &[
            1631.0 / 55296.0,
            175.0 / 512.0,
            575.0 / 13824.0,
            44275.0 / 110592.0,
            253.0 / 4096.0,
        ],
    ],
    b: &[
        37.0 / 378.0,
        0.0,
        250.0 / 621.0,
        125.0 / 594.0,
        0.0,
        512.0 / 1771.0,
    ],
    b_err: &[
        37.0 / 378.0 - 2825.0 / 27648.0,
        0.0,
        250.0 / 621.0 - 18575.0 / 48384.0,
        125.0 / 594.0 - 13525.0 / 55296.0,
        -277.0 / 14336.0,
        512.0 / 1771.0 - 1.0 / 4.0,
    ],
    error_order: 4,
    fsal: false,
};

static TABLEAUS: &[&ButcherTableau] = &[&DOPRI5, &CASH_KARP];

/// Looks up an embedded pair by name.
pub fn tableau(name: &str) -> Result<&'static ButcherTableau> {
    TABLEAUS
        .iter()
        .copied()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::UnknownStrategy {
            what: "integrator method",
            name: name.to_owned(),
            available: tableau_names().collect::<Vec<_>>().join(", "),
        })
}

pub fn tableau_names() -> impl Iterator<Item = &'static str> {
    TABLEAUS.iter().map(|t| t.name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    /// Name of the embedded pair, see [`tableau_names`].
    pub method: String,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// First trial step; chosen automatically when absent.
    pub initial_step: Option<f64>,
    /// Spacing in tau of recorded states. Not serialized: run configurations
    /// carry it next to the horizon.
    #[serde(skip)]
    pub record_every: f64,
    pub max_steps: usize,
    pub summation: Summation,
    /// Cap steps by the stability interval of the method and the system's
    /// stiffness estimate.
    pub stiffness_control: bool,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            method: DOPRI5.name.to_owned(),
            rel_tol: 1e-9,
            abs_tol: 1e-14,
            max_step: 0.25,
            min_step: 1e-10,
            initial_step: None,
            record_every: 1.0,
            max_steps: 10_000_000,
            summation: Summation::Ordered,
            stiffness_control: true,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidSettings(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("max_step", self.max_step)?;
        positive("min_step", self.min_step)?;
        positive("record_every", self.record_every)?;
        if let Some(h) = self.initial_step {
            positive("initial_step", h)?;
        }
        if self.min_step >= self.max_step {
            return Err(Error::InvalidSettings(format!(
                "min_step {} must be below max_step {}",
                self.min_step, self.max_step
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidSettings(
                "max_steps must be at least 1".into(),
            ));
        }
        tableau(&self.method)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected_error: usize,
    pub rejected_negative: usize,
    pub rate_evaluations: usize,
}

/// States recorded at `tau = 0, record_every, 2 record_every, ..., tau_end`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub taus: Vec<f64>,
    pub states: Vec<PopulationState>,
    /// Reduced energy `sum_j j n_j` at each recorded time.
    pub energy: Vec<f64>,
    /// Photon number `sum_j n_j` at each recorded time.
    pub number: Vec<f64>,
    /// Last accepted step before each record (zero at `tau = 0`).
    pub step_size: Vec<f64>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn final_state(&self) -> &PopulationState {
        self.states
            .last()
            .expect("trajectory always holds the initial state")
    }

    /// Largest `|U(tau) - U(0)| / U(0)` over the recorded times (zero when
    /// the initial energy vanishes).
    pub fn max_relative_energy_drift(&self) -> f64 {
        let u0 = self.energy[0];
        if u0 == 0.0 {
            return 0.0;
        }
        self.energy
            .iter()
            .fold(0.0f64, |m, u| m.max(((u - u0) / u0).abs()))
    }

    /// State recorded closest to `tau`.
    pub fn state_at(&self, tau: f64) -> &PopulationState {
        let i = self
            .taus
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - tau).abs().total_cmp(&(b.1 - tau).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        &self.states[i]
    }
}

/// Integrates the three-wave kinetic equation from `ic` to `tau_end`.
pub fn integrate(
    ic: &InitialCondition,
    model: &CouplingModel,
    ladder: &ModeLadder,
    tau_end: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    let y0 = ic.to_state(ladder)?;
    let kinetics = ThreeWaveKinetics::new(model, ladder)?.with_summation(settings.summation);
    integrate_system(&kinetics, y0, tau_end, settings)
}

/// Integrates any [`RateEquation`] whose state is a population vector.
pub fn integrate_system(
    system: &dyn RateEquation,
    y0: PopulationState,
    tau_end: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    let mut traj = Trajectory {
        taus: Vec::new(),
        states: Vec::new(),
        energy: Vec::new(),
        number: Vec::new(),
        step_size: Vec::new(),
        stats: IntegrationStats::default(),
    };
    let stats = integrate_with_observer(system, y0, tau_end, settings, |tau, y, h| {
        traj.taus.push(tau);
        traj.energy.push(reduced_energy(y));
        traj.number.push(y.iter().sum());
        traj.step_size.push(h);
        traj.states
            .push(PopulationState::from_vec_unchecked(y.to_vec()));
    })?;
    traj.stats = stats;
    Ok(traj)
}

/// Integration core: calls `observe(tau, y, last_step)` at `tau = 0` and at
/// every record time up to and including `tau_end`.
pub fn integrate_with_observer(
    system: &dyn RateEquation,
    y0: PopulationState,
    tau_end: f64,
    settings: &IntegratorSettings,
    mut observe: impl FnMut(f64, &[f64], f64),
) -> Result<IntegrationStats> {
    settings.validate()?;
    if !(tau_end.is_finite() && tau_end >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tau_end must be finite and non-negative, got {tau_end}"
        )));
    }
    let dim = system.dim();
    if y0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: y0.len(),
        });
    }
    let tab = tableau(&settings.method)?;
    let stages = tab.stages();
    let mut stats = IntegrationStats::default();

    let mut y = y0.into_vec();
    let mut t = 0.0;
    observe(t, &y, 0.0);
    if tau_end == 0.0 {
        return Ok(stats);
    }

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; stages];
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    system.rates(&y, &mut k[0]);
    stats.rate_evaluations += 1;

    let mut h = match settings.initial_step {
        Some(h) => h,
        None => initial_step(system, &y, &k[0], tab.error_order, settings, &mut stats),
    }
    .min(settings.max_step)
    .max(settings.min_step);

    let mut record_index: u64 = 1;
    let mut last_rejected = false;
    let exponent = 1.0 / (tab.error_order as f64 + 1.0);
    let boundary = tab.real_stability_boundary();
    let stable_step = |y: &[f64]| -> f64 {
        match system.stiffness(y) {
            Some(rho) if settings.stiffness_control && rho > 0.0 => {
                (STIFFNESS_SAFETY * boundary / rho).max(settings.min_step)
            }
            _ => f64::INFINITY,
        }
    };
    let mut h_stable = stable_step(&y);

    loop {
        h = h.min(h_stable);
        let target = (record_index as f64 * settings.record_every).min(tau_end);
        let remaining = target - t;
        let snap = 1e-12 * target.abs().max(1.0);
        let (step, hits_target) = if h >= remaining - snap {
            (remaining, true)
        } else {
            (h, false)
        };

        if stats.accepted + stats.rejected_error + stats.rejected_negative >= settings.max_steps {
            return Err(Error::TooManySteps(settings.max_steps));
        }

        for s in 1..stages {
            let row = tab.a[s];
            for i in 0..dim {
                let mut acc = 0.0;
                for (r, &a) in row.iter().enumerate() {
                    if a != 0.0 {
                        acc += a * k[r][i];
                    }
                }
                y_stage[i] = y[i] + step * acc;
            }
            system.rates(&y_stage, &mut k[s]);
            stats.rate_evaluations += 1;
        }
        if tab.fsal {
            // Last stage was evaluated at the new solution.
            y_new.copy_from_slice(&y_stage);
        } else {
            for i in 0..dim {
                let mut acc = 0.0;
                for (r, &b) in tab.b.iter().enumerate() {
                    if b != 0.0 {
                        acc += b * k[r][i];
                    }
                }
                y_new[i] = y[i] + step * acc;
            }
        }
        for i in 0..dim {
            let mut acc = 0.0;
            for (r, &e) in tab.b_err.iter().enumerate() {
                if e != 0.0 {
                    acc += e * k[r][i];
                }
            }
            err[i] = step * acc;
        }

        let finite = y_new.iter().all(|v| v.is_finite());
        let err_norm = if finite {
            let mut m = 0.0f64;
            for i in 0..dim {
                let sc = settings.abs_tol + settings.rel_tol * y[i].abs().max(y_new[i].abs());
                m = m.max(err[i].abs() / sc);
            }
            m
        } else {
            f64::INFINITY
        };

        if !finite || err_norm.is_nan() {
            stats.rejected_error += 1;
            h = step * 0.5;
            if h < settings.min_step {
                return Err(Error::NonFiniteState { tau: t });
            }
            last_rejected = true;
            continue;
        }

        if err_norm > 1.0 {
            stats.rejected_error += 1;
            let fac = (0.9 * err_norm.powf(-exponent)).clamp(0.2, 1.0);
            h = step * fac;
            if h < settings.min_step {
                return Err(Error::StepUnderflow {
                    tau: t,
                    step: h,
                    min_step: settings.min_step,
                });
            }
            last_rejected = true;
            continue;
        }

        if y_new.iter().any(|&v| v < -settings.abs_tol) {
            stats.rejected_negative += 1;
            h = step * 0.5;
            if h < settings.min_step {
                return Err(Error::StepUnderflow {
                    tau: t,
                    step: h,
                    min_step: settings.min_step,
                });
            }
            last_rejected = true;
            continue;
        }

        // Accept.
        stats.accepted += 1;
        if stats.accepted % STIFFNESS_REFRESH == 0 {
            h_stable = stable_step(&y_new);
        }
        let mut modified = false;
        for v in y_new.iter_mut() {
            if *v < UNDERFLOW_FLOOR && *v != 0.0 {
                *v = 0.0;
                modified = true;
            }
        }
        std::mem::swap(&mut y, &mut y_new);
        t = if hits_target { target } else { t + step };

        if tab.fsal && !modified {
            let last = stages - 1;
            k.swap(0, last);
        } else {
            system.rates(&y, &mut k[0]);
            stats.rate_evaluations += 1;
        }

        let grow_cap = if last_rejected { 1.0 } else { 5.0 };
        let fac = if err_norm == 0.0 {
            grow_cap
        } else {
            (0.9 * err_norm.powf(-exponent)).clamp(0.2, grow_cap)
        };
        let proposed = (step * fac).min(settings.max_step);
        // A step shortened to land on a record time should not shrink the
        // next one.
        h = if hits_target {
            proposed.max(h.min(settings.max_step))
        } else {
            proposed
        };
        last_rejected = false;

        if hits_target {
            observe(t, &y, step);
            if target >= tau_end {
                break;
            }
            record_index += 1;
        }
    }
    Ok(stats)
}

/// Starting step from the local scale of the solution and its derivative.
fn initial_step(
    system: &dyn RateEquation,
    y: &[f64],
    f0: &[f64],
    error_order: u32,
    settings: &IntegratorSettings,
    stats: &mut IntegrationStats,
) -> f64 {
    let dim = y.len();
    let scale: Vec<f64> = y
        .iter()
        .map(|v| settings.abs_tol + settings.rel_tol * v.abs())
        .collect();
    let rms = |v: &dyn Fn(usize) -> f64| -> f64 {
        ((0..dim).map(|i| (v(i) / scale[i]).powi(2)).sum::<f64>() / dim as f64).sqrt()
    };
    let d0 = rms(&|i| y[i]);
    let d1 = rms(&|i| f0[i]);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = (0..dim).map(|i| y[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; dim];
    system.rates(&y1, &mut f1);
    stats.rate_evaluations += 1;
    let d2 = rms(&|i| f1[i] - f0[i]) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(1.0 / (error_order as f64 + 1.0))
    };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::bose_einstein;
    use crate::kinetics::QuadraticKinetics;
    use crate::model::QuadraticCoupling;
    use approx::assert_relative_eq;

    /// dy_i/dt = -lambda_i y_i.
    struct Decay(Vec<f64>);

    impl RateEquation for Decay {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn rates(&self, y: &[f64], out: &mut [f64]) {
            for i in 0..y.len() {
                out[i] = -self.0[i] * y[i];
            }
        }
    }

    /// dy_0/dt = -1 regardless of y: drives y_0 negative.
    struct Drain;

    impl RateEquation for Drain {
        fn dim(&self) -> usize {
            1
        }
        fn rates(&self, _y: &[f64], out: &mut [f64]) {
            out[0] = -1.0;
        }
    }

    fn settings(method: &str) -> IntegratorSettings {
        IntegratorSettings {
            method: method.into(),
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            ..Default::default()
        }
    }

    #[test]
    fn tableau_consistency() {
        for name in tableau_names() {
            let t = tableau(name).unwrap();
            assert_eq!(t.a.len(), t.stages());
            assert_eq!(t.b.len(), t.stages());
            assert_eq!(t.b_err.len(), t.stages());
            assert_relative_eq!(t.b.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            assert!(t.b_err.iter().sum::<f64>().abs() < 1e-14);
            for (s, row) in t.a.iter().enumerate() {
                assert_eq!(row.len(), s);
                assert_relative_eq!(row.iter().sum::<f64>(), t.c[s], epsilon = 1e-14);
            }
        }
        assert!(tableau("euler").is_err());
    }

    #[test]
    fn stability_boundaries() {
        // Known real-axis stability intervals of the two pairs.
        assert!((DOPRI5.real_stability_boundary() - 3.307).abs() < 2e-3);
        assert!((CASH_KARP.real_stability_boundary() - 3.3).abs() < 0.5);
        assert_relative_eq!(
            DOPRI5.stability_function(-0.1),
            (-0.1f64).exp(),
            max_relative = 1e-7
        );
    }

    #[test]
    fn exponential_decay_accuracy() {
        for name in tableau_names() {
            let sys = Decay(vec![1.0, 0.3]);
            let y0 = PopulationState::new(vec![1.0, 2.0]).unwrap();
            let traj = integrate_system(&sys, y0, 5.0, &settings(name)).unwrap();
            let end = traj.final_state();
            assert_relative_eq!(end.occupation(1), (-5.0f64).exp(), max_relative = 1e-8);
            assert_relative_eq!(
                end.occupation(2),
                2.0 * (-1.5f64).exp(),
                max_relative = 1e-8
            );
            assert_eq!(traj.taus, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        }
    }

    #[test]
    fn records_fractional_end() {
        let sys = Decay(vec![1.0]);
        let y0 = PopulationState::new(vec![1.0]).unwrap();
        let traj = integrate_system(&sys, y0, 2.5, &settings("dopri5")).unwrap();
        assert_eq!(traj.taus, vec![0.0, 1.0, 2.0, 2.5]);
    }

    #[test]
    fn zero_horizon_returns_initial_state() {
        let sys = Decay(vec![1.0]);
        let y0 = PopulationState::new(vec![1.0]).unwrap();
        let traj = integrate_system(&sys, y0, 0.0, &settings("dopri5")).unwrap();
        assert_eq!(traj.taus, vec![0.0]);
        assert!(
            integrate_system(&sys, PopulationState::zeros(1), -1.0, &settings("dopri5")).is_err()
        );
    }

    #[test]
    fn negative_drift_underflows() {
        let y0 = PopulationState::new(vec![1.0]).unwrap();
        let err = integrate_system(&Drain, y0, 5.0, &settings("dopri5")).unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. }), "{err}");
    }

    #[test]
    fn rejects_bad_settings() {
        let y0 = PopulationState::new(vec![1.0]).unwrap();
        let mut s = settings("dopri5");
        s.min_step = 1.0;
        s.max_step = 0.5;
        assert!(integrate_system(&Decay(vec![1.0]), y0.clone(), 1.0, &s).is_err());
        let mut s = settings("rk4");
        s.rel_tol = 1e-6;
        assert!(integrate_system(&Decay(vec![1.0]), y0.clone(), 1.0, &s).is_err());
        let mut s = settings("dopri5");
        s.abs_tol = 0.0;
        assert!(integrate_system(&Decay(vec![1.0]), y0, 1.0, &s).is_err());
    }

    #[test]
    fn vacuum_stays_vacuum() {
        let ladder = ModeLadder::reduced(40).unwrap();
        let model = CouplingModel::exponential_decay(0.01, 1.0, 40).unwrap();
        let ic = InitialCondition::Explicit {
            occupations: vec![0.0; 40],
        };
        let traj = integrate(&ic, &model, &ladder, 20.0, &settings("dopri5")).unwrap();
        for s in &traj.states {
            assert!(s.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn bose_einstein_stays_put() {
        let n = 120;
        let ladder = ModeLadder::reduced(n).unwrap();
        let model = CouplingModel::exponential_decay(0.01, 1.0, n).unwrap();
        let be = bose_einstein(0.3, &ladder).unwrap();
        let ic = InitialCondition::Explicit {
            occupations: be.as_slice().to_vec(),
        };
        let s = settings("dopri5");
        let traj = integrate(&ic, &model, &ladder, 50.0, &s).unwrap();
        for state in &traj.states {
            for (a, b) in state.as_slice().iter().zip(be.as_slice()) {
                assert!(
                    (a - b).abs() <= 10.0 * (s.abs_tol + s.rel_tol * b),
                    "{a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn small_cavity_conserves_energy() {
        let n = 60;
        let ladder = ModeLadder::reduced(n).unwrap();
        for model in [
            CouplingModel::exponential_decay(0.01, 1.0, n).unwrap(),
            CouplingModel::constant_product(0.03, n).unwrap(),
        ] {
            for method in tableau_names() {
                let s = settings(method);
                let traj = integrate(
                    &InitialCondition::single_mode(20),
                    &model,
                    &ladder,
                    30.0,
                    &s,
                )
                .unwrap();
                assert!(traj.max_relative_energy_drift() <= 10.0 * s.rel_tol);
                assert!(
                    traj.number.last().unwrap() > &1.5,
                    "down-conversion increases number"
                );
                for st in &traj.states {
                    assert!(st.as_slice().iter().all(|&v| v >= 0.0 && v.is_finite()));
                }
            }
        }
    }

    #[test]
    fn quadratic_trajectory_is_constant() {
        let n = 50;
        let ladder = ModeLadder::reduced(n).unwrap();
        let g = (0..n)
            .map(|p| {
                (0..n)
                    .map(|q| ((p * 7 + q * 3) % 11) as f64 * 0.1 - 0.5)
                    .collect()
            })
            .collect();
        let sys = QuadraticKinetics::new(QuadraticCoupling::new(g).unwrap(), ladder).unwrap();
        let y0 = PopulationState::new((0..n).map(|i| (i % 5) as f64 * 0.3).collect()).unwrap();
        let traj = integrate_system(&sys, y0.clone(), 10.0, &settings("dopri5")).unwrap();
        for s in &traj.states {
            assert_eq!(s, &y0);
        }
    }
}
