//! Linear stability of the Bose–Einstein fixed point.
//!
//! A small deviation of a single occupation decays as
//! `d(dn_j)/dtau = -kappa_j dn_j` with
//!
//! ```text
//! kappa_j = sum_k G(j,k) n_k (1 + n_k) / (1 + n_j + n_k)
//!         + sum_{k<j} L(j,k) n_k (1 + n_k) / (n_k - n_j)
//! ```
//!
//! evaluated on `n = n_B(beta)`. The self-pairing term `k = j` of the first
//! sum carries weight two, since `n_j` fills both slots of that bracket; with
//! it `kappa_j` is exactly minus the diagonal of the kinetic Jacobian.

use serde::Serialize;

use crate::equilibrium::{bose_einstein, solve_beta};
use crate::kinetics::{
    integrate_with_observer, IntegratorSettings, ThreeWaveKinetics, UNDERFLOW_FLOOR,
};
use crate::model::{CouplingModel, ModeLadder, PopulationState};
use crate::stats::linear_fit;
use crate::{Error, Result};

/// Largest relative perturbation accepted by [`perturbation_decay`].
pub const MAX_PERTURBATION: f64 = 0.1;

/// Records before this time are skipped when fitting the decay rate.
const FIT_TRANSIENT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySpectrum {
    pub beta: f64,
    /// `kappa[j - 1]`, in inverse reduced time.
    pub kappa: Vec<f64>,
}

impl StabilitySpectrum {
    pub fn min(&self) -> f64 {
        self.kappa.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn kappa(beta: f64, model: &CouplingModel, ladder: &ModeLadder) -> Result<StabilitySpectrum> {
    let n_b = bose_einstein(beta, ladder)?;
    if model.n_modes() != ladder.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: ladder.n_modes(),
            got: model.n_modes(),
        });
    }
    let n = n_b.as_slice();
    let nm = ladder.n_modes();
    let kappa = (1..=nm)
        .map(|j| {
            let nj = n[j - 1];
            let mut gain = 0.0;
            for k in 1..=(nm - j) {
                let nk = n[k - 1];
                let w = model.gain_unchecked(j, k) * nk * (1.0 + nk) / (1.0 + nj + nk);
                gain += if k == j { 2.0 * w } else { w };
            }
            let mut loss = 0.0;
            for k in 1..j {
                let one_plus_nk = 1.0 / -(-beta * k as f64).exp_m1();
                // n_k (1 + n_k) / (n_k - n_j) = (1 + n_k) / (1 - n_j / n_k)
                let ed = (beta * (j - k) as f64).exp_m1();
                let one_minus_ratio = ed / (ed - (-beta * k as f64).exp_m1());
                loss += model.loss_unchecked(j, k) * one_plus_nk / one_minus_ratio;
            }
            gain + loss
        })
        .collect();
    Ok(StabilitySpectrum { beta, kappa })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub beta: f64,
    /// Inverse temperature of the Bose–Einstein state with the perturbed energy.
    pub beta_relaxed: f64,
    pub mode: usize,
    pub amplitude: f64,
    /// `kappa` of the perturbed mode at `beta`.
    pub kappa_mode: f64,
    /// Exponential rate fitted over the first e-fold of the deviation; `None`
    /// when there is no deviation to fit.
    pub fitted_rate: Option<f64>,
    /// `max_j |n_j(tau_end) - n_B(beta_relaxed)_j|`.
    pub terminal_distance: f64,
    pub tau_end: f64,
    pub max_relative_energy_drift: f64,
}

/// Scales `n_mode` of `n_B(beta)` by `1 + amplitude`, integrates the full
/// kinetic equation and reports how the state relaxes.
pub fn perturbation_decay(
    beta: f64,
    model: &CouplingModel,
    ladder: &ModeLadder,
    mode: usize,
    amplitude: f64,
    tau_end: f64,
    settings: &IntegratorSettings,
) -> Result<DecayReport> {
    ladder.check_mode(mode)?;
    if !(amplitude.is_finite() && amplitude.abs() <= MAX_PERTURBATION) {
        return Err(Error::InvalidArgument(format!(
            "perturbation amplitude must satisfy |a| <= {MAX_PERTURBATION}, got {amplitude}"
        )));
    }
    let base = bose_einstein(beta, ladder)?;
    if base.occupation(mode) < UNDERFLOW_FLOOR {
        return Err(Error::InvalidArgument(format!(
            "mode {mode} is empty at beta = {beta}; nothing to perturb"
        )));
    }
    let mut start = base.clone().into_vec();
    start[mode - 1] *= 1.0 + amplitude;
    let start = PopulationState::new(start)?;
    let u0 = start.energy();
    let (beta_relaxed, target) = if amplitude == 0.0 {
        (beta, base)
    } else {
        let sol = solve_beta(u0, ladder, 1e-13)?;
        (sol.beta, sol.populations)
    };
    let target_mode = target.occupation(mode);

    let kinetics = ThreeWaveKinetics::new(model, ladder)?.with_summation(settings.summation);
    let mut deviations: Vec<(f64, f64)> = Vec::new();
    let mut last = Vec::new();
    let mut max_drift = 0.0f64;
    integrate_with_observer(&kinetics, start, tau_end, settings, |tau, y, _| {
        deviations.push((tau, y[mode - 1] - target_mode));
        let u = y
            .iter()
            .enumerate()
            .map(|(i, v)| (i + 1) as f64 * v)
            .sum::<f64>();
        max_drift = max_drift.max(((u - u0) / u0).abs());
        last.clear();
        last.extend_from_slice(y);
    })?;

    let terminal_distance = last
        .iter()
        .zip(target.as_slice())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let fitted_rate = if amplitude == 0.0 {
        None
    } else {
        fit_first_efold(&deviations)
    };
    let kappa_mode = kappa(beta, model, ladder)?.kappa[mode - 1];

    Ok(DecayReport {
        beta,
        beta_relaxed,
        mode,
        amplitude,
        kappa_mode,
        fitted_rate,
        terminal_distance,
        tau_end,
        max_relative_energy_drift: max_drift,
    })
}

/// Decay rate from a log-linear fit of `|deviation|` over its first e-fold,
/// after the initial transient.
fn fit_first_efold(deviations: &[(f64, f64)]) -> Option<f64> {
    let mut iter = deviations.iter().filter(|(tau, _)| *tau >= FIT_TRANSIENT);
    let &(_, d0) = iter.clone().next()?;
    if d0 == 0.0 {
        return None;
    }
    let floor = d0.abs() / std::f64::consts::E;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &(tau, d) in iter.by_ref() {
        if d.signum() != d0.signum() || d.abs() < floor {
            break;
        }
        xs.push(tau);
        ys.push(d.abs().ln());
    }
    if xs.len() < 3 {
        return None;
    }
    linear_fit(&xs, &ys).ok().map(|f| -f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::jacobian_diag;
    use approx::assert_relative_eq;

    #[test]
    fn zero_coupling_gives_zero_spectrum() {
        let l = ModeLadder::reduced(20).unwrap();
        let m = CouplingModel::tabular(vec![vec![0.0; 20]; 20], vec![0.0; 20]).unwrap();
        let s = kappa(0.5, &m, &l).unwrap();
        assert!(s.kappa.iter().all(|&k| k == 0.0));
    }

    #[test]
    fn positive_and_equal_to_negated_jacobian() {
        let n = 200;
        let l = ModeLadder::reduced(n).unwrap();
        for m in [
            CouplingModel::exponential_decay(0.01, 1.0, n).unwrap(),
            CouplingModel::constant_product(0.03, n).unwrap(),
        ] {
            for beta in [0.1, 0.2342, 1.0, 3.0] {
                let s = kappa(beta, &m, &l).unwrap();
                assert!(s.min() > 0.0);
                let diag = jacobian_diag(&bose_einstein(beta, &l).unwrap(), &m, &l).unwrap();
                for (k, d) in s.kappa.iter().zip(&diag) {
                    assert_relative_eq!(*k, -d, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let l = ModeLadder::reduced(20).unwrap();
        let m = CouplingModel::exponential_decay(0.01, 1.0, 20).unwrap();
        let s = IntegratorSettings::default();
        assert!(kappa(0.0, &m, &l).is_err());
        assert!(perturbation_decay(0.3, &m, &l, 0, 0.05, 1.0, &s).is_err());
        assert!(perturbation_decay(0.3, &m, &l, 3, 0.5, 1.0, &s).is_err());
        assert!(perturbation_decay(0.3, &m, &l, 3, 0.05, -1.0, &s).is_err());
    }

    #[test]
    fn unperturbed_state_reports_no_rate() {
        let l = ModeLadder::reduced(40).unwrap();
        let m = CouplingModel::exponential_decay(0.01, 1.0, 40).unwrap();
        let s = IntegratorSettings {
            record_every: 0.5,
            ..Default::default()
        };
        let r = perturbation_decay(0.3, &m, &l, 5, 0.0, 10.0, &s).unwrap();
        assert_eq!(r.fitted_rate, None);
        assert_eq!(r.beta_relaxed, 0.3);
        assert!(r.terminal_distance < 1e-9);
    }

    #[test]
    fn small_cavity_relaxes() {
        let n = 80;
        let l = ModeLadder::reduced(n).unwrap();
        let m = CouplingModel::exponential_decay(0.01, 1.0, n).unwrap();
        let s = IntegratorSettings {
            rel_tol: 1e-11,
            abs_tol: 1e-16,
            record_every: 0.1,
            ..Default::default()
        };
        for amp in [0.05, -0.05] {
            let r = perturbation_decay(0.3, &m, &l, 5, amp, 200.0, &s).unwrap();
            assert!(r.terminal_distance < 1e-6, "{r:?}");
            let rate = r.fitted_rate.unwrap();
            assert!(
                rate > 0.0 && rate < 3.0 * r.kappa_mode && rate > r.kappa_mode / 3.0,
                "{r:?}"
            );
            assert!((r.beta_relaxed - 0.3).abs() > 0.0);
        }
    }
}
