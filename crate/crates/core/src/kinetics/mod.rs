//! Kinetic equation for the mode occupations and its time integration.
//!
//! For three-wave mixing the rate of mode `j` is
//!
//! ```text
//! dn_j/dtau = sum_{k=1}^{N-j} G(j,k) [n_{j+k}(1 + n_j + n_k) - n_j n_k]
//!           - sum_{k=1}^{j-1} L(j,k) [n_j(1 + n_k + n_{j-k}) - n_k n_{j-k}]
//! ```
//!
//! with `G = kernel_gain`, `L = kernel_loss` from [`CouplingModel`]. Because
//! `G(j,k) = 2 L(j+k,k)` the reduced energy `sum_j j n_j` is an exact
//! invariant of the flow.

mod integrator;

pub use integrator::{
    integrate, integrate_system, integrate_with_observer, tableau, tableau_names, ButcherTableau,
    IntegrationStats, IntegratorSettings, Trajectory, UNDERFLOW_FLOOR,
};

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{CouplingModel, ModeLadder, PopulationState, QuadraticCoupling};
use crate::{Error, Result};

/// Below this many modes the rate evaluation runs on the calling thread.
const PARALLEL_MIN_MODES: usize = 256;

/// `dn_j/dtau` for every mode, stored 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector {
    pub dn_dtau: Vec<f64>,
}

impl RateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.dn_dtau
    }

    pub fn max_abs(&self) -> f64 {
        self.dn_dtau.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.dn_dtau.iter().sum()
    }
}

/// A right-hand side `dy/dtau = f(y)` the integrator can advance.
pub trait RateEquation: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `f(y)` into `out`. Both slices have length [`Self::dim`].
    fn rates(&self, y: &[f64], out: &mut [f64]);

    /// Estimate of the largest decay rate of the linearised flow at `y`, used
    /// to keep explicit steps inside their stability region.
    fn stiffness(&self, _y: &[f64]) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Summation {
    /// Plain left-to-right accumulation, `k` ascending.
    #[default]
    Ordered,
    /// Neumaier-compensated accumulation in the same order.
    Compensated,
}

/// Three-wave kinetic equation with its kernel tables precomputed.
#[derive(Debug, Clone)]
pub struct ThreeWaveKinetics {
    n_modes: usize,
    /// `gain[j-1][k-1] = G(j,k)` for `k = 1..=N-j`.
    gain: Vec<Vec<f64>>,
    /// `loss[j-1][k-1] = L(j,k)` for `k = 1..j`.
    loss: Vec<Vec<f64>>,
    summation: Summation,
}

impl ThreeWaveKinetics {
    pub fn new(model: &CouplingModel, ladder: &ModeLadder) -> Result<Self> {
        let n = ladder.n_modes();
        if model.n_modes() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: model.n_modes(),
            });
        }
        let gain = (1..=n)
            .map(|j| (1..=n - j).map(|k| model.gain_unchecked(j, k)).collect())
            .collect();
        let loss = (1..=n)
            .map(|j| (1..j).map(|k| model.loss_unchecked(j, k)).collect())
            .collect();
        Ok(Self {
            n_modes: n,
            gain,
            loss,
            summation: Summation::Ordered,
        })
    }

    pub fn with_summation(mut self, summation: Summation) -> Self {
        self.summation = summation;
        self
    }

    /// Rate of mode `j` (1-based).
    fn rate_of(&self, n: &[f64], j: usize) -> f64 {
        let nj = n[j - 1];
        let gain = &self.gain[j - 1];
        let loss = &self.loss[j - 1];
        let gain_terms = gain.iter().enumerate().map(|(i, &g)| {
            let k = i + 1;
            let nk = n[k - 1];
            let nsum = n[j + k - 1];
            g * (nsum * (1.0 + nj + nk) - nj * nk)
        });
        let loss_terms = loss.iter().enumerate().map(|(i, &l)| {
            let k = i + 1;
            let nk = n[k - 1];
            let ndiff = n[j - k - 1];
            l * (nj * (1.0 + nk + ndiff) - nk * ndiff)
        });
        match self.summation {
            Summation::Ordered => {
                let g: f64 = gain_terms.fold(0.0, |acc, t| acc + t);
                let l: f64 = loss_terms.fold(0.0, |acc, t| acc + t);
                g - l
            }
            Summation::Compensated => neumaier(gain_terms) - neumaier(loss_terms),
        }
    }

    /// `d(dn_j/dtau)/dn_j` holding all other occupations fixed.
    fn diag_of(&self, n: &[f64], j: usize) -> f64 {
        let nj = n[j - 1];
        let mut gain = 0.0;
        for (i, &g) in self.gain[j - 1].iter().enumerate() {
            let k = i + 1;
            let nsum = n[j + k - 1];
            if k == j {
                // n_j enters both the j and k slots of the bracket.
                gain += 2.0 * g * (nsum - nj);
            } else {
                gain += g * (nsum - n[k - 1]);
            }
        }
        let mut loss = 0.0;
        for (i, &l) in self.loss[j - 1].iter().enumerate() {
            let k = i + 1;
            loss += l * (1.0 + n[k - 1] + n[j - k - 1]);
        }
        gain - loss
    }

    pub fn jacobian_diag(&self, n: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_modes];
        self.fill(&mut out, |j| self.diag_of(n, j));
        out
    }

    fn fill(&self, out: &mut [f64], f: impl Fn(usize) -> f64 + Sync) {
        if self.n_modes >= PARALLEL_MIN_MODES {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(i, o)| *o = f(i + 1));
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = f(i + 1);
            }
        }
    }
}

impl RateEquation for ThreeWaveKinetics {
    fn dim(&self) -> usize {
        self.n_modes
    }

    fn rates(&self, y: &[f64], out: &mut [f64]) {
        self.fill(out, |j| self.rate_of(y, j));
    }

    /// Largest `|J_jj|`. Tail modes couple to the bulk almost triangularly,
    /// so the diagonal tracks the stiff end of the spectrum.
    fn stiffness(&self, y: &[f64]) -> Option<f64> {
        Some(
            self.jacobian_diag(y)
                .iter()
                .fold(0.0f64, |m, d| m.max(d.abs())),
        )
    }
}

fn neumaier(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// Rate equation under the quadratic coupling
/// `V = 1/2 sum_{p != q} g_pq (a_p + a_p^+)(a_q + a_q^+)`:
/// `dn_j/dt = 2 pi sum_p (g_pj + g_jp)^2 [n_p - n_j] delta(omega_p - omega_j)`,
/// with the delta realised on the discrete ladder as `nu_0` times a Kronecker
/// delta on resonant frequencies.
#[derive(Debug, Clone)]
pub struct QuadraticKinetics {
    coupling: QuadraticCoupling,
    ladder: ModeLadder,
}

impl QuadraticKinetics {
    pub fn new(coupling: QuadraticCoupling, ladder: ModeLadder) -> Result<Self> {
        if coupling.n_modes() != ladder.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: ladder.n_modes(),
                got: coupling.n_modes(),
            });
        }
        Ok(Self { coupling, ladder })
    }
}

impl RateEquation for QuadraticKinetics {
    fn dim(&self) -> usize {
        self.ladder.n_modes()
    }

    fn rates(&self, y: &[f64], out: &mut [f64]) {
        let nu0 = self.ladder.density_of_modes();
        let dw = self.ladder.delta_omega();
        for (i, o) in out.iter_mut().enumerate() {
            let j = i + 1;
            let omega_j = j as f64 * dw;
            let mut acc = 0.0;
            for p in self.ladder.modes() {
                if p as f64 * dw != omega_j {
                    continue;
                }
                let g = self.coupling.g(p, j) + self.coupling.g(j, p);
                // Reduced time tau = delta_omega * t.
                acc += 2.0 * PI * nu0 / dw * g * g * (y[p - 1] - y[j - 1]);
            }
            *o = acc;
        }
    }
}

fn check_state(state: &PopulationState, ladder: &ModeLadder) -> Result<()> {
    state.check_ladder(ladder)?;
    for (i, &v) in state.as_slice().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                mode: i + 1,
                value: v,
            });
        }
    }
    Ok(())
}

/// Right-hand side of the three-wave kinetic equation.
pub fn rhs(
    state: &PopulationState,
    model: &CouplingModel,
    ladder: &ModeLadder,
) -> Result<RateVector> {
    check_state(state, ladder)?;
    let kinetics = ThreeWaveKinetics::new(model, ladder)?;
    let mut out = vec![0.0; ladder.n_modes()];
    kinetics.rates(state.as_slice(), &mut out);
    Ok(RateVector { dn_dtau: out })
}

/// Rate under quadratic coupling; identically zero on an equidistant ladder.
pub fn rhs_quadratic(
    state: &PopulationState,
    coupling: &QuadraticCoupling,
    ladder: &ModeLadder,
) -> Result<RateVector> {
    check_state(state, ladder)?;
    let kinetics = QuadraticKinetics::new(coupling.clone(), *ladder)?;
    let mut out = vec![0.0; ladder.n_modes()];
    kinetics.rates(state.as_slice(), &mut out);
    Ok(RateVector { dn_dtau: out })
}

/// Analytic diagonal of the Jacobian of [`rhs`].
pub fn jacobian_diag(
    state: &PopulationState,
    model: &CouplingModel,
    ladder: &ModeLadder,
) -> Result<Vec<f64>> {
    check_state(state, ladder)?;
    Ok(ThreeWaveKinetics::new(model, ladder)?.jacobian_diag(state.as_slice()))
}

/// Central-difference diagonal of the Jacobian of [`rhs`], with step
/// `rel_step * max(n_j, 1)`. The rate of mode `j` is quadratic in `n_j`, so
/// the difference carries no truncation error, only rounding.
pub fn finite_difference_diag(
    state: &PopulationState,
    model: &CouplingModel,
    ladder: &ModeLadder,
    rel_step: f64,
) -> Result<Vec<f64>> {
    check_state(state, ladder)?;
    if !(rel_step.is_finite() && rel_step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {rel_step}"
        )));
    }
    let kin = ThreeWaveKinetics::new(model, ladder)?;
    let base = state.as_slice();
    let mut out = vec![0.0; ladder.n_modes()];
    kin.fill(&mut out, |j| {
        let mut y = base.to_vec();
        let h = rel_step * base[j - 1].max(1.0);
        y[j - 1] = base[j - 1] + h;
        let fp = kin.rate_of(&y, j);
        y[j - 1] = base[j - 1] - h;
        let fm = kin.rate_of(&y, j);
        (fp - fm) / (2.0 * h)
    });
    Ok(out)
}

/// Magnitude scale for rate residuals: the largest kernel value times the
/// largest single product that can appear in a gain or loss bracket,
/// `M (1 + 2M)` with `M = max_j n_j`.
pub fn rate_scale(state: &PopulationState, model: &CouplingModel) -> f64 {
    let m = state.as_slice().iter().fold(0.0f64, |a, &v| a.max(v));
    model.max_kernel() * m * (1.0 + 2.0 * m)
}
