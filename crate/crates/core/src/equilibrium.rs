//! Bose–Einstein populations and the energy balance that fixes the final
//! temperature of the isolated cavity.
//!
//! Inverse temperatures are reduced, `beta` standing for `beta * hbar * delta_omega`,
//! and energies are in units of `hbar * delta_omega`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::model::{InitialCondition, ModeLadder, PopulationState};
use crate::stats::linear_fit;
use crate::{Error, Result};

/// Beyond this exponent `1/expm1(x)` leaves the normal float range and the
/// identity residuals are evaluated on logarithms instead.
const DIRECT_EXPONENT_LIMIT: f64 = 700.0;

/// Bracket expansions allowed in each direction by [`solve_beta`].
const BRACKET_EXPANSIONS: usize = 128;

const BISECTION_ITERATIONS: usize = 400;

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidBeta(beta))
    }
}

/// `n_B = 1 / (exp(beta * mode) - 1)`.
pub fn occupation(beta: f64, mode: usize) -> f64 {
    1.0 / (beta * mode as f64).exp_m1()
}

pub fn bose_einstein(beta: f64, ladder: &ModeLadder) -> Result<PopulationState> {
    check_beta(beta)?;
    PopulationState::new(ladder.modes().map(|j| occupation(beta, j)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    /// Relative residual of `n(j+k) = n(j) n(k) / (1 + n(j) + n(k))`.
    pub sum: f64,
    /// Relative residual of `n(j-k) = n(j) (1 + n(k)) / (n(k) - n(j))`.
    pub difference: f64,
}

/// Relative residuals of the two Bose–Einstein product identities for
/// `j > k >= 1`.
pub fn check_be_identities(beta: f64, j: usize, k: usize) -> Result<IdentityResiduals> {
    check_beta(beta)?;
    if k == 0 || j <= k {
        return Err(Error::InvalidModePair {
            j,
            k,
            reason: "the difference identity needs j > k >= 1",
        });
    }
    Ok(IdentityResiduals {
        sum: sum_identity_residual(beta, j, k),
        difference: difference_identity_residual(beta, j, k),
    })
}

fn sum_identity_residual(beta: f64, j: usize, k: usize) -> f64 {
    let (xj, xk, xs) = (beta * j as f64, beta * k as f64, beta * (j + k) as f64);
    if xs <= DIRECT_EXPONENT_LIMIT {
        let (nj, nk) = (1.0 / xj.exp_m1(), 1.0 / xk.exp_m1());
        let lhs = 1.0 / xs.exp_m1();
        let rhs = nj * nk / (1.0 + nj + nk);
        ((lhs - rhs) / lhs).abs()
    } else {
        let nj_plus_nk = 1.0 / xj.exp_m1() + 1.0 / xk.exp_m1();
        let ln_lhs = ln_occupation(xs);
        let ln_rhs = ln_occupation(xj) + ln_occupation(xk) - nj_plus_nk.ln_1p();
        (ln_lhs - ln_rhs).exp_m1().abs()
    }
}

fn difference_identity_residual(beta: f64, j: usize, k: usize) -> f64 {
    let (xj, xk, xd) = (beta * j as f64, beta * k as f64, beta * (j - k) as f64);
    if xj <= DIRECT_EXPONENT_LIMIT {
        let nj = 1.0 / xj.exp_m1();
        let one_plus_nk = 1.0 / -(-xk).exp_m1();
        // n(k) - n(j) without cancellation.
        let gap = xd.exp_m1() / (xj.exp_m1() * -(-xk).exp_m1());
        let lhs = 1.0 / xd.exp_m1();
        let rhs = nj * one_plus_nk / gap;
        ((lhs - rhs) / lhs).abs()
    } else {
        let ln_gap = ln_expm1(xd) - ln_expm1(xj) - (-(-xk).exp_m1()).ln();
        let ln_lhs = ln_occupation(xd);
        let ln_rhs = ln_occupation(xj) - (-(-xk).exp_m1()).ln() - ln_gap;
        (ln_lhs - ln_rhs).exp_m1().abs()
    }
}

/// `ln(1 / (e^x - 1))` for `x > 0`.
fn ln_occupation(x: f64) -> f64 {
    -ln_expm1(x)
}

/// `ln(e^x - 1)` for `x > 0`.
fn ln_expm1(x: f64) -> f64 {
    if x > 1.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `U_ini = sum_j N_j j` in units of `hbar * delta_omega`.
pub fn initial_energy(ic: &InitialCondition, ladder: &ModeLadder) -> Result<f64> {
    Ok(ic.to_state(ladder)?.energy())
}

/// `U_fin = sum_{j=1}^N j / (exp(beta j) - 1)`, summed ascending in `j`.
pub fn final_energy(beta: f64, ladder: &ModeLadder) -> Result<f64> {
    check_beta(beta)?;
    Ok(final_energy_unchecked(beta, ladder.n_modes()))
}

fn final_energy_unchecked(beta: f64, n_modes: usize) -> f64 {
    (1..=n_modes).fold(0.0, |acc, j| acc + j as f64 * occupation(beta, j))
}

/// Continuum approximation `pi^2 / (6 beta^2)`.
pub fn final_energy_approx(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(PI * PI / (6.0 * beta * beta))
}

/// `beta ≈ pi / sqrt(6 k_ini)` for a single photon started in mode `k_ini`.
pub fn beta_approx(k_ini: usize) -> Result<f64> {
    if k_ini < 1 {
        return Err(Error::InvalidArgument("k_ini must be at least 1".into()));
    }
    Ok(PI / (6.0 * k_ini as f64).sqrt())
}

/// Inverse of [`final_energy_approx`]: `pi / sqrt(6 u)`.
pub fn beta_from_integral_energy(u: f64) -> Result<f64> {
    check_energy(u)?;
    Ok(PI / (6.0 * u).sqrt())
}

fn check_energy(u: f64) -> Result<()> {
    if u.is_finite() && u > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "target energy must be positive and finite, got {u}"
        )))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumMethod {
    #[default]
    ExactSum,
    IntegralApprox,
}

#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub beta: f64,
    pub u_target: f64,
    pub populations: PopulationState,
    pub method: EquilibriumMethod,
}

/// Finds `beta` with `final_energy(beta) = u_target` to relative `tol`.
///
/// Bracketing starts at the continuum estimate `pi / sqrt(6 u)` and expands
/// geometrically until the monotone energy changes sign; bisection finishes.
pub fn solve_beta(u_target: f64, ladder: &ModeLadder, tol: f64) -> Result<EquilibriumSolution> {
    check_energy(u_target)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = ladder.n_modes();
    let energy = |b: f64| final_energy_unchecked(b, n);
    let guess = PI / (6.0 * u_target).sqrt();

    // Energy falls with beta: need energy(lo) >= u >= energy(hi).
    let mut lo = guess;
    let mut expansions = 0;
    while energy(lo) < u_target {
        if expansions == BRACKET_EXPANSIONS {
            return Err(Error::EnergyOutOfRange {
                u_target,
                cap: energy(lo),
            });
        }
        lo *= 0.5;
        expansions += 1;
    }
    let mut hi = guess;
    expansions = 0;
    while energy(hi) > u_target {
        if expansions == BRACKET_EXPANSIONS {
            return Err(Error::InvalidArgument(format!(
                "target energy {u_target} is below the representable range"
            )));
        }
        hi *= 2.0;
        expansions += 1;
    }

    let accept = |b: f64| (energy(b) - u_target).abs() <= tol * u_target;
    let mut beta = None;
    for b in [lo, hi] {
        if accept(b) {
            beta = Some(b);
        }
    }
    if beta.is_none() {
        for _ in 0..BISECTION_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            let u = energy(mid);
            if (u - u_target).abs() <= tol * u_target {
                beta = Some(mid);
                break;
            }
            if u > u_target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
    }
    let beta = beta.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "relative tolerance {tol} not reachable in double precision for u = {u_target}"
        ))
    })?;
    Ok(EquilibriumSolution {
        beta,
        u_target,
        populations: bose_einstein(beta, ladder)?,
        method: EquilibriumMethod::ExactSum,
    })
}

/// Equilibrium from the continuum approximation of the energy balance.
pub fn solve_beta_approx(u_target: f64, ladder: &ModeLadder) -> Result<EquilibriumSolution> {
    let beta = beta_from_integral_energy(u_target)?;
    Ok(EquilibriumSolution {
        beta,
        u_target,
        populations: bose_einstein(beta, ladder)?,
        method: EquilibriumMethod::IntegralApprox,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TemperatureFit {
    /// Least-squares slope of `ln(1/n_k + 1)` against `k`.
    pub beta: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub modes_used: usize,
    /// `log10` span of `1/n_k + 1` over every mode with non-zero occupation.
    pub dynamic_range_decades: f64,
}

/// Fits the temperature of a (near) Bose–Einstein state from the modes with
/// `n_k >= min_occupation`.
pub fn fit_temperature(state: &PopulationState, min_occupation: f64) -> Result<TemperatureFit> {
    let (mut ks, mut ys) = (Vec::new(), Vec::new());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &n) in state.as_slice().iter().enumerate() {
        if n <= 0.0 {
            continue;
        }
        let y = (1.0 / n).ln_1p();
        lo = lo.min(y);
        hi = hi.max(y);
        if n >= min_occupation {
            ks.push((i + 1) as f64);
            ys.push(y);
        }
    }
    let fit = linear_fit(&ks, &ys)?;
    Ok(TemperatureFit {
        beta: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        modes_used: fit.points,
        dynamic_range_decades: (hi - lo) / std::f64::consts::LN_10,
    })
}
