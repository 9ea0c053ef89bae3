use crate::{Error, Result};

/// Equidistant cavity spectrum `omega_k = k * delta_omega`, `k = 1..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeLadder {
    n_modes: usize,
    delta_omega: f64,
}

impl ModeLadder {
    pub fn new(n_modes: usize, delta_omega: f64) -> Result<Self> {
        if n_modes < 2 {
            return Err(Error::InvalidLadder(format!(
                "need at least 2 modes, got {n_modes}"
            )));
        }
        if !(delta_omega.is_finite() && delta_omega > 0.0) {
            return Err(Error::InvalidLadder(format!(
                "mode spacing must be positive and finite, got {delta_omega}"
            )));
        }
        Ok(Self {
            n_modes,
            delta_omega,
        })
    }

    /// Ladder in reduced units (`delta_omega = 1`).
    pub fn reduced(n_modes: usize) -> Result<Self> {
        Self::new(n_modes, 1.0)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn delta_omega(&self) -> f64 {
        self.delta_omega
    }

    /// Density of modes `nu_0 = 1 / delta_omega`.
    pub fn density_of_modes(&self) -> f64 {
        1.0 / self.delta_omega
    }

    /// Angular frequency of mode `k` (1-based).
    pub fn omega(&self, k: usize) -> Result<f64> {
        self.check_mode(k)?;
        Ok(k as f64 * self.delta_omega)
    }

    pub fn check_mode(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n_modes {
            return Err(Error::ModeOutOfRange {
                index: k,
                n_modes: self.n_modes,
            });
        }
        Ok(())
    }

    pub fn modes(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_modes
    }
}
