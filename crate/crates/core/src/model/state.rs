use serde::{Deserialize, Serialize};

use super::ModeLadder;
use crate::{Error, Result};

/// Mode occupations `n(omega_j)`, stored 0-based (`n[j - 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    n: Vec<f64>,
}

impl PopulationState {
    /// Validates that every occupation is finite and non-negative.
    pub fn new(n: Vec<f64>) -> Result<Self> {
        for (i, &v) in n.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    mode: i + 1,
                    value: v,
                });
            }
            if v < 0.0 {
                return Err(Error::NegativeOccupation {
                    mode: i + 1,
                    value: v,
                });
            }
        }
        Ok(Self { n })
    }

    pub fn for_ladder(n: Vec<f64>, ladder: &ModeLadder) -> Result<Self> {
        if n.len() != ladder.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: ladder.n_modes(),
                got: n.len(),
            });
        }
        Self::new(n)
    }

    pub fn zeros(n_modes: usize) -> Self {
        Self {
            n: vec![0.0; n_modes],
        }
    }

    pub(crate) fn from_vec_unchecked(n: Vec<f64>) -> Self {
        Self { n }
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    /// Occupation of mode `j` (1-based).
    pub fn occupation(&self, j: usize) -> f64 {
        self.n[j - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.n
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.n
    }

    /// Reduced internal energy `sum_j j n_j`, in units of `hbar delta_omega`.
    pub fn energy(&self) -> f64 {
        reduced_energy(&self.n)
    }

    /// Total photon number `sum_j n_j`.
    pub fn number(&self) -> f64 {
        self.n.iter().sum()
    }

    pub fn check_ladder(&self, ladder: &ModeLadder) -> Result<()> {
        if self.n.len() != ladder.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: ladder.n_modes(),
                got: self.n.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn reduced_energy(n: &[f64]) -> f64 {
    n.iter().enumerate().map(|(i, &v)| (i + 1) as f64 * v).sum()
}

fn default_occupancy() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// All photons in one mode: `n_{k_ini} = occupancy`, everything else empty.
    SingleMode {
        k_ini: usize,
        #[serde(default = "default_occupancy")]
        occupancy: f64,
    },
    /// One occupation per mode, 0-based.
    Explicit { occupations: Vec<f64> },
}

impl InitialCondition {
    pub fn single_mode(k_ini: usize) -> Self {
        Self::SingleMode {
            k_ini,
            occupancy: 1.0,
        }
    }

    pub fn validate(&self, ladder: &ModeLadder) -> Result<()> {
        match self {
            Self::SingleMode { k_ini, occupancy } => {
                if *k_ini == 0 || *k_ini > ladder.n_modes() {
                    return Err(Error::InvalidInitialCondition(format!(
                        "k_ini = {k_ini} outside 1..={}",
                        ladder.n_modes()
                    )));
                }
                if !(occupancy.is_finite() && *occupancy > 0.0) {
                    return Err(Error::InvalidInitialCondition(format!(
                        "occupancy must be positive and finite, got {occupancy}"
                    )));
                }
                Ok(())
            }
            Self::Explicit { occupations } => {
                PopulationState::for_ladder(occupations.clone(), ladder)
                    .map(|_| ())
                    .map_err(|e| Error::InvalidInitialCondition(e.to_string()))
            }
        }
    }

    pub fn to_state(&self, ladder: &ModeLadder) -> Result<PopulationState> {
        self.validate(ladder)?;
        Ok(match self {
            Self::SingleMode { k_ini, occupancy } => {
                let mut n = vec![0.0; ladder.n_modes()];
                n[k_ini - 1] = *occupancy;
                PopulationState::from_vec_unchecked(n)
            }
            Self::Explicit { occupations } => {
                PopulationState::from_vec_unchecked(occupations.clone())
            }
        })
    }

    /// `k_ini` for single-mode initial conditions.
    pub fn k_ini(&self) -> Option<usize> {
        match self {
            Self::SingleMode { k_ini, .. } => Some(*k_ini),
            Self::Explicit { .. } => None,
        }
    }
}

/// Bilinear mode-mode coupling constants `g_pq` (diagonal ignored).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCoupling {
    g: Vec<Vec<f64>>,
}

impl QuadraticCoupling {
    pub fn new(g: Vec<Vec<f64>>) -> Result<Self> {
        let n = g.len();
        for (p, row) in g.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidCoupling(format!(
                    "quadratic coupling must be square: row {} has {} entries, expected {n}",
                    p + 1,
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidCoupling(format!(
                    "quadratic coupling row {} has non-finite entry {v}",
                    p + 1
                )));
            }
        }
        Ok(Self { g })
    }

    pub fn n_modes(&self) -> usize {
        self.g.len()
    }

    /// `g_pq` for `p != q`, zero on the diagonal.
    pub fn g(&self, p: usize, q: usize) -> f64 {
        if p == q {
            0.0
        } else {
            self.g[p - 1][q - 1]
        }
    }
}
