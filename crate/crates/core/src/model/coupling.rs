//! Three-wave coupling kernels.
//!
//! The mixing amplitudes factorize as `M_pqr = A_pq * B_r`, so a kernel is
//! fully described by a pair weight (`|A_pq|^2`, with the rate prefactor
//! `4 pi nu_0 / hbar^2` folded in) and a mode weight (`|B_r|^2`). Every kernel
//! returns rates in units of the free spectral range, i.e. per reduced time.
//!
//! Kernels are interchangeable strategies behind [`CouplingKernel`]. The
//! [`CouplingRegistry`] maps a `kind` name to a constructor so configuration
//! files can select one at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Error, Result};

pub trait CouplingKernel: fmt::Debug + Send + Sync {
    /// Registry name of this kernel family.
    fn kind(&self) -> &'static str;

    /// `(4 pi nu_0 / hbar^2) |A_pq|^2` in units of `delta_omega`. Must be
    /// symmetric in `p, q` and non-negative.
    fn pair_weight(&self, p: usize, q: usize) -> f64;

    /// `|B_r|^2`. Only called for `1 <= r <= N`; the truncation rule
    /// `|B_r|^2 = 0` for `r > N` is applied by [`CouplingModel`].
    fn mode_weight(&self, r: usize) -> f64;

    /// Checks that the kernel can serve a ladder with `n_modes` modes.
    fn check_modes(&self, _n_modes: usize) -> Result<()> {
        Ok(())
    }

    /// Kernel parameters, for manifests and round trips through the registry.
    fn params(&self) -> Value;
}

/// `|A_pq|^2 = g^2 exp(-gamma |p - q|)`, `|B_r|^2 = r`, with
/// `gamma0 = (4 pi / hbar^2) nu_0 g^2` in units of `delta_omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialDecay {
    pub gamma0: f64,
    pub gamma: f64,
}

impl ExponentialDecay {
    pub const KIND: &'static str = "exponential_decay";

    pub fn new(gamma0: f64, gamma: f64) -> Result<Self> {
        check_non_negative("gamma0", gamma0)?;
        check_non_negative("gamma", gamma)?;
        Ok(Self { gamma0, gamma })
    }
}

impl CouplingKernel for ExponentialDecay {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn pair_weight(&self, p: usize, q: usize) -> f64 {
        self.gamma0 * (-self.gamma * p.abs_diff(q) as f64).exp()
    }

    fn mode_weight(&self, r: usize) -> f64 {
        r as f64
    }

    fn params(&self) -> Value {
        serde_json::to_value(self).expect("plain struct serializes")
    }
}

/// `(4 pi nu_0 / hbar^2) |A_pq|^2 |B_r|^2 = c` for all `p, q, r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantProduct {
    pub c: f64,
}

impl ConstantProduct {
    pub const KIND: &'static str = "constant_product";

    pub fn new(c: f64) -> Result<Self> {
        check_non_negative("c", c)?;
        Ok(Self { c })
    }
}

impl CouplingKernel for ConstantProduct {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn pair_weight(&self, _p: usize, _q: usize) -> f64 {
        self.c
    }

    fn mode_weight(&self, _r: usize) -> f64 {
        1.0
    }

    fn params(&self) -> Value {
        serde_json::to_value(self).expect("plain struct serializes")
    }
}

/// Explicit tables: `a2[p-1][q-1]` holds `(4 pi nu_0 / hbar^2) |A_pq|^2` and
/// `b2[r-1]` holds `|B_r|^2`.
///
/// `a2` must be exactly symmetric; asymmetric input is rejected because the
/// gain/loss pairing that conserves energy relies on it. `b2` may have length
/// `N` or `2N`; entries beyond `N` are zeroed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tabular {
    a2: Vec<Vec<f64>>,
    b2: Vec<f64>,
}

impl Tabular {
    pub const KIND: &'static str = "tabular";

    pub fn new(a2: Vec<Vec<f64>>, mut b2: Vec<f64>) -> Result<Self> {
        let n = a2.len();
        if n < 2 {
            return Err(Error::InvalidCoupling(format!(
                "tabular a2 must be at least 2x2, got {n} rows"
            )));
        }
        for (p, row) in a2.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidCoupling(format!(
                    "tabular a2 must be square: row {} has {} entries, expected {n}",
                    p + 1,
                    row.len()
                )));
            }
            for (q, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidCoupling(format!(
                        "tabular a2[{}][{}] = {v} must be finite and non-negative",
                        p + 1,
                        q + 1
                    )));
                }
            }
        }
        #[allow(clippy::needless_range_loop)]
        for p in 0..n {
            for q in (p + 1)..n {
                if a2[p][q] != a2[q][p] {
                    return Err(Error::InvalidCoupling(format!(
                        "tabular a2 must be symmetric (|A_pq|^2 = |A_qp|^2 is required for energy conservation): a2[{}][{}] = {} but a2[{}][{}] = {}",
                        p + 1,
                        q + 1,
                        a2[p][q],
                        q + 1,
                        p + 1,
                        a2[q][p]
                    )));
                }
            }
        }
        if b2.len() != n && b2.len() != 2 * n {
            return Err(Error::InvalidCoupling(format!(
                "tabular b2 must have length {n} or {}, got {}",
                2 * n,
                b2.len()
            )));
        }
        for (r, &v) in b2.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidCoupling(format!(
                    "tabular b2[{}] = {v} must be finite and non-negative",
                    r + 1
                )));
            }
        }
        b2.truncate(n);
        b2.resize(2 * n, 0.0);
        Ok(Self { a2, b2 })
    }

    /// All-zero tables: no coupling at all.
    pub fn zeros(n_modes: usize) -> Result<Self> {
        Self::new(vec![vec![0.0; n_modes]; n_modes], vec![0.0; n_modes])
    }

    pub fn n_modes(&self) -> usize {
        self.a2.len()
    }
}

impl CouplingKernel for Tabular {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn pair_weight(&self, p: usize, q: usize) -> f64 {
        self.a2[p - 1][q - 1]
    }

    fn mode_weight(&self, r: usize) -> f64 {
        self.b2[r - 1]
    }

    fn check_modes(&self, n_modes: usize) -> Result<()> {
        if self.n_modes() != n_modes {
            return Err(Error::InvalidCoupling(format!(
                "tabular coupling has {} modes but the ladder has {n_modes}",
                self.n_modes()
            )));
        }
        Ok(())
    }

    fn params(&self) -> Value {
        serde_json::to_value(self).expect("plain struct serializes")
    }
}

fn check_non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidCoupling(format!(
            "{name} must be finite and non-negative, got {v}"
        )))
    }
}

/// A coupling kernel bound to a ladder size, exposing the gain and loss rate
/// weights of the kinetic equation with the truncation rule applied.
#[derive(Debug, Clone)]
pub struct CouplingModel {
    kernel: Arc<dyn CouplingKernel>,
    n_modes: usize,
}

impl CouplingModel {
    pub fn new(kernel: Arc<dyn CouplingKernel>, n_modes: usize) -> Result<Self> {
        kernel.check_modes(n_modes)?;
        Ok(Self { kernel, n_modes })
    }

    pub fn exponential_decay(gamma0: f64, gamma: f64, n_modes: usize) -> Result<Self> {
        Self::new(Arc::new(ExponentialDecay::new(gamma0, gamma)?), n_modes)
    }

    pub fn constant_product(c: f64, n_modes: usize) -> Result<Self> {
        Self::new(Arc::new(ConstantProduct::new(c)?), n_modes)
    }

    pub fn tabular(a2: Vec<Vec<f64>>, b2: Vec<f64>) -> Result<Self> {
        let table = Tabular::new(a2, b2)?;
        let n = table.n_modes();
        Self::new(Arc::new(table), n)
    }

    pub fn kind(&self) -> &'static str {
        self.kernel.kind()
    }

    pub fn kernel(&self) -> &dyn CouplingKernel {
        self.kernel.as_ref()
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Weight of the gain term `k` in the rate of mode `j`:
    /// `(4 pi nu_0 / hbar^2) 2 |A_jk|^2 |B_{j+k}|^2`, zero when `j + k > N`.
    pub fn kernel_gain(&self, j: usize, k: usize) -> Result<f64> {
        self.check_mode(j)?;
        self.check_mode(k)?;
        Ok(self.gain_unchecked(j, k))
    }

    /// Weight of the loss term `k` in the rate of mode `j`:
    /// `(4 pi nu_0 / hbar^2) |A_{k,j-k}|^2 |B_j|^2` for `1 <= k < j`.
    pub fn kernel_loss(&self, j: usize, k: usize) -> Result<f64> {
        self.check_mode(j)?;
        self.check_mode(k)?;
        if k >= j {
            return Err(Error::InvalidModePair {
                j,
                k,
                reason: "loss terms require k < j",
            });
        }
        Ok(self.loss_unchecked(j, k))
    }

    pub(crate) fn gain_unchecked(&self, j: usize, k: usize) -> f64 {
        let r = j + k;
        if r > self.n_modes {
            return 0.0;
        }
        2.0 * (self.kernel.pair_weight(j, k) * self.kernel.mode_weight(r))
    }

    pub(crate) fn loss_unchecked(&self, j: usize, k: usize) -> f64 {
        self.kernel.pair_weight(k, j - k) * self.kernel.mode_weight(j)
    }

    /// Largest gain weight over all mode pairs. Gain weights are twice the
    /// matching loss weights, so this bounds every kernel value.
    pub fn max_kernel(&self) -> f64 {
        let n = self.n_modes;
        let mut max = 0.0f64;
        for j in 1..n {
            for k in 1..=(n - j) {
                max = max.max(self.gain_unchecked(j, k));
            }
        }
        max
    }

    /// True when every gain and loss weight vanishes.
    pub fn is_zero(&self) -> bool {
        self.max_kernel() == 0.0
    }

    fn check_mode(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n_modes {
            return Err(Error::ModeOutOfRange {
                index: k,
                n_modes: self.n_modes,
            });
        }
        Ok(())
    }
}

/// Builds a kernel from its JSON parameters (without the `kind` tag) for a
/// ladder with the given number of modes.
pub type CouplingConstructor = fn(&Value, usize) -> Result<Arc<dyn CouplingKernel>>;

/// Name-indexed set of coupling kernel constructors.
#[derive(Clone)]
pub struct CouplingRegistry {
    entries: BTreeMap<String, CouplingConstructor>,
}

impl Default for CouplingRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl fmt::Debug for CouplingRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

impl CouplingRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Registry holding the built-in kernels.
    pub fn builtin() -> Self {
        let mut registry = Self::empty();
        registry.register(ExponentialDecay::KIND, |params, _| {
            let p: ExponentialDecay = parse_params(ExponentialDecay::KIND, params)?;
            Ok(Arc::new(ExponentialDecay::new(p.gamma0, p.gamma)?))
        });
        registry.register(ConstantProduct::KIND, |params, _| {
            let p: ConstantProduct = parse_params(ConstantProduct::KIND, params)?;
            Ok(Arc::new(ConstantProduct::new(p.c)?))
        });
        registry.register(Tabular::KIND, |params, _| {
            let p: Tabular = parse_params(Tabular::KIND, params)?;
            Ok(Arc::new(Tabular::new(p.a2, p.b2)?))
        });
        registry
    }

    /// Adds or replaces a constructor.
    pub fn register(&mut self, kind: &str, ctor: CouplingConstructor) {
        self.entries.insert(kind.to_owned(), ctor);
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, kind: &str) -> bool {
        self.entries.contains_key(kind)
    }

    /// Builds a coupling from a JSON object `{"kind": <name>, ...params}`.
    pub fn build(&self, spec: &Value, n_modes: usize) -> Result<CouplingModel> {
        let mut obj = spec
            .as_object()
            .cloned()
            .ok_or_else(|| Error::InvalidCoupling("coupling must be a JSON object".into()))?;
        let kind = match obj.remove("kind") {
            Some(Value::String(s)) => s,
            _ => {
                return Err(Error::InvalidCoupling(
                    "coupling needs a string `kind` field".into(),
                ))
            }
        };
        self.build_kind(&kind, &Value::Object(obj), n_modes)
    }

    pub fn build_kind(&self, kind: &str, params: &Value, n_modes: usize) -> Result<CouplingModel> {
        let ctor = self
            .entries
            .get(kind)
            .ok_or_else(|| Error::UnknownStrategy {
                what: "coupling kind",
                name: kind.to_owned(),
                available: self.kinds().collect::<Vec<_>>().join(", "),
            })?;
        CouplingModel::new(ctor(params, n_modes)?, n_modes)
    }
}

fn parse_params<T: DeserializeOwned>(kind: &str, params: &Value) -> Result<T> {
    serde_json::from_value(params.clone())
        .map_err(|e| Error::InvalidCoupling(format!("{kind}: {e}")))
}
