//! Run configuration: the JSON file accepted by every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use threewave::equilibrium::{initial_energy, EquilibriumMethod};
use threewave::kinetics::IntegratorSettings;
use threewave::model::{
    CouplingModel, CouplingRegistry, InitialCondition, ModeLadder, PopulationState,
};

use crate::Failure;

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_modes: usize,
    #[serde(default = "unit")]
    pub delta_omega: f64,
    /// Tagged by `kind`; resolved through [`CouplingRegistry::builtin`].
    pub coupling: Value,
    pub initial: InitialCondition,
    pub tau_end: f64,
    #[serde(default = "unit")]
    pub record_every: f64,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    /// How `equilibrium` picks beta for its table.
    #[serde(default)]
    pub equilibrium_method: EquilibriumMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxis>,
}

/// Values substituted into the base configuration, one run per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepAxis {
    KIni(Vec<usize>),
    Coupling(Vec<Value>),
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::KIni(v) => v.len(),
            SweepAxis::Coupling(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for RunConfig {
    /// 800 modes, exponentially decaying coupling with `Gamma_0 = 0.01`,
    /// `gamma = 1`, one quantum in mode 30, integrated to `tau = 150`.
    fn default() -> Self {
        Self {
            n_modes: 800,
            delta_omega: 1.0,
            coupling: json!({"kind": "exponential_decay", "gamma0": 0.01, "gamma": 1.0}),
            initial: InitialCondition::single_mode(30),
            tau_end: 150.0,
            record_every: 1.0,
            integrator: IntegratorSettings::default(),
            equilibrium_method: EquilibriumMethod::ExactSum,
            output_dir: None,
            sweep: None,
        }
    }
}

/// A configuration resolved into model objects.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub ladder: ModeLadder,
    pub model: CouplingModel,
    pub initial: PopulationState,
    pub u_ini: f64,
    pub settings: IntegratorSettings,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Failure> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Failure::Config(anyhow::anyhow!(e)))?;
        cfg.prepare()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(anyhow::anyhow!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|f| Failure::Config(anyhow::anyhow!("{}: {}", path.display(), f)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates every part and builds the model objects.
    pub fn prepare(&self) -> Result<Experiment, Failure> {
        let cfg = |e: threewave::Error| Failure::Config(e.into());
        let ladder = ModeLadder::new(self.n_modes, self.delta_omega).map_err(cfg)?;
        let model = CouplingRegistry::builtin()
            .build(&self.coupling, self.n_modes)
            .map_err(cfg)?;
        let initial = self.initial.to_state(&ladder).map_err(cfg)?;
        let u_ini = initial_energy(&self.initial, &ladder).map_err(cfg)?;
        if !(self.tau_end.is_finite() && self.tau_end >= 0.0) {
            return Err(Failure::Config(anyhow::anyhow!(
                "tau_end must be finite and non-negative, got {}",
                self.tau_end
            )));
        }
        let settings = IntegratorSettings {
            record_every: self.record_every,
            ..self.integrator.clone()
        };
        settings.validate().map_err(cfg)?;
        if let Some(axis) = &self.sweep {
            if axis.is_empty() {
                return Err(Failure::Config(anyhow::anyhow!("sweep axis is empty")));
            }
        }
        Ok(Experiment {
            ladder,
            model,
            initial,
            u_ini,
            settings,
        })
    }

    /// The configuration as it is echoed into manifests: no output location
    /// and no sweep, so identical physics gives identical echoes.
    pub fn echo(&self) -> RunConfig {
        RunConfig {
            output_dir: None,
            sweep: None,
            ..self.clone()
        }
    }

    /// One configuration per sweep entry, with a directory name for each.
    pub fn sweep_runs(&self) -> Result<Vec<(String, RunConfig)>, Failure> {
        let axis = self
            .sweep
            .as_ref()
            .ok_or_else(|| Failure::Config(anyhow::anyhow!("config has no sweep axis")))?;
        if axis.is_empty() {
            return Err(Failure::Config(anyhow::anyhow!("sweep axis is empty")));
        }
        let base = self.echo();
        let runs = match axis {
            SweepAxis::KIni(ks) => {
                let occupancy = match self.initial {
                    InitialCondition::SingleMode { occupancy, .. } => occupancy,
                    _ => 1.0,
                };
                ks.iter()
                    .enumerate()
                    .map(|(i, &k)| {
                        let mut c = base.clone();
                        c.initial = InitialCondition::SingleMode {
                            k_ini: k,
                            occupancy,
                        };
                        (format!("run_{i:03}_k_ini_{k}"), c)
                    })
                    .collect()
            }
            SweepAxis::Coupling(cs) => cs
                .iter()
                .enumerate()
                .map(|(i, spec)| {
                    let mut c = base.clone();
                    c.coupling = spec.clone();
                    let kind = spec
                        .get("kind")
                        .and_then(Value::as_str)
                        .unwrap_or("unknown");
                    (format!("run_{i:03}_{kind}"), c)
                })
                .collect(),
        };
        Ok(runs)
    }
}
