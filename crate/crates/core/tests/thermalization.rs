use std::sync::Arc;

use serde_json::{json, Value};

use threewave::equilibrium::{fit_temperature, solve_beta};
use threewave::kinetics::{integrate, rhs, IntegratorSettings};
use threewave::model::{
    CouplingKernel, CouplingModel, CouplingRegistry, InitialCondition, ModeLadder,
};
use threewave::stability::kappa;

/// Pair weight falling as a power of the frequency gap.
#[derive(Debug)]
struct PowerLaw {
    scale: f64,
}

impl CouplingKernel for PowerLaw {
    fn kind(&self) -> &'static str {
        "power_law"
    }

    fn pair_weight(&self, p: usize, q: usize) -> f64 {
        self.scale / (1.0 + p.abs_diff(q) as f64).powi(2)
    }

    fn mode_weight(&self, r: usize) -> f64 {
        (r as f64).sqrt()
    }

    fn params(&self) -> Value {
        json!({"scale": self.scale})
    }
}

fn power_law(params: &Value, _n: usize) -> threewave::Result<Arc<dyn CouplingKernel>> {
    let scale = params["scale"]
        .as_f64()
        .ok_or_else(|| threewave::Error::InvalidCoupling("scale missing".into()))?;
    Ok(Arc::new(PowerLaw { scale }))
}

fn thermalize(
    model: &CouplingModel,
    ladder: &ModeLadder,
    k_ini: usize,
    tau_end: f64,
) -> (f64, f64) {
    let settings = IntegratorSettings {
        record_every: tau_end / 10.0,
        ..Default::default()
    };
    let ic = InitialCondition::single_mode(k_ini);
    let traj = integrate(&ic, model, ladder, tau_end, &settings).unwrap();
    assert!(traj.max_relative_energy_drift() < 1e-12);
    let fit = fit_temperature(traj.final_state(), 1e-40).unwrap();
    let beta = solve_beta(k_ini as f64, ladder, 1e-13).unwrap().beta;
    (fit.beta, beta)
}

#[test]
fn builtin_kernels_reach_energy_matched_temperature() {
    let ladder = ModeLadder::reduced(60).unwrap();
    for model in [
        CouplingModel::exponential_decay(0.05, 1.0, 60).unwrap(),
        CouplingModel::constant_product(0.05, 60).unwrap(),
    ] {
        let (fitted, exact) = thermalize(&model, &ladder, 12, 300.0);
        assert!(
            (fitted - exact).abs() < 1e-3 * exact,
            "{}: {fitted} vs {exact}",
            model.kind()
        );
    }
}

#[test]
fn registered_kernel_thermalizes() {
    let mut registry = CouplingRegistry::builtin();
    registry.register("power_law", power_law);
    let ladder = ModeLadder::reduced(60).unwrap();
    let model = registry
        .build(&json!({"kind": "power_law", "scale": 0.05}), 60)
        .unwrap();
    assert_eq!(model.kind(), "power_law");
    assert!(registry.build(&json!({"kind": "power_law"}), 60).is_err());

    let beta = solve_beta(12.0, &ladder, 1e-13).unwrap();
    let stationary = rhs(&beta.populations, &model, &ladder).unwrap();
    assert!(stationary.max_abs() < 1e-14);
    assert!(kappa(beta.beta, &model, &ladder).unwrap().min() > 0.0);

    let (fitted, exact) = thermalize(&model, &ladder, 12, 300.0);
    assert!((fitted - exact).abs() < 1e-3 * exact, "{fitted} vs {exact}");
}
