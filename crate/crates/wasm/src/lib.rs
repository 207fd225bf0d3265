//! JSON-over-strings bindings for the browser demo.
//!
//! Each exported function takes one JSON config string and returns a JSON
//! string shaped `{"ok": ...}` or `{"error": "..."}`. Keeping the boundary
//! at strings means the JavaScript side needs no generated classes and the
//! same functions are unit-testable on the host without a wasm runtime.

use bdm_core::metastability::find_equilibria;
use bdm_core::model::{order_parameter, ModelParams, RateFamily, RateTable};
use bdm_core::spectral::{
    build_master_operator, compute_spectrum, steady_state, DistributionVector, Propagator,
};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelConfig {
    #[serde(rename = "F")]
    f: f64,
    #[serde(rename = "J")]
    j: f64,
    #[serde(default)]
    alpha: f64,
    beta: f64,
    gamma: f64,
    #[serde(rename = "N")]
    n_agents: usize,
}

impl ModelConfig {
    fn build(&self) -> Result<ModelParams, bdm_core::Error> {
        ModelParams::new(
            self.f,
            self.j,
            self.alpha,
            self.beta,
            self.gamma,
            self.n_agents,
        )
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvolveConfig {
    model: ModelConfig,
    n0: usize,
    times: Vec<f64>,
}

#[derive(Serialize)]
struct SteadyReply {
    /// Order parameter per state, the shared x-axis for all curves.
    m: Vec<f64>,
    prob: Vec<f64>,
    /// Landmark state indices (left mode, barrier, right mode) when the
    /// steady state is bistable; null otherwise.
    equilibria: Option<bdm_core::metastability::EquilibriaIndices>,
    relaxation_time: Option<f64>,
}

#[derive(Serialize)]
struct Curve {
    t: f64,
    prob: Vec<f64>,
}

#[derive(Serialize)]
struct EvolveReply {
    m: Vec<f64>,
    curves: Vec<Curve>,
}

#[derive(Serialize)]
struct MeanFieldReply {
    roots: bdm_core::model::EquilibriumSet,
    /// Rationality at which one root splits into three; null when the
    /// model has no transition (J * (1 + alpha) = 0).
    beta_c: Option<f64>,
}

fn order_axis(n_agents: usize) -> Vec<f64> {
    (0..=n_agents)
        .map(|n| order_parameter(n, n_agents))
        .collect()
}

/// Serializes a computation outcome into the `{"ok"}/{"error"}` envelope.
fn respond<T: Serialize>(result: Result<T, String>) -> String {
    #[derive(Serialize)]
    #[serde(rename_all = "lowercase")]
    enum Envelope<T> {
        Ok(T),
        Error(String),
    }
    let envelope = match result {
        Ok(value) => Envelope::Ok(value),
        Err(message) => Envelope::Error(message),
    };
    serde_json::to_string(&envelope).expect("reply types always serialize")
}

fn steady_reply(config: &str) -> Result<SteadyReply, String> {
    let cfg: ModelConfig = serde_json::from_str(config).map_err(|e| e.to_string())?;
    let params = cfg.build().map_err(|e| e.to_string())?;
    let rates = RateTable::build(&params, &RateFamily::Logit).map_err(|e| e.to_string())?;
    let steady = steady_state(&rates).map_err(|e| e.to_string())?;
    let op = build_master_operator(&rates);
    let spectrum = compute_spectrum(&op, &steady).map_err(|e| e.to_string())?;
    Ok(SteadyReply {
        m: order_axis(params.n_agents),
        prob: steady.probs().to_vec(),
        equilibria: find_equilibria(&steady).ok(),
        relaxation_time: spectrum.relaxation_time(),
    })
}

fn evolve_reply(config: &str) -> Result<EvolveReply, String> {
    let cfg: EvolveConfig = serde_json::from_str(config).map_err(|e| e.to_string())?;
    let params = cfg.model.build().map_err(|e| e.to_string())?;
    let rates = RateTable::build(&params, &RateFamily::Logit).map_err(|e| e.to_string())?;
    let steady = steady_state(&rates).map_err(|e| e.to_string())?;
    let op = build_master_operator(&rates);
    let spectrum = compute_spectrum(&op, &steady).map_err(|e| e.to_string())?;
    let propagator = Propagator::new(&rates, &spectrum).map_err(|e| e.to_string())?;
    let q0 = DistributionVector::delta(rates.n_max(), cfg.n0, 0.0).map_err(|e| e.to_string())?;
    let mut curves = Vec::with_capacity(cfg.times.len());
    for &t in &cfg.times {
        let dist = propagator.evolve(&q0, t).map_err(|e| e.to_string())?;
        curves.push(Curve {
            t,
            prob: dist.probs().to_vec(),
        });
    }
    Ok(EvolveReply {
        m: order_axis(params.n_agents),
        curves,
    })
}

fn mean_field_reply(config: &str) -> Result<MeanFieldReply, String> {
    let cfg: ModelConfig = serde_json::from_str(config).map_err(|e| e.to_string())?;
    let params = cfg.build().map_err(|e| e.to_string())?;
    Ok(MeanFieldReply {
        roots: params.mean_field_equilibria().map_err(|e| e.to_string())?,
        beta_c: params.critical_rationality().ok(),
    })
}

/// Steady-state distribution with bistability landmarks.
#[wasm_bindgen]
pub fn steady_state_json(config: &str) -> String {
    respond(steady_reply(config))
}

/// Time-dependent distributions from a delta start at `n0`.
#[wasm_bindgen]
pub fn evolve_json(config: &str) -> String {
    respond(evolve_reply(config))
}

/// Mean-field equilibria and the critical rationality.
#[wasm_bindgen]
pub fn mean_field_json(config: &str) -> String {
    respond(mean_field_reply(config))
}
