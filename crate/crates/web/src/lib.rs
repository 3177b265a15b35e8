//! Browser bindings: a reactor you can feed recipes, the pump/MFC balance
//! curve and the alien market. Results cross the boundary as JSON strings.

use std::collections::BTreeMap;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use alp_core::config::{reference_config, ReferenceRun};
use alp_core::flow::equilibrium_inlet_pressure;
use alp_core::market::{self, MarketRule};
use alp_core::telemetry::build_narrative;
use alp_core::{parse_recipe, Reactor, ReactorConfig, ReactorState, RunOptions};

fn config(id: &str) -> Result<ReactorConfig, String> {
    match id {
        "run1" => Ok(reference_config(ReferenceRun::Run1)),
        "run2" => Ok(reference_config(ReferenceRun::Run2)),
        _ => Err(format!("unknown reactor '{id}' (run1 or run2)")),
    }
}

#[derive(Serialize)]
struct RunView<'a> {
    time: &'a [f64],
    pressure: &'a [f64],
    qcm: &'a [f64],
    valves: &'a BTreeMap<u32, Vec<u8>>,
    narrative: String,
    /// Reactor clock after the run (s).
    clock: f64,
    failure: Option<String>,
}

/// One simulated reactor whose surface persists between recipes.
#[wasm_bindgen]
pub struct Lab {
    reactor: Reactor,
    state: ReactorState,
}

impl Lab {
    pub fn open(config_id: &str) -> Result<Lab, String> {
        let reactor = Reactor::new(config(config_id)?);
        let state = reactor.initial_state();
        Ok(Lab { reactor, state })
    }

    /// Run a recipe and describe it as JSON.
    pub fn execute(&mut self, recipe: &str) -> Result<String, String> {
        let recipe = parse_recipe(recipe).map_err(|e| e.to_string())?;
        let before = self.state.clone();
        let run = self
            .reactor
            .run_recipe(&mut self.state, &recipe, &RunOptions::default())
            .map_err(|r| format!("refused: {}", r.hard.join("; ")))?;
        let failure = run.failure.as_ref().map(|e| e.to_string());
        if failure.is_some() {
            self.state = before;
            self.state.time += run.elapsed;
        }
        let narrative = build_narrative(&run.trace, self.reactor.config(), &run.report, failure.as_deref());
        let view = RunView {
            time: &run.trace.time,
            pressure: run.trace.pressure.first().map_or(&[], |v| v.as_slice()),
            qcm: run.trace.qcm.first().map_or(&[], |v| v.as_slice()),
            valves: &run.trace.valves,
            narrative: narrative.text(),
            clock: self.state.time,
            failure,
        };
        serde_json::to_string(&view).map_err(|e| e.to_string())
    }

    pub fn clock(&self) -> f64 {
        self.state.time
    }
}

#[wasm_bindgen]
impl Lab {
    #[wasm_bindgen(constructor)]
    pub fn new(config_id: &str) -> Result<Lab, JsError> {
        Lab::open(config_id).map_err(|e| JsError::new(&e))
    }

    pub fn run(&mut self, recipe: &str) -> Result<String, JsError> {
        self.execute(recipe).map_err(|e| JsError::new(&e))
    }

    /// Fresh surface, clock back to zero.
    pub fn reset(&mut self) {
        self.state = self.reactor.initial_state();
    }

    #[wasm_bindgen(getter)]
    pub fn time(&self) -> f64 {
        self.clock()
    }
}

#[derive(Serialize)]
struct PumpView {
    flow: Vec<f64>,
    pressure: Vec<f64>,
    base_pressure: f64,
    threshold_pressure: f64,
}

/// Equilibrium pressure over the MFC range at one reactor temperature.
pub fn pump_curve_json(config_id: &str, temperature: f64) -> Result<String, String> {
    let cfg = config(config_id)?;
    let (lo, hi) = (cfg.mfc.min_flow, cfg.mfc.max_flow);
    let flow: Vec<f64> = (0..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect();
    let pressure = flow
        .iter()
        .map(|&f| equilibrium_inlet_pressure(f, temperature, &cfg.pump).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    serde_json::to_string(&PumpView {
        flow,
        pressure,
        base_pressure: cfg.pump.base_pressure,
        threshold_pressure: cfg.pump.threshold_pressure,
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn pump_curve(config_id: &str, temperature: f64) -> Result<String, JsError> {
    pump_curve_json(config_id, temperature).map_err(|e| JsError::new(&e))
}

/// Would a market that refuses `letters` sell `item`?
pub fn market_accepts(item: &str, letters: &str) -> Result<bool, String> {
    let rule = if letters.trim().is_empty() {
        MarketRule::default()
    } else {
        MarketRule::from_letters(letters).map_err(|e| e.to_string())?
    };
    Ok(market::market_query(item, &rule))
}

#[wasm_bindgen]
pub fn market_query(item: &str, letters: &str) -> Result<bool, JsError> {
    market_accepts(item, letters).map_err(|e| JsError::new(&e))
}
