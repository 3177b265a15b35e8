//! Time integration of gas transport and surface chemistry along the tube.
//!
//! Finite-volume method of lines on `N` equal sections: central differences
//! for diffusion, first-order upwind for advection, explicit Euler in time.
//! The inlet face carries the bubbler concentration of every open valve
//! (Dirichlet), the outlet uses a zero-curvature outflow so gas is flushed
//! into the pump without accumulating.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{validate_recipe_from, ReactorConfig, SensorKind, ValidationReport};
use crate::error::SolverError;
use crate::flow::{vapor_pressure, FlowState};
use crate::kinetics::{accumulate_sources, Network, SourceTerms};
use crate::recipe::{expand, ControlState, Recipe, RecipeLine, SegmentSpec};
use crate::telemetry::{self, SensorSample};

/// Molar gas constant, J/(mol·K).
pub const GAS_CONSTANT: f64 = 8.314_462_618;

/// Sensor sampling period (s).
pub const SAMPLE_PERIOD: f64 = 0.1;

/// Safety factor on the explicit stability bound.
pub const CFL_SAFETY: f64 = 0.8;

const TIME_EPS: f64 = 1e-9;

/// Substeps allowed per sampling period before a run is declared stiff.
const MAX_SUBSTEPS: usize = 2_000_000;

/// Everything that evolves during a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactorState {
    /// Simulated time since the reactor was created (s).
    pub time: f64,
    pub controls: ControlState,
    /// mol/m³, `[chemical][section]`
    pub concentrations: Vec<Vec<f64>>,
    /// `[surface][section]`, sums to one in every section.
    pub coverages: Vec<Vec<f64>>,
    /// kg/m², `[solid][section]`
    pub solid_mass: Vec<Vec<f64>>,
    /// Moles drawn from each bubbler, keyed by valve id.
    pub bubbler_consumption: BTreeMap<u32, f64>,
    /// Areal mass (kg/m²) that reads as zero on each QCM.
    pub qcm_reference: Vec<f64>,
}

impl ReactorState {
    /// Largest deviation of Σθ from one over all sections.
    pub fn coverage_error(&self) -> f64 {
        let n = self.coverages.first().map_or(0, Vec::len);
        (0..n)
            .map(|x| (self.coverages.iter().map(|s| s[x]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Drop all gas from the tube (the reactor equilibrates between recipes).
    pub fn clear_gas(&mut self) {
        for c in &mut self.concentrations {
            c.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// Inlet values imposed by the valves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    /// mol/m³ per chemical at x = 0.
    pub inlet: Vec<f64>,
}

/// Net fluxes through the tube ends during one step, mol/(m²·s) per chemical.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepFluxes {
    pub inflow: Vec<f64>,
    pub outflow: Vec<f64>,
    /// Most negative concentration produced before clamping.
    pub min_raw: f64,
}

/// Full fields at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub time: f64,
    pub concentrations: Vec<Vec<f64>>,
    pub coverages: Vec<Vec<f64>>,
    pub solid_mass: Vec<Vec<f64>>,
}

/// Per-step summary used by the narrative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub block: usize,
    pub cycle: u32,
    pub line: RecipeLine,
    pub start: f64,
    pub end: f64,
    pub open_valves: Vec<u32>,
    pub reactor_temperature: f64,
    /// Per pressure sensor.
    pub pressure_max: Vec<f64>,
    pub pressure_mean: Vec<f64>,
    /// Per QCM, ng/cm² at step start and end.
    pub qcm_start: Vec<f64>,
    pub qcm_end: Vec<f64>,
}

impl StepRecord {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn qcm_change(&self, sensor: usize) -> f64 {
        self.qcm_end[sensor] - self.qcm_start[sensor]
    }
}

/// Sensor and setpoint series on a common 0.1 s time base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceBundle {
    /// Reactor clock at the first sample.
    pub origin: f64,
    pub pressure_positions: Vec<f64>,
    pub qcm_positions: Vec<f64>,
    /// Time since `origin` (s).
    pub time: Vec<f64>,
    /// Pa, `[sensor][sample]`
    pub pressure: Vec<Vec<f64>>,
    /// ng/cm², `[sensor][sample]`
    pub qcm: Vec<Vec<f64>>,
    pub valves: BTreeMap<u32, Vec<u8>>,
    pub reactor_temperature: Vec<f64>,
    pub bubbler_temperatures: BTreeMap<u32, Vec<f64>>,
    pub mfc_flow: Vec<f64>,
    pub steps: Vec<StepRecord>,
    next_tick: u64,
}

impl TraceBundle {
    pub fn new(config: &ReactorConfig, origin: f64) -> TraceBundle {
        let pos = |kind| {
            config
                .sensors
                .iter()
                .filter(|s| s.kind == kind)
                .map(|s| s.position)
                .collect::<Vec<_>>()
        };
        let pressure_positions = pos(SensorKind::Pressure);
        let qcm_positions = pos(SensorKind::Qcm);
        TraceBundle {
            origin,
            pressure: vec![Vec::new(); pressure_positions.len()],
            qcm: vec![Vec::new(); qcm_positions.len()],
            pressure_positions,
            qcm_positions,
            time: Vec::new(),
            valves: config.bubblers.iter().map(|b| (b.valve_id, Vec::new())).collect(),
            reactor_temperature: Vec::new(),
            bubbler_temperatures: config
                .bubblers
                .iter()
                .map(|b| (b.valve_id, Vec::new()))
                .collect(),
            mfc_flow: Vec::new(),
            steps: Vec::new(),
            next_tick: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    fn next_tick_time(&self) -> f64 {
        self.origin + self.next_tick as f64 * SAMPLE_PERIOD
    }

    fn push(&mut self, sample: &SensorSample, controls: &ControlState) {
        self.time.push(self.next_tick as f64 * SAMPLE_PERIOD);
        for (series, v) in self.pressure.iter_mut().zip(&sample.pressure) {
            series.push(*v);
        }
        for (series, v) in self.qcm.iter_mut().zip(&sample.qcm) {
            series.push(*v);
        }
        for (id, series) in self.valves.iter_mut() {
            series.push(u8::from(controls.is_open(*id)));
        }
        for (id, series) in self.bubbler_temperatures.iter_mut() {
            series.push(controls.bubbler_temperatures.get(id).copied().unwrap_or(f64::NAN));
        }
        self.reactor_temperature.push(controls.reactor_temperature);
        self.mfc_flow.push(controls.mfc_flow);
        self.next_tick += 1;
    }
}

/// Options for a recipe run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Full-field snapshot interval (s); `None` disables snapshots.
    pub snapshot_interval: Option<f64>,
    /// Multiplies the stable step bound; below 1 for refinement studies.
    pub time_step_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            snapshot_interval: None,
            time_step_scale: 1.0,
        }
    }
}

/// Result of executing a recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeRun {
    pub report: ValidationReport,
    pub segments: Vec<SegmentSpec>,
    pub trace: TraceBundle,
    pub snapshots: Vec<FieldSnapshot>,
    /// Simulated time actually integrated (s).
    pub elapsed: f64,
    /// Set when the integrator aborted; the trace is then partial.
    pub failure: Option<SolverError>,
    /// Most negative concentration seen before clamping.
    pub min_raw_concentration: f64,
}

/// Quantities that stay fixed while the controls do not change.
struct SegmentContext {
    flow: FlowState,
    inlet: Vec<f64>,
    ks: Vec<f64>,
    dt_max: f64,
}

/// A compiled reactor: configuration plus index-resolved chemistry.
#[derive(Debug, Clone)]
pub struct Reactor {
    config: ReactorConfig,
    network: Network,
    dx: f64,
    diffusion: Vec<f64>,
    pressure_sections: Vec<usize>,
    qcm_sections: Vec<usize>,
}

impl Reactor {
    pub fn new(config: ReactorConfig) -> Reactor {
        let network = Network::new(&config);
        let g = &config.geometry;
        let sections_of = |kind| {
            config
                .sensors
                .iter()
                .filter(|s| s.kind == kind)
                .map(|s| g.section_at(s.position))
                .collect::<Vec<_>>()
        };
        Reactor {
            dx: g.section_width(),
            diffusion: config.chemicals.iter().map(|c| c.diffusion_coefficient).collect(),
            pressure_sections: sections_of(SensorKind::Pressure),
            qcm_sections: sections_of(SensorKind::Qcm),
            network,
            config,
        }
    }

    pub fn config(&self) -> &ReactorConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn sections(&self) -> usize {
        self.config.geometry.sections
    }

    pub fn pressure_sections(&self) -> &[usize] {
        &self.pressure_sections
    }

    pub fn qcm_sections(&self) -> &[usize] {
        &self.qcm_sections
    }

    /// Fresh reactor: no gas, initial surface everywhere, no deposit.
    pub fn initial_state(&self) -> ReactorState {
        let n = self.sections();
        let init = self
            .config
            .surface_index(&self.config.initial_surface)
            .expect("validated");
        let mut coverages = vec![vec![0.0; n]; self.config.surfaces.len()];
        coverages[init] = vec![1.0; n];
        let mut state = ReactorState {
            time: 0.0,
            controls: self.config.initial_controls(),
            concentrations: vec![vec![0.0; n]; self.config.chemicals.len()],
            coverages,
            solid_mass: vec![vec![0.0; n]; self.config.solids.len()],
            bubbler_consumption: self.config.bubblers.iter().map(|b| (b.valve_id, 0.0)).collect(),
            qcm_reference: Vec::new(),
        };
        state.qcm_reference = self.qcm_sections.iter().map(|&x| self.areal_mass(&state, x)).collect();
        state
    }

    /// Deposit plus adsorbed groups at section `x` (kg/m²).
    pub fn areal_mass(&self, state: &ReactorState, x: usize) -> f64 {
        let solid: f64 = state.solid_mass.iter().map(|m| m[x]).sum();
        let groups: f64 = self
            .config
            .surfaces
            .iter()
            .zip(&state.coverages)
            .map(|(s, th)| th[x] * s.site_density * s.group_molar_mass)
            .sum();
        solid + groups
    }

    /// Carrier flow for a set of controls.
    pub fn flow(&self, controls: &ControlState) -> Result<FlowState, SolverError> {
        FlowState::compute(
            controls.mfc_flow,
            controls.reactor_temperature,
            &self.config.pump,
            &self.config.geometry,
            self.config.carrier_gas.viscosity,
        )
        .map_err(|e| SolverError::Unstable {
            time: 0.0,
            detail: e.to_string(),
        })
    }

    /// Inlet concentrations: `p_vap(T_bubbler)/(R T_reactor)` for chemicals
    /// whose valve is open, zero otherwise.
    pub fn apply_boundary(&self, state: &ReactorState) -> Result<Boundary, SolverError> {
        let mut inlet = vec![0.0; self.config.chemicals.len()];
        let t = state.controls.reactor_temperature;
        for b in &self.config.bubblers {
            if !state.controls.is_open(b.valve_id) {
                continue;
            }
            let ci = self.config.chemical_index(&b.chemical).expect("validated");
            let antoine = self.config.chemicals[ci].antoine.as_ref().expect("validated");
            let tb = state
                .controls
                .bubbler_temperatures
                .get(&b.valve_id)
                .copied()
                .unwrap_or(b.temperature);
            let p = vapor_pressure(antoine, tb).map_err(|e| SolverError::Unstable {
                time: state.time,
                detail: e.to_string(),
            })?;
            inlet[ci] += p / (GAS_CONSTANT * t);
        }
        Ok(Boundary { inlet })
    }

    fn context(&self, state: &ReactorState) -> Result<SegmentContext, SolverError> {
        let flow = self.flow(&state.controls)?;
        let inlet = self.apply_boundary(state)?.inlet;
        let ks = self.network.coefficients(state.controls.reactor_temperature);
        let dt_max = self.stable_dt_with(state, &flow, &inlet, &ks);
        Ok(SegmentContext {
            flow,
            inlet,
            ks,
            dt_max,
        })
    }

    /// Largest stable explicit time step for the current state and controls.
    pub fn stable_dt(&self, state: &ReactorState) -> Result<f64, SolverError> {
        Ok(self.context(state)?.dt_max)
    }

    fn stable_dt_with(&self, state: &ReactorState, flow: &FlowState, inlet: &[f64], ks: &[f64]) -> f64 {
        let dx = self.dx;
        let v = flow.axial_velocity.max(0.0);
        let net = &self.network;
        let mut gas_sink = vec![0.0; net.chemicals];
        let mut coverage_rate = 0.0f64;
        let c_max: Vec<f64> = state
            .concentrations
            .iter()
            .zip(inlet)
            .map(|(c, &cin)| c.iter().copied().fold(cin, f64::max))
            .collect();
        let sigma = net.site_density.iter().copied().fold(0.0, f64::max);
        for (r, &k) in net.reactions.iter().zip(ks) {
            gas_sink[r.gas] += net.wall_factor * k * sigma;
            coverage_rate += k * c_max[r.gas];
        }
        let mut rate = coverage_rate;
        for (i, d) in self.diffusion.iter().enumerate() {
            // 3D/dx² bounds the half-cell at the Dirichlet inlet
            rate = rate.max(3.0 * d / (dx * dx) + v / dx + gas_sink[i]);
        }
        if rate > 0.0 {
            CFL_SAFETY / rate
        } else {
            f64::INFINITY
        }
    }

    /// Advance the state by `dt` with the controls currently in force.
    pub fn step(&self, state: &mut ReactorState, dt: f64) -> Result<StepFluxes, SolverError> {
        let ctx = self.context(state)?;
        let mut scratch = SourceTerms::zeros(&self.network, self.sections());
        self.step_with(state, dt, &ctx, &mut scratch)
    }

    fn step_with(
        &self,
        state: &mut ReactorState,
        dt: f64,
        ctx: &SegmentContext,
        src: &mut SourceTerms,
    ) -> Result<StepFluxes, SolverError> {
        let n = self.sections();
        let dx = self.dx;
        let v = ctx.flow.axial_velocity.max(0.0);
        accumulate_sources(&self.network, &ctx.ks, &state.concentrations, &state.coverages, src);

        let mut fluxes = StepFluxes {
            inflow: vec![0.0; self.network.chemicals],
            outflow: vec![0.0; self.network.chemicals],
            min_raw: 0.0,
        };
        let mut face = vec![0.0; n + 1];
        for (i, c) in state.concentrations.iter_mut().enumerate() {
            let d = self.diffusion[i];
            let cin = ctx.inlet[i];
            face[0] = v * cin - d * (c[0] - cin) / (0.5 * dx);
            for f in 1..n {
                face[f] = v * c[f - 1] - d * (c[f] - c[f - 1]) / dx;
            }
            face[n] = v * c[n - 1] - d * (c[n - 1] - c[n - 2]) / dx;
            fluxes.inflow[i] = face[0];
            fluxes.outflow[i] = face[n];
            let gsrc = &src.gas[i];
            for x in 0..n {
                let next = c[x] + dt * (-(face[x + 1] - face[x]) / dx + gsrc[x]);
                if next < fluxes.min_raw {
                    fluxes.min_raw = next;
                }
                c[x] = if next < 0.0 { 0.0 } else { next };
            }
        }

        for (th, s) in state.coverages.iter_mut().zip(&src.coverage) {
            for x in 0..n {
                th[x] += dt * s[x];
            }
        }
        for x in 0..n {
            let mut sum = 0.0;
            for th in state.coverages.iter_mut() {
                th[x] = th[x].clamp(0.0, 1.0);
                sum += th[x];
            }
            if sum > 0.0 {
                for th in state.coverages.iter_mut() {
                    th[x] /= sum;
                }
            }
        }
        for (m, s) in state.solid_mass.iter_mut().zip(&src.solid) {
            for x in 0..n {
                // etching stops at the substrate
                m[x] = (m[x] + dt * s[x]).max(0.0);
            }
        }

        let area = self.config.geometry.cross_section();
        for b in &self.config.bubblers {
            if state.controls.is_open(b.valve_id) {
                let ci = self.config.chemical_index(&b.chemical).expect("validated");
                *state.bubbler_consumption.entry(b.valve_id).or_insert(0.0) +=
                    dt * fluxes.inflow[ci].max(0.0) * area;
            }
        }
        state.time += dt;

        let finite = state
            .concentrations
            .iter()
            .chain(state.coverages.iter())
            .chain(state.solid_mass.iter())
            .all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(SolverError::Unstable {
                time: state.time,
                detail: "non-finite value in concentration, coverage or mass field".into(),
            });
        }
        Ok(fluxes)
    }

    /// Integrate from `state.time` to `target` in equal substeps.
    fn advance_to(
        &self,
        state: &mut ReactorState,
        target: f64,
        ctx: &mut SegmentContext,
        src: &mut SourceTerms,
        scale: f64,
        min_raw: &mut f64,
    ) -> Result<(), SolverError> {
        let span = target - state.time;
        if span <= TIME_EPS {
            state.time = state.time.max(target);
            return Ok(());
        }
        // Concentrations can rise above the inlet values transiently (gas
        // products), so the bound is refreshed on every call.
        ctx.dt_max = self.stable_dt_with(state, &ctx.flow, &ctx.inlet, &ctx.ks) * scale;
        let steps = if ctx.dt_max.is_finite() {
            (span / ctx.dt_max).ceil().max(1.0)
        } else {
            1.0
        };
        if !(steps.is_finite()) || steps > MAX_SUBSTEPS as f64 * (span / SAMPLE_PERIOD).max(1.0) {
            return Err(SolverError::Unstable {
                time: state.time,
                detail: format!("stable time step {:.3e} s is too small", ctx.dt_max),
            });
        }
        let steps = steps as usize;
        let dt = span / steps as f64;
        for _ in 0..steps {
            let f = self.step_with(state, dt, ctx, src)?;
            *min_raw = min_raw.min(f.min_raw);
        }
        state.time = target;
        Ok(())
    }

    /// Current sensor readings.
    pub fn sample(&self, state: &ReactorState) -> Result<SensorSample, SolverError> {
        let flow = self.flow(&state.controls)?;
        Ok(telemetry::sample(self, state, &flow))
    }

    /// Apply one segment's control action, then integrate for its duration,
    /// appending 0.1 s samples to `trace`.
    pub fn run_segment(
        &self,
        state: &mut ReactorState,
        segment: &SegmentSpec,
        trace: &mut TraceBundle,
        options: &RunOptions,
        snapshots: &mut Vec<FieldSnapshot>,
    ) -> Result<(), SolverError> {
        let mut min_raw = 0.0;
        self.run_segment_inner(state, segment, trace, options, snapshots, &mut min_raw)
    }

    fn run_segment_inner(
        &self,
        state: &mut ReactorState,
        segment: &SegmentSpec,
        trace: &mut TraceBundle,
        options: &RunOptions,
        snapshots: &mut Vec<FieldSnapshot>,
        min_raw: &mut f64,
    ) -> Result<(), SolverError> {
        state.controls.apply(&segment.line);
        let mut ctx = self.context(state)?;
        let mut src = SourceTerms::zeros(&self.network, self.sections());
        let start = state.time;
        let end = start + segment.duration;
        let scale = if options.time_step_scale > 0.0 { options.time_step_scale.min(1.0) } else { 1.0 };

        let first = telemetry::sample(self, state, &ctx.flow);
        let mut pmax = first.pressure.clone();
        let mut psum = first.pressure.clone();
        let mut readings = 1usize;
        let snapshot_every = options
            .snapshot_interval
            .filter(|s| *s > 0.0)
            .map(|s| ((s / SAMPLE_PERIOD).round() as u64).max(1));

        let mut record = StepRecord {
            index: segment.index,
            block: segment.block,
            cycle: segment.cycle,
            line: segment.line.clone(),
            start: start - trace.origin,
            end: start - trace.origin,
            open_valves: state.controls.open_valves(),
            reactor_temperature: state.controls.reactor_temperature,
            pressure_max: Vec::new(),
            pressure_mean: Vec::new(),
            qcm_start: first.qcm.clone(),
            qcm_end: first.qcm.clone(),
        };

        let result = (|| {
            let take = |state: &ReactorState,
                            trace: &mut TraceBundle,
                            sample: &SensorSample,
                            snapshots: &mut Vec<FieldSnapshot>| {
                if let Some(k) = snapshot_every {
                    if trace.next_tick % k == 0 {
                        snapshots.push(FieldSnapshot {
                            time: trace.next_tick as f64 * SAMPLE_PERIOD,
                            concentrations: state.concentrations.clone(),
                            coverages: state.coverages.clone(),
                            solid_mass: state.solid_mass.clone(),
                        });
                    }
                }
                trace.push(sample, &state.controls);
            };
            while trace.next_tick_time() <= start + TIME_EPS {
                take(state, trace, &first, snapshots);
            }
            while trace.next_tick_time() <= end + TIME_EPS {
                let target = trace.next_tick_time();
                self.advance_to(state, target, &mut ctx, &mut src, scale, min_raw)?;
                let s = telemetry::sample(self, state, &ctx.flow);
                for (i, p) in s.pressure.iter().enumerate() {
                    pmax[i] = pmax[i].max(*p);
                    psum[i] += p;
                }
                readings += 1;
                take(state, trace, &s, snapshots);
            }
            self.advance_to(state, end, &mut ctx, &mut src, scale, min_raw)?;
            Ok(())
        })();

        let last = telemetry::sample(self, state, &ctx.flow);
        if end - state.time > TIME_EPS || result.is_err() {
            // partial step: still report what happened so far
        } else if (trace.time.last().map(|t| t + trace.origin).unwrap_or(f64::NAN) - end).abs() > TIME_EPS {
            for (i, p) in last.pressure.iter().enumerate() {
                pmax[i] = pmax[i].max(*p);
                psum[i] += p;
            }
            readings += 1;
        }
        record.end = state.time - trace.origin;
        record.pressure_max = pmax;
        record.pressure_mean = psum.iter().map(|s| s / readings as f64).collect();
        record.qcm_end = last.qcm;
        trace.steps.push(record);
        result
    }

    /// Execute a recipe: validate, reset gas, run every expanded line.
    ///
    /// Hard validation failures are returned as `Err` before anything is
    /// integrated. Solver failures are reported in [`RecipeRun::failure`]
    /// alongside the partial trace.
    pub fn run_recipe(
        &self,
        state: &mut ReactorState,
        recipe: &Recipe,
        options: &RunOptions,
    ) -> Result<RecipeRun, ValidationReport> {
        let report = validate_recipe_from(recipe, &self.config, &state.controls);
        if !report.is_ok() {
            return Err(report);
        }
        state.clear_gas();
        let segments = expand(recipe, &state.controls);
        let origin = state.time;
        let mut trace = TraceBundle::new(&self.config, origin);
        let mut snapshots = Vec::new();
        let mut failure = None;
        let mut min_raw = 0.0;
        for seg in &segments {
            if let Err(e) =
                self.run_segment_inner(state, seg, &mut trace, options, &mut snapshots, &mut min_raw)
            {
                failure = Some(e);
                break;
            }
        }
        if segments.is_empty() && failure.is_none() {
            // an empty recipe still reports the reactor as it stands
            if let Ok(s) = self.sample(state) {
                trace.push(&s, &state.controls);
            }
        }
        Ok(RecipeRun {
            report,
            segments,
            elapsed: state.time - origin,
            trace,
            snapshots,
            failure,
            min_raw_concentration: min_raw,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{reference_config, ReferenceRun};
    use crate::recipe::{parse_recipe, Action};

    fn run2() -> Reactor {
        Reactor::new(reference_config(ReferenceRun::Run2))
    }

    #[test]
    fn closed_valves_zero_inlet() {
        let r = run2();
        let s = r.initial_state();
        assert!(r.apply_boundary(&s).unwrap().inlet.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn open_valve_inlet_concentration() {
        let r = run2();
        let mut s = r.initial_state();
        s.controls.apply(&RecipeLine::new(Action::Temperature, 1, 350.0, 0.0));
        s.controls.apply(&RecipeLine::new(Action::Valve, 1, 1.0, 0.0));
        let inlet = r.apply_boundary(&s).unwrap().inlet;
        let a = &r.config().chemicals[0];
        let expected = vapor_pressure(a.antoine.as_ref().unwrap(), 350.0).unwrap()
            / (GAS_CONSTANT * s.controls.reactor_temperature);
        assert_eq!(inlet[0], expected);
        assert!(inlet[1..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn codosing_gives_two_inlets() {
        let r = run2();
        let mut s = r.initial_state();
        s.controls.apply(&RecipeLine::new(Action::Valve, 2, 1.0, 0.0));
        s.controls.apply(&RecipeLine::new(Action::Valve, 3, 1.0, 0.0));
        let inlet = r.apply_boundary(&s).unwrap().inlet;
        assert!(inlet[1] > 0.0 && inlet[2] > 0.0);
    }

    #[test]
    fn empty_reactor_is_stationary() {
        let r = run2();
        let mut s = r.initial_state();
        let before = s.clone();
        let dt = r.stable_dt(&s).unwrap();
        for _ in 0..50 {
            r.step(&mut s, dt).unwrap();
        }
        assert!((s.time - 50.0 * dt).abs() < 1e-12);
        assert_eq!(s.concentrations, before.concentrations);
        assert_eq!(s.coverages, before.coverages);
        assert_eq!(s.solid_mass, before.solid_mass);
    }

    #[test]
    fn zero_duration_segment_samples_once() {
        let r = run2();
        let mut s = r.initial_state();
        let recipe = parse_recipe("1 V 2 1 0").unwrap();
        let seg = &expand(&recipe, &s.controls)[0];
        let mut trace = TraceBundle::new(r.config(), s.time);
        let mut snaps = Vec::new();
        r.run_segment(&mut s, seg, &mut trace, &RunOptions::default(), &mut snaps)
            .unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(s.time, 0.0);
        assert!(s.controls.is_open(2));
        assert_eq!(trace.valves[&2], vec![1]);
    }

    #[test]
    fn wait_only_recipe_is_flat() {
        let r = run2();
        let mut s = r.initial_state();
        let recipe = parse_recipe("1 M 1 50 5\n T 0 500 5").unwrap();
        let run = r.run_recipe(&mut s, &recipe, &RunOptions::default()).unwrap();
        assert!(run.failure.is_none());
        assert_eq!(run.trace.len(), 101);
        let baseline = run.trace.pressure[0][0];
        assert!(run.trace.pressure[0].iter().all(|&p| (p - baseline).abs() < 1e-9));
        assert!(run.trace.qcm[0].iter().all(|&m| m.abs() < 1e-12));
    }

    #[test]
    fn hard_violation_refused_before_integration() {
        let r = run2();
        let mut s = r.initial_state();
        let before = s.clone();
        let recipe = parse_recipe("1 T 0 750 10").unwrap();
        assert!(r.run_recipe(&mut s, &recipe, &RunOptions::default()).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn non_finite_vapor_pressure_aborts() {
        let mut cfg = reference_config(ReferenceRun::Run2);
        cfg.chemicals[1].antoine.as_mut().unwrap().a = 400.0;
        let r = Reactor::new(cfg);
        let mut s = r.initial_state();
        let recipe = parse_recipe("1 M 1 50 1\n V 2 1 1\n V 2 0 1").unwrap();
        let run = r.run_recipe(&mut s, &recipe, &RunOptions::default()).unwrap();
        assert!(run.failure.is_some());
        assert!(run.elapsed >= 1.0 - 1e-9 && run.elapsed < 3.0);
        assert!(!run.trace.is_empty());
    }

    #[test]
    fn snapshots_follow_cadence() {
        let r = run2();
        let mut s = r.initial_state();
        let recipe = parse_recipe("1 V 3 1 1\n V 3 0 2").unwrap();
        let opts = RunOptions {
            snapshot_interval: Some(0.5),
            ..Default::default()
        };
        let run = r.run_recipe(&mut s, &recipe, &opts).unwrap();
        assert_eq!(run.trace.len(), 31);
        assert_eq!(run.snapshots.len(), 7);
        assert!(run.snapshots.iter().any(|f| f.concentrations[2].iter().any(|&c| c > 0.0)));
    }
}
