//! Reactor description: geometry, pump, chemistry and sensors.
//!
//! A configuration is a single JSON document. Unknown keys are rejected and
//! every cross reference (chemical, surface, solid) is resolved at load time,
//! so a [`ReactorConfig`] that exists is always internally consistent.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::recipe::{Action, ControlState, Recipe};

/// Surface id that matches any surface in a reaction definition.
pub const WILDCARD_SURFACE: &str = "any";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactorGeometry {
    /// Tube length (m).
    pub length: f64,
    /// Tube inner diameter (m).
    pub diameter: f64,
    /// Number of axial sections.
    pub sections: usize,
    /// Upper bound used to check rate laws (K).
    pub wall_temperature_limit: f64,
}

impl ReactorGeometry {
    pub fn cross_section(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.diameter / 4.0
    }

    pub fn section_width(&self) -> f64 {
        self.length / self.sections as f64
    }

    /// Centre of section `i` measured from the inlet.
    pub fn section_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.section_width()
    }

    /// Section holding axial position `x`.
    pub fn section_at(&self, x: f64) -> usize {
        let idx = (x / self.length * self.sections as f64).floor();
        (idx.max(0.0) as usize).min(self.sections - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Antoine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChemicalSpec {
    pub name: String,
    /// kg/mol
    pub molar_mass: f64,
    /// m²/s
    pub diffusion_coefficient: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antoine: Option<Antoine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition_temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BubblerSpec {
    pub chemical: String,
    /// Initial bubbler temperature (K).
    pub temperature: f64,
    pub valve_id: u32,
    /// Highest temperature a recipe may set on this bubbler (K).
    pub temperature_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub name: String,
    /// Site density σ (mol/m²).
    pub site_density: f64,
    /// Mass of one adsorbed group per mole of sites (kg/mol).
    pub group_molar_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolidSpec {
    pub name: String,
    pub molar_mass: f64,
}

/// Temperature dependence of a rate coefficient, in m³/(mol·s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateLawSpec {
    Constant {
        k0: f64,
    },
    /// `prefactor · exp(-activation_energy / (k_B T))`, energy in eV.
    Arrhenius {
        prefactor: f64,
        activation_energy: f64,
    },
    /// Zero below `threshold`, `slope · (T - threshold)` at and above it.
    LinearAboveThreshold {
        threshold: f64,
        slope: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasProduct {
    pub chemical: String,
    #[serde(default = "one")]
    pub coefficient: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionSpec {
    #[serde(default)]
    pub name: String,
    pub gas_reactant: String,
    /// Surface id or [`WILDCARD_SURFACE`].
    pub surface_reactant: String,
    pub surface_product: String,
    #[serde(default)]
    pub gas_products: Vec<GasProduct>,
    /// Signed stoichiometry of the solid: positive deposits, negative etches.
    #[serde(default)]
    pub solid_delta: f64,
    /// Solid affected by `solid_delta`; defaults to the only solid defined.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solid: Option<String>,
    pub rate_law: RateLawSpec,
}

impl ReactionSpec {
    pub fn is_wildcard(&self) -> bool {
        self.surface_reactant == WILDCARD_SURFACE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Pressure,
    Qcm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub kind: SensorKind,
    /// Distance from the inlet (m).
    pub position: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSpec {
    /// S_nom (m³/s)
    pub nominal_speed: f64,
    /// p_min (Pa)
    pub base_pressure: f64,
    /// p_thresh (Pa)
    pub threshold_pressure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierGas {
    pub name: String,
    /// Dynamic viscosity μ (Pa·s).
    pub viscosity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfcSpec {
    pub id: u32,
    /// Allowed setting range (sccm).
    pub min_flow: f64,
    pub max_flow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditions {
    pub reactor_temperature: f64,
    pub mfc_flow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactorConfig {
    pub geometry: ReactorGeometry,
    pub pump: PumpSpec,
    pub carrier_gas: CarrierGas,
    pub mfc: MfcSpec,
    pub chemicals: Vec<ChemicalSpec>,
    pub bubblers: Vec<BubblerSpec>,
    pub surfaces: Vec<SurfaceSpec>,
    pub solids: Vec<SolidSpec>,
    pub reactions: Vec<ReactionSpec>,
    pub sensors: Vec<SensorSpec>,
    pub initial_surface: String,
    pub initial_conditions: InitialConditions,
    /// Pressure above which the narrative warns (Pa).
    pub soft_pressure_limit: f64,
    /// Highest reactor temperature a recipe may set (K).
    pub hard_temperature_limit: f64,
}

/// Which built-in reference configuration to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceRun {
    Run1,
    Run2,
}

impl std::str::FromStr for ReferenceRun {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "run1" => Ok(ReferenceRun::Run1),
            "run2" => Ok(ReferenceRun::Run2),
            other => Err(format!("unknown reference config '{other}' (expected run1 or run2)")),
        }
    }
}

impl ReferenceRun {
    pub fn id(self) -> &'static str {
        match self {
            ReferenceRun::Run1 => "run1",
            ReferenceRun::Run2 => "run2",
        }
    }

    /// The raw JSON document shipped with the crate.
    pub fn document(self) -> &'static str {
        match self {
            ReferenceRun::Run1 => include_str!("../configs/run1.json"),
            ReferenceRun::Run2 => include_str!("../configs/run2.json"),
        }
    }
}

/// Parse and validate a configuration document.
pub fn load_config(text: &str) -> Result<ReactorConfig, ConfigError> {
    if text.trim().is_empty() {
        return Err(ConfigError::Schema("empty document".into()));
    }
    let config: ReactorConfig =
        serde_json::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Built-in reference configuration.
pub fn reference_config(run: ReferenceRun) -> ReactorConfig {
    load_config(run.document()).expect("embedded reference config is valid")
}

impl ReactorConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn chemical_index(&self, name: &str) -> Option<usize> {
        self.chemicals.iter().position(|c| c.name == name)
    }

    pub fn surface_index(&self, name: &str) -> Option<usize> {
        self.surfaces.iter().position(|s| s.name == name)
    }

    pub fn solid_index(&self, name: &str) -> Option<usize> {
        self.solids.iter().position(|s| s.name == name)
    }

    pub fn bubbler_for_valve(&self, valve: u32) -> Option<&BubblerSpec> {
        self.bubblers.iter().find(|b| b.valve_id == valve)
    }

    /// Control state of a freshly initialised reactor: valves closed,
    /// bubblers at their configured temperatures.
    pub fn initial_controls(&self) -> ControlState {
        ControlState {
            valves: self.bubblers.iter().map(|b| (b.valve_id, false)).collect(),
            mfc_flow: self.initial_conditions.mfc_flow,
            reactor_temperature: self.initial_conditions.reactor_temperature,
            bubbler_temperatures: self
                .bubblers
                .iter()
                .map(|b| (b.valve_id, b.temperature))
                .collect(),
        }
    }

    /// Check every invariant of the description.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let phys = |msg: String| Err(ConfigError::Physics(msg));
        let g = &self.geometry;
        if !(g.length > 0.0) || !(g.diameter > 0.0) {
            return phys("geometry length and diameter must be positive".into());
        }
        if g.sections < 3 {
            return phys(format!("need at least 3 sections, got {}", g.sections));
        }
        if !(g.wall_temperature_limit > 0.0) {
            return phys("wall temperature limit must be positive".into());
        }
        let p = &self.pump;
        if !(p.nominal_speed > 0.0) {
            return phys("pump nominal speed must be positive".into());
        }
        if !(p.base_pressure >= 0.0) || !(p.base_pressure < p.threshold_pressure) {
            return phys(format!(
                "pump base pressure ({}) must be nonnegative and below threshold ({})",
                p.base_pressure, p.threshold_pressure
            ));
        }
        if !(self.carrier_gas.viscosity >= 0.0) {
            return phys("carrier viscosity must be nonnegative".into());
        }
        if !(self.mfc.min_flow >= 0.0) || !(self.mfc.min_flow <= self.mfc.max_flow) {
            return phys("MFC range must satisfy 0 <= min <= max".into());
        }

        unique_names("chemical", self.chemicals.iter().map(|c| c.name.as_str()))?;
        unique_names("surface", self.surfaces.iter().map(|s| s.name.as_str()))?;
        unique_names("solid", self.solids.iter().map(|s| s.name.as_str()))?;

        for c in &self.chemicals {
            if !(c.molar_mass > 0.0) {
                return phys(format!("chemical {} needs a positive molar mass", c.name));
            }
            if !(c.diffusion_coefficient > 0.0) {
                return phys(format!(
                    "chemical {} needs a positive diffusion coefficient",
                    c.name
                ));
            }
            if let Some(a) = c.antoine {
                if !(a.a.is_finite() && a.b.is_finite() && a.c.is_finite()) {
                    return phys(format!("chemical {} has non-finite Antoine coefficients", c.name));
                }
            }
        }
        for s in &self.surfaces {
            if !(s.site_density > 0.0) {
                return phys(format!("surface {} needs a positive site density", s.name));
            }
            if !(s.group_molar_mass >= 0.0) {
                return phys(format!("surface {} has a negative group mass", s.name));
            }
        }
        for s in &self.solids {
            if !(s.molar_mass > 0.0) {
                return phys(format!("solid {} needs a positive molar mass", s.name));
            }
        }

        let mut valves = BTreeSet::new();
        for b in &self.bubblers {
            let chem = self
                .chemicals
                .iter()
                .find(|c| c.name == b.chemical)
                .ok_or_else(|| reference("chemical", &b.chemical))?;
            if chem.antoine.is_none() {
                return phys(format!(
                    "bubbler chemical {} has no Antoine coefficients",
                    chem.name
                ));
            }
            if !valves.insert(b.valve_id) {
                return Err(ConfigError::Schema(format!(
                    "valve id {} is used by more than one bubbler",
                    b.valve_id
                )));
            }
            if !(b.temperature > 0.0) || !(b.temperature_limit >= b.temperature) {
                return phys(format!(
                    "bubbler on valve {} needs 0 < temperature <= temperature_limit",
                    b.valve_id
                ));
            }
        }

        for (i, r) in self.reactions.iter().enumerate() {
            let label = if r.name.is_empty() { format!("#{i}") } else { r.name.clone() };
            self.chemical_index(&r.gas_reactant)
                .ok_or_else(|| reference("chemical", &r.gas_reactant))?;
            if !r.is_wildcard() {
                self.surface_index(&r.surface_reactant)
                    .ok_or_else(|| reference("surface", &r.surface_reactant))?;
            }
            self.surface_index(&r.surface_product)
                .ok_or_else(|| reference("surface", &r.surface_product))?;
            for gp in &r.gas_products {
                self.chemical_index(&gp.chemical)
                    .ok_or_else(|| reference("chemical", &gp.chemical))?;
                if !gp.coefficient.is_finite() || gp.coefficient < 0.0 {
                    return phys(format!("reaction {label}: product coefficient must be finite and >= 0"));
                }
            }
            if !r.solid_delta.is_finite() {
                return phys(format!("reaction {label}: solid coefficient must be finite"));
            }
            if r.solid_delta != 0.0 {
                match &r.solid {
                    Some(name) => {
                        self.solid_index(name).ok_or_else(|| reference("solid", name))?;
                    }
                    None if self.solids.len() == 1 => {}
                    None => {
                        return Err(ConfigError::Schema(format!(
                            "reaction {label}: 'solid' is required when several solids are defined"
                        )))
                    }
                }
            }
            check_rate_law(&label, &r.rate_law, g.wall_temperature_limit)?;
        }

        for s in &self.sensors {
            if !(s.position >= 0.0 && s.position <= g.length) {
                return phys(format!(
                    "sensor position {} outside the tube [0, {}]",
                    s.position, g.length
                ));
            }
        }
        self.surface_index(&self.initial_surface)
            .ok_or_else(|| reference("surface", &self.initial_surface))?;
        let ic = &self.initial_conditions;
        if !(ic.reactor_temperature > 0.0) {
            return phys("initial reactor temperature must be positive".into());
        }
        if !(ic.mfc_flow >= self.mfc.min_flow && ic.mfc_flow <= self.mfc.max_flow) {
            return phys("initial MFC flow outside the MFC range".into());
        }
        if !(self.soft_pressure_limit > 0.0) || !(self.hard_temperature_limit > 0.0) {
            return phys("safety limits must be positive".into());
        }
        Ok(())
    }
}

fn reference(kind: &'static str, id: &str) -> ConfigError {
    ConfigError::Reference {
        kind,
        id: id.to_string(),
    }
}

fn unique_names<'a>(kind: &str, names: impl Iterator<Item = &'a str>) -> Result<(), ConfigError> {
    let mut seen = BTreeSet::new();
    for n in names {
        if n == WILDCARD_SURFACE {
            return Err(ConfigError::Schema(format!("'{n}' is reserved and cannot name a {kind}")));
        }
        if !seen.insert(n) {
            return Err(ConfigError::Schema(format!("duplicate {kind} name '{n}'")));
        }
    }
    Ok(())
}

fn check_rate_law(label: &str, law: &RateLawSpec, t_max: f64) -> Result<(), ConfigError> {
    // Each form is monotone in its parameters, so sign checks cover [0, t_max].
    let ok = match *law {
        RateLawSpec::Constant { k0 } => k0.is_finite() && k0 >= 0.0,
        RateLawSpec::Arrhenius {
            prefactor,
            activation_energy,
        } => prefactor.is_finite() && prefactor >= 0.0 && activation_energy.is_finite(),
        RateLawSpec::LinearAboveThreshold { threshold, slope } => {
            threshold.is_finite() && slope.is_finite() && slope >= 0.0 && threshold <= t_max + 1e9
        }
    };
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Physics(format!(
            "reaction {label}: rate law would be negative or non-finite on [0, {t_max}] K"
        )))
    }
}

/// Outcome of checking a recipe against a reactor description.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Violations that block execution.
    pub hard: Vec<String>,
    /// Warnings that are reported but do not block execution.
    pub soft: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.hard.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.hard.is_empty() && self.soft.is_empty()
    }
}

/// Check a recipe starting from the configuration's initial controls.
pub fn validate_recipe_against_config(recipe: &Recipe, config: &ReactorConfig) -> ValidationReport {
    validate_recipe_from(recipe, config, &config.initial_controls())
}

/// Check a recipe starting from an arbitrary control state (a reactor that
/// already ran other recipes may have valves open or heaters on).
pub fn validate_recipe_from(
    recipe: &Recipe,
    config: &ReactorConfig,
    start: &ControlState,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut soft = BTreeSet::new();
    let mut controls = start.clone();
    let mut step = 0usize;
    for (block_idx, block) in recipe.blocks.iter().enumerate() {
        for cycle in 0..block.cycles {
            for line in &block.lines {
                step += 1;
                // Static properties of a line are reported once, on the first cycle.
                let first = cycle == 0;
                match line.action {
                    Action::Mfc => {
                        if line.component != config.mfc.id {
                            if first {
                                report.hard.push(format!(
                                    "block {}, step {step}: unknown MFC id {}",
                                    block_idx + 1,
                                    line.component
                                ));
                            }
                        } else if !(line.setting >= config.mfc.min_flow
                            && line.setting <= config.mfc.max_flow)
                        {
                            if first {
                                report.hard.push(format!(
                                    "block {}, step {step}: MFC setting {} sccm outside {}-{} sccm",
                                    block_idx + 1,
                                    line.setting,
                                    config.mfc.min_flow,
                                    config.mfc.max_flow
                                ));
                            }
                        }
                    }
                    Action::Valve => {
                        if config.bubbler_for_valve(line.component).is_none() && first {
                            report.hard.push(format!(
                                "block {}, step {step}: unknown valve id {}",
                                block_idx + 1,
                                line.component
                            ));
                        }
                    }
                    Action::Temperature => {
                        if line.component == 0 {
                            if line.setting > config.hard_temperature_limit && first {
                                report.hard.push(format!(
                                    "block {}, step {step}: reactor temperature {} K exceeds limit {} K",
                                    block_idx + 1,
                                    line.setting,
                                    config.hard_temperature_limit
                                ));
                            }
                        } else {
                            match config.bubbler_for_valve(line.component) {
                                None if first => report.hard.push(format!(
                                    "block {}, step {step}: unknown temperature controller {}",
                                    block_idx + 1,
                                    line.component
                                )),
                                Some(b) if line.setting > b.temperature_limit && first => {
                                    report.hard.push(format!(
                                        "block {}, step {step}: bubbler {} temperature {} K exceeds limit {} K",
                                        block_idx + 1,
                                        line.component,
                                        line.setting,
                                        b.temperature_limit
                                    ))
                                }
                                _ => {}
                            }
                        }
                        if !(line.setting > 0.0) && first {
                            report.hard.push(format!(
                                "block {}, step {step}: temperature must be positive",
                                block_idx + 1
                            ));
                        }
                    }
                }
                controls.apply(line);
                let open = controls.open_valves();
                if open.len() >= 2 {
                    let ids: Vec<String> = open.iter().map(|v| v.to_string()).collect();
                    soft.insert(format!(
                        "co-dosing: valves {} open simultaneously",
                        ids.join(" and ")
                    ));
                }
                for chem in &config.chemicals {
                    if let Some(td) = chem.decomposition_temperature {
                        if controls.reactor_temperature > td {
                            soft.insert(format!(
                                "reactor temperature {} K above decomposition temperature of {} ({} K)",
                                controls.reactor_temperature, chem.name, td
                            ));
                        }
                    }
                }
            }
        }
    }
    report.soft = soft.into_iter().collect();
    report
}

/// Compare two configs and list the top-level entries that differ, keyed by
/// `section/name`.
pub fn config_diff(a: &ReactorConfig, b: &ReactorConfig) -> Vec<String> {
    let flat = |c: &ReactorConfig| -> BTreeMap<String, serde_json::Value> {
        let mut m = BTreeMap::new();
        let v = serde_json::to_value(c).expect("config serializes");
        if let serde_json::Value::Object(obj) = v {
            for (k, v) in obj {
                match v {
                    serde_json::Value::Array(items) => {
                        for (i, item) in items.into_iter().enumerate() {
                            let key = item
                                .get("name")
                                .and_then(|n| n.as_str())
                                .filter(|n| !n.is_empty())
                                .map(str::to_string)
                                .unwrap_or_else(|| i.to_string());
                            m.insert(format!("{k}/{key}"), item);
                        }
                    }
                    other => {
                        m.insert(k, other);
                    }
                }
            }
        }
        m
    };
    let fa = flat(a);
    let fb = flat(b);
    let keys: BTreeSet<&String> = fa.keys().chain(fb.keys()).collect();
    keys.into_iter()
        .filter(|k| fa.get(*k) != fb.get(*k))
        .cloned()
        .collect()
}
