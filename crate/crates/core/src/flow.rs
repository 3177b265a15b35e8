//! Carrier flow: pump and MFC displacement, the pressure they settle at,
//! the axial pressure drop and the resulting gas velocity. Also bubbler
//! vapour pressure.

use serde::{Deserialize, Serialize};

use crate::config::{Antoine, PumpSpec, ReactorGeometry};
use crate::error::FlowError;

pub const STANDARD_PRESSURE: f64 = 101_325.0;
pub const STANDARD_TEMPERATURE: f64 = 273.15;

/// Convert sccm to standard m³/s (1 sccm = 1e-6 m³/min at 273.15 K, 101325 Pa).
pub fn sccm_to_m3s(flow: f64) -> f64 {
    flow * 1e-6 / 60.0
}

/// Pump speed (m³/s) at pressure `p`: nominal above threshold, linear ramp
/// down to zero at base pressure, zero below.
pub fn pump_speed(p: f64, pump: &PumpSpec) -> f64 {
    if p > pump.threshold_pressure {
        pump.nominal_speed
    } else if p <= pump.base_pressure {
        0.0
    } else {
        pump.nominal_speed * (p - pump.base_pressure) / (pump.threshold_pressure - pump.base_pressure)
    }
}

/// Volume per second displaced by the MFC at reactor conditions (m³/s).
pub fn mfc_displacement(flow: f64, temperature: f64, p: f64) -> Result<f64, FlowError> {
    if !(p > 0.0) {
        return Err(FlowError::NonPositivePressure(p));
    }
    Ok(throughput(flow, temperature) / p)
}

/// `f·T·101325/273.15` in Pa·m³/s; displacement is this divided by pressure.
fn throughput(flow: f64, temperature: f64) -> f64 {
    sccm_to_m3s(flow) * temperature * STANDARD_PRESSURE / STANDARD_TEMPERATURE
}

/// Pressure at which pump speed and MFC displacement balance.
///
/// Above the threshold the balance has the closed form `K / S_nom`.
/// Otherwise the root of `S_nom (p - p_min) p = K (p_thresh - p_min)` is
/// located by bisection on `[p_min, p_thresh]`.
pub fn equilibrium_inlet_pressure(
    flow: f64,
    temperature: f64,
    pump: &PumpSpec,
) -> Result<f64, FlowError> {
    let k = throughput(flow, temperature);
    if k <= 0.0 {
        return Ok(pump.base_pressure);
    }
    let closed = k / pump.nominal_speed;
    if closed > pump.threshold_pressure {
        return Ok(closed);
    }
    let residual = |p: f64| pump_speed(p, pump) * p - k;
    let mut lo = pump.base_pressure;
    let mut hi = pump.threshold_pressure;
    if residual(hi) < 0.0 {
        return Err(FlowError::NoRoot {
            flow,
            p_min: pump.base_pressure,
        });
    }
    // residual is monotone increasing on [p_min, p_thresh]
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 && hi <= 0.0 {
        return Err(FlowError::NoRoot {
            flow,
            p_min: pump.base_pressure,
        });
    }
    Ok(hi)
}

/// Hagen–Poiseuille gradient dp/dx (Pa/m) for a volumetric flow at reactor conditions.
pub fn pressure_gradient(volumetric_flow: f64, viscosity: f64, geometry: &ReactorGeometry) -> f64 {
    let area = geometry.cross_section();
    -8.0 * std::f64::consts::PI * viscosity * volumetric_flow / (area * area)
}

/// Carrier pressure at each section centre.
///
/// `pump_pressure` is the equilibrium pressure at the pump, i.e. at the
/// tube outlet; the profile rises linearly towards the valves.
pub fn pressure_drop_profile(
    flow: f64,
    temperature: f64,
    pump_pressure: f64,
    geometry: &ReactorGeometry,
    viscosity: f64,
) -> Result<Vec<f64>, FlowError> {
    let q = mfc_displacement(flow, temperature, pump_pressure)?;
    let slope = pressure_gradient(q, viscosity, geometry);
    Ok((0..geometry.sections)
        .map(|i| pump_pressure - slope * (geometry.length - geometry.section_center(i)))
        .collect())
}

/// Axial carrier velocity (m/s).
pub fn carrier_velocity(
    flow: f64,
    temperature: f64,
    p: f64,
    geometry: &ReactorGeometry,
) -> Result<f64, FlowError> {
    Ok(mfc_displacement(flow, temperature, p)? / geometry.cross_section())
}

/// Antoine vapour pressure, `10^(A - B/(C + T))` in Pa with T in K.
pub fn vapor_pressure(antoine: &Antoine, temperature: f64) -> Result<f64, FlowError> {
    let denom = antoine.c + temperature;
    if !(denom > 0.0) {
        return Err(FlowError::SingularAntoine(denom));
    }
    Ok(10f64.powf(antoine.a - antoine.b / denom))
}

/// Carrier flow conditions for one set of controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub mfc_flow: f64,
    pub reactor_temperature: f64,
    /// Equilibrium pressure at the pump (Pa).
    pub inlet_pressure: f64,
    pub axial_velocity: f64,
    pub pressure_profile: Vec<f64>,
}

impl FlowState {
    pub fn compute(
        flow: f64,
        temperature: f64,
        pump: &PumpSpec,
        geometry: &ReactorGeometry,
        viscosity: f64,
    ) -> Result<FlowState, FlowError> {
        let p = equilibrium_inlet_pressure(flow, temperature, pump)?;
        // Zero flow at zero base pressure leaves the tube evacuated and still.
        let (v, profile) = if p > 0.0 {
            (
                carrier_velocity(flow, temperature, p, geometry)?,
                pressure_drop_profile(flow, temperature, p, geometry, viscosity)?,
            )
        } else {
            (0.0, vec![0.0; geometry.sections])
        };
        Ok(FlowState {
            mfc_flow: flow,
            reactor_temperature: temperature,
            inlet_pressure: p,
            axial_velocity: v,
            pressure_profile: profile,
        })
    }
}
