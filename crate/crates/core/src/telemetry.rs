//! Sensor readings, trace export and the plain-text run narrative.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::{ReactorConfig, ValidationReport};
use crate::flow::FlowState;
use crate::recipe::Action;
use crate::transport::{FieldSnapshot, Reactor, ReactorState, TraceBundle, GAS_CONSTANT};

/// Changes below this (ng/cm²) are reported as no change.
pub const MASS_EPSILON: f64 = 0.1;

/// One reading of every sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    /// Pa per pressure sensor.
    pub pressure: Vec<f64>,
    /// ng/cm² per QCM.
    pub qcm: Vec<f64>,
}

/// g/m² to ng/cm².
pub fn qcm_convert(grams_per_m2: f64) -> f64 {
    grams_per_m2 * 1e5
}

/// Read every sensor: total pressure is the carrier profile plus the
/// partial pressures of all gas species; the QCM reports areal mass
/// relative to its reference.
pub fn sample(reactor: &Reactor, state: &ReactorState, flow: &FlowState) -> SensorSample {
    let t = state.controls.reactor_temperature;
    let pressure = reactor
        .pressure_sections()
        .iter()
        .map(|&x| {
            let partial: f64 = state.concentrations.iter().map(|c| c[x]).sum::<f64>() * GAS_CONSTANT * t;
            flow.pressure_profile[x] + partial
        })
        .collect();
    let qcm = reactor
        .qcm_sections()
        .iter()
        .zip(&state.qcm_reference)
        .map(|(&x, &r)| qcm_convert((reactor.areal_mass(state, x) - r) * 1e3))
        .collect();
    SensorSample { pressure, qcm }
}

/// Round to `digits` significant figures and print without exponent.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = digits as i32 - 1 - mag;
    if decimals > 0 {
        format!("{:.*}", decimals as usize, x)
    } else {
        let scale = 10f64.powi(-decimals);
        format!("{:.0}", (x / scale).round() * scale)
    }
}

/// Seconds to at most three significant digits, without trailing zeros.
pub fn format_duration(seconds: f64) -> String {
    let s = format_significant(seconds, 3);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Tab-separated sensor and setpoint series, one row per sample.
pub fn trace_to_tsv(trace: &TraceBundle) -> String {
    let mut out = String::from("time");
    for p in &trace.pressure_positions {
        let _ = write!(out, "\tpressure@{p}");
    }
    for p in &trace.qcm_positions {
        let _ = write!(out, "\tqcm@{p}");
    }
    out.push_str("\tmfc\treactor_temperature");
    for id in trace.valves.keys() {
        let _ = write!(out, "\tvalve{id}");
    }
    for id in trace.bubbler_temperatures.keys() {
        let _ = write!(out, "\tbubbler{id}_temperature");
    }
    out.push('\n');
    for i in 0..trace.len() {
        let _ = write!(out, "{:.1}", trace.time[i]);
        for s in &trace.pressure {
            let _ = write!(out, "\t{:.6}", s[i]);
        }
        for s in &trace.qcm {
            let _ = write!(out, "\t{:.6}", s[i]);
        }
        let _ = write!(out, "\t{}\t{}", trace.mfc_flow[i], trace.reactor_temperature[i]);
        for s in trace.valves.values() {
            let _ = write!(out, "\t{}", s[i]);
        }
        for s in trace.bubbler_temperatures.values() {
            let _ = write!(out, "\t{}", s[i]);
        }
        out.push('\n');
    }
    out
}

/// Long-format snapshot table: time, field kind, species, section, section
/// centre (m), value.
pub fn fields_to_tsv(snapshots: &[FieldSnapshot], config: &ReactorConfig) -> String {
    let mut out = String::from("time\tfield\tspecies\tsection\tx\tvalue\n");
    for snap in snapshots {
        let groups = [
            ("concentration", &snap.concentrations, config.chemicals.iter().map(|c| c.name.as_str()).collect::<Vec<_>>()),
            ("coverage", &snap.coverages, config.surfaces.iter().map(|c| c.name.as_str()).collect()),
            ("solid_mass", &snap.solid_mass, config.solids.iter().map(|c| c.name.as_str()).collect()),
        ];
        for (kind, field, names) in groups {
            for (values, name) in field.iter().zip(names) {
                for (i, v) in values.iter().enumerate() {
                    let x = config.geometry.section_center(i);
                    let _ = writeln!(out, "{:.1}\t{kind}\t{name}\t{i}\t{x}\t{v:e}", snap.time);
                }
            }
        }
    }
    out
}

/// A run told as prose: a header with totals and warnings, then one line
/// per executed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Narrative {
    pub header: Vec<String>,
    pub steps: Vec<String>,
}

impl Narrative {
    pub fn text(&self) -> String {
        let mut out = self.header.join("\n");
        out.push_str("\n\n");
        for s in &self.steps {
            out.push_str(s);
            out.push('\n');
        }
        out
    }
}

fn chemical_label(config: &ReactorConfig, valve: u32) -> String {
    config
        .bubbler_for_valve(valve)
        .map(|b| format!("valve {valve} ({})", b.chemical))
        .unwrap_or_else(|| format!("valve {valve}"))
}

fn mass_phrase(delta: f64) -> String {
    if delta.abs() < MASS_EPSILON {
        "no measurable mass change".into()
    } else if delta > 0.0 {
        format!("mass increased by {} ng/cm²", format_significant(delta, 2))
    } else {
        format!("mass decreased by {} ng/cm²", format_significant(-delta, 2))
    }
}

/// Describe a finished run. `aborted` marks a partial trace.
pub fn build_narrative(
    trace: &TraceBundle,
    config: &ReactorConfig,
    report: &ValidationReport,
    aborted: Option<&str>,
) -> Narrative {
    let duration = trace.steps.last().map_or(0.0, |s| s.end);
    let net = trace.qcm.first().and_then(|q| q.last()).copied().unwrap_or(0.0)
        - trace.qcm.first().and_then(|q| q.first()).copied().unwrap_or(0.0);
    let peak = trace
        .pressure
        .first()
        .map(|p| p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .filter(|p| p.is_finite());

    let mut header = vec![format!(
        "Ran {} steps over {} s; {}.",
        trace.steps.len(),
        format_duration(duration),
        mass_phrase(net).replacen("mass", "net mass", 1)
    )];
    if let Some(p) = peak {
        header.push(format!("Peak pressure {} Pa.", format_significant(p, 3)));
        if p > config.soft_pressure_limit {
            header.push(format!(
                "Warning: pressure exceeded the {} Pa limit.",
                format_significant(config.soft_pressure_limit, 3)
            ));
        }
    }
    for w in &report.soft {
        header.push(format!("Warning: {w}."));
    }
    if let Some(reason) = aborted {
        header.push(format!("Run aborted: {reason}."));
    }

    let mut steps = Vec::with_capacity(trace.steps.len());
    for rec in &trace.steps {
        let mut s = format!("Step {} (block {}, cycle {}): ", rec.index + 1, rec.block + 1, rec.cycle + 1);
        let line = &rec.line;
        let action = match line.action {
            Action::Valve if line.setting >= 0.5 => format!("open {}", chemical_label(config, line.component)),
            Action::Valve => format!("close {}", chemical_label(config, line.component)),
            _ => line.describe(),
        };
        s.push_str(&action);
        let _ = write!(s, ", wait {} s.", format_duration(rec.duration()));
        if let (Some(max), Some(mean)) = (rec.pressure_max.first(), rec.pressure_mean.first()) {
            let _ = write!(
                s,
                " Pressure peaked at {} Pa (mean {} Pa).",
                format_significant(*max, 3),
                format_significant(*mean, 3)
            );
        }
        if !rec.qcm_start.is_empty() {
            let phrase = mass_phrase(rec.qcm_change(0));
            let mut chars = phrase.chars();
            let cap: String = chars.next().map(|c| c.to_uppercase().chain(chars).collect()).unwrap_or_default();
            let _ = write!(s, " {cap}.");
        }
        steps.push(s);
    }
    Narrative { header, steps }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qcm_units() {
        assert_eq!(qcm_convert(0.0), 0.0);
        assert!((qcm_convert(1e-5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(24.49, 2), "24");
        assert_eq!(format_significant(0.1234, 2), "0.12");
        assert_eq!(format_significant(133.24, 3), "133");
        assert_eq!(format_significant(1234.0, 2), "1200");
        assert_eq!(format_significant(-2.06, 2), "-2.1");
        assert_eq!(format_significant(0.0, 2), "0");
        assert_eq!(format_duration(10.000000001), "10");
        assert_eq!(format_duration(0.5), "0.5");
    }

    #[test]
    fn mass_phrases() {
        assert_eq!(mass_phrase(0.05), "no measurable mass change");
        assert_eq!(mass_phrase(24.4), "mass increased by 24 ng/cm²");
        assert_eq!(mass_phrase(-26.5), "mass decreased by 27 ng/cm²");
    }
}
